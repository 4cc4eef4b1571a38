#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dyadic/grid_function.hpp"

namespace dyadic {

// The continuum weight characteristics take suprema over all cubes of R^d;
// here they are finitized to
// either the shift-0 dyadic grid or every axis-aligned cube with corners on
// the finest cell lattice.  The latter is cost-guarded.
enum class CubeScope { DyadicGrid, AllLatticeAligned };

struct ConstantResult {
    double value = 0.0;
    std::string argmax;       // cube text (dyadic) or box text (lattice scope)
    std::int64_t node = -1;   // dyadic node id when the scope is the dyadic grid
};

namespace detail {

inline std::int64_t lattice_cube_count(const Domain& dom) {
    std::int64_t n = dom.cells_per_side(), total = 0;
    for (std::int64_t s = 1; s <= n; ++s) {
        std::int64_t per_axis = n - s + 1, c = 1;
        for (int i = 0; i < dom.dim; ++i) c *= per_axis;
        total += c;
    }
    return total;
}

inline void require_all_scope(const Domain& dom) {
    if (dom.dim != 1 && dom.max_level > 4)
        throw std::domain_error("all-lattice-aligned scope permitted only for d=1 or L<=4");
}

inline void require_all_scope_fw(const Domain& dom) {
    require_all_scope(dom);
    if (lattice_cube_count(dom) > 2500)
        throw std::domain_error("all-lattice-aligned FW constants guarded to <=2500 lattice cubes");
}

inline std::string box_text(const Domain& dom, const std::array<std::int64_t, kMaxDim>& lo,
                            const std::array<std::int64_t, kMaxDim>& hi) {
    std::ostringstream os;
    os << "box[";
    for (int i = 0; i < dom.dim; ++i) os << (i ? "x" : "") << lo[i] << ":" << hi[i];
    os << "]/" << dom.cells_per_side();
    return os.str();
}

template <typename Fn>
void for_each_lattice_box(const Domain& dom, Fn&& fn) {
    std::int64_t n = dom.cells_per_side();
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (std::int64_t s = 1; s <= n; ++s) {
        std::array<std::int64_t, kMaxDim> pos{};
        while (true) {
            for (int i = 0; i < dom.dim; ++i) {
                lo[i] = pos[i];
                hi[i] = pos[i] + s;
            }
            fn(lo, hi);
            int i = dom.dim - 1;
            while (i >= 0) {
                if (++pos[i] <= n - s) break;
                pos[i] = 0;
                --i;
            }
            if (i < 0) break;
        }
    }
}

inline double box_cells(const Domain& dom, const std::array<std::int64_t, kMaxDim>& lo,
                        const std::array<std::int64_t, kMaxDim>& hi) {
    double c = 1.0;
    for (int i = 0; i < dom.dim; ++i) c *= static_cast<double>(hi[i] - lo[i]);
    return c;
}

// <g>_{r,box} for r in (0,inf], prefix-accelerated for finite r
inline double box_pow_mean(const GridFunction& g, double r, const std::array<std::int64_t, kMaxDim>& lo,
                           const std::array<std::int64_t, kMaxDim>& hi) {
    if (r == kInf) return g.box_max(lo, hi);
    double cells = box_cells(g.domain(), lo, hi);
    return std::pow(g.box_pow_sum(r, lo, hi) / cells, 1.0 / r);
}

}  // namespace detail

// Scope-wide supremum of a per-box term.  The term callback receives the cell
// box; for dyadic scope boxes are exactly the dyadic cubes.
template <typename Term>
ConstantResult sup_over_scope(const Domain& dom, CubeScope scope, Term&& term) {
    ConstantResult best;
    if (scope == CubeScope::DyadicGrid) {
        DyadicTree tree(dom);
        std::array<std::int64_t, kMaxDim> lo{}, hi{};
        for (std::int64_t node = 0; node < tree.node_count(); ++node) {
            tree.cell_box(node, lo, hi);
            double v = term(lo, hi);
            if (v > best.value) {
                best.value = v;
                best.node = node;
                best.argmax = tree.cube_of(node).text();
            }
        }
    } else {
        detail::require_all_scope(dom);
        detail::for_each_lattice_box(dom, [&](const auto& lo, const auto& hi) {
            double v = term(lo, hi);
            if (v > best.value) {
                best.value = v;
                best.node = -1;
                best.argmax = detail::box_text(dom, lo, hi);
            }
        });
    }
    return best;
}

// Muckenhoupt A_p: sup_Q <w>_{1,Q} <w^{1-p'}>_{1,Q}^{p-1} for p > 1, and
// sup_Q <w>_{1,Q} <w^{-1}>_{inf,Q} for p = 1.
inline ConstantResult ap_constant(const GridFunction& w, double p, CubeScope scope) {
    if (p < 1.0) throw std::invalid_argument("ap_constant: p must be >= 1");
    if (p == 1.0) {
        return sup_over_scope(w.domain(), scope, [&](const auto& lo, const auto& hi) {
            double cells = detail::box_cells(w.domain(), lo, hi);
            return (w.box_pow_sum(1.0, lo, hi) / cells) / w.box_min(lo, hi);
        });
    }
    double dual = 1.0 - holder_conjugate(p);
    return sup_over_scope(w.domain(), scope, [&](const auto& lo, const auto& hi) {
        double cells = detail::box_cells(w.domain(), lo, hi);
        double a = w.box_pow_sum(1.0, lo, hi) / cells;
        double b = w.box_pow_sum(dual, lo, hi) / cells;
        return a * std::pow(b, p - 1.0);
    });
}

// Weights w_j with the derived product w, v := w^p and duals v_j := w_j^{-p_j'}.
class WeightTuple {
  public:
    WeightTuple(std::vector<GridFunction> ws, const ExponentTuple& pv) : w_(std::move(ws)), pv_(pv) {
        if (static_cast<int>(w_.size()) != pv.m()) throw std::invalid_argument("WeightTuple: m mismatch");
        for (auto& wj : w_)
            if (!wj.is_weight()) throw std::invalid_argument("WeightTuple: weights must be strictly positive");
        GridFunction prod = w_[0];
        for (std::size_t j = 1; j < w_.size(); ++j) prod = prod.multiply(w_[j]);
        w_prod_ = prod;
        if (pv.p() == kInf) throw std::invalid_argument("WeightTuple: p = inf unsupported");
        v_ = prod.power(pv.p());
        for (int j = 0; j < pv.m(); ++j) {
            double pjc = pv.conj(j);
            vj_.push_back(pjc == kInf ? GridFunction() : w_[j].power(-pjc));
        }
    }

    int m() const { return pv_.m(); }
    const ExponentTuple& exponents() const { return pv_; }
    const GridFunction& wj(int j) const { return w_[j]; }
    const GridFunction& product() const { return w_prod_; }
    const GridFunction& v() const { return v_; }            // w^p
    const GridFunction& vj(int j) const {                   // w_j^{-p_j'}, needs p_j > 1
        if (pv_.conj(j) == kInf) throw std::domain_error("WeightTuple: v_j undefined for p_j = 1");
        return vj_[j];
    }

  private:
    std::vector<GridFunction> w_;
    ExponentTuple pv_;
    GridFunction w_prod_, v_;
    std::vector<GridFunction> vj_;
};

// [w,omega]_{pvec} = sup_Q <omega>_{p,Q} prod_j <w_j^{-1}>_{p_j',Q}; omega
// defaults to the product weight, giving [w]_{pvec}.
inline ConstantResult multilinear_ap(const WeightTuple& wt, CubeScope scope,
                                     const std::optional<GridFunction>& omega = std::nullopt) {
    const auto& pv = wt.exponents();
    const GridFunction& om = omega ? *omega : wt.product();
    double p = pv.p();
    return sup_over_scope(om.domain(), scope, [&](const auto& lo, const auto& hi) {
        double t = detail::box_pow_mean(om, p, lo, hi);
        for (int j = 0; j < pv.m(); ++j) {
            double pjc = pv.conj(j);
            if (pjc == kInf)
                t /= wt.wj(j).box_min(lo, hi);
            else
                t *= std::pow(detail::box_pow_mean(wt.wj(j), -pjc, lo, hi), -1.0);
            // <w^{-1}>_{r,Q} = ((1/|Q|) int w^{-r})^{1/r} = box_pow_mean(w,-r)^{-1}
        }
        return t;
    });
}

namespace detail {

// Kernel shared by the Fujii-Wilson style constants.  For each scope cube Q it
// integrates over x in Q the p-th power of
//     sup_{Q' in scope, x in Q'} prod_j ((1/|Q'|) int_{Q' cap Q} g_j)^{e_j},
// normalizes by norm_fn(Q) and returns the supremum over Q.  For the dyadic
// scope the inner supremum restricts to Q' subseteq Q (larger cubes are
// dominated), which a per-subtree top-down pass computes in O(|subtree|).
struct FwTerm {
    const std::vector<const GridFunction*>& gs;
    std::vector<double> exps;
    double p;
};

inline ConstantResult fw_kernel_dyadic(const Domain& dom, const FwTerm& t,
                                       const std::function<double(std::int64_t)>& norm_fn) {
    DyadicTree tree(dom);
    std::vector<double> cellmax(dom.cell_count());
    ConstantResult best;
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    std::vector<std::int64_t> kids;
    const double cellvol = dom.cell_volume();
    for (std::int64_t root = 0; root < tree.node_count(); ++root) {
        // top-down pass over the subtree of `root`
        struct Item {
            std::int64_t node;
            double running;
        };
        std::vector<Item> stack{{root, 0.0}};
        while (!stack.empty()) {
            auto [node, running] = stack.back();
            stack.pop_back();
            tree.cell_box(node, lo, hi);
            double cells = box_cells(dom, lo, hi);
            double prod = 1.0;
            for (std::size_t j = 0; j < t.gs.size(); ++j)
                prod *= std::pow(t.gs[j]->box_pow_sum(1.0, lo, hi) / cells, t.exps[j]);
            running = std::max(running, prod);
            if (tree.is_cell(node)) {
                cellmax[tree.cell_of_node(node)] = running;
            } else {
                tree.children_of(node, kids);
                for (auto k : kids) stack.push_back({k, running});
            }
        }
        tree.cell_box(root, lo, hi);
        double integral = 0.0;
        t.gs[0]->for_each_cell(lo, hi, [&](std::int64_t c) { integral += std::pow(cellmax[c], t.p); });
        integral *= cellvol;
        double v = std::pow(integral, 1.0 / t.p) / norm_fn(root);
        if (v > best.value) {
            best.value = v;
            best.node = root;
            best.argmax = tree.cube_of(root).text();
        }
    }
    return best;
}

inline ConstantResult fw_kernel_lattice(
    const Domain& dom, const FwTerm& t,
    const std::function<double(const std::array<std::int64_t, kMaxDim>&, const std::array<std::int64_t, kMaxDim>&)>&
        norm_fn) {
    require_all_scope_fw(dom);
    const double cellvol = dom.cell_volume();
    ConstantResult best;
    std::int64_t n = dom.cells_per_side();
    std::vector<double> cellmax(dom.cell_count());
    for_each_lattice_box(dom, [&](const auto& qlo, const auto& qhi) {
        // supremum over lattice cubes Q' containing each cell, clipped to Q
        std::fill(cellmax.begin(), cellmax.end(), 0.0);
        for_each_lattice_box(dom, [&](const auto& plo, const auto& phi) {
            std::array<std::int64_t, kMaxDim> clo{}, chi{};
            bool meets = true;
            for (int i = 0; i < dom.dim; ++i) {
                clo[i] = std::max(plo[i], qlo[i]);
                chi[i] = std::min(phi[i], qhi[i]);
                if (clo[i] >= chi[i]) meets = false;
            }
            if (!meets) return;
            double pcells = box_cells(dom, plo, phi);
            double prod = 1.0;
            for (std::size_t j = 0; j < t.gs.size(); ++j)
                prod *= std::pow(t.gs[j]->box_pow_sum(1.0, clo, chi) / pcells, t.exps[j]);
            // update cells of Q' cap Q
            t.gs[0]->for_each_cell(clo, chi, [&](std::int64_t c) { cellmax[c] = std::max(cellmax[c], prod); });
        });
        double integral = 0.0;
        t.gs[0]->for_each_cell(qlo, qhi, [&](std::int64_t c) { integral += std::pow(cellmax[c], t.p); });
        integral *= cellvol;
        double v = std::pow(integral, 1.0 / t.p) / norm_fn(qlo, qhi);
        if (v > best.value) {
            best.value = v;
            best.argmax = box_text(dom, qlo, qhi);
        }
    });
    (void)n;
    return best;
}

}  // namespace detail

// Fujii-Wilson [w]_FW = sup_Q (1/w(Q)) int_Q M(w 1_Q) dx with M over the same scope.
inline ConstantResult fw_constant(const GridFunction& w, CubeScope scope) {
    std::vector<const GridFunction*> gs{&w};
    detail::FwTerm t{gs, {1.0}, 1.0};
    const Domain& dom = w.domain();
    const double cellvol = dom.cell_volume();
    if (scope == CubeScope::DyadicGrid) {
        DyadicTree tree(dom);
        return detail::fw_kernel_dyadic(dom, t, [&](std::int64_t node) {
            std::array<std::int64_t, kMaxDim> lo{}, hi{};
            tree.cell_box(node, lo, hi);
            return w.box_pow_sum(1.0, lo, hi) * cellvol;
        });
    }
    return detail::fw_kernel_lattice(dom, t, [&](const auto& lo, const auto& hi) {
        return w.box_pow_sum(1.0, lo, hi) * cellvol;
    });
}

// Multilinear Fujii-Wilson constant
//   [w]^{pvec}_FW = sup_Q (int_Q prod w_j^{p/p_j})^{-1/p} (int_Q M_pvec(w_1^{1/p_1} 1_Q, ...)^p)^{1/p};
// factors with p_j = inf drop out.
inline ConstantResult ml_fw_constant(const WeightTuple& wt, CubeScope scope) {
    const auto& pv = wt.exponents();
    double p = pv.p();
    const Domain& dom = wt.product().domain();
    std::vector<const GridFunction*> gs;
    std::vector<double> exps;
    GridFunction normfun = GridFunction::constant(dom, 1.0);
    for (int j = 0; j < pv.m(); ++j) {
        if (pv.pj(j) == kInf) continue;
        gs.push_back(&wt.wj(j));
        exps.push_back(1.0 / pv.pj(j));
        normfun = normfun.multiply(wt.wj(j).power(p / pv.pj(j)));
    }
    if (gs.empty()) throw std::invalid_argument("ml_fw_constant: all exponents infinite");
    detail::FwTerm t{gs, exps, p};
    const double cellvol = dom.cell_volume();
    if (scope == CubeScope::DyadicGrid) {
        DyadicTree tree(dom);
        return detail::fw_kernel_dyadic(dom, t, [&](std::int64_t node) {
            std::array<std::int64_t, kMaxDim> lo{}, hi{};
            tree.cell_box(node, lo, hi);
            return std::pow(normfun.box_pow_sum(1.0, lo, hi) * cellvol, 1.0 / p);
        });
    }
    return detail::fw_kernel_lattice(dom, t, [&](const auto& lo, const auto& hi) {
        return std::pow(normfun.box_pow_sum(1.0, lo, hi) * cellvol, 1.0 / p);
    });
}

// Appendix product variant with v_j := w_j^{-p_j'} and normalizer
// prod_j v_j(Q)^{1/p_j}.
inline ConstantResult fw_prod_constant(const WeightTuple& wt, CubeScope scope) {
    const auto& pv = wt.exponents();
    double p = pv.p();
    const Domain& dom = wt.product().domain();
    std::vector<const GridFunction*> gs;
    std::vector<double> exps, inv_pj;
    for (int j = 0; j < pv.m(); ++j) {
        if (pv.pj(j) == kInf) continue;
        gs.push_back(&wt.vj(j));
        exps.push_back(1.0 / pv.pj(j));
        inv_pj.push_back(1.0 / pv.pj(j));
    }
    if (gs.empty()) throw std::invalid_argument("fw_prod_constant: all exponents infinite");
    detail::FwTerm t{gs, exps, p};
    const double cellvol = dom.cell_volume();
    auto norm_box = [&](const std::array<std::int64_t, kMaxDim>& lo, const std::array<std::int64_t, kMaxDim>& hi) {
        double r = 1.0;
        for (std::size_t j = 0; j < gs.size(); ++j)
            r *= std::pow(gs[j]->box_pow_sum(1.0, lo, hi) * cellvol, inv_pj[j]);
        return r;
    };
    if (scope == CubeScope::DyadicGrid) {
        DyadicTree tree(dom);
        return detail::fw_kernel_dyadic(dom, t, [&](std::int64_t node) {
            std::array<std::int64_t, kMaxDim> lo{}, hi{};
            tree.cell_box(node, lo, hi);
            return norm_box(lo, hi);
        });
    }
    return detail::fw_kernel_lattice(dom, t, norm_box);
}

struct ReverseHolderReport {
    double fw = 0.0;
    double r = 0.0, r_prime = 0.0;
    double max_ratio = 0.0;
    std::string worst;
    bool ok = false;  // max_ratio <= 2 (the sharp reverse Holder bound)
};

// With r' = 2^{d+1}[w]_FW the bound  <w>_{r,Q} <= 2 <w>_{1,Q}  holds on every
// cube of the scope; a violation signals an implementation bug or a scope
// mismatch, not data.
inline ReverseHolderReport reverse_holder_check(const GridFunction& w, CubeScope scope) {
    ReverseHolderReport rep;
    rep.fw = fw_constant(w, scope).value;
    rep.r_prime = std::ldexp(rep.fw, w.domain().dim + 1);  // 2^{d+1} [w]_FW
    rep.r = rep.r_prime / (rep.r_prime - 1.0);
    auto worst = sup_over_scope(w.domain(), scope, [&](const auto& lo, const auto& hi) {
        double cells = detail::box_cells(w.domain(), lo, hi);
        double mean_r = std::pow(w.box_pow_sum(rep.r, lo, hi) / cells, 1.0 / rep.r);
        double mean_1 = w.box_pow_sum(1.0, lo, hi) / cells;
        return mean_r / mean_1;
    });
    rep.max_ratio = worst.value;
    rep.worst = worst.argmax;
    rep.ok = rep.max_ratio <= 2.0 + 1e-12;
    return rep;
}

}  // namespace dyadic

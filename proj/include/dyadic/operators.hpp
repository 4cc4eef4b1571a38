#pragma once

#include <optional>

#include "dyadic/sparse.hpp"

namespace dyadic {

// {a_Q}_{Q in F}: positive coefficients over a finite cube family in the
// shift-0 grid (not necessarily sparse).
struct CoefficientMap {
    std::vector<std::int64_t> nodes;
    std::vector<double> values;

    void validate() const {
        if (nodes.size() != values.size()) throw std::invalid_argument("CoefficientMap: size mismatch");
        for (double a : values)
            if (!(a > 0.0)) throw std::invalid_argument("CoefficientMap: coefficients must be positive");
    }
};

// prod_j <f_j>_{1,Q} for every member of the family
inline std::vector<double> product_averages(const DyadicTree& tree, const std::vector<std::int64_t>& nodes,
                                            const std::vector<GridFunction>& fs) {
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    std::vector<double> out;
    out.reserve(nodes.size());
    for (auto n : nodes) {
        tree.cell_box(n, lo, hi);
        double cells = 1.0;
        for (int i = 0; i < tree.domain().dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
        double p = 1.0;
        for (auto& f : fs) p *= f.box_pow_sum(1.0, lo, hi) / cells;
        out.push_back(p);
    }
    return out;
}

// A_S(fvec) = sum_{Q in S} prod_j <f_j>_{1,Q} 1_Q, cellwise
inline GridFunction sparse_operator(const SparseCollection& S, const std::vector<GridFunction>& fs) {
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    auto coeff = product_averages(tree, S.nodes(), fs);
    std::vector<double> out(dom.cell_count(), 0.0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (std::size_t i = 0; i < S.nodes().size(); ++i) {
        tree.cell_box(S.nodes()[i], lo, hi);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) { out[c] += coeff[i]; });
    }
    return GridFunction(dom, std::move(out));
}

// A^q_F(a) = || {a_Q 1_Q} ||_{l^q} cellwise, max when q = inf
inline GridFunction sparse_q_operator(const DyadicTree& tree, const CoefficientMap& a, double q) {
    a.validate();
    if (!(q > 0.0)) throw std::invalid_argument("sparse_q_operator: q must be positive");
    const Domain& dom = tree.domain();
    std::vector<double> acc(dom.cell_count(), 0.0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        tree.cell_box(a.nodes[i], lo, hi);
        double add = q == kInf ? a.values[i] : std::pow(a.values[i], q);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) {
            if (q == kInf)
                acc[c] = std::max(acc[c], add);
            else
                acc[c] += add;
        });
    }
    if (q != kInf)
        for (auto& x : acc) x = std::pow(x, 1.0 / q);
    return GridFunction(dom, std::move(acc));
}

// A^q_S(fvec) with a_Q = prod_j <f_j>_{1,Q}
inline GridFunction sparse_q_operator(const SparseCollection& S, const std::vector<GridFunction>& fs, double q) {
    DyadicTree tree(S.domain());
    auto coeff = product_averages(tree, S.nodes(), fs);
    CoefficientMap a{S.nodes(), std::move(coeff)};
    // zero product averages can occur for indicator data; drop those cubes
    CoefficientMap filtered;
    for (std::size_t i = 0; i < a.nodes.size(); ++i)
        if (a.values[i] > 0.0) {
            filtered.nodes.push_back(a.nodes[i]);
            filtered.values.push_back(a.values[i]);
        }
    if (filtered.nodes.empty()) return GridFunction::constant(S.domain(), 0.0);
    return sparse_q_operator(tree, filtered, q);
}

// M^{P,w} f: sup over the collection (all dyadic cubes when P is omitted) of
// the w-weighted average.  The full-grid case is a top-down tree pass.
inline GridFunction maximal(const GridFunction& f, const std::optional<GridFunction>& w = std::nullopt,
                            const std::optional<std::vector<std::int64_t>>& P = std::nullopt) {
    const Domain& dom = f.domain();
    DyadicTree tree(dom);
    GridFunction fw = w ? f.multiply(*w) : f;
    const double cellvol = dom.cell_volume();
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    auto wavg = [&](std::int64_t node) {
        tree.cell_box(node, lo, hi);
        double num = fw.box_pow_sum(1.0, lo, hi) * cellvol;
        double den = w ? w->box_pow_sum(1.0, lo, hi) * cellvol : tree.volume_of(node);
        return num / den;
    };
    std::vector<double> out(dom.cell_count(), 0.0);
    if (P) {
        GridFunction ones = GridFunction::constant(dom, 1.0);
        for (auto n : *P) {
            double v = wavg(n);
            tree.cell_box(n, lo, hi);
            ones.for_each_cell(lo, hi, [&](std::int64_t c) { out[c] = std::max(out[c], v); });
        }
        return GridFunction(dom, std::move(out));
    }
    struct Item {
        std::int64_t node;
        double running;
    };
    std::vector<Item> stack{{0, 0.0}};
    std::vector<std::int64_t> kids;
    while (!stack.empty()) {
        auto [node, running] = stack.back();
        stack.pop_back();
        running = std::max(running, wavg(node));
        if (tree.is_cell(node)) {
            out[tree.cell_of_node(node)] = running;
            continue;
        }
        tree.children_of(node, kids);
        for (auto k : kids) stack.push_back({k, running});
    }
    return GridFunction(dom, std::move(out));
}

// M_pvec(fvec) over the dyadic grid: sup_Q prod_j <f_j>_{p_j,Q} 1_Q
inline GridFunction multilinear_maximal(const std::vector<GridFunction>& fs, const ExponentTuple& pv) {
    if (static_cast<int>(fs.size()) != pv.m()) throw std::invalid_argument("multilinear_maximal: m mismatch");
    const Domain& dom = fs[0].domain();
    DyadicTree tree(dom);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    auto term = [&](std::int64_t node) {
        tree.cell_box(node, lo, hi);
        double cells = 1.0;
        for (int i = 0; i < dom.dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
        double prod = 1.0;
        for (int j = 0; j < pv.m(); ++j) {
            double pj = pv.pj(j);
            if (pj == kInf)
                prod *= fs[j].box_max(lo, hi);
            else
                prod *= std::pow(fs[j].box_pow_sum(pj, lo, hi) / cells, 1.0 / pj);
        }
        return prod;
    };
    std::vector<double> out(dom.cell_count(), 0.0);
    struct Item {
        std::int64_t node;
        double running;
    };
    std::vector<Item> stack{{0, 0.0}};
    std::vector<std::int64_t> kids;
    while (!stack.empty()) {
        auto [node, running] = stack.back();
        stack.pop_back();
        running = std::max(running, term(node));
        if (tree.is_cell(node)) {
            out[tree.cell_of_node(node)] = running;
            continue;
        }
        tree.children_of(node, kids);
        for (auto k : kids) stack.push_back({k, running});
    }
    return GridFunction(dom, std::move(out));
}

enum class FormVariant {
    EllP,          // sum_Q (prod <f_j>)^p <g>^p_{1,Q} |Q|
    EllPMeasure,   // sum_Q (prod <f_j>)^p <g>_{1,Q} |Q|   (the CZ-proof aggregation)
};

inline double sparse_form(const SparseCollection& S, const std::vector<GridFunction>& fs, const GridFunction& g,
                          double p, FormVariant variant = FormVariant::EllP) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("sparse_form: p must lie in (0,1]");
    DyadicTree tree(S.domain());
    auto coeff = product_averages(tree, S.nodes(), fs);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    double total = 0.0;
    for (std::size_t i = 0; i < S.nodes().size(); ++i) {
        auto n = S.nodes()[i];
        tree.cell_box(n, lo, hi);
        double cells = 1.0;
        for (int d = 0; d < S.domain().dim; ++d) cells *= static_cast<double>(hi[d] - lo[d]);
        double gavg = g.box_pow_sum(1.0, lo, hi) / cells;
        double gfac = variant == FormVariant::EllP ? std::pow(gavg, p) : gavg;
        total += std::pow(coeff[i], p) * gfac * tree.volume_of(n);
    }
    return total;
}

enum class CovReading {
    AsPrinted,        // inner factor (1/v(Q)) sum_{Q' <= Q} a_{Q'} v(Q): the v mass cancels
    VolumeWeighted,   // inner factor (1/v(Q)) sum_{Q' <= Q} a_{Q'} v(Q')
};

// Both sides of the discrete Carleson-type norm formula for ||sum a_Q 1_Q||_{L^q(v)}.
inline std::pair<double, double> cov_both_sides(const DyadicTree& tree, const CoefficientMap& a, double q,
                                                const GridFunction& v, CovReading reading) {
    a.validate();
    if (q < 1.0) throw std::invalid_argument("cov_both_sides: q must be >= 1");
    const Domain& dom = tree.domain();
    std::vector<double> cellsum(dom.cell_count(), 0.0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    const double cellvol = dom.cell_volume();
    std::vector<double> vmass(a.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        tree.cell_box(a.nodes[i], lo, hi);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) { cellsum[c] += a.values[i]; });
        vmass[i] = v.box_pow_sum(1.0, lo, hi) * cellvol;
    }
    double lhs_q = 0.0;
    for (std::int64_t c = 0; c < dom.cell_count(); ++c) lhs_q += std::pow(cellsum[c], q) * v[c];
    double lhs = std::pow(lhs_q * cellvol, 1.0 / q);

    double rhs_q = 0.0;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < a.nodes.size(); ++j) {
            if (!detail::node_contains(tree, a.nodes[i], a.nodes[j])) continue;
            inner += reading == CovReading::AsPrinted ? a.values[j] : a.values[j] * vmass[j] / vmass[i];
        }
        rhs_q += std::pow(inner, q - 1.0) * a.values[i] * vmass[i];
    }
    return {lhs, std::pow(rhs_q, 1.0 / q)};
}

}  // namespace dyadic

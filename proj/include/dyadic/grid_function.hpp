#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "dyadic/cube.hpp"

namespace dyadic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// d-dimensional summed-volume table over the finest cell grid; box_sum is an
// O(2^d) inclusion-exclusion lookup.
class SummedTable {
  public:
    SummedTable() = default;
    SummedTable(const Domain& dom, const std::vector<double>& cell_values) : dom_(dom) {
        n_ = dom.cells_per_side();
        std::int64_t total = 1;
        for (int i = 0; i < dom.dim; ++i) total *= (n_ + 1);
        table_.assign(total, 0.0);
        std::array<std::int64_t, kMaxDim> k{};
        std::int64_t cells = dom.cell_count();
        for (std::int64_t c = 0; c < cells; ++c) {
            std::int64_t rest = c;
            for (int i = dom.dim - 1; i >= 0; --i) {
                k[i] = rest % n_;
                rest /= n_;
            }
            // table[(k0+1, k1+1, ...)] seeded with the cell value, then prefix-summed
            std::int64_t t = 0;
            for (int i = 0; i < dom.dim; ++i) t = t * (n_ + 1) + (k[i] + 1);
            table_[t] = cell_values[c];
        }
        for (int axis = 0; axis < dom.dim; ++axis) {
            std::int64_t stride = 1;
            for (int i = axis + 1; i < dom.dim; ++i) stride *= (n_ + 1);
            for (std::int64_t t = 0; t < total; ++t) {
                std::int64_t coord = (t / stride) % (n_ + 1);
                if (coord > 0) table_[t] += table_[t - stride];
            }
        }
    }

    // sum of cell values over the box [lo, hi) in cell coordinates
    double box_sum(const std::array<std::int64_t, kMaxDim>& lo,
                   const std::array<std::int64_t, kMaxDim>& hi) const {
        double s = 0.0;
        int corners = 1 << dom_.dim;
        for (int e = 0; e < corners; ++e) {
            std::int64_t t = 0;
            int sign = 1;
            for (int i = 0; i < dom_.dim; ++i) {
                bool high = (e >> i) & 1;
                t = t * (n_ + 1) + (high ? hi[i] : lo[i]);
                if (!high) sign = -sign;
            }
            s += sign * table_[t];
        }
        return s;
    }

  private:
    Domain dom_;
    std::int64_t n_ = 0;
    std::vector<double> table_;
};

// Nonnegative piecewise-constant function on the finest cells of a Domain.
// Values are immutable after construction; prefix tables for integer and
// fractional powers are built lazily under a single internal lock, after
// which all queries are pure and safe to run concurrently.
class GridFunction {
  public:
    GridFunction() = default;
    GridFunction(const Domain& dom, std::vector<double> values) : dom_(dom), v_(std::move(values)) {
        if (static_cast<std::int64_t>(v_.size()) != dom.cell_count())
            throw std::invalid_argument("GridFunction: wrong number of cell values");
        for (double x : v_)
            if (!(x >= 0.0) || !std::isfinite(x))
                throw std::invalid_argument("GridFunction: values must be finite and >= 0");
    }

    static GridFunction constant(const Domain& dom, double c) {
        return GridFunction(dom, std::vector<double>(dom.cell_count(), c));
    }

    // prefix caches are per-instance and rebuilt on demand, so copies drop them
    GridFunction(const GridFunction& o) : dom_(o.dom_), v_(o.v_) {}
    GridFunction(GridFunction&& o) noexcept : dom_(o.dom_), v_(std::move(o.v_)) {}
    GridFunction& operator=(const GridFunction& o) {
        if (this != &o) {
            dom_ = o.dom_;
            v_ = o.v_;
            prefix_.clear();
        }
        return *this;
    }
    GridFunction& operator=(GridFunction&& o) noexcept {
        if (this != &o) {
            dom_ = o.dom_;
            v_ = std::move(o.v_);
            prefix_.clear();
        }
        return *this;
    }

    const Domain& domain() const { return dom_; }
    std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
    double operator[](std::int64_t cell) const { return v_[cell]; }
    const std::vector<double>& values() const { return v_; }

    bool is_weight() const {
        for (double x : v_)
            if (!(x > 0.0)) return false;
        return true;
    }

    GridFunction power(double a) const {
        std::vector<double> out(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = std::pow(v_[i], a);
        return GridFunction(dom_, std::move(out));
    }

    GridFunction multiply(const GridFunction& o) const {
        std::vector<double> out(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = v_[i] * o.v_[i];
        return GridFunction(dom_, std::move(out));
    }

    GridFunction divide(const GridFunction& o) const {
        std::vector<double> out(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = v_[i] / o.v_[i];
        return GridFunction(dom_, std::move(out));
    }

    GridFunction scale(double c) const {
        std::vector<double> out(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = c * v_[i];
        return GridFunction(dom_, std::move(out));
    }

    // sum of a-th powers over the cell box [lo,hi), accelerated
    double box_pow_sum(double a, const std::array<std::int64_t, kMaxDim>& lo,
                       const std::array<std::int64_t, kMaxDim>& hi) const {
        return prefix(a).box_sum(lo, hi);
    }

    double box_max(const std::array<std::int64_t, kMaxDim>& lo,
                   const std::array<std::int64_t, kMaxDim>& hi) const {
        double best = 0.0;
        for_each_cell(lo, hi, [&](std::int64_t c) { best = std::max(best, v_[c]); });
        return best;
    }

    double box_min(const std::array<std::int64_t, kMaxDim>& lo,
                   const std::array<std::int64_t, kMaxDim>& hi) const {
        double best = kInf;
        for_each_cell(lo, hi, [&](std::int64_t c) { best = std::min(best, v_[c]); });
        return best;
    }

    void for_each_cell(const std::array<std::int64_t, kMaxDim>& lo, const std::array<std::int64_t, kMaxDim>& hi,
                       const std::function<void(std::int64_t)>& fn) const {
        std::int64_t n = dom_.cells_per_side();
        std::array<std::int64_t, kMaxDim> k = lo;
        while (true) {
            std::int64_t c = 0;
            for (int i = 0; i < dom_.dim; ++i) c = c * n + k[i];
            fn(c);
            int i = dom_.dim - 1;
            while (i >= 0) {
                if (++k[i] < hi[i]) break;
                k[i] = lo[i];
                --i;
            }
            if (i < 0) break;
        }
    }

    const SummedTable& prefix(double a) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = prefix_.find(a);
        if (it == prefix_.end()) {
            std::vector<double> powed(v_.size());
            if (a == 1.0)
                powed = v_;
            else
                for (std::size_t i = 0; i < v_.size(); ++i) powed[i] = std::pow(v_[i], a);
            it = prefix_.emplace(a, SummedTable(dom_, powed)).first;
        }
        return it->second;
    }

  private:
    Domain dom_;
    std::vector<double> v_;
    mutable std::map<double, SummedTable> prefix_;
    mutable std::mutex mu_;
};

inline double holder_conjugate(double p) {
    if (p == 1.0) return kInf;
    if (p == kInf) return 1.0;
    return p / (p - 1.0);
}

// p_j in (0,inf]^m with the derived p from 1/p = sum 1/p_j, conjugates, and
// p_0 := p'.
class ExponentTuple {
  public:
    ExponentTuple() = default;
    explicit ExponentTuple(std::vector<double> pj) : p_(std::move(pj)) {
        if (p_.empty()) throw std::invalid_argument("ExponentTuple: empty");
        double inv = 0.0;
        for (double x : p_) {
            if (!(x > 0.0)) throw std::invalid_argument("ExponentTuple: exponents must be positive");
            if (x != kInf) inv += 1.0 / x;
        }
        derived_ = inv == 0.0 ? kInf : 1.0 / inv;
    }

    int m() const { return static_cast<int>(p_.size()); }
    double pj(int j) const { return p_[j]; }
    double conj(int j) const { return holder_conjugate(p_[j]); }
    double p() const { return derived_; }
    // p_0 := p', defined when p >= 1
    double p0() const {
        if (derived_ < 1.0) throw std::domain_error("ExponentTuple: p' undefined for p < 1");
        return holder_conjugate(derived_);
    }
    const std::vector<double>& all() const { return p_; }

  private:
    std::vector<double> p_;
    double derived_ = 1.0;
};

namespace detail {
inline void cube_cell_box(const Domain& dom, const Cube& q, std::array<std::int64_t, kMaxDim>& lo,
                          std::array<std::int64_t, kMaxDim>& hi) {
    if (!q.shift_zero()) throw std::invalid_argument("cube_cell_box: shift-0 cubes only");
    if (q.level > dom.max_level) throw std::invalid_argument("cube_cell_box: level below resolution");
    std::int64_t w = std::int64_t{1} << (dom.max_level - q.level);
    for (int i = 0; i < dom.dim; ++i) {
        lo[i] = q.index[i] * w;
        hi[i] = lo[i] + w;
        if (lo[i] < 0 || hi[i] > dom.cells_per_side())
            throw std::invalid_argument("cube_cell_box: cube outside the domain");
    }
}
}  // namespace detail

// <f>_{p,Q} (unweighted p-mean over Q; ess-sup for p = inf)
inline double average(const GridFunction& f, double p, const Cube& q) {
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    detail::cube_cell_box(f.domain(), q, lo, hi);
    if (p == kInf) return f.box_max(lo, hi);
    double cells = 1.0;
    for (int i = 0; i < f.domain().dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
    return std::pow(f.box_pow_sum(p, lo, hi) / cells, 1.0 / p);
}

// <f>^w_{p,Q}: ((1/w(Q)) \int_Q f^p w)^{1/p}; direct cell loop, exact finite sum
inline double average(const GridFunction& f, double p, const Cube& q, const GridFunction& w) {
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    detail::cube_cell_box(f.domain(), q, lo, hi);
    if (p == kInf) return f.box_max(lo, hi);
    double num = 0.0, den = 0.0;
    f.for_each_cell(lo, hi, [&](std::int64_t c) {
        num += std::pow(f[c], p) * w[c];
        den += w[c];
    });
    if (den <= 0.0) throw std::domain_error("average: zero weight mass on cube");
    return std::pow(num / den, 1.0 / p);
}

// w-measure of a cell set; Lebesgue measure when w is omitted upstream (w==1)
inline double measure(const GridFunction& w, const std::vector<std::int64_t>& cells) {
    double vol = w.domain().cell_volume();
    double s = 0.0;
    for (auto c : cells) s += w[c];
    return s * vol;
}

inline double measure_where(const GridFunction& w, const std::function<bool(std::int64_t)>& pred) {
    double vol = w.domain().cell_volume();
    double s = 0.0;
    for (std::int64_t c = 0; c < w.size(); ++c)
        if (pred(c)) s += w[c];
    return s * vol;
}

// distinct positive values of f in increasing order with v({f >= value});
// the backbone of every weak/Lorentz norm here
inline std::vector<std::pair<double, double>> upper_value_measures(const GridFunction& f,
                                                                   const GridFunction& v_measure) {
    std::vector<std::pair<double, double>> cells;  // (value, v dx mass)
    double vol = f.domain().cell_volume();
    for (std::int64_t c = 0; c < f.size(); ++c)
        if (f[c] > 0.0) cells.emplace_back(f[c], v_measure[c] * vol);
    std::sort(cells.begin(), cells.end());
    std::vector<std::pair<double, double>> out;  // (value, measure of {f >= value})
    double tail = 0.0;
    for (auto it = cells.rbegin(); it != cells.rend(); ++it) {
        tail += it->second;
        if (out.empty() || out.back().first != it->first)
            out.emplace_back(it->first, tail);
        else
            out.back().second = tail;
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ||f||_{L^{p,infty}(v dx)} = sup_t t v({f>t})^{1/p}; attained in the limit at
// the distinct values of f, so a finite scan is exact
inline double weak_norm_measure(const GridFunction& f, double p, const GridFunction& v) {
    double best = 0.0;
    for (auto& [val, mass] : upper_value_measures(f, v)) best = std::max(best, val * std::pow(mass, 1.0 / p));
    return best;
}

// ||f||_{L^{p,infty}_w} = sup_t t (w^p)({|f|>t})^{1/p}  (multiplier convention)
inline double weak_norm(const GridFunction& f, double p, const GridFunction& w) {
    return weak_norm_measure(f, p, w.power(p));
}

// ||f||_{L^p(v dx)}
inline double lp_norm_measure(const GridFunction& f, double p, const GridFunction& v) {
    double s = 0.0;
    for (std::int64_t c = 0; c < f.size(); ++c) s += std::pow(f[c], p) * v[c];
    return std::pow(s * f.domain().cell_volume(), 1.0 / p);
}

// ||f||_{L^p_w} = ||f w||_{L^p}
inline double lp_norm(const GridFunction& f, double p, const GridFunction& w) {
    return lp_norm_measure(f.multiply(w), p, GridFunction::constant(f.domain(), 1.0));
}

// Lorentz norm with the normalization (s \int_0^inf (t v({f>t})^{1/p})^s dt/t)^{1/s},
// chosen so that L^{p,p}(v) == L^p(v) exactly and s -> inf recovers the weak
// norm; s = inf delegates to weak_norm_measure.
inline double lorentz_norm(const GridFunction& f, double p, double s, const GridFunction& v) {
    if (s == kInf) return weak_norm_measure(f, p, v);
    auto vals = upper_value_measures(f, v);  // increasing values, {f >= value} masses
    double total = 0.0;
    double prev = 0.0;
    for (auto& [val, mass] : vals) {
        // v({f > t}) == mass for t in [prev, val)
        total += std::pow(mass, s / p) * (std::pow(val, s) - std::pow(prev, s));
        prev = val;
    }
    return std::pow(total, 1.0 / s);
}

}  // namespace dyadic

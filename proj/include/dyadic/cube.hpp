#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyadic {

inline constexpr int kMaxDim = 3;

// Bounded discretization of [0,1)^d: finest cells are the level-L dyadic cubes.
// Every coordinate that can appear anywhere in the library is an integer
// multiple of 1/(3*2^L), so shifted-grid geometry stays exact.
struct Domain {
    int dim = 1;
    int max_level = 1;

    Domain() = default;
    Domain(int d, int level) : dim(d), max_level(level) {
        if (d < 1 || d > kMaxDim) throw std::invalid_argument("Domain: dim must be in [1,3]");
        if (level < 1 || static_cast<long long>(d) * level > 24)
            throw std::invalid_argument("Domain: d*L out of desk-scale range");
    }

    std::int64_t cells_per_side() const { return std::int64_t{1} << max_level; }
    std::int64_t cell_count() const { return std::int64_t{1} << (static_cast<std::int64_t>(dim) * max_level); }
    double cell_volume() const { return 1.0 / static_cast<double>(cell_count()); }
};

// One cube of a shifted dyadic grid.  The grid with shift s in {0,1,2}^d is
// the standard dyadic grid translated by s/3; a cube of level l has origin
// s_i/3 + k_i/2^l and side 2^-l.  Shift-0 cubes with index in [0,2^l)^d tile
// the base domain.
struct Cube {
    int dim = 1;
    int level = 0;
    std::array<int, kMaxDim> shift{};        // thirds numerators, each in {0,1,2}
    std::array<std::int64_t, kMaxDim> index{};

    Cube() = default;
    Cube(int d, int lev, std::array<int, kMaxDim> s, std::array<std::int64_t, kMaxDim> k)
        : dim(d), level(lev), shift(s), index(k) {}

    static Cube root(int d) { return Cube(d, 0, {}, {}); }

    bool shift_zero() const {
        for (int i = 0; i < dim; ++i)
            if (shift[i] != 0) return false;
        return true;
    }

    // Origin coordinate i in units of 1/(3*2^ref_level); exact for level <= ref_level.
    std::int64_t origin_units(int i, int ref_level) const {
        return static_cast<std::int64_t>(shift[i]) * (std::int64_t{1} << ref_level) +
               index[i] * 3 * (std::int64_t{1} << (ref_level - level));
    }
    std::int64_t side_units(int ref_level) const { return 3 * (std::int64_t{1} << (ref_level - level)); }

    double side() const { return 1.0 / static_cast<double>(std::int64_t{1} << level); }
    double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= side();
        return v;
    }

    bool operator==(const Cube& o) const {
        if (dim != o.dim || level != o.level) return false;
        for (int i = 0; i < dim; ++i)
            if (shift[i] != o.shift[i] || index[i] != o.index[i]) return false;
        return true;
    }

    std::string text() const {
        std::ostringstream os;
        os << "s=";
        for (int i = 0; i < dim; ++i) os << (i ? "," : "") << shift[i];
        os << ";l=" << level << ";k=";
        for (int i = 0; i < dim; ++i) os << (i ? "," : "") << index[i];
        return os.str();
    }

    static Cube parse(const std::string& s);
};

namespace detail {
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}
inline std::vector<std::int64_t> parse_int_list(const std::string& s) {
    std::vector<std::int64_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoll(tok));
    return out;
}
}  // namespace detail

inline Cube Cube::parse(const std::string& s) {
    auto field = [&](const std::string& key) {
        auto pos = s.find(key + "=");
        if (pos == std::string::npos) throw std::invalid_argument("Cube::parse: missing " + key + " in '" + s + "'");
        auto start = pos + key.size() + 1;
        auto end = s.find(';', start);
        return s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    };
    auto sv = detail::parse_int_list(field("s"));
    auto kv = detail::parse_int_list(field("k"));
    int lev = static_cast<int>(std::stoll(field("l")));
    if (sv.size() != kv.size() || sv.empty() || sv.size() > kMaxDim)
        throw std::invalid_argument("Cube::parse: bad dimension in '" + s + "'");
    Cube c;
    c.dim = static_cast<int>(sv.size());
    c.level = lev;
    for (int i = 0; i < c.dim; ++i) {
        if (sv[i] < 0 || sv[i] > 2) throw std::invalid_argument("Cube::parse: shift not in {0,1,2}");
        c.shift[i] = static_cast<int>(sv[i]);
        c.index[i] = kv[i];
    }
    return c;
}

inline std::vector<Cube> children(const Cube& c, int max_level) {
    if (c.level >= max_level) throw std::domain_error("children: cube already at finest level");
    std::vector<Cube> out;
    int n = 1 << c.dim;
    out.reserve(n);
    for (int e = 0; e < n; ++e) {
        Cube ch = c;
        ch.level = c.level + 1;
        for (int i = 0; i < c.dim; ++i) ch.index[i] = 2 * c.index[i] + ((e >> i) & 1);
        out.push_back(ch);
    }
    return out;
}

inline Cube parent(const Cube& c) {
    if (c.level <= 0) throw std::domain_error("parent: root cube has no parent");
    Cube p = c;
    p.level = c.level - 1;
    for (int i = 0; i < c.dim; ++i) p.index[i] = detail::floor_div(c.index[i], 2);
    return p;
}

// inner subset of outer as half-open boxes; exact, any shifts.
inline bool contains(const Cube& outer, const Cube& inner) {
    if (outer.dim != inner.dim) return false;
    int ref = std::max(outer.level, inner.level);
    for (int i = 0; i < outer.dim; ++i) {
        std::int64_t ol = outer.origin_units(i, ref), oh = ol + outer.side_units(ref);
        std::int64_t il = inner.origin_units(i, ref), ih = il + inner.side_units(ref);
        if (il < ol || ih > oh) return false;
    }
    return true;
}

inline bool disjoint(const Cube& a, const Cube& b) {
    if (a.dim != b.dim) return true;
    int ref = std::max(a.level, b.level);
    for (int i = 0; i < a.dim; ++i) {
        std::int64_t al = a.origin_units(i, ref), ah = al + a.side_units(ref);
        std::int64_t bl = b.origin_units(i, ref), bh = bl + b.side_units(ref);
        if (ah <= bl || bh <= al) return true;
    }
    return false;
}

// Axis-aligned cube with corners on the 1/(3*2^L) lattice, the query type of
// lattice_cover.  origin/side are stored in those exact units.
struct LatticeBox {
    int dim = 1;
    std::array<std::int64_t, kMaxDim> origin_units{};
    std::int64_t side_units = 0;

    static LatticeBox from_cube(const Cube& c, int ref_level) {
        LatticeBox b;
        b.dim = c.dim;
        b.side_units = c.side_units(ref_level);
        for (int i = 0; i < c.dim; ++i) b.origin_units[i] = c.origin_units(i, ref_level);
        return b;
    }
    double volume(int ref_level) const {
        double unit = 1.0 / (3.0 * static_cast<double>(std::int64_t{1} << ref_level));
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= static_cast<double>(side_units) * unit;
        return v;
    }
};

// Smallest shifted dyadic cube covering q; exists whenever q fits inside one
// level-0 shifted cube within the search window [-1/3, 4/3)^d.  Ties at the
// minimal level break to the lexicographically smallest (shift, index).
inline Cube lattice_cover(const LatticeBox& q, const Domain& dom) {
    const int L = dom.max_level;
    const std::int64_t one = std::int64_t{1} << L;        // 1/3 in lattice units
    const std::int64_t win_lo = -one, win_hi = 4 * one;   // [-1/3, 4/3)
    for (int i = 0; i < q.dim; ++i) {
        if (q.origin_units[i] < win_lo || q.origin_units[i] + q.side_units > win_hi)
            throw std::domain_error("lattice_cover: box outside the [-1/3,4/3)^d search window");
    }
    if (q.side_units <= 0) throw std::invalid_argument("lattice_cover: empty box");

    for (int lev = L; lev >= 0; --lev) {
        std::int64_t side = 3 * (std::int64_t{1} << (L - lev));
        if (side < q.side_units) continue;
        bool found = false;
        Cube best;
        // shifts enumerated in lexicographic order of the shift vector
        int combos = 1;
        for (int i = 0; i < q.dim; ++i) combos *= 3;
        for (int sc = 0; sc < combos; ++sc) {
            Cube cand;
            cand.dim = q.dim;
            cand.level = lev;
            int rest = sc;
            bool ok = true;
            for (int i = q.dim - 1; i >= 0; --i) {
                cand.shift[i] = rest % 3;
                rest /= 3;
            }
            for (int i = 0; i < q.dim; ++i) {
                std::int64_t s_units = static_cast<std::int64_t>(cand.shift[i]) * one;
                std::int64_t k = detail::floor_div(q.origin_units[i] - s_units, side);
                if (s_units + k * side > q.origin_units[i] ||
                    q.origin_units[i] + q.side_units > s_units + (k + 1) * side) {
                    ok = false;
                    break;
                }
                cand.index[i] = k;
            }
            if (!ok) continue;
            if (!found) {
                best = cand;
                found = true;
            } else {
                for (int i = 0; i < q.dim; ++i) {
                    if (cand.shift[i] != best.shift[i]) {
                        if (cand.shift[i] < best.shift[i]) best = cand;
                        break;
                    }
                    if (cand.index[i] != best.index[i]) {
                        if (cand.index[i] < best.index[i]) best = cand;
                        break;
                    }
                }
            }
        }
        if (found) return best;
    }
    throw std::domain_error("lattice_cover: no shifted dyadic cover within the window");
}

// Linear indexing of the shift-0 cubes of a Domain, level by level.  Node 0 is
// the root; cells are the nodes of the finest level.
class DyadicTree {
  public:
    explicit DyadicTree(const Domain& dom) : dom_(dom) {
        offsets_.resize(dom.max_level + 2, 0);
        for (int lev = 0; lev <= dom.max_level; ++lev)
            offsets_[lev + 1] = offsets_[lev] + (std::int64_t{1} << (static_cast<std::int64_t>(dom.dim) * lev));
    }

    const Domain& domain() const { return dom_; }
    std::int64_t node_count() const { return offsets_.back(); }
    std::int64_t cell_count() const { return dom_.cell_count(); }

    int level_of(std::int64_t node) const {
        int lev = 0;
        while (offsets_[lev + 1] <= node) ++lev;
        return lev;
    }
    std::int64_t linear_of(std::int64_t node) const { return node - offsets_[level_of(node)]; }
    std::int64_t node_at(int level, std::int64_t linear) const { return offsets_[level] + linear; }

    std::int64_t parent_of(std::int64_t node) const {
        int lev = level_of(node);
        std::int64_t lin = node - offsets_[lev];
        std::int64_t plin = 0;
        std::int64_t side = std::int64_t{1} << lev;
        std::int64_t pside = side >> 1;
        // per-coordinate halving of the row-major linear index
        std::int64_t rest = lin;
        std::array<std::int64_t, kMaxDim> k{};
        for (int i = dom_.dim - 1; i >= 0; --i) {
            k[i] = rest % side;
            rest /= side;
        }
        for (int i = 0; i < dom_.dim; ++i) plin = plin * pside + (k[i] >> 1);
        return offsets_[lev - 1] + plin;
    }

    void children_of(std::int64_t node, std::vector<std::int64_t>& out) const {
        out.clear();
        int lev = level_of(node);
        std::int64_t lin = node - offsets_[lev];
        std::int64_t side = std::int64_t{1} << lev;
        std::int64_t cside = side << 1;
        std::array<std::int64_t, kMaxDim> k{};
        std::int64_t rest = lin;
        for (int i = dom_.dim - 1; i >= 0; --i) {
            k[i] = rest % side;
            rest /= side;
        }
        int n = 1 << dom_.dim;
        for (int e = 0; e < n; ++e) {
            std::int64_t clin = 0;
            for (int i = 0; i < dom_.dim; ++i) clin = clin * cside + 2 * k[i] + ((e >> i) & 1);
            out.push_back(offsets_[lev + 1] + clin);
        }
    }

    Cube cube_of(std::int64_t node) const {
        int lev = level_of(node);
        std::int64_t lin = node - offsets_[lev];
        std::int64_t side = std::int64_t{1} << lev;
        Cube c;
        c.dim = dom_.dim;
        c.level = lev;
        for (int i = dom_.dim - 1; i >= 0; --i) {
            c.index[i] = lin % side;
            lin /= side;
        }
        return c;
    }

    std::int64_t node_of(const Cube& c) const {
        if (!c.shift_zero()) throw std::invalid_argument("DyadicTree: shift-0 cubes only");
        if (c.level < 0 || c.level > dom_.max_level) throw std::invalid_argument("DyadicTree: level out of range");
        std::int64_t side = std::int64_t{1} << c.level;
        std::int64_t lin = 0;
        for (int i = 0; i < dom_.dim; ++i) {
            if (c.index[i] < 0 || c.index[i] >= side) throw std::invalid_argument("DyadicTree: index out of range");
            lin = lin * side + c.index[i];
        }
        return offsets_[c.level] + lin;
    }

    // Cell coordinate range [lo, hi) covered by a node, per coordinate.
    void cell_box(std::int64_t node, std::array<std::int64_t, kMaxDim>& lo,
                  std::array<std::int64_t, kMaxDim>& hi) const {
        Cube c = cube_of(node);
        std::int64_t w = std::int64_t{1} << (dom_.max_level - c.level);
        for (int i = 0; i < dom_.dim; ++i) {
            lo[i] = c.index[i] * w;
            hi[i] = lo[i] + w;
        }
    }

    std::int64_t cell_node(std::int64_t cell) const { return offsets_[dom_.max_level] + cell; }
    bool is_cell(std::int64_t node) const { return node >= offsets_[dom_.max_level]; }
    std::int64_t cell_of_node(std::int64_t node) const { return node - offsets_[dom_.max_level]; }

    double volume_of(std::int64_t node) const {
        int lev = level_of(node);
        return 1.0 / static_cast<double>(std::int64_t{1} << (static_cast<std::int64_t>(dom_.dim) * lev));
    }

    // node of `cell` at coarser `level`
    std::int64_t ancestor_at(std::int64_t cell, int level) const {
        std::array<std::int64_t, kMaxDim> k{};
        std::int64_t rest = cell;
        std::int64_t side = dom_.cells_per_side();
        for (int i = dom_.dim - 1; i >= 0; --i) {
            k[i] = rest % side;
            rest /= side;
        }
        std::int64_t lside = std::int64_t{1} << level;
        std::int64_t lin = 0;
        int sh = dom_.max_level - level;
        for (int i = 0; i < dom_.dim; ++i) lin = lin * lside + (k[i] >> sh);
        return offsets_[level] + lin;
    }

  private:
    Domain dom_;
    std::vector<std::int64_t> offsets_;
};

}  // namespace dyadic

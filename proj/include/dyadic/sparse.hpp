#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "dyadic/grid_function.hpp"
#include "dyadic/rng.hpp"

namespace dyadic {

namespace detail {

// Dinic max-flow on a small graph; capacities in cell units.
class MaxFlow {
  public:
    explicit MaxFlow(int n) : head_(n, -1) {}
    void add_edge(int u, int v, double cap) {
        edges_.push_back({v, head_[u], cap});
        head_[u] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({u, head_[v], 0.0});
        head_[v] = static_cast<int>(edges_.size()) - 1;
    }
    double run(int s, int t) {
        double flow = 0.0;
        while (bfs(s, t)) {
            iter_ = head_;
            double f;
            while ((f = dfs(s, t, 1e18)) > 1e-12) flow += f;
        }
        return flow;
    }

  private:
    struct Edge {
        int to, next;
        double cap;
    };
    std::vector<Edge> edges_;
    std::vector<int> head_, level_, iter_;

    bool bfs(int s, int t) {
        level_.assign(head_.size(), -1);
        std::queue<int> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int e = head_[u]; e != -1; e = edges_[e].next) {
                if (edges_[e].cap > 1e-12 && level_[edges_[e].to] < 0) {
                    level_[edges_[e].to] = level_[u] + 1;
                    q.push(edges_[e].to);
                }
            }
        }
        return level_[t] >= 0;
    }
    double dfs(int u, int t, double limit) {
        if (u == t) return limit;
        for (int& e = iter_[u]; e != -1; e = edges_[e].next) {
            auto& ed = edges_[e];
            if (ed.cap > 1e-12 && level_[ed.to] == level_[u] + 1) {
                double d = dfs(ed.to, t, std::min(limit, ed.cap));
                if (d > 1e-12) {
                    ed.cap -= d;
                    edges_[e ^ 1].cap += d;
                    return d;
                }
            }
        }
        return 0.0;
    }
};

inline bool node_contains(const DyadicTree& tree, std::int64_t outer, std::int64_t inner) {
    int lo = tree.level_of(outer), li = tree.level_of(inner);
    if (lo > li) return false;
    if (lo == li) return outer == inner;
    std::int64_t a = inner;
    for (int l = li; l > lo; --l) a = tree.parent_of(a);
    return a == outer;
}

}  // namespace detail

// Finite family of shift-0 cubes with a verified disjoint witness E_Q per cube.
class SparseCollection {
  public:
    SparseCollection() = default;
    SparseCollection(const Domain& dom, double eta, std::vector<std::int64_t> nodes,
                     std::vector<std::vector<std::int64_t>> witness)
        : dom_(dom), eta_(eta), nodes_(std::move(nodes)), witness_(std::move(witness)) {}

    const Domain& domain() const { return dom_; }
    double eta() const { return eta_; }
    const std::vector<std::int64_t>& nodes() const { return nodes_; }
    const std::vector<std::int64_t>& witness(std::size_t i) const { return witness_[i]; }
    std::size_t size() const { return nodes_.size(); }

    // members contained in `root`: the localized family S(Q_0)
    std::vector<std::int64_t> restricted_to(const DyadicTree& tree, std::int64_t root) const {
        std::vector<std::int64_t> out;
        for (auto n : nodes_)
            if (detail::node_contains(tree, root, n)) out.push_back(n);
        return out;
    }

  private:
    Domain dom_;
    double eta_ = 0.5;
    std::vector<std::int64_t> nodes_;
    std::vector<std::vector<std::int64_t>> witness_;
};

struct SparseVerifyResult {
    bool greedy_ok = false;
    double achieved_eta = 1.0;      // min over Q of |E_Q|/|Q| under the canonical witness
    std::int64_t worst_node = -1;
    bool flow_checked = false;
    bool flow_feasible = false;     // exact feasibility allowing fractional cell splits
    std::optional<SparseCollection> collection;
};

// Canonical witness: E_Q := Q minus the maximal proper members inside Q.  If
// that fails the requested eta, an exact max-flow feasibility check (cells may
// be split fractionally between cubes) decides whether any witness exists.
inline SparseVerifyResult verify_sparse(const Domain& dom, std::vector<std::int64_t> nodes, double eta,
                                        bool flow_on_failure = true) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("verify_sparse: eta must be in (0,1)");
    DyadicTree tree(dom);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::unordered_set<std::int64_t> member(nodes.begin(), nodes.end());

    // lowest strict S-ancestor of each member; -1 when none
    auto lowest_ancestor = [&](std::int64_t n) -> std::int64_t {
        std::int64_t a = n;
        for (int l = tree.level_of(n); l > 0; --l) {
            a = tree.parent_of(a);
            if (member.count(a)) return a;
        }
        return -1;
    };
    std::unordered_map<std::int64_t, std::vector<std::int64_t>> max_children;
    for (auto n : nodes) {
        auto anc = lowest_ancestor(n);
        if (anc >= 0) max_children[anc].push_back(n);
    }

    SparseVerifyResult res;
    res.greedy_ok = true;
    std::vector<std::vector<std::int64_t>> witness(nodes.size());
    std::vector<char> covered(dom.cell_count(), 0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto n = nodes[i];
        auto it = max_children.find(n);
        if (it != max_children.end()) {
            for (auto c : it->second) {
                tree.cell_box(c, lo, hi);
                ones.for_each_cell(lo, hi, [&](std::int64_t cell) { covered[cell] = 1; });
            }
        }
        tree.cell_box(n, lo, hi);
        std::int64_t total = 0;
        ones.for_each_cell(lo, hi, [&](std::int64_t cell) {
            ++total;
            if (!covered[cell]) witness[i].push_back(cell);
        });
        double ratio = static_cast<double>(witness[i].size()) / static_cast<double>(total);
        if (ratio < res.achieved_eta) {
            res.achieved_eta = ratio;
            if (ratio < eta - 1e-12) res.worst_node = n;
        }
        if (it != max_children.end()) {
            for (auto c : it->second) {
                tree.cell_box(c, lo, hi);
                ones.for_each_cell(lo, hi, [&](std::int64_t cell) { covered[cell] = 0; });
            }
        }
    }
    res.greedy_ok = res.achieved_eta >= eta - 1e-12;
    if (res.greedy_ok) {
        res.collection = SparseCollection(dom, eta, nodes, std::move(witness));
        return res;
    }
    if (!flow_on_failure) return res;

    // source 0, cubes 1..m, cells m+1..m+N, sink m+N+1; unit = one cell
    res.flow_checked = true;
    int m = static_cast<int>(nodes.size());
    std::int64_t ncells = dom.cell_count();
    detail::MaxFlow mf(m + static_cast<int>(ncells) + 2);
    int sink = m + static_cast<int>(ncells) + 1;
    double demand_total = 0.0;
    for (int i = 0; i < m; ++i) {
        tree.cell_box(nodes[i], lo, hi);
        std::int64_t cube_cells = 1;
        for (int d = 0; d < dom.dim; ++d) cube_cells *= (hi[d] - lo[d]);
        double demand = eta * static_cast<double>(cube_cells);
        demand_total += demand;
        mf.add_edge(0, 1 + i, demand);
        ones.for_each_cell(lo, hi, [&](std::int64_t cell) {
            mf.add_edge(1 + i, 1 + m + static_cast<int>(cell), 1e18);
        });
    }
    for (std::int64_t c = 0; c < ncells; ++c) mf.add_edge(1 + m + static_cast<int>(c), sink, 1.0);
    double flow = mf.run(0, sink);
    res.flow_feasible = flow >= demand_total - 1e-9;
    return res;
}

// f = g + sum_P b_P with mean-zero localized bad parts on the maximal cubes
// where the average exceeds lambda.  Bad parts are signed, so they live as raw
// cell vectors rather than (nonnegative) GridFunctions.
struct CZDecomposition {
    GridFunction good;
    std::vector<std::int64_t> bad_nodes;
    std::vector<std::vector<double>> bad_parts;  // aligned with bad_nodes, supported on them
    std::vector<std::int64_t> omega_cells;
    double lambda = 0.0;
};

inline CZDecomposition cz_decompose(const GridFunction& f, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("cz_decompose: lambda must be positive");
    const Domain& dom = f.domain();
    DyadicTree tree(dom);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    auto avg = [&](std::int64_t node) {
        tree.cell_box(node, lo, hi);
        double cells = 1.0;
        for (int i = 0; i < dom.dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
        return f.box_pow_sum(1.0, lo, hi) / cells;
    };
    if (avg(0) > lambda)
        throw std::domain_error("cz_decompose: root average exceeds the height (degenerate decomposition)");

    CZDecomposition out;
    out.lambda = lambda;
    std::vector<std::int64_t> stack{0}, kids;
    while (!stack.empty()) {
        auto node = stack.back();
        stack.pop_back();
        if (avg(node) > lambda) {
            out.bad_nodes.push_back(node);
            continue;
        }
        if (!tree.is_cell(node)) {
            tree.children_of(node, kids);
            for (auto k : kids) stack.push_back(k);
        }
    }
    std::sort(out.bad_nodes.begin(), out.bad_nodes.end());
    std::vector<double> g = f.values();
    for (auto node : out.bad_nodes) {
        double a = avg(node);
        tree.cell_box(node, lo, hi);
        std::vector<double> b(dom.cell_count(), 0.0);
        f.for_each_cell(lo, hi, [&](std::int64_t c) {
            b[c] = f[c] - a;
            g[c] = a;
            out.omega_cells.push_back(c);
        });
        out.bad_parts.push_back(std::move(b));
    }
    out.good = GridFunction(dom, std::move(g));
    return out;
}

// Principal cubes of one coordinate: stopping family from Q_0 where the
// v-weighted average of f more than doubles.
struct StoppingFamily {
    std::int64_t root = 0;
    std::vector<std::int64_t> members;                     // the family E
    std::unordered_map<std::int64_t, double> lambda;       // lambda_Q over S(Q_0)
    std::unordered_map<std::int64_t, std::int64_t> pi;     // projection S(Q_0) -> E
};

inline StoppingFamily principal_cubes(const GridFunction& f, const GridFunction& v, std::int64_t q0,
                                      const SparseCollection& S) {
    const Domain& dom = f.domain();
    DyadicTree tree(dom);
    auto in_S = std::find(S.nodes().begin(), S.nodes().end(), q0) != S.nodes().end();
    if (!in_S) throw std::invalid_argument("principal_cubes: Q0 must belong to S");
    auto cubes = S.restricted_to(tree, q0);  // sorted ascending = level-major
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    const double cellvol = dom.cell_volume();

    StoppingFamily fam;
    fam.root = q0;
    for (auto n : cubes) {
        tree.cell_box(n, lo, hi);
        double fint = f.box_pow_sum(1.0, lo, hi) * cellvol;
        double vmass = v.box_pow_sum(1.0, lo, hi) * cellvol;
        fam.lambda[n] = fint / vmass;  // <f v^{-1}>^v_{1,Q}
    }

    std::vector<std::int64_t> frontier{q0};
    fam.members.push_back(q0);
    while (!frontier.empty()) {
        std::vector<std::int64_t> next;
        for (auto M : frontier) {
            double lamM = fam.lambda[M];
            // maximal members of S(Q0) strictly inside the doubling region
            std::vector<std::int64_t> chosen;
            for (auto n : cubes) {  // ascending => larger cubes first
                if (n == M || !detail::node_contains(tree, M, n)) continue;
                if (!(fam.lambda[n] > 2.0 * lamM)) continue;
                bool shadowed = false;
                for (auto c : chosen)
                    if (detail::node_contains(tree, c, n)) {
                        shadowed = true;
                        break;
                    }
                if (!shadowed) chosen.push_back(n);
            }
            for (auto c : chosen) {
                fam.members.push_back(c);
                next.push_back(c);
            }
        }
        frontier = std::move(next);
    }
    std::sort(fam.members.begin(), fam.members.end());
    fam.members.erase(std::unique(fam.members.begin(), fam.members.end()), fam.members.end());

    for (auto n : cubes) {
        std::int64_t best = -1;
        int best_level = -1;
        for (auto M : fam.members) {
            if (detail::node_contains(tree, M, n)) {
                int lev = tree.level_of(M);
                if (lev > best_level) {
                    best_level = lev;
                    best = M;
                }
            }
        }
        fam.pi[n] = best;  // Q0 contains everything, so best >= 0
    }
    return fam;
}

// max over cells of (sum_{Q in E, Q ni x} lambda_Q) / (2 sup_{Q in E, Q ni x} lambda_Q);
// the lacunarity bound eq of the stopping construction makes this <= 1.
inline double principal_cubes_sum_ratio(const DyadicTree& tree, const StoppingFamily& fam) {
    const Domain& dom = tree.domain();
    std::vector<double> sum(dom.cell_count(), 0.0), mx(dom.cell_count(), 0.0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (auto M : fam.members) {
        double lam = fam.lambda.at(M);
        tree.cell_box(M, lo, hi);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) {
            sum[c] += lam;
            mx[c] = std::max(mx[c], lam);
        });
    }
    double worst = 0.0;
    tree.cell_box(fam.root, lo, hi);
    ones.for_each_cell(lo, hi, [&](std::int64_t c) {
        if (mx[c] > 0.0) worst = std::max(worst, sum[c] / (2.0 * mx[c]));
    });
    return worst;
}

// Superlevel set {A^r_S(a) > lambda} decomposed into maximal dyadic cubes.
// Returns the disjoint cubes; asserts the exact union property and that each
// returned cube's parent meets the complement.
inline std::vector<std::int64_t> superlevel_decomposition(const DyadicTree& tree,
                                                          const std::vector<std::int64_t>& nodes,
                                                          const std::vector<double>& coeff, double r,
                                                          double lambda) {
    const Domain& dom = tree.domain();
    std::vector<double> acc(dom.cell_count(), 0.0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!(coeff[i] > 0.0)) throw std::invalid_argument("superlevel_decomposition: coefficients must be positive");
        tree.cell_box(nodes[i], lo, hi);
        double add = r == kInf ? coeff[i] : std::pow(coeff[i], r);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) {
            if (r == kInf)
                acc[c] = std::max(acc[c], add);
            else
                acc[c] += add;
        });
    }
    std::vector<char> in_set(dom.cell_count(), 0);
    for (std::int64_t c = 0; c < dom.cell_count(); ++c) {
        double val = r == kInf ? acc[c] : std::pow(acc[c], 1.0 / r);
        in_set[c] = val > lambda ? 1 : 0;
    }
    // per-node counts of covered cells, then maximal fully-covered nodes
    std::vector<std::int64_t> maximal, stack{0}, kids;
    auto count_in = [&](std::int64_t node) {
        tree.cell_box(node, lo, hi);
        std::int64_t tot = 0, inn = 0;
        ones.for_each_cell(lo, hi, [&](std::int64_t c) {
            ++tot;
            inn += in_set[c];
        });
        return std::make_pair(inn, tot);
    };
    while (!stack.empty()) {
        auto node = stack.back();
        stack.pop_back();
        auto [inn, tot] = count_in(node);
        if (inn == tot && tot > 0) {
            maximal.push_back(node);
            continue;
        }
        if (inn == 0 || tree.is_cell(node)) continue;
        tree.children_of(node, kids);
        for (auto k : kids) stack.push_back(k);
    }
    std::sort(maximal.begin(), maximal.end());
    // union == superlevel set, cell by cell
    std::vector<char> unioned(dom.cell_count(), 0);
    for (auto n : maximal) {
        tree.cell_box(n, lo, hi);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) { unioned[c] = 1; });
    }
    for (std::int64_t c = 0; c < dom.cell_count(); ++c)
        if (unioned[c] != in_set[c]) throw std::logic_error("superlevel_decomposition: union mismatch");
    for (auto n : maximal) {
        if (n == 0) continue;  // root has no parent; nothing to certify
        auto [inn, tot] = count_in(tree.parent_of(n));
        if (inn == tot) throw std::logic_error("superlevel_decomposition: parent fully inside the level set");
    }
    return maximal;
}

// h_{S(Q0)} = sum of indicators of the members inside Q0; integer-valued.
inline GridFunction height_function(const SparseCollection& S, std::int64_t q0) {
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    std::vector<double> h(dom.cell_count(), 0.0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (auto n : S.restricted_to(tree, q0)) {
        tree.cell_box(n, lo, hi);
        ones.for_each_cell(lo, hi, [&](std::int64_t c) { h[c] += 1.0; });
    }
    return GridFunction(dom, std::move(h));
}

struct RandomSparseOptions {
    int root_level = 2;        // coarsest level populated
    double p_nest = 0.9;       // acceptance bias under an existing member
    double p_new = 0.6;        // acceptance for fresh branches
    int max_count = 400;
};

// Depth-biased random eta-sparse family: top-down greedy with exact witness
// volume budgets, so the canonical witness always certifies the result.
inline SparseCollection random_sparse(const Domain& dom, std::uint64_t seed, double eta, int count,
                                      const RandomSparseOptions& opts = {}) {
    DyadicTree tree(dom);
    Rng rng(seed);
    int root_level = std::min(opts.root_level, dom.max_level - 1);
    std::vector<std::int64_t> cand;
    for (int lev = root_level; lev <= dom.max_level; ++lev) {
        std::int64_t beg = tree.node_at(lev, 0);
        std::int64_t cnt = std::int64_t{1} << (static_cast<std::int64_t>(dom.dim) * lev);
        std::vector<std::int64_t> level_nodes(cnt);
        for (std::int64_t i = 0; i < cnt; ++i) level_nodes[i] = beg + i;
        for (std::int64_t i = cnt - 1; i > 0; --i) std::swap(level_nodes[i], level_nodes[rng.uniform_index(i + 1)]);
        cand.insert(cand.end(), level_nodes.begin(), level_nodes.end());
    }
    std::unordered_set<std::int64_t> member;
    std::unordered_map<std::int64_t, double> free_cells;
    std::vector<std::int64_t> chosen;
    auto cells_of = [&](std::int64_t n) {
        return static_cast<double>(std::int64_t{1}
                                   << (static_cast<std::int64_t>(dom.dim) * (dom.max_level - tree.level_of(n))));
    };
    auto lowest_anc = [&](std::int64_t n) -> std::int64_t {
        std::int64_t a = n;
        for (int l = tree.level_of(n); l > 0; --l) {
            a = tree.parent_of(a);
            if (member.count(a)) return a;
        }
        return -1;
    };
    for (auto n : cand) {
        if (static_cast<int>(chosen.size()) >= std::min(count, opts.max_count)) break;
        if (member.count(n)) continue;
        auto anc = lowest_anc(n);
        if (!rng.bernoulli(anc >= 0 ? opts.p_nest : opts.p_new)) continue;
        double vol = cells_of(n);
        if (anc >= 0 && free_cells[anc] - vol < eta * cells_of(anc) - 1e-9) continue;
        if (anc >= 0) free_cells[anc] -= vol;
        free_cells[n] = vol;
        member.insert(n);
        chosen.push_back(n);
    }
    if (chosen.empty()) throw std::runtime_error("random_sparse: generator produced an empty family");
    auto res = verify_sparse(dom, chosen, eta, false);
    if (!res.greedy_ok) throw std::logic_error("random_sparse: budget construction failed verification");
    return *res.collection;
}

// Stopping cubes of the product-average maximal function at geometric heights
// a^k, with a = (2^d/(1-eta))^m so the family is eta-sparse; verified before
// returning.
inline SparseCollection sparse_from_maximal(const std::vector<GridFunction>& fs, double eta) {
    if (fs.empty()) throw std::invalid_argument("sparse_from_maximal: empty tuple");
    const Domain& dom = fs[0].domain();
    DyadicTree tree(dom);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    auto prod_avg = [&](std::int64_t node) {
        tree.cell_box(node, lo, hi);
        double cells = 1.0;
        for (int i = 0; i < dom.dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
        double p = 1.0;
        for (auto& f : fs) p *= f.box_pow_sum(1.0, lo, hi) / cells;
        return p;
    };
    double t0 = prod_avg(0);
    if (!(t0 > 0.0)) throw std::runtime_error("sparse_from_maximal: zero root average");
    int m = static_cast<int>(fs.size());
    double ratio = std::pow(std::ldexp(1.0, dom.dim) / (1.0 - eta), m);
    double maxval = t0;
    for (std::int64_t node = 0; node < tree.node_count(); ++node) maxval = std::max(maxval, prod_avg(node));

    // thresholds start one ratio above the root average: the generation picked
    // right at t0 could otherwise cover nearly all of the root and break its
    // witness budget
    std::vector<std::int64_t> picked{0};
    std::vector<std::int64_t> stack, kids;
    for (double t = t0 * ratio; t < maxval; t *= ratio) {
        stack.assign(1, 0);
        while (!stack.empty()) {
            auto node = stack.back();
            stack.pop_back();
            if (prod_avg(node) > t) {
                picked.push_back(node);
                continue;
            }
            if (tree.is_cell(node)) continue;
            tree.children_of(node, kids);
            for (auto k : kids) stack.push_back(k);
        }
    }
    auto res = verify_sparse(dom, picked, eta, false);
    if (!res.greedy_ok) throw std::logic_error("sparse_from_maximal: family failed eta verification");
    return *res.collection;
}

}  // namespace dyadic

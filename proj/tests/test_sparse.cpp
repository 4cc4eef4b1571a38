#include <catch2/catch_amalgamated.hpp>

#include "dyadic/sparse.hpp"
#include "oracles.hpp"

using namespace dyadic;
using Catch::Approx;

namespace {

double witness_cell_ratio(const DyadicTree& tree, const SparseCollection& S, std::size_t i) {
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    tree.cell_box(S.nodes()[i], lo, hi);
    std::int64_t total = 1;
    for (int d = 0; d < tree.domain().dim; ++d) total *= (hi[d] - lo[d]);
    return static_cast<double>(S.witness(i).size()) / static_cast<double>(total);
}

void check_witness_invariants(const SparseCollection& S) {
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    std::vector<char> seen(dom.cell_count(), 0);
    for (std::size_t i = 0; i < S.size(); ++i) {
        Cube q = tree.cube_of(S.nodes()[i]);
        for (auto c : S.witness(i)) {
            REQUIRE(oracle::cell_in_cube(dom, c, q));  // E_Q inside Q
            REQUIRE(!seen[c]);                         // pairwise disjoint
            seen[c] = 1;
        }
        REQUIRE(witness_cell_ratio(tree, S, i) >= S.eta() - 1e-12);
    }
}

}  // namespace

TEST_CASE("verify_sparse: nested chain has the expected canonical witness") {
    Domain dom(1, 2);
    DyadicTree tree(dom);
    std::vector<std::int64_t> chain{
        tree.node_of(Cube::root(1)),
        tree.node_of(Cube(1, 1, {0}, {0})),
        tree.node_of(Cube(1, 2, {0}, {0})),
    };
    auto res = verify_sparse(dom, chain, 0.5);
    REQUIRE(res.greedy_ok);
    CHECK(res.achieved_eta == Approx(0.5));
    check_witness_invariants(*res.collection);
    // E_root = [1/2,1) = cells {2,3}
    auto& wroot = res.collection->witness(0);
    CHECK(wroot == std::vector<std::int64_t>{2, 3});
}

TEST_CASE("verify_sparse: one level of disjoint cubes takes eta up to 1") {
    Domain dom(2, 2);
    DyadicTree tree(dom);
    std::vector<std::int64_t> level1;
    for (std::int64_t k = 0; k < 4; ++k) level1.push_back(tree.node_at(1, k));
    auto res = verify_sparse(dom, level1, 0.999);
    REQUIRE(res.greedy_ok);
    CHECK(res.achieved_eta == Approx(1.0));
}

TEST_CASE("verify_sparse: full tree fails greedily, flow decides") {
    // Full dyadic tree: every E_Q is empty under the canonical witness.
    // At L=1 the fractional relaxation is exactly feasible; at L=2 the total
    // demand exceeds the volume, so even the flow check fails.
    Domain d1(1, 1);
    DyadicTree t1(d1);
    std::vector<std::int64_t> full1{0, 1, 2};
    auto r1 = verify_sparse(d1, full1, 0.5);
    CHECK_FALSE(r1.greedy_ok);
    CHECK(r1.achieved_eta == Approx(0.0));
    REQUIRE(r1.flow_checked);
    CHECK(r1.flow_feasible);

    Domain d2(1, 2);
    DyadicTree t2(d2);
    std::vector<std::int64_t> full2;
    for (std::int64_t n = 0; n < t2.node_count(); ++n) full2.push_back(n);
    auto r2 = verify_sparse(d2, full2, 0.5);
    CHECK_FALSE(r2.greedy_ok);
    REQUIRE(r2.flow_checked);
    CHECK_FALSE(r2.flow_feasible);
}

TEST_CASE("cz_decompose: worked example and degenerate height") {
    Domain dom(1, 2);
    GridFunction f(dom, {0, 0, 8, 0});
    auto cz = cz_decompose(f, 3.0);
    REQUIRE(cz.bad_nodes.size() == 1);
    DyadicTree tree(dom);
    CHECK(tree.cube_of(cz.bad_nodes[0]) == Cube(1, 1, {0}, {1}));
    CHECK(cz.good.values() == std::vector<double>{0, 0, 4, 4});
    CHECK(cz.bad_parts[0] == std::vector<double>{0, 0, 4, -4});

    CHECK_THROWS_AS(cz_decompose(f, 1.5), std::domain_error);  // root average is 2

    auto none = cz_decompose(f, 9.0);
    CHECK(none.bad_nodes.empty());
    CHECK(none.good.values() == f.values());
}

TEST_CASE("cz_decompose invariants on random data") {
    Rng rng(71);
    Domain dom(1, 6);
    DyadicTree tree(dom);
    for (int trial = 0; trial < 100; ++trial) {
        GridFunction f = oracle::random_function(dom, rng);
        double rootavg = 0.0;
        for (std::int64_t c = 0; c < f.size(); ++c) rootavg += f[c];
        rootavg /= static_cast<double>(f.size());
        double lambda = rootavg * (1.0 + rng.uniform01() * 3.0);
        auto cz = cz_decompose(f, lambda);

        // f = g + sum b_P cellwise
        std::vector<double> recon = cz.good.values();
        for (auto& b : cz.bad_parts)
            for (std::int64_t c = 0; c < f.size(); ++c) recon[c] += b[c];
        for (std::int64_t c = 0; c < f.size(); ++c) CHECK(recon[c] == Approx(f[c]).epsilon(1e-12).margin(1e-12));

        // mean-zero localized bad parts on disjoint cubes
        for (std::size_t i = 0; i < cz.bad_nodes.size(); ++i) {
            Cube P = tree.cube_of(cz.bad_nodes[i]);
            double mean = 0.0;
            for (std::int64_t c = 0; c < f.size(); ++c) {
                if (!oracle::cell_in_cube(dom, c, P)) CHECK(cz.bad_parts[i][c] == 0.0);
                mean += cz.bad_parts[i][c];
            }
            CHECK(std::abs(mean) / static_cast<double>(f.size()) <= 1e-12 * lambda);
            for (std::size_t j = i + 1; j < cz.bad_nodes.size(); ++j)
                CHECK(disjoint(P, tree.cube_of(cz.bad_nodes[j])));
        }

        // height bound on the good part
        double gmax = 0.0;
        for (std::int64_t c = 0; c < f.size(); ++c) gmax = std::max(gmax, cz.good[c]);
        CHECK(gmax <= std::ldexp(lambda, dom.dim) * (1 + 1e-12));
        CHECK(lp_norm_measure(cz.good, 1.0, GridFunction::constant(dom, 1.0)) <=
              lp_norm_measure(f, 1.0, GridFunction::constant(dom, 1.0)) * (1 + 1e-12));
    }
}

TEST_CASE("principal cubes: constant density stops at the root") {
    Domain dom(1, 3);
    auto S = random_sparse(dom, 5, 0.5, 40, {0, 0.9, 0.9, 40});
    DyadicTree tree(dom);
    GridFunction v = GridFunction::constant(dom, 1.0);
    GridFunction f = GridFunction::constant(dom, 2.0);  // f v^{-1} constant
    auto fam = principal_cubes(f, v, S.nodes()[0], S);
    CHECK(fam.members == std::vector<std::int64_t>{S.nodes()[0]});
}

TEST_CASE("principal cubes: spike builds a lacunary chain") {
    Domain dom(1, 4);
    DyadicTree tree(dom);
    // full chain to the first leaf
    std::vector<std::int64_t> chain;
    for (int lev = 0; lev <= 4; ++lev) chain.push_back(tree.node_at(lev, 0));
    auto res = verify_sparse(dom, chain, 0.5);
    REQUIRE(res.greedy_ok);
    // point mass: averages double per level, so the strict-doubling selection
    // picks every other chain member
    std::vector<double> vals(16, 0.0);
    vals[0] = 80.0;
    GridFunction f(dom, std::move(vals));
    GridFunction v = GridFunction::constant(dom, 1.0);
    auto fam = principal_cubes(f, v, 0, *res.collection);
    CHECK(fam.members.size() == 3);  // root, level 2, level 4
    // lacunarity: along the chain each member's average more than doubles
    for (auto M : fam.members) {
        if (M == 0) continue;
        // the parent member is pi of the dyadic parent inside S
        auto it = fam.pi.find(tree.parent_of(M));
        REQUIRE(it != fam.pi.end());
        CHECK(fam.lambda.at(M) > 2.0 * fam.lambda.at(it->second));
    }
    // eq boundedness: sum over members <= 2 sup (checked as ratio <= 1)
    CHECK(principal_cubes_sum_ratio(tree, fam) <= 1.0 + 1e-12);
}

TEST_CASE("principal cubes: projection bound on random data") {
    Rng rng(73);
    Domain dom(1, 6);
    DyadicTree tree(dom);
    for (int trial = 0; trial < 20; ++trial) {
        auto S = random_sparse(dom, 100 + trial, 0.5, 200, {1, 0.95, 0.6, 200});
        GridFunction f = oracle::random_function(dom, rng);
        GridFunction v = oracle::random_function(dom, rng, 0.5);
        std::int64_t q0 = S.nodes()[0];
        auto fam = principal_cubes(f, v, q0, S);
        for (auto n : S.restricted_to(tree, q0)) {
            auto pi = fam.pi.at(n);
            CHECK(detail::node_contains(tree, pi, n));
            CHECK(fam.lambda.at(n) <= 2.0 * fam.lambda.at(pi) * (1 + 1e-12));
        }
        CHECK(principal_cubes_sum_ratio(tree, fam) <= 1.0 + 1e-12);
    }
}

TEST_CASE("superlevel decomposition equals the cell-wise level set") {
    Domain dom(1, 5);
    DyadicTree tree(dom);
    Rng rng(79);
    for (int trial = 0; trial < 25; ++trial) {
        auto S = random_sparse(dom, 200 + trial, 0.5, 100, {1, 0.9, 0.7, 100});
        std::vector<double> a;
        for (std::size_t i = 0; i < S.size(); ++i) a.push_back(rng.lognormal(1.0));
        double r = trial % 3 == 0 ? kInf : 0.5 + rng.uniform01() * 2.0;

        // reference superlevel set
        std::vector<double> acc(dom.cell_count(), 0.0);
        for (std::size_t i = 0; i < S.size(); ++i) {
            Cube q = tree.cube_of(S.nodes()[i]);
            for (std::int64_t c = 0; c < dom.cell_count(); ++c)
                if (oracle::cell_in_cube(dom, c, q))
                    acc[c] = r == kInf ? std::max(acc[c], a[i]) : acc[c] + std::pow(a[i], r);
        }
        std::vector<double> Ar(dom.cell_count());
        for (std::int64_t c = 0; c < dom.cell_count(); ++c) Ar[c] = r == kInf ? acc[c] : std::pow(acc[c], 1.0 / r);
        double maxv = *std::max_element(Ar.begin(), Ar.end());
        for (double lambda : {maxv * 1.5, maxv * 0.6, maxv * 0.2}) {
            auto cubes = superlevel_decomposition(tree, S.nodes(), a, r, lambda);
            std::vector<char> unioned(dom.cell_count(), 0);
            for (auto n : cubes) {
                Cube q = tree.cube_of(n);
                for (std::int64_t c = 0; c < dom.cell_count(); ++c)
                    if (oracle::cell_in_cube(dom, c, q)) unioned[c] = 1;
            }
            for (std::int64_t c = 0; c < dom.cell_count(); ++c) REQUIRE(unioned[c] == (Ar[c] > lambda ? 1 : 0));
            for (std::size_t i = 0; i < cubes.size(); ++i)
                for (std::size_t j = i + 1; j < cubes.size(); ++j)
                    CHECK(disjoint(tree.cube_of(cubes[i]), tree.cube_of(cubes[j])));
        }
        CHECK(superlevel_decomposition(tree, S.nodes(), a, r, maxv * 1.5).empty());
    }
}

TEST_CASE("height function counts the covering members") {
    Domain dom(1, 3);
    DyadicTree tree(dom);
    std::vector<std::int64_t> chain;
    for (int lev = 0; lev <= 3; ++lev) chain.push_back(tree.node_at(lev, 0));
    auto res = verify_sparse(dom, chain, 0.5);
    auto h = height_function(*res.collection, 0);
    CHECK(h[0] == Approx(4.0));  // innermost cell sits under the whole chain
    CHECK(h[7] == Approx(1.0));

    auto single = verify_sparse(dom, {chain[1]}, 0.5);
    auto h1 = height_function(*single.collection, chain[1]);
    CHECK(h1[0] == Approx(1.0));
    CHECK(h1[4] == Approx(0.0));
}

TEST_CASE("random_sparse always verifies; sparse_from_maximal stopping cubes verify") {
    Rng rng(83);
    for (int d : {1, 2}) {
        Domain dom(d, d == 1 ? 8 : 4);
        for (int trial = 0; trial < 10; ++trial) {
            auto S = random_sparse(dom, 300 + trial, 0.5, 300, {d == 1 ? 2 : 1, 0.9, 0.6, 300});
            check_witness_invariants(S);
            auto res = verify_sparse(dom, S.nodes(), 0.5, false);
            CHECK(res.greedy_ok);
        }
        std::vector<GridFunction> fs{oracle::random_function(dom, rng), oracle::random_function(dom, rng)};
        auto SM = sparse_from_maximal(fs, 0.5);
        check_witness_invariants(SM);
        CHECK(SM.size() >= 1);
    }
}

TEST_CASE("verify_sparse validates eta") {
    Domain dom(1, 2);
    CHECK_THROWS_AS(verify_sparse(dom, {0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(verify_sparse(dom, {0}, 1.0), std::invalid_argument);
}

TEST_CASE("CZ at the multiplier-proof height K = 2m 3^d never degenerates") {
    // normalized densities decomposed at K/|E|: the root average is 1, the
    // height is at least K > 1, and the bad region obeys the weak (1,1) bound
    Rng rng(61);
    for (int d : {1, 2}) {
        Domain dom(d, d == 1 ? 6 : 3);
        GridFunction ones = GridFunction::constant(dom, 1.0);
        for (int m : {1, 2}) {
            double K = 2.0 * m * std::pow(3.0, d);
            for (int trial = 0; trial < 20; ++trial) {
                GridFunction raw = oracle::random_function(dom, rng);
                GridFunction f = raw.scale(1.0 / lp_norm_measure(raw, 1.0, ones));  // ||f||_1 = 1
                auto cz = cz_decompose(f, K);  // |E| = 1
                double omega = measure(ones, cz.omega_cells);
                CHECK(omega <= 1.0 / K + 1e-12);
            }
        }
    }
}

TEST_CASE("superlevel decomposition of a single cube") {
    Domain dom(1, 3);
    DyadicTree tree(dom);
    std::int64_t q0 = tree.node_at(1, 1);
    auto cubes = superlevel_decomposition(tree, {q0}, {1.0}, 1.0, 0.5);
    REQUIRE(cubes.size() == 1);
    CHECK(cubes[0] == q0);
    CHECK(superlevel_decomposition(tree, {q0}, {1.0}, 1.0, 1.5).empty());
}

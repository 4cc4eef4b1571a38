#include <catch2/catch_amalgamated.hpp>

#include "dyadic/grid_function.hpp"
#include <thread>

#include "oracles.hpp"

using namespace dyadic;
using Catch::Approx;

TEST_CASE("averages of constants and small exact cases") {
    Domain dom(1, 2);
    GridFunction f(dom, {1, 2, 3, 4});
    Cube half(1, 1, {0}, {0});
    CHECK(average(f, 2.0, half) == Approx(std::sqrt(2.5)).epsilon(1e-14));

    Domain dom1(1, 1);
    GridFunction g(dom1, {1, 3});
    CHECK(average(g, 1.0, Cube::root(1)) == Approx(2.0));

    Rng rng(3);
    GridFunction c = GridFunction::constant(dom, 2.718);
    GridFunction w = oracle::random_function(dom, rng);
    for (double p : {0.5, 1.0, 2.0, kInf}) {
        CHECK(average(c, p, half) == Approx(2.718));
        if (p != kInf) CHECK(average(c, p, half, w) == Approx(2.718));
    }
}

TEST_CASE("measure of cell sets") {
    Domain dom(1, 1);
    GridFunction w(dom, {1, 3});
    GridFunction one = GridFunction::constant(dom, 1.0);
    CHECK(measure(one, {0, 1}) == Approx(1.0));
    CHECK(measure(w, {}) == Approx(0.0).margin(0));
    CHECK(measure(w, {1}) == Approx(1.5));
}

TEST_CASE("weak norm via value scan") {
    Domain dom(1, 2);
    GridFunction f(dom, {4, 2, 1, 1});
    GridFunction one = GridFunction::constant(dom, 1.0);
    CHECK(weak_norm(f, 1.0, one) == Approx(1.0));

    // indicator: weak norm is w^p(E)^{1/p}
    Rng rng(5);
    GridFunction w = oracle::random_function(dom, rng);
    GridFunction ind(dom, {0, 1, 1, 0});
    double p = 1.7;
    double mass = (std::pow(w[1], p) + std::pow(w[2], p)) * dom.cell_volume();
    CHECK(weak_norm(ind, p, w) == Approx(std::pow(mass, 1.0 / p)));
}

TEST_CASE("weak norm is dominated by the strong norm") {
    Rng rng(17);
    Domain dom(1, 5);
    for (int trial = 0; trial < 100; ++trial) {
        GridFunction f = oracle::random_function(dom, rng);
        GridFunction w = oracle::random_function(dom, rng, 0.7);
        double p = 0.5 + rng.uniform01() * 2.5;
        CHECK(weak_norm(f, p, w) <= lp_norm(f, p, w) * (1 + 1e-12));
    }
}

TEST_CASE("Lorentz normalization: L^{p,p} equals L^p and indicators match") {
    Rng rng(23);
    Domain dom(1, 4);
    for (int trial = 0; trial < 40; ++trial) {
        GridFunction f = oracle::random_function(dom, rng);
        GridFunction v = oracle::random_function(dom, rng, 0.5);
        double p = 0.5 + rng.uniform01() * 2.0;
        CHECK(lorentz_norm(f, p, p, v) == Approx(lp_norm_measure(f, p, v)).epsilon(1e-10));
    }
    // s = inf delegates to the weak norm; indicators agree at every s
    GridFunction ind(dom, [] {
        std::vector<double> v(16, 0.0);
        v[3] = v[4] = v[5] = 1.0;
        return v;
    }());
    GridFunction v = GridFunction::constant(dom, 1.0);
    for (double s : {0.5, 1.0, 3.0, kInf})
        CHECK(lorentz_norm(ind, 2.0, s, v) == Approx(std::sqrt(3.0 / 16.0)).epsilon(1e-12));
}

TEST_CASE("Lorentz closed form at p=s=1") {
    Domain dom(1, 1);
    GridFunction f(dom, {2, 1});
    GridFunction v = GridFunction::constant(dom, 1.0);
    CHECK(lorentz_norm(f, 1.0, 1.0, v) == Approx(1.5).epsilon(1e-14));
}

TEST_CASE("homogeneity of averages and norms") {
    Rng rng(29);
    Domain dom(2, 3);
    GridFunction f = oracle::random_function(dom, rng);
    GridFunction w = oracle::random_function(dom, rng, 0.4);
    Cube q(2, 1, {}, {1, 0});
    for (double c : {0.1, 7.0}) {
        GridFunction cf = f.scale(c);
        CHECK(average(cf, 1.5, q) == Approx(c * average(f, 1.5, q)).epsilon(1e-12));
        CHECK(weak_norm(cf, 2.0, w) == Approx(c * weak_norm(f, 2.0, w)).epsilon(1e-12));
        CHECK(lp_norm(cf, 0.7, w) == Approx(c * lp_norm(f, 0.7, w)).epsilon(1e-12));
        CHECK(lorentz_norm(cf, 2.0, 1.0, w) == Approx(c * lorentz_norm(f, 2.0, 1.0, w)).epsilon(1e-12));
    }
}

TEST_CASE("p-means increase with the exponent") {
    Rng rng(31);
    Domain dom(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        GridFunction f = oracle::random_function(dom, rng);
        Cube q(1, static_cast<int>(rng.uniform_index(3)), {}, {});
        q.index[0] = static_cast<std::int64_t>(rng.uniform_index(std::int64_t{1} << q.level));
        double p = 0.3 + rng.uniform01();
        double r = p + rng.uniform01() * 2.0;
        CHECK(average(f, p, q) <= average(f, r, q) * (1 + 1e-12));
        CHECK(average(f, r, q) <= average(f, kInf, q) * (1 + 1e-12));
    }
}

TEST_CASE("accelerated averages match the naive sums") {
    Rng rng(37);
    for (int d : {1, 2}) {
        Domain dom(d, d == 1 ? 10 : 5);
        GridFunction f = oracle::random_function(dom, rng);
        GridFunction w = oracle::random_function(dom, rng, 0.5);
        for (int trial = 0; trial < 50; ++trial) {
            Cube q;
            q.dim = d;
            q.level = static_cast<int>(rng.uniform_index(dom.max_level + 1));
            for (int i = 0; i < d; ++i)
                q.index[i] = static_cast<std::int64_t>(rng.uniform_index(std::int64_t{1} << q.level));
            double p = 0.5 + rng.uniform01() * 2.0;
            CHECK(average(f, p, q) == Approx(oracle::naive_average(f, p, q)).epsilon(1e-12));
            CHECK(average(f, p, q, w) == Approx(oracle::naive_weighted_average(f, p, q, w)).epsilon(1e-12));
        }
    }
}

TEST_CASE("exponent tuples derive p and conjugates") {
    ExponentTuple pv({2.0, 2.0});
    CHECK(pv.p() == Approx(1.0));
    CHECK(pv.conj(0) == Approx(2.0));
    CHECK(pv.p0() == kInf);  // p' of p = 1

    ExponentTuple pv2({8.0, 8.0});
    CHECK(pv2.p() == Approx(4.0));
    CHECK(pv2.p0() == Approx(4.0 / 3.0));

    ExponentTuple pv3({1.0, kInf});
    CHECK(pv3.p() == Approx(1.0));
    CHECK(pv3.conj(0) == kInf);
    CHECK(pv3.conj(1) == Approx(1.0));

    ExponentTuple one({0.5, 0.5});
    CHECK(one.p() == Approx(0.25));
    CHECK_THROWS_AS(one.p0(), std::domain_error);
}

TEST_CASE("weighted average rejects zero weight mass") {
    Domain dom(1, 2);
    GridFunction f(dom, {1, 2, 3, 4});
    GridFunction w(dom, {0, 0, 1, 1});
    Cube left(1, 1, {0}, {0});
    CHECK_THROWS_AS(average(f, 1.0, left, w), std::domain_error);
    CHECK(average(f, 1.0, Cube(1, 1, {0}, {1}), w) == Catch::Approx(3.5));
}

TEST_CASE("prefix caches are safe under concurrent readers") {
    // the single-writer initialization contract: many threads forcing the
    // same lazily built tables must agree with a fresh serial evaluation
    Domain dom(1, 8);
    Rng rng(123);
    std::vector<double> vals(dom.cell_count());
    for (auto& x : vals) x = rng.lognormal(0.8);
    GridFunction shared(dom, vals);
    std::vector<double> results(8, 0.0);
    {
        std::vector<std::thread> pool;
        for (int t = 0; t < 8; ++t)
            pool.emplace_back([&, t] {
                Cube q(1, 2, {}, {t % 4});
                results[t] = average(shared, 1.0 + t, q);
            });
        for (auto& th : pool) th.join();
    }
    GridFunction fresh(dom, vals);
    for (int t = 0; t < 8; ++t) {
        Cube q(1, 2, {}, {t % 4});
        CHECK(results[t] == Catch::Approx(average(fresh, 1.0 + t, q)).epsilon(1e-15));
    }
}

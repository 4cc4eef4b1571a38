#pragma once

#include <map>
#include <numeric>

#include "dyadic/operators.hpp"
#include "dyadic/weights.hpp"

namespace dyadic {

// Per-experiment record: numeric rows for the CSV plus named summary stats.
struct ExperimentReport {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::map<std::string, double> stats;
    double fitted = std::numeric_limits<double>::quiet_NaN();
    double budget = std::numeric_limits<double>::quiet_NaN();
    double runtime_s = 0.0;
    bool pass = true;
    std::string note;

    std::string summary() const {
        std::ostringstream os;
        os << (pass ? "PASS" : "FAIL") << " " << name;
        for (double v : {fitted, budget}) {
            os << " ";
            if (std::isnan(v))
                os << "-";
            else
                os << v;
        }
        return os.str();
    }
};

struct LinearFit {
    double intercept = 0.0, slope = 0.0, r2 = 0.0;
    int n = 0;
};

inline LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    LinearFit f;
    f.n = static_cast<int>(xs.size());
    if (f.n < 2) return f;
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / f.n;
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / f.n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < f.n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxy * sxy) / (sxx * syy);
    return f;
}

// Equal-count bins in x; per bin the upper `quantile` of the ratios, as a
// (mean x, log ratio) point.  This is the decaying-regime envelope the good-
// lambda and height fits regress on.
inline std::vector<std::pair<double, double>> decay_envelope(std::vector<std::pair<double, double>> rows,
                                                             int nbins, double quantile) {
    std::vector<std::pair<double, double>> pts;
    if (rows.size() < 4) return pts;
    std::sort(rows.begin(), rows.end());
    std::size_t n = rows.size();
    for (int b = 0; b < nbins; ++b) {
        std::size_t lo = n * b / nbins, hi = n * (b + 1) / nbins;
        if (hi <= lo) continue;
        std::vector<double> ratios;
        double xsum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            xsum += rows[i].first;
            ratios.push_back(rows[i].second);
        }
        std::sort(ratios.begin(), ratios.end());
        double v = ratios[std::min(ratios.size() - 1,
                                   static_cast<std::size_t>(quantile * static_cast<double>(ratios.size())))];
        if (v > 0.0) pts.emplace_back(xsum / static_cast<double>(hi - lo), std::log(v));
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Kolmogorov brackets
// ---------------------------------------------------------------------------

// For each theta, the optimal constant of the truncated-integral bound and
// the constructive half-measure variant; both brackets around the weak norm
// hold with the displayed constants exactly (up to float round-off).
inline ExperimentReport kolmogorov_check(const GridFunction& f, double p, const GridFunction& mu,
                                         const std::vector<double>& theta_grid, int n_random_sets,
                                         std::uint64_t seed) {
    ExperimentReport rep;
    rep.name = "kolmogorov";
    rep.columns = {"theta", "C", "lower_ok", "upper_ok"};
    const Domain& dom = f.domain();
    const double vol = dom.cell_volume();
    double weak = weak_norm_measure(f, p, mu);

    // candidate sets: every top-k-by-value set (contains all superlevel sets)
    // plus random cell subsets
    std::vector<std::int64_t> order(dom.cell_count());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] > f[b]; });
    std::vector<std::vector<std::int64_t>> sets;
    std::vector<std::int64_t> acc;
    for (auto c : order) {
        acc.push_back(c);
        sets.push_back(acc);
    }
    Rng rng(seed);
    for (int i = 0; i < n_random_sets; ++i) {
        std::vector<std::int64_t> s;
        for (std::int64_t c = 0; c < dom.cell_count(); ++c)
            if (rng.bernoulli(0.4)) s.push_back(c);
        if (!s.empty()) sets.push_back(std::move(s));
    }

    bool all_ok = true;
    for (double theta : theta_grid) {
        if (!(theta > 0.0 && theta < p)) throw std::invalid_argument("kolmogorov_check: need 0 < theta < p");
        double C = 0.0;
        for (auto& E : sets) {
            double muE = 0.0, integ = 0.0;
            for (auto c : E) {
                muE += mu[c] * vol;
                integ += std::pow(f[c], theta) * mu[c] * vol;
            }
            if (muE <= 0.0) continue;
            double cand = std::pow((p - theta) / p * integ / std::pow(muE, 1.0 - theta / p), 1.0 / theta);
            C = std::max(C, cand);
        }
        bool lower = C <= weak * (1 + 1e-9);
        bool upper = weak <= std::pow(p / (p - theta), 1.0 / theta) * C * (1 + 1e-9);
        all_ok = all_ok && lower && upper;
        rep.rows.push_back({theta, C, lower ? 1.0 : 0.0, upper ? 1.0 : 0.0});
    }

    // half-measure variant: E' drops the largest values down to exactly half
    // the mass (fractional boundary cell), the minimizing choice
    double C2 = 0.0;
    for (auto& E : sets) {
        std::vector<std::int64_t> cells = E;
        std::sort(cells.begin(), cells.end(), [&](auto a, auto b) { return f[a] < f[b]; });
        double muE = 0.0;
        for (auto c : cells) muE += mu[c] * vol;
        if (muE <= 0.0) continue;
        double target = muE / 2.0, got = 0.0, integ = 0.0;
        for (auto c : cells) {
            double mass = mu[c] * vol;
            double take = std::min(mass, target - got);
            if (take <= 0.0) break;
            integ += f[c] * take;
            got += take;
        }
        C2 = std::max(C2, integ / std::pow(muE, 1.0 - 1.0 / p));
    }
    bool lower2 = std::pow(2.0, -1.0 / p) * C2 <= weak * (1 + 1e-9);
    bool upper2 = weak <= 2.0 * C2 * (1 + 1e-9);
    all_ok = all_ok && lower2 && upper2;

    rep.stats["weak_norm"] = weak;
    rep.stats["C_half_measure"] = C2;
    rep.stats["lower2_ok"] = lower2 ? 1.0 : 0.0;
    rep.stats["upper2_ok"] = upper2 ? 1.0 : 0.0;
    rep.pass = all_ok;
    rep.fitted = weak;
    rep.budget = weak;
    return rep;
}

// ---------------------------------------------------------------------------
// Good-lambda distributional inequality and its Lorentz corollary
// ---------------------------------------------------------------------------

struct GoodLambdaConfig {
    double q = 0.25;
    double r = kInf;                  // q < r
    std::vector<double> lambda_grid;  // empty: geometric grid over the A^q range
    std::vector<double> gamma_grid;   // empty: adaptive tau-quantiles of the coefficients
    int n_lambda = 24;
    int n_gamma = 40;
    double cor_p = 0.5, cor_s = 1.0;  // Lorentz norm of the corollary check
    int envelope_bins = 12;
    double envelope_quantile = 0.9;
};

struct GoodLambdaResult {
    std::vector<std::pair<double, double>> rows;  // (x = eta/(gamma FW), ratio)
    double fw = 1.0;
    double delta_env = 0.0, r2_env = 0.0;         // envelope fit
    double delta_raw = 0.0, r2_raw = 0.0;         // plain least squares on all rows
    double corollary_chat = 0.0;
    int skipped_rows = 0;
};

inline GoodLambdaResult good_lambda_experiment(const SparseCollection& S, const std::vector<double>& coeff,
                                               const GoodLambdaConfig& cfg, const GridFunction& w) {
    if (!(cfg.q < cfg.r)) throw std::invalid_argument("good_lambda_experiment: need q < r");
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    CoefficientMap cm{S.nodes(), coeff};
    GridFunction Aq = sparse_q_operator(tree, cm, cfg.q);
    GridFunction Ar = sparse_q_operator(tree, cm, cfg.r);
    GoodLambdaResult res;
    res.fw = fw_constant(w, CubeScope::DyadicGrid).value;
    const double eta = S.eta();
    const double exp_gap = 1.0 / cfg.q - (cfg.r == kInf ? 0.0 : 1.0 / cfg.r);

    auto wmass = [&](const std::function<bool(std::int64_t)>& pred) { return measure_where(w, pred); };

    std::vector<double> lambdas = cfg.lambda_grid;
    if (lambdas.empty()) {
        double mn = kInf, mx = 0.0;
        for (std::int64_t c = 0; c < Aq.size(); ++c)
            if (Aq[c] > 0.0) {
                mn = std::min(mn, Aq[c]);
                mx = std::max(mx, Aq[c]);
            }
        if (!(mx > 0.0)) throw std::invalid_argument("good_lambda_experiment: A^q vanishes");
        double lo = mn * 1.01, hi = mx / 2.001;
        for (int i = 0; i < cfg.n_lambda; ++i)
            lambdas.push_back(lo * std::pow(hi / lo, cfg.n_lambda == 1 ? 0.0 : static_cast<double>(i) /
                                                                              (cfg.n_lambda - 1)));
    }
    std::vector<double> avals = coeff;
    std::sort(avals.begin(), avals.end());

    for (double lam : lambdas) {
        double den = wmass([&](std::int64_t c) { return Aq[c] > lam; });
        double dbl = wmass([&](std::int64_t c) { return Aq[c] > 2.0 * lam; });
        // the inequality carries gamma information only when doubling shrinks
        if (!(den > 0.0) || !(dbl > 0.0) || dbl >= den) {
            ++res.skipped_rows;
            continue;
        }
        std::vector<double> gammas = cfg.gamma_grid;
        if (gammas.empty()) {
            for (int i = 0; i < cfg.n_gamma; ++i) {
                double u = 0.02 + 0.96 * static_cast<double>(i) / std::max(1, cfg.n_gamma - 1);
                double tau = avals[std::min(avals.size() - 1,
                                            static_cast<std::size_t>(u * static_cast<double>(avals.size())))];
                gammas.push_back(std::pow(tau / lam, cfg.q));
            }
            std::sort(gammas.begin(), gammas.end());
            gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
        }
        for (double gam : gammas) {
            double cut = std::pow(gam, exp_gap) * lam;
            double num = wmass([&](std::int64_t c) { return Aq[c] > 2.0 * lam && Ar[c] <= cut; });
            if (!(num > 0.0)) {
                ++res.skipped_rows;
                continue;
            }
            res.rows.emplace_back(eta / (gam * res.fw), num / den);
        }
    }

    auto pts = decay_envelope(res.rows, cfg.envelope_bins, cfg.envelope_quantile);
    std::vector<double> xs, ys;
    for (auto& [x, y] : pts) {
        xs.push_back(x);
        ys.push_back(y);
    }
    auto fe = fit_line(xs, ys);
    res.delta_env = -fe.slope;
    res.r2_env = fe.r2;
    xs.clear();
    ys.clear();
    for (auto& [x, rr] : res.rows) {
        xs.push_back(x);
        ys.push_back(std::log(rr));
    }
    auto fr = fit_line(xs, ys);
    res.delta_raw = -fr.slope;
    res.r2_raw = fr.r2;

    double lhs = lorentz_norm(Aq, cfg.cor_p, cfg.cor_s, w);
    double rhs = lorentz_norm(Ar, cfg.cor_p, cfg.cor_s, w);
    res.corollary_chat = lhs / (std::pow(res.fw / eta, exp_gap) * rhs);
    return res;
}

inline ExperimentReport make_report(const GoodLambdaResult& res, const std::string& name = "goodlambda") {
    ExperimentReport rep;
    rep.name = name;
    rep.columns = {"x", "ratio"};
    for (auto& [x, r] : res.rows) rep.rows.push_back({x, r});
    rep.stats = {{"fw", res.fw},           {"delta_env", res.delta_env}, {"r2_env", res.r2_env},
                 {"delta_raw", res.delta_raw}, {"r2_raw", res.r2_raw},   {"corollary_chat", res.corollary_chat},
                 {"skipped", static_cast<double>(res.skipped_rows)}};
    rep.fitted = res.delta_env;
    rep.budget = res.corollary_chat;
    rep.pass = res.delta_env > 0.0 && res.delta_raw > 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// John-Nirenberg height decay
// ---------------------------------------------------------------------------

inline ExperimentReport jn_height_experiment(const SparseCollection& S, std::int64_t q0, const GridFunction& w,
                                             const std::vector<double>& lambda_grid) {
    ExperimentReport rep;
    rep.name = "jnheight";
    rep.columns = {"lambda", "relative_mass"};
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    GridFunction h = height_function(S, q0);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    tree.cell_box(q0, lo, hi);
    double wq0 = w.box_pow_sum(1.0, lo, hi) * dom.cell_volume();
    double fw = fw_constant(w, CubeScope::DyadicGrid).value;

    std::vector<double> xs, ys;
    double prev = kInf;
    for (double lam : lambda_grid) {
        double mass = 0.0;
        w.for_each_cell(lo, hi, [&](std::int64_t c) {
            if (h[c] > lam) mass += w[c];
        });
        mass *= dom.cell_volume();
        double rel = mass / wq0;
        rep.rows.push_back({lam, rel});
        if (rel > prev + 1e-15) rep.pass = false;  // level sets must shrink
        prev = rel;
        if (rel > 0.0 && rel < 1.0) {
            xs.push_back(lam);
            ys.push_back(std::log(rel));
        }
    }
    auto fit = fit_line(xs, ys);
    double rate = -fit.slope;
    rep.stats["rate"] = rate;
    rep.stats["r2"] = fit.r2;
    rep.stats["fw"] = fw;
    rep.stats["rate_shape"] = rate * fw / S.eta();  // comparable to the delta of the lemma
    rep.fitted = rate;
    rep.budget = fit.r2;
    rep.pass = rep.pass && (xs.size() < 2 || rate > 0.0);
    return rep;
}

// ---------------------------------------------------------------------------
// Carleson packing
// ---------------------------------------------------------------------------

// sum over members inside Q of prod <g_j>^{alpha_j} |Q'|, against the same
// product on Q.  In this discrete model the bound with constant
// (1/eta) prod (1 - alpha_j/theta_j)^{-theta_j} is exact, so it is asserted.
inline ExperimentReport carleson_packing_check(const SparseCollection& S, const std::vector<GridFunction>& gs,
                                               const std::vector<double>& alphas, std::int64_t q0,
                                               std::vector<double> thetas = {}) {
    double alpha_sum = std::accumulate(alphas.begin(), alphas.end(), 0.0);
    if (alpha_sum >= 1.0) throw std::invalid_argument("carleson_packing_check: need sum alpha_j < 1");
    const std::size_t m = gs.size();
    if (alphas.size() != m) throw std::invalid_argument("carleson_packing_check: m mismatch");
    if (thetas.empty()) {
        for (double a : alphas) thetas.push_back(a + (1.0 - alpha_sum) / static_cast<double>(m));
    }
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    auto term = [&](std::int64_t node) {
        tree.cell_box(node, lo, hi);
        double cells = 1.0;
        for (int i = 0; i < dom.dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
        double prod = 1.0;
        for (std::size_t j = 0; j < m; ++j)
            prod *= std::pow(gs[j].box_pow_sum(1.0, lo, hi) / cells, alphas[j]);
        return prod;
    };
    double lhs = 0.0;
    for (auto n : S.restricted_to(tree, q0)) lhs += term(n) * tree.volume_of(n);
    double rhs = term(q0) * tree.volume_of(q0);

    double analytic = 1.0;
    for (std::size_t j = 0; j < m; ++j) analytic *= std::pow(1.0 / (1.0 - alphas[j] / thetas[j]), thetas[j]);

    ExperimentReport rep;
    rep.name = "packing";
    rep.columns = {"lhs", "rhs", "ratio"};
    rep.rows.push_back({lhs, rhs, lhs / rhs});
    rep.fitted = lhs / rhs;
    rep.budget = analytic / S.eta();
    rep.stats["analytic_budget"] = analytic;
    rep.stats["eta"] = S.eta();
    rep.pass = lhs <= rhs * rep.budget * (1 + 1e-9);
    return rep;
}

// ---------------------------------------------------------------------------
// Local testing constant
// ---------------------------------------------------------------------------

struct TestingResult {
    double value = 0.0;                // certified lower bound of the testing supremum
    std::vector<double> trace;         // value after each sweep
    bool converged = false;
    double closed_form = std::numeric_limits<double>::quiet_NaN();  // m = 1 only
};

// M(Q0) = sup over normalized tuples of v(Q0)^{-1/p'} int_{Q0} A_{S(Q0)}(f) v.
// m = 1 has the exact dual closed form; for m >= 2 each slot is maximized
// exactly by Holder duality and the sweeps climb to a fixed point.
inline TestingResult testing_constant(const SparseCollection& S, const WeightTuple& wt, std::int64_t q0,
                                      int max_sweeps = 40, double tol = 1e-11) {
    const ExponentTuple& pv = wt.exponents();
    const int m = pv.m();
    for (int j = 0; j < m; ++j)
        if (!(pv.pj(j) > 1.0 && pv.pj(j) != kInf))
            throw std::invalid_argument("testing_constant: exponents must lie in (1,inf)");
    if (!(pv.p() > 1.0)) throw std::invalid_argument("testing_constant: need p > 1");
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    auto members = S.restricted_to(tree, q0);
    if (members.empty() || members[0] != q0) {
        if (std::find(members.begin(), members.end(), q0) == members.end())
            throw std::invalid_argument("testing_constant: Q0 must belong to S");
    }
    const GridFunction& v = wt.v();
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    tree.cell_box(q0, lo, hi);
    const double cellvol = dom.cell_volume();
    double vq0 = v.box_pow_sum(1.0, lo, hi) * cellvol;
    double pprime = pv.p0();
    double norm_factor = std::pow(vq0, -1.0 / pprime);

    // localized sparse operator with one argument replaced
    auto apply_local = [&](const std::vector<const GridFunction*>& args) {
        std::vector<double> out(dom.cell_count(), 0.0);
        std::array<std::int64_t, kMaxDim> l2{}, h2{};
        for (auto n : members) {
            tree.cell_box(n, l2, h2);
            double cells = 1.0;
            for (int i = 0; i < dom.dim; ++i) cells *= static_cast<double>(h2[i] - l2[i]);
            double prod = 1.0;
            for (auto* g : args) prod *= g->box_pow_sum(1.0, l2, h2) / cells;
            GridFunction::constant(dom, 1.0).for_each_cell(l2, h2, [&](std::int64_t c) { out[c] += prod; });
        }
        return GridFunction(dom, std::move(out));
    };

    TestingResult res;
    if (m == 1) {
        GridFunction G = apply_local({&v});
        double nrm = 0.0;
        G.for_each_cell(lo, hi, [&](std::int64_t c) { nrm += std::pow(G[c] / wt.wj(0)[c], pprime); });
        res.closed_form = norm_factor * std::pow(nrm * cellvol, 1.0 / pprime);
    }

    // start from normalized constants on Q0
    std::vector<GridFunction> fs;
    for (int j = 0; j < m; ++j) {
        std::vector<double> val(dom.cell_count(), 0.0);
        double mass = wt.wj(j).power(pv.pj(j)).box_pow_sum(1.0, lo, hi) * cellvol;
        double c = std::pow(mass, -1.0 / pv.pj(j));
        GridFunction::constant(dom, 1.0).for_each_cell(lo, hi, [&](std::int64_t cc) { val[cc] = c; });
        fs.emplace_back(dom, std::move(val));
    }
    double value = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double last = value;
        for (int k = 0; k < m; ++k) {
            std::vector<const GridFunction*> args;
            for (int j = 0; j < m; ++j) args.push_back(j == k ? &v : &fs[j]);
            GridFunction phi = apply_local(args);
            // maximize int f_k phi with ||f_k w_k||_{p_k} = 1 over Q0
            double pk = pv.pj(k), pkc = pv.conj(k);
            double dual = 0.0;
            phi.for_each_cell(lo, hi, [&](std::int64_t c) { dual += std::pow(phi[c] / wt.wj(k)[c], pkc); });
            dual = std::pow(dual * cellvol, 1.0 / pkc);
            value = norm_factor * dual;
            std::vector<double> next(dom.cell_count(), 0.0);
            double scale = std::pow(dual, -pkc / pk);
            phi.for_each_cell(lo, hi, [&](std::int64_t c) {
                next[c] = scale * std::pow(phi[c] / wt.wj(k)[c], pkc / pk) / wt.wj(k)[c];
            });
            fs[k] = GridFunction(dom, std::move(next));
        }
        res.trace.push_back(value);
        if (sweep > 0 && std::abs(value - last) <= tol * std::max(1.0, value)) {
            res.converged = true;
            break;
        }
    }
    res.value = value;
    return res;
}

// ---------------------------------------------------------------------------
// Exponent calculator
// ---------------------------------------------------------------------------

struct ExponentReport {
    double alpha = 1.0, beta = 1.0;
    double min_alpha_beta = 1.0;
    bool improvement_region = false;
    double appendix_gamma = 0.0;  // min_j p_j'/p
    double appendix_delta = 0.0;  // max_j p_j'/p_j
};

namespace detail {
inline double exponent_ratio(double num, double den) {
    if (num == kInf && den == kInf) return 1.0;  // matching conjugates cancel in the limit
    if (den == kInf) return 0.0;
    if (num == kInf) return kInf;
    return num / den;
}
}  // namespace detail

inline ExponentReport alpha_beta(const ExponentTuple& pv) {
    ExponentReport rep;
    const int m = pv.m();
    double p = pv.p();
    rep.beta = p;
    for (int j = 0; j < m; ++j) rep.beta = std::max(rep.beta, pv.conj(j));
    double best = 0.0;
    for (int k = 0; k < m; ++k) {
        double mn = kInf;
        for (int j = 0; j < m; ++j) {
            double num = (j == k) ? p : pv.conj(j);
            mn = std::min(mn, detail::exponent_ratio(num, pv.conj(k)));
        }
        best = std::max(best, mn);
    }
    rep.alpha = 1.0 + best;
    rep.min_alpha_beta = std::min(rep.alpha, rep.beta);
    double upper = 1.0 / (std::sqrt(m + 0.25) - 0.5);
    rep.improvement_region = p >= 1.0 / m - 1e-15 && p <= upper + 1e-15;
    rep.appendix_gamma = kInf;
    rep.appendix_delta = 0.0;
    for (int j = 0; j < m; ++j) {
        rep.appendix_gamma = std::min(rep.appendix_gamma, detail::exponent_ratio(pv.conj(j), p));
        rep.appendix_delta = std::max(rep.appendix_delta, detail::exponent_ratio(pv.conj(j), pv.pj(j)));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// theorem-a / theorem-b weak-type ratio experiments
// ---------------------------------------------------------------------------

// Input family for the weak-type ratio experiments: random tuples plus
// weight-adapted probes on centered cubes, the shapes that get near the
// extremal direction for power weights.
inline std::vector<std::vector<GridFunction>> probe_family(const WeightTuple& wt, int n_random, std::uint64_t seed,
                                                           int max_probe_level = 6) {
    const ExponentTuple& pv = wt.exponents();
    const Domain& dom = wt.product().domain();
    const int m = pv.m();
    Rng rng(seed);
    std::vector<std::vector<GridFunction>> fam;
    for (int i = 0; i < n_random; ++i) {
        std::vector<GridFunction> t;
        for (int j = 0; j < m; ++j) {
            std::vector<double> v(dom.cell_count());
            for (auto& x : v) x = rng.lognormal(1.0);
            t.emplace_back(dom, std::move(v));
        }
        fam.push_back(std::move(t));
    }
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    const std::int64_t n = dom.cells_per_side();
    for (int lev = 0; lev <= std::min(max_probe_level, dom.max_level); ++lev) {
        // box of dyadic width straddling the domain center
        std::int64_t width = std::max<std::int64_t>(1, n >> lev);
        for (int i = 0; i < dom.dim; ++i) {
            lo[i] = std::max<std::int64_t>(0, n / 2 - width / 2);
            hi[i] = std::min(n, lo[i] + width);
        }
        std::vector<double> ind(dom.cell_count(), 0.0);
        GridFunction::constant(dom, 1.0).for_each_cell(lo, hi, [&](std::int64_t c) { ind[c] = 1.0; });
        GridFunction indicator(dom, ind);
        std::vector<GridFunction> t_ind, t_dual, t_mixed;
        bool duals_ok = true;
        for (int j = 0; j < m; ++j) {
            t_ind.push_back(indicator);
            if (pv.conj(j) == kInf) {
                duals_ok = false;
                continue;
            }
            t_dual.push_back(wt.vj(j).multiply(indicator));
            t_mixed.push_back(wt.wj(j).power(1.0 - pv.conj(j)).multiply(indicator));
        }
        fam.push_back(std::move(t_ind));
        if (duals_ok) {
            fam.push_back(std::move(t_dual));
            fam.push_back(std::move(t_mixed));
        }
    }
    return fam;
}

// the full dyadic chain through the cell just right of the domain center, a
// deterministic sparse family hugging the power-weight singularity
inline SparseCollection center_chain_collection(const Domain& dom) {
    DyadicTree tree(dom);
    std::int64_t n = dom.cells_per_side();
    std::int64_t center = 0;
    for (int i = 0; i < dom.dim; ++i) center = center * n + n / 2;
    std::vector<std::int64_t> chain;
    for (int lev = 0; lev <= dom.max_level; ++lev) chain.push_back(tree.ancestor_at(center, lev));
    auto res = verify_sparse(dom, chain, 0.5, false);
    return *res.collection;
}

struct TheoremInstanceResult {
    double ap = 0.0;        // [w]_{pvec}, dyadic scope
    double fw_v = 0.0;      // [w^p]_FW, dyadic scope
    double c_w = std::numeric_limits<double>::quiet_NaN();  // sharp-branch constant
    double ratio_a_general = 0.0;
    double ratio_a_sharp = std::numeric_limits<double>::quiet_NaN();
    double ratio_a_proof = 0.0;   // against [w^p]_FW^{2m} [w]_{pvec}, the proof-path constant
    double ratio_b = 0.0;
    bool fubini_ok = true;   // A_S satisfies the plain sparse form with constant 1
    bool ellp_ok = true;     // and the l^p-type (measure aggregation) bound for p <= 1
};

inline TheoremInstanceResult theorem_experiment_instance(const WeightTuple& wt,
                                                         const std::vector<SparseCollection>& collections,
                                                         const std::vector<std::vector<GridFunction>>& family) {
    const ExponentTuple& pv = wt.exponents();
    const int m = pv.m();
    const double p = pv.p();
    const Domain& dom = wt.product().domain();
    TheoremInstanceResult out;
    out.ap = multilinear_ap(wt, CubeScope::DyadicGrid).value;
    out.fw_v = fw_constant(wt.v(), CubeScope::DyadicGrid).value;

    bool sharp = p > 1.0;
    for (int j = 0; j < m && sharp; ++j) sharp = pv.pj(j) > 1.0 && pv.pj(j) != kInf;
    if (sharp) {
        std::vector<double> fw_vj(m);
        for (int j = 0; j < m; ++j) fw_vj[j] = fw_constant(wt.vj(j), CubeScope::DyadicGrid).value;
        double best = 0.0;
        for (int k = 0; k < m; ++k) {
            double mn = out.fw_v;
            for (int j = 0; j < m; ++j)
                if (j != k) mn = std::min(mn, fw_vj[j]);
            best = std::max(best, std::pow(mn, 1.0 / pv.conj(k)));
        }
        out.c_w = best;
    }

    const GridFunction& w = wt.product();
    const GridFunction& v = wt.v();
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (auto& S : collections) {
        for (auto& fs : family) {
            // norms in both conventions; skip degenerate tuples
            double nrm_a = 1.0, nrm_b = 1.0;
            for (int j = 0; j < m; ++j) {
                nrm_a *= lp_norm(fs[j], pv.pj(j), wt.wj(j));
                nrm_b *= lp_norm_measure(fs[j], pv.pj(j), ones);
            }
            if (!(nrm_a > 0.0) || !std::isfinite(nrm_a) || !(nrm_b > 0.0) || !std::isfinite(nrm_b)) continue;

            GridFunction As = sparse_operator(S, fs);
            double weak_a = weak_norm_measure(As, p, v);
            out.ratio_a_general = std::max(out.ratio_a_general, weak_a / (out.fw_v * out.ap * nrm_a));
            out.ratio_a_proof =
                std::max(out.ratio_a_proof, weak_a / (std::pow(out.fw_v, 2.0 * m) * out.ap * nrm_a));
            if (sharp) {
                double r = weak_a / (out.c_w * out.ap * nrm_a);
                out.ratio_a_sharp = std::isnan(out.ratio_a_sharp) ? r : std::max(out.ratio_a_sharp, r);
            }

            std::vector<GridFunction> over_w;
            for (int j = 0; j < m; ++j) over_w.push_back(fs[j].divide(wt.wj(j)));
            GridFunction Bs = sparse_operator(S, over_w).multiply(w);
            double weak_b = weak_norm_measure(Bs, p, ones);
            out.ratio_b = std::max(out.ratio_b, weak_b / (out.fw_v * out.ap * nrm_b));

            // sparse-form hypotheses for T = A_S, asserted not assumed
            double pairing = 0.0;
            for (std::int64_t c = 0; c < dom.cell_count(); ++c) pairing += As[c] * w[c];
            pairing *= dom.cell_volume();
            double form = sparse_form(S, fs, w, 1.0);
            if (std::abs(pairing - form) > 1e-10 * std::max(1.0, form)) out.fubini_ok = false;
            if (p <= 1.0) {
                double lhs_p = 0.0;
                for (std::int64_t c = 0; c < dom.cell_count(); ++c) lhs_p += std::pow(As[c], p) * w[c];
                lhs_p *= dom.cell_volume();
                if (lhs_p > sparse_form(S, fs, w, p, FormVariant::EllPMeasure) * (1 + 1e-10)) out.ellp_ok = false;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linearization, the COV-route lemma, and the appendix constants
// ---------------------------------------------------------------------------

inline ExperimentReport linearization_check(const SparseCollection& S, const WeightTuple& wt, double theta,
                                            const std::vector<std::vector<GridFunction>>& family) {
    const ExponentTuple& pv = wt.exponents();
    double p = pv.p();
    if (!(theta > 0.0 && theta < p && theta <= 1.0))
        throw std::invalid_argument("linearization_check: need theta in (0,p) and (0,1]");
    const GridFunction& v = wt.v();
    double ap = multilinear_ap(wt, CubeScope::DyadicGrid).value;

    double op_full = 0.0, op_theta = 0.0;
    for (auto& fs : family) {
        double nrm = 1.0;
        for (int j = 0; j < pv.m(); ++j) nrm *= lp_norm(fs[j], pv.pj(j), wt.wj(j));
        if (!(nrm > 0.0) || !std::isfinite(nrm)) continue;
        op_full = std::max(op_full, weak_norm_measure(sparse_operator(S, fs), p, v) / nrm);
        op_theta = std::max(op_theta, weak_norm_measure(sparse_q_operator(S, fs, theta), p, v) / nrm);
    }
    double bound = 1.0 / (1.0 - theta / p) * std::pow(ap, 1.0 - theta) * std::pow(op_theta, theta);
    ExperimentReport rep;
    rep.name = "linearization";
    rep.columns = {"op_full", "op_theta", "bound", "ratio"};
    rep.rows.push_back({op_full, op_theta, bound, op_full / bound});
    rep.fitted = op_full / bound;
    rep.stats["ap"] = ap;
    rep.stats["theta"] = theta;
    rep.pass = std::isfinite(rep.fitted) && rep.fitted > 0.0;
    return rep;
}

// || sum_Q prod_{j<m} <v_j> 1_Q ||_{L^{p_m'}(v_m)} against the A_pvec-weighted
// Carleson sum; the fitted constant certifies the <~ of the stacked-average
// norm bound.
inline ExperimentReport stack_norm_check(const SparseCollection& S, const WeightTuple& wt,
                                         const std::optional<GridFunction>& omega = std::nullopt) {
    const ExponentTuple& pv = wt.exponents();
    const int m = pv.m();
    double p = pv.p();
    if (!(p > 1.0)) throw std::invalid_argument("stack_norm_check: need p > 1");
    for (int j = 0; j < m; ++j)
        if (!(pv.pj(j) > 1.0 && pv.pj(j) != kInf))
            throw std::invalid_argument("stack_norm_check: exponents must lie in (1,inf)");
    const Domain& dom = S.domain();
    DyadicTree tree(dom);
    const GridFunction& om = omega ? *omega : wt.product();

    // slot 0 holds (omega^p, p'); slots 1..m-1 hold (v_j, p_j); v_m closes the norm
    std::vector<const GridFunction*> vj;
    std::vector<double> pj;
    GridFunction v0 = om.power(p);
    vj.push_back(&v0);
    pj.push_back(pv.p0());
    for (int j = 0; j + 1 < m; ++j) {
        vj.push_back(&wt.vj(j));
        pj.push_back(pv.pj(j));
    }
    const GridFunction& vm = wt.vj(m - 1);
    double pmc = pv.conj(m - 1);

    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    std::vector<double> stack_sum(dom.cell_count(), 0.0);
    double carleson = 0.0;
    GridFunction ones = GridFunction::constant(dom, 1.0);
    for (auto n : S.nodes()) {
        tree.cell_box(n, lo, hi);
        double cells = 1.0;
        for (int i = 0; i < dom.dim; ++i) cells *= static_cast<double>(hi[i] - lo[i]);
        double prod = 1.0, carl = 1.0;
        for (std::size_t j = 0; j < vj.size(); ++j) {
            double mean = vj[j]->box_pow_sum(1.0, lo, hi) / cells;
            prod *= mean;
            carl *= std::pow(mean, pmc / pj[j]);
        }
        ones.for_each_cell(lo, hi, [&](std::int64_t c) { stack_sum[c] += prod; });
        carleson += carl * tree.volume_of(n);
    }
    GridFunction stack(dom, std::move(stack_sum));
    double lhs = lp_norm_measure(stack, pmc, vm);
    double apc = multilinear_ap(wt, CubeScope::DyadicGrid, omega).value;
    double rhs = apc * std::pow(carleson, 1.0 / pmc);

    ExperimentReport rep;
    rep.name = "stacknorm";
    rep.columns = {"lhs", "rhs", "ratio"};
    rep.rows.push_back({lhs, rhs, lhs / rhs});
    rep.fitted = lhs / rhs;
    rep.stats["ap"] = apc;
    rep.pass = std::isfinite(rep.fitted);
    return rep;
}

inline ExperimentReport appendix_check(const WeightTuple& wt) {
    const ExponentTuple& pv = wt.exponents();
    const int m = pv.m();
    double p = pv.p();
    ExperimentReport rep;
    rep.name = "appendix";
    rep.columns = {"fw_prod", "min_fw_vj_1p", "ap_pow_gamma", "ratio_prod", "ratio_gamma_delta"};

    double fw_prod = fw_prod_constant(wt, CubeScope::DyadicGrid).value;
    double min_fw = kInf;
    for (int j = 0; j < m; ++j) min_fw = std::min(min_fw, fw_constant(wt.vj(j), CubeScope::DyadicGrid).value);
    double min_fw_1p = std::pow(min_fw, 1.0 / p);
    double ap = multilinear_ap(wt, CubeScope::DyadicGrid).value;
    auto er = alpha_beta(pv);
    double ap_gamma = std::pow(ap, er.appendix_gamma);
    double ap_min_gd = std::pow(ap, std::min(er.appendix_gamma, er.appendix_delta));

    rep.rows.push_back({fw_prod, min_fw_1p, ap_gamma, fw_prod / min_fw_1p, fw_prod / ap_min_gd});
    rep.stats["constant_free_ok"] = (min_fw_1p <= ap_gamma * (1 + 1e-12)) ? 1.0 : 0.0;
    rep.stats["gamma"] = er.appendix_gamma;
    rep.stats["delta"] = er.appendix_delta;
    rep.fitted = fw_prod / min_fw_1p;
    rep.budget = fw_prod / ap_min_gd;
    rep.pass = rep.stats["constant_free_ok"] == 1.0 && std::isfinite(rep.fitted);
    return rep;
}

}  // namespace dyadic

// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "parasdm/bench.hpp"
#include "parasdm/dataset.hpp"
#include "parasdm/flpo.hpp"
#include "parasdm/learning.hpp"
#include "parasdm/lifted.hpp"

using namespace parasdm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v{false, ""};
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %d %s (%.2fs) %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(),
                seconds_since(t0), v.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::vector<double> flat(const std::vector<Point2>& ps) {
    std::vector<double> out;
    for (const auto& p : ps) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    return out;
}

Verdict equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    double worst_v = 0.0, worst_p = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = oracle::random_size(rng, 1, 5);
        const std::size_t m = oracle::random_size(rng, 1, 3);
        const auto inst = oracle::random_instance(rng, n, m, trial % 2 == 0);
        const auto topo = lifted::lift(inst.net);
        const auto params = lifted::make_params(inst.net, topo, inst.layout);
        for (double beta : {0.5, 5.0, 50.0}) {
            const auto tab = lifted::lambda_fixed_point(topo, params, Beta(beta), 1.0);
            const auto pt = flpo::backward_log_partition(inst.net, inst.layout, Beta(beta));
            for (std::size_t i = 0; i < n; ++i) {
                worst_v = std::max(worst_v, std::abs(tab.value[i] + pt.log_z[0][i] / beta));
            }
            const auto a = lifted::unlift_policy(lifted::policy_from_lambda(tab, topo), topo);
            const auto b = flpo::stage_gibbs(pt, inst.net, inst.layout);
            for (std::size_t k = 0; k < b.p.size(); ++k) {
                for (std::size_t e = 0; e < b.p[k].size(); ++e) {
                    for (std::size_t x = 0; x < b.p[k][e].size(); ++x) {
                        worst_p = std::max(worst_p, std::abs(a.p[k][e][x] - b.p[k][e][x]));
                    }
                }
            }
        }
    }
    const double t = seconds_since(t0);
    return {worst_v <= 1e-8 && worst_p <= 1e-8 && t < 5.0,
            fmt("max|dV|=%.3g max|dp|=%.3g runtime=%.3fs", worst_v, worst_p, t)};
}

Verdict oracle_exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(102);
    int matched = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto inst = oracle::random_instance(rng, oracle::random_size(rng, 1, 4),
                                                  oracle::random_size(rng, 1, 3), true);
        const auto dp = flpo::hard_cost(inst.net, inst.layout);
        const auto bf = bench::brute_force_route_oracle(inst.net, inst.layout);
        if (dp.cost == bf.cost && dp.routes == bf.routes) ++matched;
    }
    const double t = seconds_since(t0);
    return {matched == 50 && t < 10.0, fmt("%.0f/50 exact matches, runtime=%.3fs", matched, t)};
}

Verdict gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(103);
    const double beta = 2.0;
    double worst_stage = 0.0, worst_lifted = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = oracle::random_size(rng, 1, 3);
        const auto inst = oracle::random_instance(rng, oracle::random_size(rng, 1, 5), m, true);
        const auto ys = inst.layout.first_stage();
        const auto g = flpo::free_energy_gradient(inst.net, inst.layout, Beta(beta));
        const auto fd = oracle::central_difference(
            [&](const std::vector<double>& v) {
                std::vector<Point2> p(m);
                for (std::size_t j = 0; j < m; ++j) p[j] = {v[2 * j], v[2 * j + 1]};
                return flpo::free_energy(inst.net, FacilityLayout::tied_from(p), Beta(beta));
            },
            flat(ys), 1e-6);
        worst_stage = std::max(worst_stage, oracle::relative_error(flat(g.per_facility), fd));
    }
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = oracle::random_size(rng, 1, 3);
        const auto inst = oracle::random_instance(rng, oracle::random_size(rng, 1, 5), m, false);
        const auto topo = lifted::lift(inst.net);
        const auto params = lifted::make_params(inst.net, topo, inst.layout);
        const auto tab = lifted::lambda_fixed_point(topo, params, Beta(beta));
        const auto gt = lifted::gradient_fixed_point(topo, params, lifted::policy_from_lambda(tab, topo),
                                                     Beta(beta));
        const auto analytic = lifted::weighted_gradient(inst.net, topo, gt, false);
        std::vector<double> theta;
        for (const auto& row : inst.layout.grid()) {
            const auto r = flat(row);
            theta.insert(theta.end(), r.begin(), r.end());
        }
        const auto fd = oracle::central_difference(
            [&](const std::vector<double>& v) {
                auto p = params;
                for (std::size_t k = 1; k <= m; ++k) {
                    for (std::size_t j = 0; j < m; ++j) {
                        const std::size_t i = 2 * ((k - 1) * m + j);
                        p.xi[topo.copy_state(k, j)] = {v[i], v[i + 1]};
                    }
                }
                return lifted::weighted_value(inst.net, lifted::lambda_fixed_point(topo, p, Beta(beta)));
            },
            theta, 1e-6);
        worst_lifted = std::max(worst_lifted, oracle::relative_error(analytic, fd));
    }
    const double t = seconds_since(t0);
    return {worst_stage <= 1e-5 && worst_lifted <= 1e-5 && t < 30.0,
            fmt("stagewise rel=%.3g lifted rel=%.3g runtime=%.3fs", worst_stage, worst_lifted, t)};
}

Verdict analytic_optimum() {
    const Network net = Network::uniform({{0.0, 0.0}}, {1.0, 0.0}, 1);
    const auto schedule = flpo::default_schedule(net);
    flpo::FlpoOptions fo;
    fo.early_exit = false;
    const auto a = flpo::solve_flpo_annealed(net, schedule, fo);
    lifted::ParaSdmOptions lo;
    lo.early_exit = false;
    const auto b = lifted::solve_parasdm_annealed(net, schedule, lo);
    const Point2 ya = a.layout.first_stage()[0], yb = b.layout.first_stage()[0];
    auto ok = [](Point2 y, double c) {
        return std::abs(y.x - 0.5) <= 1e-3 && std::abs(y.y) <= 1e-3 && std::abs(c - 0.5) <= 1e-3;
    };
    std::ostringstream os;
    os << "stagewise y=(" << ya.x << "," << ya.y << ") cost=" << a.hard_cost << "; lifted y=(" << yb.x
       << "," << yb.y << ") cost=" << b.hard_cost;
    return {ok(ya, a.hard_cost) && ok(yb, b.hard_cost), os.str()};
}

bench::ComparisonTable& benchmark() {
    static bench::ComparisonTable table = [] {
        std::vector<std::pair<std::string, Network>> data;
        for (std::int64_t seed = 1; seed <= 10; ++seed) {
            data.emplace_back("dataset_" + std::to_string(seed),
                              generate_dataset(DatasetSpec::small_cell(seed)));
        }
        bench::CompareOptions opts;
        opts.threads = 1;
        return bench::run_comparison(data, opts);
    }();
    return table;
}

Verdict benchmark_costs() {
    const auto& s = benchmark().summary;
    return {s.within_5_percent >= 8,
            fmt("%.0f/10 within 5%%, mean gap %.3g, max gap %.3g", double(s.within_5_percent),
                s.mean_normalized_gap, s.max_normalized_gap)};
}

Verdict benchmark_times() {
    const auto& s = benchmark().summary;
    return {s.median_time_lifted <= s.median_time_stagewise,
            fmt("median lifted %.3fs, median stagewise %.3fs, ratio lifted/stagewise %.3f",
                s.median_time_lifted, s.median_time_stagewise, s.median_time_ratio)};
}

Verdict q_learning() {
    const auto t0 = Clock::now();
    const Network net = Network::uniform({{0.0, 0.0}}, {1.0, 0.0}, 1);
    const auto topo = lifted::lift(net);
    const auto params = lifted::make_params(net, topo, FacilityLayout::tied_from({{0.5, 0.2}}));
    std::mt19937_64 rng(104);
    const auto learned = learn::q_learn(net, topo, params, 1.0, 1.0, 100000, learn::harmonic_step(), rng);
    const auto exact = lifted::lambda_fixed_point(topo, params, Beta(1.0), 1.0);
    const auto grads = lifted::gradient_fixed_point(topo, params, lifted::policy_from_lambda(exact, topo),
                                                    Beta(1.0), 1.0);
    double dpsi = 0.0, dk = 0.0;
    for (std::size_t p = 0; p < topo.pair_count(); ++p) {
        dpsi = std::max(dpsi, std::abs(learned.psi.lambda_sa[p] - exact.lambda_sa[p]));
    }
    for (std::size_t i = 0; i < grads.k.size(); ++i) dk = std::max(dk, std::abs(learned.gradients.k[i] - grads.k[i]));
    const double t = seconds_since(t0);
    return {dpsi <= 1e-2 && dk <= 1e-2 && t < 60.0,
            fmt("max|Psi-Lambda|=%.3g max|K-K*|=%.3g runtime=%.3fs", dpsi, dk, t)};
}

struct PropertyTally {
    int cases = 0;
    int failed = 0;
};

Verdict properties() {
    std::mt19937_64 rng(105);
    std::uniform_real_distribution<double> log_beta(-2.0, 4.0);
    PropertyTally stochastic, exact, monotone, stable;

    for (int c = 0; c < 200; ++c) {
        const std::size_t n = oracle::random_size(rng, 1, 5);
        const std::size_t m = oracle::random_size(rng, 1, 4);
        const auto inst = oracle::random_instance(rng, n, m, c % 2 == 0);
        const auto topo = lifted::lift(inst.net);
        const auto params = lifted::make_params(inst.net, topo, inst.layout);
        const double beta = std::pow(10.0, log_beta(rng));

        // Row-stochasticity of both solvers' policies.
        {
            bool ok = true;
            const auto pol = lifted::policy_from_lambda(lifted::lambda_fixed_point(topo, params, Beta(beta)), topo);
            for (std::size_t s = 0; s < topo.state_count(); ++s) {
                double sum = 0.0;
                for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
                    ok = ok && pol.mu[p] >= 0.0;
                    sum += pol.mu[p];
                }
                ok = ok && std::abs(sum - 1.0) <= 1e-12;
            }
            const flpo::StageGraph g(n, m);
            const auto a = flpo::stage_gibbs(flpo::backward_log_partition(inst.net, inst.layout, Beta(beta), g),
                                             inst.net, inst.layout, g);
            for (std::size_t k = 0; k < a.p.size(); ++k) {
                for (std::size_t e = 0; e < a.p[k].size(); ++e) {
                    double sum = 0.0;
                    for (std::size_t x = 0; x < a.p[k][e].size(); ++x) {
                        const auto& succ = g.successors(k, e);
                        const bool feasible = std::find(succ.begin(), succ.end(), x) != succ.end();
                        ok = ok && a.p[k][e][x] >= 0.0 && (feasible || a.p[k][e][x] == 0.0);
                        sum += a.p[k][e][x];
                    }
                    ok = ok && std::abs(sum - 1.0) <= 1e-12;
                }
            }
            ++stochastic.cases;
            if (!ok) ++stochastic.failed;
        }

        // Fixed-point exactness within M + 2 sweeps.
        {
            bool ok = true;
            try {
                const auto tab = lifted::lambda_fixed_point(topo, params, Beta(beta), 1.0, 1e-12, int(m) + 2);
                ok = tab.residual <= 1e-12;
                const auto pol = lifted::policy_from_lambda(tab, topo);
                const auto gt = lifted::gradient_fixed_point(topo, params, pol, Beta(beta), 1.0, 1e-12, int(m) + 2);
                ok = ok && gt.residual <= 1e-12;
            } catch (const NonConvergence&) {
                ok = false;
            }
            ++exact.cases;
            if (!ok) ++exact.failed;
        }

        // Max-row probability non-decreasing along an increasing beta grid.
        {
            bool ok = true;
            std::vector<double> prev(topo.state_count(), 0.0);
            for (double b = 1e-2; b <= 1e4; b *= 1.5) {
                const auto pol = lifted::policy_from_lambda(lifted::lambda_fixed_point(topo, params, Beta(b)), topo);
                for (std::size_t s = 0; s < topo.state_count(); ++s) {
                    double mx = 0.0;
                    for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) mx = std::max(mx, pol.mu[p]);
                    if (mx < prev[s] - 1e-12) ok = false;
                    prev[s] = mx;
                }
            }
            ++monotone.cases;
            if (!ok) ++monotone.failed;
        }

        // Log-domain stability at beta = 1e4 in both solvers.
        {
            bool ok = true;
            const Beta hot(1e4);
            const auto tab = lifted::lambda_fixed_point(topo, params, hot);
            const auto pol = lifted::policy_from_lambda(tab, topo);
            const auto gt = lifted::gradient_fixed_point(topo, params, pol, hot);
            for (double v : tab.lambda_sa) ok = ok && std::isfinite(v);
            for (double v : tab.value) ok = ok && std::isfinite(v);
            for (double v : pol.mu) ok = ok && std::isfinite(v);
            for (double v : gt.g) ok = ok && std::isfinite(v);
            const auto fe = flpo::free_energy_with_gradient(inst.net, inst.layout, hot, flpo::StageGraph(n, m));
            ok = ok && std::isfinite(fe.value);
            for (const auto& p : fe.gradient.per_facility) ok = ok && p.finite();
            const auto pt = flpo::backward_log_partition(inst.net, inst.layout, hot);
            const auto a = flpo::stage_gibbs(pt, inst.net, inst.layout);
            for (const auto& stage : a.p) {
                for (const auto& row : stage) {
                    for (double v : row) ok = ok && std::isfinite(v);
                }
            }
            ++stable.cases;
            if (!ok) ++stable.failed;
        }
    }

    std::ostringstream os;
    auto line = [&](const char* name, const PropertyTally& t) {
        os << name << " " << t.cases - t.failed << "/" << t.cases << "; ";
    };
    line("row-stochastic", stochastic);
    line("dag-exact", exact);
    line("monotone-hardening", monotone);
    line("stable@1e4", stable);
    const bool pass = stochastic.failed == 0 && exact.failed == 0 && monotone.failed == 0 &&
                      stable.failed == 0 && stochastic.cases >= 200;
    return {pass, os.str()};
}

}  // namespace

int main() {
    report(1, "cross-solver equivalence", equivalence);
    report(2, "oracle exactness", oracle_exactness);
    report(3, "gradient correctness", gradients);
    report(4, "analytic optimum", analytic_optimum);
    report(5, "benchmark cost within 5%", benchmark_costs);
    report(6, "benchmark timing direction", benchmark_times);
    report(7, "q-learning convergence", q_learning);
    report(8, "property suites", properties);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <cmath>

#include "parasdm/core.hpp"
#include "parasdm/optimizer.hpp"

using namespace parasdm;
using namespace parasdm::opt;

namespace {

Objective shifted_quadratic(std::vector<double> c) {
    return [c](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v += (x[i] - c[i]) * (x[i] - c[i]);
            g[i] = 2.0 * (x[i] - c[i]);
        }
        return v;
    };
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("quasi_newton_minimize: quadratic") {
    const std::vector<double> c{0.3, -1.7, 4.0};
    const auto r = quasi_newton_minimize(shifted_quadratic(c), {5.0, 5.0, -5.0});
    CHECK(r.converged);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(r.x[i] - c[i]) <= 1e-8);
}

TEST_CASE("quasi_newton_minimize: Rosenbrock from (-1.2, 1)") {
    QuasiNewtonConfig cfg;
    cfg.max_iter = 500;
    const auto r = quasi_newton_minimize(rosenbrock, {-1.2, 1.0}, cfg);
    CHECK(r.converged);
    CHECK(std::abs(r.x[0] - 1.0) <= 1e-5);
    CHECK(std::abs(r.x[1] - 1.0) <= 1e-5);
}

TEST_CASE("quasi_newton_minimize: start at the optimum") {
    const auto r = quasi_newton_minimize(shifted_quadratic({1.0, 2.0}), {1.0, 2.0});
    CHECK(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(r.value == 0.0);
}

TEST_CASE("quasi_newton_minimize never increases the objective") {
    QuasiNewtonConfig cfg;
    cfg.max_iter = 500;
    const auto r = quasi_newton_minimize(rosenbrock, {-1.2, 1.0}, cfg);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
    CHECK(r.value <= r.history.front());
}

TEST_CASE("quasi_newton_minimize: error paths") {
    auto nan_at_start = [](std::span<const double>, std::span<double> g) {
        g[0] = 0.0;
        return std::nan("");
    };
    CHECK_THROWS_AS(quasi_newton_minimize(nan_at_start, {0.0}), InvalidInput);

    // Finite only on x < 1: the search must shrink past the NaN region.
    auto barrier = [](std::span<const double> x, std::span<double> g) {
        if (x[0] >= 1.0) {
            g[0] = 0.0;
            return std::nan("");
        }
        g[0] = -1.0 / (1.0 - x[0]) + 2.0 * x[0];
        return -std::log(1.0 - x[0]) + x[0] * x[0];
    };
    const auto r = quasi_newton_minimize(barrier, {0.9});
    CHECK(std::isfinite(r.value));
    CHECK(r.x[0] < 1.0);

    // A gradient that disagrees with the values defeats every line search.
    auto lying = [](std::span<const double> x, std::span<double> g) {
        g[0] = -1.0;
        return x[0] * x[0];
    };
    const auto bad = quasi_newton_minimize(lying, {0.0});
    CHECK_FALSE(bad.converged);
    CHECK(bad.diagnostic == "line search failed");

    QuasiNewtonConfig cfg;
    cfg.shrink = 1.5;
    CHECK_THROWS_AS(quasi_newton_minimize(shifted_quadratic({0.0}), {1.0}, cfg), InvalidInput);
}

TEST_CASE("gradient_descent_step") {
    SUBCASE("zero gradient leaves params unchanged") {
        const std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
        CHECK(gradient_descent_step(p, g, 0.5).params == p);
    }
    SUBCASE("scalar update") {
        const std::vector<double> p{1.0}, g{2.0};
        CHECK(gradient_descent_step(p, g, 0.1).params[0] == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("immutable entries are untouched and reported") {
        const std::vector<double> p{1.0, 1.0}, g{3.0, 3.0};
        const bool mask[] = {false, true};
        const auto r = gradient_descent_step(p, g, 0.1, mask);
        CHECK(r.params[0] == 1.0);
        CHECK(r.params[1] == doctest::Approx(0.7));
        REQUIRE(r.ignored.size() == 1);
        CHECK(r.ignored[0] == 0);
    }
    SUBCASE("linear in the step") {
        const std::vector<double> p{0.5, -0.25, 2.0}, g{1.0, -3.0, 0.5};
        const auto a = gradient_descent_step(p, g, 0.01).params;
        const auto b = gradient_descent_step(p, g, 0.03).params;
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK((b[i] - p[i]) == doctest::Approx(3.0 * (a[i] - p[i])));
        }
    }
    SUBCASE("shape mismatch") {
        const std::vector<double> p{1.0, 2.0}, g{1.0};
        CHECK_THROWS_AS(gradient_descent_step(p, g, 0.1), InvalidInput);
    }
}

TEST_CASE("AnnealingSchedule beta sequence") {
    AnnealingSchedule s;
    s.beta_min = 0.01;
    s.growth = 1.2;
    s.beta_max = 0.1;
    const auto b = s.betas();
    REQUIRE(b.size() >= 3);
    CHECK(b[0] == 0.01);
    CHECK(b[1] == doctest::Approx(0.012));
    CHECK(b.back() >= 0.1);
    CHECK(b[b.size() - 2] < 0.1);
    for (std::size_t i = 1; i < b.size(); ++i) CHECK(b[i] > b[i - 1]);

    AnnealingSchedule bad = s;
    bad.growth = 1.0;
    CHECK_THROWS_AS(bad.betas(), InvalidInput);
    bad = s;
    bad.beta_max = 0.001;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("anneal_driver") {
    AnnealingSchedule s;
    s.beta_min = 0.5;
    s.beta_max = 20.0;
    s.growth = 1.5;

    SUBCASE("identity solve keeps params constant without noise") {
        s.perturbation = 0.0;
        const auto trace = anneal_driver(s, {1.0, 2.0}, [](double, std::vector<double> p) {
            return InnerResult{p, 0.0, 0, true};
        });
        CHECK(trace.size() == s.betas().size());
        for (const auto& t : trace) CHECK(t.params == std::vector<double>{1.0, 2.0});
    }
    SUBCASE("reproducible with and without noise") {
        for (double noise : {0.0, 1e-3}) {
            s.perturbation = noise;
            auto solve = [](double beta, std::vector<double> p) {
                for (auto& v : p) v = 0.5 * v + 1.0 / beta;
                return InnerResult{p, p[0] * p[0], 1, true};
            };
            const auto a = anneal_driver(s, {3.0}, solve);
            const auto b = anneal_driver(s, {3.0}, solve);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].params == b[i].params);
                CHECK(a[i].value == b[i].value);
            }
        }
    }
    SUBCASE("warm start and inner failures are passed through") {
        s.perturbation = 0.0;
        int calls = 0;
        const auto trace = anneal_driver(s, {0.0}, [&](double, std::vector<double> p) {
            ++calls;
            p[0] += 1.0;
            return InnerResult{p, 0.0, 0, calls % 2 == 0};
        });
        for (std::size_t i = 0; i < trace.size(); ++i) {
            CHECK(trace[i].params[0] == double(i + 1));
            CHECK(trace[i].converged == (i % 2 == 1));
        }
    }
}

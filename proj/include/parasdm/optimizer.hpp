#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace parasdm::opt {

struct QuasiNewtonConfig {
    double grad_tol = 1e-8;
    int max_iter = 200;
    double shrink = 0.5;            // backtracking factor
    double sufficient_decrease = 1e-4;
    int max_backtracks = 60;

    void validate() const;
};

/// Objective returns the value and writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct QuasiNewtonResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Objective value after each accepted step, starting with f(x0).
    std::vector<double> history;
    std::string diagnostic;
};

/// BFGS on the inverse Hessian with Armijo backtracking. The inverse Hessian
/// is reset to identity whenever the curvature condition s'y > 0 fails.
QuasiNewtonResult quasi_newton_minimize(const Objective& objective, std::vector<double> x0,
                                        const QuasiNewtonConfig& cfg = {});

struct GradientStepResult {
    std::vector<double> params;
    /// Indices of immutable entries that received a nonzero gradient.
    std::vector<std::size_t> ignored;
};

/// params - step * gradients on mutable entries; immutable entries are left
/// untouched and reported (with a warning on stderr) if their gradient is nonzero.
GradientStepResult gradient_descent_step(std::span<const double> params,
                                         std::span<const double> gradients, double step,
                                         std::span<const bool> is_mutable = {});

struct AnnealingSchedule {
    double beta_min = 0.01;
    double growth = 1.2;
    double beta_max = 1e4;
    double perturbation = 1e-4;
    double inner_tol = 1e-8;
    int inner_max_iter = 200;
    std::uint64_t seed = 1;

    void validate() const;
    /// beta_min, beta_min*growth, ... up to and including the first value >= beta_max.
    std::vector<double> betas() const;
};

struct InnerResult {
    std::vector<double> params;
    double value = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct TraceEntry {
    double beta = 0.0;
    double value = 0.0;
    std::vector<double> params;
    int iterations = 0;
    bool converged = true;
};

using PerBetaSolve = std::function<InnerResult(double beta, std::vector<double> params)>;

/// Warm-started continuation in beta. Before each inner solve the parameters
/// receive N(0, perturbation^2) noise drawn from a generator seeded by schedule.seed.
std::vector<TraceEntry> anneal_driver(const AnnealingSchedule& schedule,
                                      std::vector<double> init_params,
                                      const PerBetaSolve& per_beta_solve);

}  // namespace parasdm::opt

#include "parasdm/optimizer.hpp"

#include <cmath>
#include <iostream>

#include <Eigen/Dense>

#include "parasdm/core.hpp"

namespace parasdm::opt {

namespace {

using Vec = Eigen::VectorXd;

struct Evaluation {
    double value;
    Vec grad;
};

Evaluation evaluate(const Objective& f, const Vec& x) {
    Vec g(x.size());
    const double v = f(std::span<const double>(x.data(), std::size_t(x.size())),
                       std::span<double>(g.data(), std::size_t(g.size())));
    return {v, std::move(g)};
}

bool all_finite(const Evaluation& e) {
    return std::isfinite(e.value) && e.grad.allFinite();
}

}  // namespace

void QuasiNewtonConfig::validate() const {
    if (!(grad_tol > 0.0) || max_iter <= 0 || !(sufficient_decrease > 0.0) ||
        !(shrink > 0.0 && shrink < 1.0) || max_backtracks <= 0) {
        throw InvalidInput("invalid quasi-Newton configuration");
    }
}

QuasiNewtonResult quasi_newton_minimize(const Objective& objective, std::vector<double> x0,
                                        const QuasiNewtonConfig& cfg) {
    cfg.validate();
    const auto n = Eigen::Index(x0.size());
    Vec x = Eigen::Map<Vec>(x0.data(), n);
    Evaluation cur = evaluate(objective, x);
    if (!all_finite(cur)) throw InvalidInput("objective is not finite at x0");

    QuasiNewtonResult out;
    out.history.push_back(cur.value);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);

    auto finish = [&](bool converged) {
        out.x.assign(x.data(), x.data() + n);
        out.value = cur.value;
        out.converged = converged;
        return out;
    };

    for (int it = 0; it < cfg.max_iter; ++it) {
        if (n == 0 || cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) return finish(true);

        Vec dir = -h_inv * cur.grad;
        bool steepest = false;
        if (cur.grad.dot(dir) >= 0.0) {
            h_inv.setIdentity();
            dir = -cur.grad;
            steepest = true;
        }

        // Armijo backtracking; on failure retry once along -grad.
        std::optional<Evaluation> accepted;
        Vec x_next;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {
                if (steepest) break;
                h_inv.setIdentity();
                dir = -cur.grad;
                steepest = true;
            }
            const double slope = cur.grad.dot(dir);
            double t = 1.0;
            for (int k = 0; k < cfg.max_backtracks; ++k, t *= cfg.shrink) {
                x_next = x + t * dir;
                Evaluation trial = evaluate(objective, x_next);
                if (!std::isfinite(trial.value)) continue;
                if (trial.value <= cur.value + cfg.sufficient_decrease * t * slope) {
                    if (!trial.grad.allFinite()) {
                        out.diagnostic = "non-finite gradient during line search";
                        return finish(false);
                    }
                    accepted = std::move(trial);
                    break;
                }
            }
        }
        if (!accepted) {
            out.diagnostic = "line search failed";
            return finish(cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol);
        }

        const Vec s = x_next - x;
        const Vec y = accepted->grad - cur.grad;
        x = x_next;
        cur = std::move(*accepted);
        out.history.push_back(cur.value);
        out.iterations = it + 1;

        const double sy = s.dot(y);
        if (sy > 1e-16 * s.norm() * y.norm() && sy > 0.0) {
            if (steepest || it == 0) {
                // Initial inverse-Hessian scaling.
                h_inv = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
            }
            const double rho = 1.0 / sy;
            const Vec hy = h_inv * y;
            h_inv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
                     rho * (hy * s.transpose() + s * hy.transpose());
        } else {
            h_inv.setIdentity();
        }
    }
    return finish(cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol);
}

GradientStepResult gradient_descent_step(std::span<const double> params,
                                         std::span<const double> gradients, double step,
                                         std::span<const bool> is_mutable) {
    if (params.size() != gradients.size()) {
        throw InvalidInput("gradient_descent_step: shape mismatch");
    }
    if (!is_mutable.empty() && is_mutable.size() != params.size()) {
        throw InvalidInput("gradient_descent_step: mask shape mismatch");
    }
    if (!(step > 0.0)) throw InvalidInput("gradient_descent_step: step must be positive");

    GradientStepResult out;
    out.params.assign(params.begin(), params.end());
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!is_mutable.empty() && !is_mutable[i]) {
            if (gradients[i] != 0.0) {
                out.ignored.push_back(i);
                std::cerr << "warning: ignoring gradient " << gradients[i]
                          << " on immutable parameter " << i << '\n';
            }
            continue;
        }
        out.params[i] = params[i] - step * gradients[i];
    }
    return out;
}

void AnnealingSchedule::validate() const {
    if (!(beta_min > 0.0) || !(beta_max > beta_min) || !(growth > 1.0) ||
        !(perturbation >= 0.0) || !(inner_tol > 0.0) || inner_max_iter <= 0 ||
        !std::isfinite(beta_max)) {
        throw InvalidInput("invalid annealing schedule");
    }
}

std::vector<double> AnnealingSchedule::betas() const {
    validate();
    std::vector<double> out;
    double b = beta_min;
    while (true) {
        out.push_back(b);
        if (b >= beta_max) break;
        b *= growth;
    }
    return out;
}

std::vector<TraceEntry> anneal_driver(const AnnealingSchedule& schedule,
                                      std::vector<double> init_params,
                                      const PerBetaSolve& per_beta_solve) {
    const auto betas = schedule.betas();
    std::mt19937_64 rng(schedule.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<TraceEntry> trace;
    trace.reserve(betas.size());
    std::vector<double> params = std::move(init_params);
    for (double beta : betas) {
        if (schedule.perturbation > 0.0) {
            for (auto& p : params) p += schedule.perturbation * noise(rng);
        }
        InnerResult r = per_beta_solve(beta, params);
        params = r.params;
        trace.push_back({beta, r.value, std::move(r.params), r.iterations, r.converged});
    }
    return trace;
}

}  // namespace parasdm::opt

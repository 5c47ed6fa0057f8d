#include "parasdm/lifted.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace parasdm::lifted {

LiftedTopology::LiftedTopology(std::size_t nodes, std::size_t facilities, bool early_exit)
    : n_(nodes), m_(facilities), early_exit_(early_exit) {
    if (n_ == 0 || m_ == 0) throw InvalidInput("lifted topology needs nodes and facilities");
    const std::size_t dest = destination();
    offsets_.push_back(0);
    for (std::size_t s = 0; s < state_count(); ++s) {
        const std::size_t stage = stage_of(s);
        if (s == dest) {
            actions_.push_back(dest);
        } else if (stage == m_) {
            actions_.push_back(dest);
        } else {
            for (std::size_t j = 0; j < m_; ++j) actions_.push_back(copy_state(stage + 1, j));
            if (early_exit_) actions_.push_back(dest);
        }
        while (pair_state_.size() < actions_.size()) pair_state_.push_back(s);
        offsets_.push_back(actions_.size());
    }
    for (std::size_t a : actions_) outcomes_.push_back({a, 1.0});

    order_.push_back(dest);
    for (std::size_t k = m_; k >= 1; --k) {
        for (std::size_t j = 0; j < m_; ++j) order_.push_back(copy_state(k, j));
    }
    for (std::size_t i = 0; i < n_; ++i) order_.push_back(i);
}

std::size_t LiftedTopology::stage_of(std::size_t s) const {
    if (s < n_) return 0;
    if (s == destination()) return m_ + 1;
    if (s < destination()) return copy_stage(s);
    throw InvalidInput("state index out of range");
}

bool LiftedTopology::feasible(std::size_t s, std::size_t action) const {
    if (s >= state_count()) return false;
    for (std::size_t p = row_begin(s); p < row_end(s); ++p) {
        if (actions_[p] == action) return true;
    }
    return false;
}

std::size_t LiftedTopology::pair_of(std::size_t s, std::size_t action) const {
    if (s < state_count()) {
        for (std::size_t p = row_begin(s); p < row_end(s); ++p) {
            if (actions_[p] == action) return p;
        }
    }
    throw ContractViolation("infeasible state-action pair");
}

std::size_t LiftedTopology::transition(std::size_t s, std::size_t action) const {
    return outcomes(pair_of(s, action)).front().state;
}

LiftedTopology lift(const Network& net, bool early_exit) {
    return LiftedTopology(net.node_count(), net.facility_count(), early_exit);
}

StateParams make_params(const Network& net, const LiftedTopology& topo,
                        const FacilityLayout& layout) {
    require_matching(net, layout);
    if (topo.node_count() != net.node_count() || topo.facility_count() != net.facility_count()) {
        throw InvalidInput("topology does not match the network");
    }
    StateParams p;
    p.xi.resize(topo.state_count());
    p.free.assign(topo.state_count(), false);
    for (std::size_t i = 0; i < topo.node_count(); ++i) p.xi[i] = net.nodes()[i];
    for (std::size_t k = 1; k <= topo.facility_count(); ++k) {
        for (std::size_t j = 0; j < topo.facility_count(); ++j) {
            const std::size_t s = topo.copy_state(k, j);
            p.xi[s] = layout.at(k, j);
            p.free[s] = true;
        }
    }
    p.xi[topo.destination()] = net.destination();
    return p;
}

FacilityLayout layout_of(const StateParams& params, const LiftedTopology& topo, bool tied) {
    const std::size_t m = topo.facility_count();
    std::vector<std::vector<Point2>> grid(m, std::vector<Point2>(m));
    for (std::size_t k = 1; k <= m; ++k) {
        for (std::size_t j = 0; j < m; ++j) grid[k - 1][j] = params.xi[topo.copy_state(k, j)];
    }
    return FacilityLayout(std::move(grid), tied);
}

Cost lifted_cost(const LiftedTopology& topo, const StateParams& params, std::size_t s,
                 std::size_t a, std::size_t next) {
    if (!topo.feasible(s, a) || topo.transition(s, a) != next) {
        throw ContractViolation("lifted_cost on an infeasible transition");
    }
    if (s == topo.destination()) return 0.0;
    return stage_cost(params.xi[s], params.xi[next]);
}

Cost corrected_cost(Cost c, double prob, double beta, double gamma) {
    return c + (gamma / beta) * std::log(prob);
}

namespace {

// -(gamma/beta) * log sum_p exp(-(beta/gamma) lambda[p]) over one row.
double soft_min(std::span<const double> row, double scale_inv) {
    double lo = std::numeric_limits<double>::infinity();
    for (double v : row) lo = std::min(lo, v);
    double acc = 0.0;
    for (double v : row) acc += std::exp(-scale_inv * (v - lo));
    return lo - std::log(acc) / scale_inv;
}

// Costs per pair with the deterministic-transition outcome; nonzero only off the destination.
std::vector<double> pair_costs(const LiftedTopology& topo, const StateParams& params,
                               double beta, double gamma) {
    std::vector<double> c(topo.pair_count(), 0.0);
    for (std::size_t p = 0; p < topo.pair_count(); ++p) {
        const std::size_t s = topo.pair_state(p);
        if (s == topo.destination()) continue;
        double acc = 0.0;
        for (const Outcome& o : topo.outcomes(p)) {
            acc += o.prob * corrected_cost(stage_cost(params.xi[s], params.xi[o.state]), o.prob,
                                           beta, gamma);
        }
        c[p] = acc;
    }
    return c;
}

}  // namespace

SoftValueTable lambda_fixed_point(const LiftedTopology& topo, const StateParams& params,
                                  Beta beta, double gamma, double tol, int max_iter) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must lie in (0, 1]");
    const double scale_inv = beta / gamma;
    const std::vector<double> costs = pair_costs(topo, params, beta, gamma);

    SoftValueTable t;
    t.beta = beta;
    t.gamma = gamma;
    t.lambda_sa.assign(topo.pair_count(), 0.0);
    t.value.assign(topo.state_count(), 0.0);
    for (std::size_t s = 0; s < topo.state_count(); ++s) {
        t.value[s] = soft_min({&t.lambda_sa[topo.row_begin(s)], topo.row_size(s)}, scale_inv);
    }

    for (int sweep = 1; sweep <= max_iter; ++sweep) {
        double residual = 0.0;
        for (std::size_t s : topo.sweep_order()) {
            for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
                double target = costs[p];
                for (const Outcome& o : topo.outcomes(p)) target += o.prob * gamma * t.value[o.state];
                residual = std::max(residual, std::abs(target - t.lambda_sa[p]));
                t.lambda_sa[p] = target;
            }
            t.value[s] = soft_min({&t.lambda_sa[topo.row_begin(s)], topo.row_size(s)}, scale_inv);
        }
        t.residual = residual;
        t.sweeps = sweep;
        if (residual <= tol) return t;
    }
    throw NonConvergence("lambda fixed point did not converge", t.residual);
}

StationaryPolicy policy_from_lambda(const SoftValueTable& table, const LiftedTopology& topo) {
    const double scale_inv = table.beta / table.gamma;
    StationaryPolicy pol;
    pol.beta = table.beta;
    pol.mu.assign(topo.pair_count(), 0.0);
    for (std::size_t s = 0; s < topo.state_count(); ++s) {
        const std::size_t b = topo.row_begin(s), e = topo.row_end(s);
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t p = b; p < e; ++p) lo = std::min(lo, table.lambda_sa[p]);
        double sum = 0.0;
        for (std::size_t p = b; p < e; ++p) {
            pol.mu[p] = std::exp(-scale_inv * (table.lambda_sa[p] - lo));
            sum += pol.mu[p];
        }
        for (std::size_t p = b; p < e; ++p) pol.mu[p] /= sum;
    }
    return pol;
}

void cost_gradient(const LiftedTopology& topo, const StateParams& params, std::size_t s,
                   std::size_t next, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    if (s == topo.destination()) return;
    const Point2 d = (params.xi[s] - params.xi[next]) * 2.0;
    if (topo.is_copy(s) && params.free[s]) {
        const std::size_t i = StateParams::copy_param(topo, s);
        out[i] += d.x;
        out[i + 1] += d.y;
    }
    if (topo.is_copy(next) && params.free[next]) {
        const std::size_t i = StateParams::copy_param(topo, next);
        out[i] -= d.x;
        out[i + 1] -= d.y;
    }
}

GradientTable gradient_fixed_point(const LiftedTopology& topo, const StateParams& params,
                                   const StationaryPolicy& policy, Beta beta, double gamma,
                                   double tol, int max_iter) {
    (void)beta;  // the deterministic-transition correction does not depend on parameters
    if (policy.mu.size() != topo.pair_count()) throw InvalidInput("policy does not match topology");
    const std::size_t np = StateParams::param_count(topo);

    GradientTable t;
    t.params = np;
    t.g.assign(topo.state_count() * np, 0.0);
    t.k.assign(topo.pair_count() * np, 0.0);
    std::vector<double> g_new(np);

    // dc/d alpha touches at most the two coordinates of s and of s'.
    auto add_cost_gradient = [&](std::size_t s, std::size_t next, double w, double* row) {
        if (s == topo.destination()) return;
        const Point2 d = (params.xi[s] - params.xi[next]) * (2.0 * w);
        if (topo.is_copy(s) && params.free[s]) {
            const std::size_t i = StateParams::copy_param(topo, s);
            row[i] += d.x;
            row[i + 1] += d.y;
        }
        if (topo.is_copy(next) && params.free[next]) {
            const std::size_t i = StateParams::copy_param(topo, next);
            row[i] -= d.x;
            row[i + 1] -= d.y;
        }
    };

    for (int sweep = 1; sweep <= max_iter; ++sweep) {
        double residual = 0.0;
        for (std::size_t s : topo.sweep_order()) {
            std::fill(g_new.begin(), g_new.end(), 0.0);
            for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
                double* k_row = &t.k[p * np];
                std::fill(k_row, k_row + np, 0.0);
                for (const Outcome& o : topo.outcomes(p)) {
                    const double* g_next = &t.g[o.state * np];
                    const double w = o.prob * gamma;
                    for (std::size_t a = 0; a < np; ++a) k_row[a] += w * g_next[a];
                    add_cost_gradient(s, o.state, o.prob, k_row);
                }
                const double mu = policy.mu[p];
                if (mu == 0.0) continue;
                for (std::size_t a = 0; a < np; ++a) g_new[a] += mu * k_row[a];
            }
            double* g_row = &t.g[s * np];
            for (std::size_t a = 0; a < np; ++a) {
                residual = std::max(residual, std::abs(g_new[a] - g_row[a]));
                g_row[a] = g_new[a];
            }
        }
        t.residual = residual;
        t.sweeps = sweep;
        if (residual <= tol) return t;
    }
    throw NonConvergence("gradient fixed point did not converge", t.residual);
}

double weighted_value(const Network& net, const SoftValueTable& table) {
    double acc = 0.0;
    for (std::size_t i = 0; i < net.node_count(); ++i) acc += net.weights()[i] * table.value[i];
    return acc;
}

std::vector<double> weighted_gradient(const Network& net, const LiftedTopology& topo,
                                      const GradientTable& table, bool tied) {
    std::vector<double> per_copy(table.params, 0.0);
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        const auto row = table.g_row(i);
        for (std::size_t a = 0; a < table.params; ++a) per_copy[a] += net.weights()[i] * row[a];
    }
    if (!tied) return per_copy;
    const std::size_t m = topo.facility_count();
    std::vector<double> out(2 * m, 0.0);
    for (std::size_t k = 1; k <= m; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t i = StateParams::copy_param(topo, topo.copy_state(k, j));
            out[2 * j] += per_copy[i];
            out[2 * j + 1] += per_copy[i + 1];
        }
    }
    return out;
}

std::vector<double> hard_values(const LiftedTopology& topo, const StateParams& params) {
    std::vector<double> v(topo.state_count(), 0.0);
    for (std::size_t s : topo.sweep_order()) {
        if (s == topo.destination()) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
            const std::size_t next = topo.pair_action(p);
            best = std::min(best, stage_cost(params.xi[s], params.xi[next]) + v[next]);
        }
        v[s] = best;
    }
    return v;
}

flpo::StageAssociations unlift_policy(const StationaryPolicy& policy, const LiftedTopology& topo) {
    const std::size_t n = topo.node_count();
    const std::size_t m = topo.facility_count();
    const flpo::StageGraph g(n, m, topo.early_exit());

    // Column of a lifted target in the stage-(k+1) element numbering.
    auto column = [&](std::size_t k_next, std::size_t target) {
        return target == topo.destination() ? g.destination_index(k_next)
                                            : topo.copy_facility(target);
    };

    flpo::StageAssociations out;
    out.beta = policy.beta;
    out.p.resize(m + 1);
    for (std::size_t k = 0; k <= m; ++k) {
        out.p[k].assign(g.stage_size(k), std::vector<double>(g.stage_size(k + 1), 0.0));
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            if (g.is_destination(k, e)) {
                out.p[k][e][g.destination_index(k + 1)] = 1.0;
                continue;
            }
            const std::size_t s = k == 0 ? e : topo.copy_state(k, e);
            for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
                out.p[k][e][column(k + 1, topo.pair_action(p))] = policy.mu[p];
            }
        }
    }
    return out;
}

ArgmaxRouting argmax_routing(const Network& net, const LiftedTopology& topo,
                             const StateParams& params, const StationaryPolicy& policy) {
    ArgmaxRouting out;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        std::size_t s = i;
        double cost = 0.0;
        flpo::Route route;
        while (s != topo.destination()) {
            std::size_t best = topo.row_begin(s);
            for (std::size_t p = best + 1; p < topo.row_end(s); ++p) {
                if (policy.mu[p] > policy.mu[best]) best = p;
            }
            const std::size_t next = topo.pair_action(best);
            cost += lifted_cost(topo, params, s, next, next);
            route.push_back(next == topo.destination() ? flpo::kDestination
                                                       : int(topo.copy_facility(next)));
            s = next;
        }
        out.cost += net.weights()[i] * cost;
        out.routes.push_back(std::move(route));
    }
    return out;
}

namespace {

void write_params(const LiftedTopology& topo, std::span<const double> theta, bool tied,
                  StateParams& params) {
    const std::size_t m = topo.facility_count();
    for (std::size_t k = 1; k <= m; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t s = topo.copy_state(k, j);
            const std::size_t i = tied ? 2 * j : StateParams::copy_param(topo, s);
            params.xi[s] = {theta[i], theta[i + 1]};
        }
    }
}

}  // namespace

ParaSdmSolution solve_parasdm_annealed(const Network& net, const opt::AnnealingSchedule& schedule,
                                       const ParaSdmOptions& options) {
    schedule.validate();
    if (!(options.gamma > 0.0 && options.gamma <= 1.0)) {
        throw InvalidInput("gamma must lie in (0, 1]");
    }
    const auto start = std::chrono::steady_clock::now();
    const std::size_t m = net.facility_count();
    const LiftedTopology topo = lift(net, options.early_exit);
    const bool tied = options.tie_stages;

    const Point2 c = initial_facility_position(net);
    StateParams params =
        make_params(net, topo, FacilityLayout::tied_from(std::vector<Point2>(m, c)));
    const std::size_t dim = tied ? 2 * m : StateParams::param_count(topo);
    std::vector<double> theta0(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        theta0[i] = c.x;
        theta0[i + 1] = c.y;
    }

    opt::QuasiNewtonConfig qn;
    qn.grad_tol = schedule.inner_tol;
    qn.max_iter = std::min(schedule.inner_max_iter, options.inner_max_iter);

    auto per_beta = [&](double beta_value, std::vector<double> theta) {
        const Beta beta(beta_value);
        bool fixed_point_ok = true;
        auto objective = [&](std::span<const double> x, std::span<double> grad) {
            write_params(topo, x, tied, params);
            try {
                const SoftValueTable t = lambda_fixed_point(topo, params, beta, options.gamma,
                                                            options.fixed_point_tol,
                                                            options.fixed_point_max_iter);
                const StationaryPolicy pol = policy_from_lambda(t, topo);
                const GradientTable gt =
                    gradient_fixed_point(topo, params, pol, beta, options.gamma,
                                         options.fixed_point_tol, options.fixed_point_max_iter);
                const auto wg = weighted_gradient(net, topo, gt, tied);
                std::copy(wg.begin(), wg.end(), grad.begin());
                return weighted_value(net, t);
            } catch (const NonConvergence&) {
                fixed_point_ok = false;
                std::fill(grad.begin(), grad.end(), 0.0);
                return std::numeric_limits<double>::quiet_NaN();
            }
        };
        opt::InnerResult out;
        try {
            const auto r = opt::quasi_newton_minimize(objective, std::move(theta), qn);
            out = {r.x, r.value, r.iterations, r.converged && fixed_point_ok};
        } catch (const InvalidInput&) {
            out = {theta, std::numeric_limits<double>::quiet_NaN(), 0, false};
        }
        return out;
    };

    const auto trace = opt::anneal_driver(schedule, theta0, per_beta);

    write_params(topo, trace.back().params, tied, params);
    const Beta final_beta(trace.back().beta);
    const SoftValueTable t =
        lambda_fixed_point(topo, params, final_beta, options.gamma, options.fixed_point_tol,
                           options.fixed_point_max_iter);

    ParaSdmSolution sol{layout_of(params, topo, tied), policy_from_lambda(t, topo), {}, 0.0, {},
                        0.0, trace.size(), 0, options.gamma, tied};
    for (const auto& e : trace) {
        sol.value_trace.emplace_back(e.beta, e.value);
        if (!e.converged) ++sol.nonconverged_steps;
    }
    const ArgmaxRouting hard = argmax_routing(net, topo, params, sol.policy);
    sol.hard_cost = hard.cost;
    sol.routes = hard.routes;
    sol.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

}  // namespace parasdm::lifted

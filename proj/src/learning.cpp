#include "parasdm/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parasdm::learn {

using lifted::LiftedTopology;
using lifted::StateParams;
using lifted::StationaryPolicy;

StepRule harmonic_step() {
    return [](std::size_t visits) { return 1.0 / (1.0 + double(visits)); };
}

LearnerState LearnerState::initial(const LiftedTopology& topo, StepRule rule) {
    LearnerState s;
    s.params = StateParams::param_count(topo);
    s.psi.assign(topo.pair_count(), 0.0);
    s.k.assign(topo.pair_count() * s.params, 0.0);
    s.visits.assign(topo.pair_count(), 0);
    s.step_rule = std::move(rule);
    return s;
}

StationaryPolicy uniform_policy(const LiftedTopology& topo) {
    StationaryPolicy pol;
    pol.mu.assign(topo.pair_count(), 0.0);
    for (std::size_t s = 0; s < topo.state_count(); ++s) {
        for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
            pol.mu[p] = 1.0 / double(topo.row_size(s));
        }
    }
    return pol;
}

Episode sample_episode(const Network& net, const LiftedTopology& topo, const StateParams& params,
                       const StationaryPolicy& behavior, std::mt19937_64& rng) {
    if (behavior.mu.size() != topo.pair_count()) {
        throw InvalidInput("behavior policy does not match topology");
    }
    std::discrete_distribution<std::size_t> start(net.weights().begin(), net.weights().end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Episode ep;
    std::size_t s = start(rng);
    // Stage monotonicity bounds the length by M + 1; the cap guards malformed policies.
    const std::size_t cap = topo.facility_count() + 2;
    while (s != topo.destination() && ep.transitions.size() < cap) {
        const std::size_t b = topo.row_begin(s), e = topo.row_end(s);
        double total = 0.0;
        for (std::size_t p = b; p < e; ++p) total += behavior.mu[p];
        if (!(total > 0.0)) throw InvalidInput("behavior policy row has zero support");
        const double u = unit(rng) * total;
        double acc = 0.0;
        std::size_t chosen = e - 1;
        for (std::size_t p = b; p < e; ++p) {
            acc += behavior.mu[p];
            if (u < acc) {
                chosen = p;
                break;
            }
        }
        const std::size_t a = topo.pair_action(chosen);
        const std::size_t next = topo.outcomes(chosen).front().state;
        ep.transitions.push_back({s, a, lifted::lifted_cost(topo, params, s, a, next), next});
        s = next;
    }
    return ep;
}

namespace {

double step_size(const LearnerState& state, std::size_t pair) {
    const double nu = state.step_rule(state.visits[pair]);
    if (!(nu >= 0.0 && nu <= 1.0)) throw InvalidInput("step size must lie in [0, 1]");
    return nu;
}

double soft_min_row(const LiftedTopology& topo, const std::vector<double>& psi, std::size_t s,
                    double scale_inv) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) lo = std::min(lo, psi[p]);
    double acc = 0.0;
    for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
        acc += std::exp(-scale_inv * (psi[p] - lo));
    }
    return lo - std::log(acc) / scale_inv;
}

}  // namespace

void psi_update(LearnerState& state, const LiftedTopology& topo, const Transition& t,
                double beta, double gamma) {
    const std::size_t pair = topo.pair_of(t.state, t.action);
    if (t.state == topo.destination()) {
        state.psi[pair] = 0.0;
        ++state.visits[pair];
        return;
    }
    const double nu = step_size(state, pair);
    // gamma * softmin_{gamma/beta} = -(gamma^2/beta) log sum exp(-(beta/gamma) Psi)
    const double target = t.cost + gamma * soft_min_row(topo, state.psi, t.next, beta / gamma);
    state.psi[pair] = (1.0 - nu) * state.psi[pair] + nu * target;
    ++state.visits[pair];
}

void k_update(LearnerState& state, const LiftedTopology& topo, const StateParams& params,
              const Transition& t, const StationaryPolicy& policy, double gamma) {
    const std::size_t pair = topo.pair_of(t.state, t.action);
    const std::size_t np = state.params;
    if (t.state == topo.destination()) return;
    const double nu = step_size(state, pair);

    std::vector<double> target(np);
    lifted::cost_gradient(topo, params, t.state, t.next, target);
    for (std::size_t p = topo.row_begin(t.next); p < topo.row_end(t.next); ++p) {
        const double mu = policy.mu[p];
        if (mu == 0.0) continue;
        for (std::size_t a = 0; a < np; ++a) target[a] += gamma * mu * state.k[p * np + a];
    }
    double* row = &state.k[pair * np];
    for (std::size_t a = 0; a < np; ++a) row[a] = (1.0 - nu) * row[a] + nu * target[a];
}

QLearningResult snapshot(const LearnerState& state, const LiftedTopology& topo, double beta,
                         double gamma) {
    QLearningResult r;
    r.state = state;
    r.psi.beta = beta;
    r.psi.gamma = gamma;
    r.psi.lambda_sa = state.psi;
    r.psi.value.resize(topo.state_count());
    for (std::size_t s = 0; s < topo.state_count(); ++s) {
        r.psi.value[s] = soft_min_row(topo, state.psi, s, beta / gamma);
    }
    const StationaryPolicy pol = lifted::policy_from_lambda(r.psi, topo);
    const std::size_t np = state.params;
    r.gradients.params = np;
    r.gradients.k = state.k;
    r.gradients.g.assign(topo.state_count() * np, 0.0);
    for (std::size_t s = 0; s < topo.state_count(); ++s) {
        for (std::size_t p = topo.row_begin(s); p < topo.row_end(s); ++p) {
            for (std::size_t a = 0; a < np; ++a) {
                r.gradients.g[s * np + a] += pol.mu[p] * state.k[p * np + a];
            }
        }
    }
    return r;
}

void q_learn_continue(LearnerState& state, const Network& net, const LiftedTopology& topo,
                      const StateParams& params, double beta, double gamma,
                      std::size_t episodes, std::mt19937_64& rng) {
    const StationaryPolicy behavior = uniform_policy(topo);
    const double scale_inv = beta / gamma;
    StationaryPolicy greedy;
    greedy.beta = beta;
    greedy.mu.assign(topo.pair_count(), 0.0);

    for (std::size_t ep = 0; ep < episodes; ++ep) {
        const Episode e = sample_episode(net, topo, params, behavior, rng);
        for (const Transition& t : e.transitions) {
            // Gibbs policy of the current Psi on the successor row only.
            const std::size_t b = topo.row_begin(t.next), end = topo.row_end(t.next);
            double lo = std::numeric_limits<double>::infinity();
            for (std::size_t p = b; p < end; ++p) lo = std::min(lo, state.psi[p]);
            double sum = 0.0;
            for (std::size_t p = b; p < end; ++p) {
                greedy.mu[p] = std::exp(-scale_inv * (state.psi[p] - lo));
                sum += greedy.mu[p];
            }
            for (std::size_t p = b; p < end; ++p) greedy.mu[p] /= sum;

            k_update(state, topo, params, t, greedy, gamma);
            psi_update(state, topo, t, beta, gamma);
        }
    }
}

QLearningResult q_learn(const Network& net, const LiftedTopology& topo, const StateParams& params,
                        double beta, double gamma, std::size_t episodes, StepRule step_rule,
                        std::mt19937_64& rng) {
    LearnerState state = LearnerState::initial(topo, std::move(step_rule));
    q_learn_continue(state, net, topo, params, beta, gamma, episodes, rng);
    return snapshot(state, topo, beta, gamma);
}

}  // namespace parasdm::learn

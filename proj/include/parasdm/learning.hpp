#pragma once

#include <functional>
#include <random>
#include <vector>

#include "parasdm/lifted.hpp"

namespace parasdm::learn {

/// Step size nu as a function of the visit count of the updated pair.
using StepRule = std::function<double(std::size_t visits)>;

/// nu = 1 / (1 + visits): satisfies the Robbins-Monro conditions per pair.
StepRule harmonic_step();

struct LearnerState {
    std::vector<double> psi;      // per pair
    std::vector<double> k;        // pair * params + alpha
    std::vector<std::size_t> visits;
    std::size_t params = 0;
    StepRule step_rule;

    /// Psi = 0, K = 0, no visits.
    static LearnerState initial(const lifted::LiftedTopology& topo, StepRule rule);
};

struct Transition {
    std::size_t state;
    std::size_t action;
    Cost cost;
    std::size_t next;
};

struct Episode {
    std::vector<Transition> transitions;
};

/// Uniform distribution over the feasible actions of every state.
lifted::StationaryPolicy uniform_policy(const lifted::LiftedTopology& topo);

/// Rolls out from a node drawn from the network weights until the destination.
/// Throws InvalidInput when a visited state has no positive-probability action.
Episode sample_episode(const Network& net, const lifted::LiftedTopology& topo,
                       const lifted::StateParams& params,
                       const lifted::StationaryPolicy& behavior, std::mt19937_64& rng);

/// Psi(s,a) <- (1-nu) Psi(s,a) + nu [c - (gamma^2/beta) log sum_{a'} exp(-(beta/gamma) Psi(s',a'))].
/// Advances the visit count of (s,a). The destination pair stays pinned at 0.
void psi_update(LearnerState& state, const lifted::LiftedTopology& topo, const Transition& t,
                double beta, double gamma);

/// K(s,a) <- (1-nu) K(s,a) + nu [dc/d alpha + gamma sum_{a'} mu(a'|s') K(s',a')].
/// Uses the current visit count without advancing it; call before psi_update.
void k_update(LearnerState& state, const lifted::LiftedTopology& topo,
              const lifted::StateParams& params, const Transition& t,
              const lifted::StationaryPolicy& policy, double gamma);

struct QLearningResult {
    lifted::SoftValueTable psi;
    lifted::GradientTable gradients;
    LearnerState state;
};

/// Off-policy soft Q-learning with uniform exploration. The K bootstrap uses
/// the Gibbs policy of the current Psi at the successor state.
QLearningResult q_learn(const Network& net, const lifted::LiftedTopology& topo,
                        const lifted::StateParams& params, double beta, double gamma,
                        std::size_t episodes, StepRule step_rule, std::mt19937_64& rng);

/// Continues learning from an existing state (for checkpointed convergence runs).
void q_learn_continue(LearnerState& state, const Network& net,
                      const lifted::LiftedTopology& topo, const lifted::StateParams& params,
                      double beta, double gamma, std::size_t episodes, std::mt19937_64& rng);

/// Packs a learner state into the table types used by the exact solvers.
QLearningResult snapshot(const LearnerState& state, const lifted::LiftedTopology& topo,
                         double beta, double gamma);

}  // namespace parasdm::learn

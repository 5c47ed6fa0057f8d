#pragma once

#include <span>
#include <vector>

#include "parasdm/core.hpp"
#include "parasdm/flpo.hpp"
#include "parasdm/optimizer.hpp"

namespace parasdm::lifted {

/// One possible successor of a (state, action) pair.
struct Outcome {
    std::size_t state;
    double prob;
};

/// Stationary state space obtained by stacking the stages of the routing
/// graph: N nodes, M*M stage-tagged facility copies f_j^k, one destination.
///
/// State ids: nodes 0..N-1, copy f_j^k at N + (k-1)*M + j, destination last.
/// Actions are identified with their target state. Feasible (state, action)
/// pairs are stored row-wise; pair ids index every per-pair table.
class LiftedTopology {
public:
    LiftedTopology(std::size_t nodes, std::size_t facilities, bool early_exit = true);

    std::size_t node_count() const noexcept { return n_; }
    std::size_t facility_count() const noexcept { return m_; }
    std::size_t state_count() const noexcept { return n_ + m_ * m_ + 1; }
    std::size_t pair_count() const noexcept { return actions_.size(); }
    std::size_t destination() const noexcept { return n_ + m_ * m_; }
    bool early_exit() const noexcept { return early_exit_; }

    std::size_t copy_state(std::size_t stage, std::size_t facility) const {
        return n_ + (stage - 1) * m_ + facility;
    }
    bool is_node(std::size_t s) const { return s < n_; }
    bool is_copy(std::size_t s) const { return s >= n_ && s < destination(); }
    /// Stage of a copy state (1..M).
    std::size_t copy_stage(std::size_t s) const { return (s - n_) / m_ + 1; }
    std::size_t copy_facility(std::size_t s) const { return (s - n_) % m_; }
    /// 0 for nodes, k for f_j^k, M+1 for the destination.
    std::size_t stage_of(std::size_t s) const;

    /// Pair ids of state s are [row_begin(s), row_end(s)).
    std::size_t row_begin(std::size_t s) const { return offsets_[s]; }
    std::size_t row_end(std::size_t s) const { return offsets_[s + 1]; }
    std::size_t row_size(std::size_t s) const { return offsets_[s + 1] - offsets_[s]; }
    std::size_t pair_state(std::size_t pair) const { return pair_state_[pair]; }
    /// Action (target state) of a pair.
    std::size_t pair_action(std::size_t pair) const { return actions_[pair]; }
    bool feasible(std::size_t s, std::size_t action) const;
    /// Pair id of (s, action); throws ContractViolation if infeasible.
    std::size_t pair_of(std::size_t s, std::size_t action) const;

    std::span<const Outcome> outcomes(std::size_t pair) const {
        return {&outcomes_[pair], 1};
    }
    std::size_t transition(std::size_t s, std::size_t action) const;

    /// States in decreasing stage order: destination first, nodes last.
    const std::vector<std::size_t>& sweep_order() const noexcept { return order_; }

private:
    std::size_t n_;
    std::size_t m_;
    bool early_exit_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> actions_;
    std::vector<std::size_t> pair_state_;
    std::vector<Outcome> outcomes_;
    std::vector<std::size_t> order_;
};

LiftedTopology lift(const Network& net, bool early_exit = true);

/// Per-state location parameters xi_s and per-action parameters lambda_a.
/// Only facility copies are free; nodes and the destination are fixed.
struct StateParams {
    std::vector<Point2> xi;
    std::vector<bool> free;
    std::vector<double> lambda;  // no action parameters in the routing problem

    /// Scalar index (2 per copy, x then y) of the free parameters of copy state s.
    static std::size_t copy_param(const LiftedTopology& topo, std::size_t s) {
        return 2 * (s - topo.node_count());
    }
    static std::size_t param_count(const LiftedTopology& topo) {
        return 2 * topo.facility_count() * topo.facility_count();
    }
};

StateParams make_params(const Network& net, const LiftedTopology& topo,
                        const FacilityLayout& layout);
FacilityLayout layout_of(const StateParams& params, const LiftedTopology& topo, bool tied);

/// c(s, a, s'): squared distance between the locations of s and s'.
Cost lifted_cost(const LiftedTopology& topo, const StateParams& params, std::size_t s,
                 std::size_t a, std::size_t next);

/// Cost with the stochastic-transition correction c + (gamma/beta) log p.
Cost corrected_cost(Cost c, double prob, double beta, double gamma);

struct SoftValueTable {
    std::vector<double> lambda_sa;  // per pair
    std::vector<double> value;      // V(s) = -(gamma/beta) log sum_a exp(-(beta/gamma) Lambda(s,a))
    double beta = 0.0;
    double gamma = 1.0;
    double residual = 0.0;
    int sweeps = 0;
};

/// Soft Bellman fixed point in Lambda, iterated in Gauss-Seidel sweeps over
/// sweep_order() until the infinity-norm change is <= tol. Throws
/// NonConvergence after max_iter sweeps.
SoftValueTable lambda_fixed_point(const LiftedTopology& topo, const StateParams& params,
                                  Beta beta, double gamma = 1.0, double tol = 1e-12,
                                  int max_iter = 1000);

struct StationaryPolicy {
    std::vector<double> mu;  // per pair
    double beta = 0.0;
};

StationaryPolicy policy_from_lambda(const SoftValueTable& table, const LiftedTopology& topo);

struct GradientTable {
    std::size_t params = 0;
    /// g[s * params + alpha] = dV(s)/d alpha over all copy parameters.
    std::vector<double> g;
    /// k[pair * params + alpha] = d Lambda(s,a)/d alpha.
    std::vector<double> k;
    double residual = 0.0;
    int sweeps = 0;

    std::span<const double> g_row(std::size_t s) const { return {&g[s * params], params}; }
    std::span<const double> k_row(std::size_t pair) const { return {&k[pair * params], params}; }
};

/// Gradient of V with respect to every copy parameter, as the fixed point of
/// G(s) = sum_a mu(a|s) sum_s' p [dc/d alpha + gamma G(s')].
GradientTable gradient_fixed_point(const LiftedTopology& topo, const StateParams& params,
                                   const StationaryPolicy& policy, Beta beta,
                                   double gamma = 1.0, double tol = 1e-12, int max_iter = 1000);

/// d/dc(s,a,s') of the copy parameters of s and s', written into `out` (size params).
void cost_gradient(const LiftedTopology& topo, const StateParams& params, std::size_t s,
                   std::size_t next, std::span<double> out);

/// rho-weighted objective sum_i rho_i V(n_i).
double weighted_value(const Network& net, const SoftValueTable& table);

/// rho-weighted gradient, summed per facility (size 2M) when tied, else per copy (2M^2).
std::vector<double> weighted_gradient(const Network& net, const LiftedTopology& topo,
                                      const GradientTable& table, bool tied);

/// Hard Bellman values: V(s) = min_a [c(s,a) + V(a)].
std::vector<double> hard_values(const LiftedTopology& topo, const StateParams& params);

/// Time-varying stage policies read off the stage-tagged rows; same shape as
/// the stage-wise associations.
flpo::StageAssociations unlift_policy(const StationaryPolicy& policy, const LiftedTopology& topo);

struct ParaSdmOptions {
    double gamma = 1.0;
    bool tie_stages = true;
    bool early_exit = true;
    int inner_max_iter = 100;
    double fixed_point_tol = 1e-12;
    int fixed_point_max_iter = 1000;
};

struct ParaSdmSolution {
    FacilityLayout layout;
    StationaryPolicy policy;
    std::vector<std::pair<double, double>> value_trace;
    Cost hard_cost = 0.0;
    std::vector<flpo::Route> routes;
    double wall_time = 0.0;
    std::size_t beta_steps = 0;
    std::size_t nonconverged_steps = 0;
    double gamma = 1.0;
    bool tie_stages = true;
    bool converged() const { return nonconverged_steps == 0; }
};

struct ArgmaxRouting {
    Cost cost = 0.0;
    std::vector<flpo::Route> routes;
};

/// Follows the most probable action from every node (ties to the lower
/// facility index, destination last) and totals the weighted route cost.
ArgmaxRouting argmax_routing(const Network& net, const LiftedTopology& topo,
                             const StateParams& params, const StationaryPolicy& policy);

ParaSdmSolution solve_parasdm_annealed(const Network& net, const opt::AnnealingSchedule& schedule,
                                       const ParaSdmOptions& options = {});

}  // namespace parasdm::lifted

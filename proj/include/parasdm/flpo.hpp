#pragma once

#include <vector>

#include "parasdm/core.hpp"
#include "parasdm/optimizer.hpp"

namespace parasdm::flpo {

/// Layered routing graph. Stage 0 holds the N nodes, stages 1..M hold the M
/// facilities followed by the destination (index M), stage M+1 holds only
/// the destination (index 0). The destination is absorbing with zero cost.
///
/// With `early_exit` false the destination is reachable only from stage M,
/// which forces every route through M facility hops.
class StageGraph {
public:
    StageGraph(std::size_t nodes, std::size_t facilities, bool early_exit = true);

    std::size_t node_count() const noexcept { return n_; }
    std::size_t facility_count() const noexcept { return m_; }
    std::size_t stage_count() const noexcept { return m_ + 2; }
    bool early_exit() const noexcept { return early_exit_; }

    std::size_t stage_size(std::size_t k) const;
    bool is_destination(std::size_t k, std::size_t e) const;
    std::size_t destination_index(std::size_t k) const { return k == m_ + 1 ? 0 : m_; }
    /// Successor indices at stage k+1 of element e at stage k (k <= M), facilities
    /// first in index order, then the destination.
    const std::vector<std::size_t>& successors(std::size_t k, std::size_t e) const;

    Point2 position(const Network& net, const FacilityLayout& layout, std::size_t k,
                    std::size_t e) const;
    /// d_k(e, e') between stage k and stage k+1.
    Cost edge_cost(const Network& net, const FacilityLayout& layout, std::size_t k,
                   std::size_t e, std::size_t next) const;

    /// Routes per node: sum over t = 0..M of M^t (or M^M without early exit).
    double paths_per_node() const;

private:
    std::size_t n_;
    std::size_t m_;
    bool early_exit_;
    std::vector<std::vector<std::vector<std::size_t>>> succ_;
};

struct PartitionTable {
    /// log_z[k][e] = log Z_k(e) for k = 0..M+1.
    std::vector<std::vector<double>> log_z;
    double beta = 0.0;
};

struct StageAssociations {
    /// p[k](e, e') = p_k(e' | e), dense with zeros on infeasible successors; k = 0..M.
    std::vector<std::vector<std::vector<double>>> p;
    double beta = 0.0;
};

PartitionTable backward_log_partition(const Network& net, const FacilityLayout& layout,
                                      Beta beta, const StageGraph& graph);
PartitionTable backward_log_partition(const Network& net, const FacilityLayout& layout,
                                      Beta beta);

StageAssociations stage_gibbs(const PartitionTable& pt, const Network& net,
                              const FacilityLayout& layout, const StageGraph& graph);
StageAssociations stage_gibbs(const PartitionTable& pt, const Network& net,
                              const FacilityLayout& layout);

/// F = -(1/beta) sum_i rho_i log Z_0(x_i).
Cost free_energy(const Network& net, const FacilityLayout& layout, Beta beta,
                 const StageGraph& graph);
Cost free_energy(const Network& net, const FacilityLayout& layout, Beta beta);

/// dF/dy per stage copy (per_stage[k-1][j]) and per facility, summed over
/// stages (the gradient with respect to a tied location).
struct LayoutGradient {
    std::vector<std::vector<Point2>> per_stage;
    std::vector<Point2> per_facility;
};

LayoutGradient free_energy_gradient(const Network& net, const FacilityLayout& layout, Beta beta,
                                    const StageGraph& graph);

struct FreeEnergyEval {
    Cost value = 0.0;
    LayoutGradient gradient;
};
/// Free energy and its gradient from a single backward/forward pass.
FreeEnergyEval free_energy_with_gradient(const Network& net, const FacilityLayout& layout,
                                         Beta beta, const StageGraph& graph);
LayoutGradient free_energy_gradient(const Network& net, const FacilityLayout& layout, Beta beta);

/// Weighted stage-occupancy marginals: m[k][e] = sum_i rho_i P(gamma_k = e | x_i).
std::vector<std::vector<double>> forward_marginals(const Network& net,
                                                   const StageAssociations& assoc,
                                                   const StageGraph& graph);

/// Weighted expected route cost under `assoc`.
Cost expected_cost(const Network& net, const FacilityLayout& layout,
                   const StageAssociations& assoc, const StageGraph& graph);
Cost expected_cost(const Network& net, const FacilityLayout& layout,
                   const StageAssociations& assoc);

/// Weighted Shannon entropy of the induced route distributions.
double path_entropy(const Network& net, const StageAssociations& assoc, const StageGraph& graph);
double path_entropy(const Network& net, const StageAssociations& assoc);

/// Route of one node as the stage elements visited at stages 1.. up to and
/// including the first destination. Facilities are 0-based, the destination is -1.
using Route = std::vector<int>;
inline constexpr int kDestination = -1;

struct HardCostResult {
    Cost cost = 0.0;
    std::vector<Route> routes;
    std::vector<Cost> per_node;
};

/// Exact shortest stage-respecting route per node (min-plus backward DP).
/// Ties go to the lower facility index, the destination last.
HardCostResult hard_cost(const Network& net, const FacilityLayout& layout,
                         const StageGraph& graph);
HardCostResult hard_cost(const Network& net, const FacilityLayout& layout);

struct FlpoSolution {
    FacilityLayout layout;
    StageAssociations associations;
    std::vector<std::pair<double, double>> free_energy_trace;
    Cost hard_cost = 0.0;
    std::vector<Route> routes;
    double wall_time = 0.0;
    std::size_t beta_steps = 0;
    /// Number of beta steps whose inner minimization did not converge.
    std::size_t nonconverged_steps = 0;
    bool converged() const { return nonconverged_steps == 0; }
};

struct FlpoOptions {
    bool early_exit = true;
    opt::QuasiNewtonConfig inner;  // grad_tol / max_iter overwritten from the schedule
};

FlpoSolution solve_flpo_annealed(const Network& net, const opt::AnnealingSchedule& schedule,
                                 const FlpoOptions& options = {});

/// Default schedule for `net`: beta_min = 0.01 / max squared pairwise distance,
/// beta_max = 1e4 / smallest positive node-to-destination squared distance.
opt::AnnealingSchedule default_schedule(const Network& net);

}  // namespace parasdm::flpo

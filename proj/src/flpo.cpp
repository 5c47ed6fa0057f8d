#include "parasdm/flpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace parasdm::flpo {

StageGraph::StageGraph(std::size_t nodes, std::size_t facilities, bool early_exit)
    : n_(nodes), m_(facilities), early_exit_(early_exit) {
    if (n_ == 0 || m_ == 0) throw InvalidInput("stage graph needs nodes and facilities");
    succ_.resize(m_ + 1);
    std::vector<std::size_t> facilities_then_dest;
    for (std::size_t j = 0; j < m_; ++j) facilities_then_dest.push_back(j);
    std::vector<std::size_t> facilities_only = facilities_then_dest;
    facilities_then_dest.push_back(m_);

    for (std::size_t k = 0; k <= m_; ++k) {
        succ_[k].resize(stage_size(k));
        for (std::size_t e = 0; e < stage_size(k); ++e) {
            if (is_destination(k, e)) {
                succ_[k][e] = {destination_index(k + 1)};
            } else if (k == m_) {
                succ_[k][e] = {0};
            } else {
                succ_[k][e] = early_exit_ ? facilities_then_dest : facilities_only;
            }
        }
    }
}

std::size_t StageGraph::stage_size(std::size_t k) const {
    if (k == 0) return n_;
    if (k <= m_) return m_ + 1;
    if (k == m_ + 1) return 1;
    throw InvalidInput("stage index out of range");
}

bool StageGraph::is_destination(std::size_t k, std::size_t e) const {
    if (k == 0) return false;
    return e == destination_index(k);
}

const std::vector<std::size_t>& StageGraph::successors(std::size_t k, std::size_t e) const {
    return succ_.at(k).at(e);
}

Point2 StageGraph::position(const Network& net, const FacilityLayout& layout, std::size_t k,
                            std::size_t e) const {
    if (k == 0) return net.nodes()[e];
    if (is_destination(k, e)) return net.destination();
    return layout.at(k, e);
}

Cost StageGraph::edge_cost(const Network& net, const FacilityLayout& layout, std::size_t k,
                           std::size_t e, std::size_t next) const {
    if (is_destination(k, e)) return 0.0;
    return stage_cost(position(net, layout, k, e), position(net, layout, k + 1, next));
}

double StageGraph::paths_per_node() const {
    const double m = double(m_);
    if (!early_exit_) return std::pow(m, m);
    double total = 0.0;
    for (std::size_t t = 0; t <= m_; ++t) total += std::pow(m, double(t));
    return total;
}

namespace {

StageGraph graph_for(const Network& net, const FacilityLayout& layout) {
    require_matching(net, layout);
    return StageGraph(net.node_count(), net.facility_count());
}

void check(const Network& net, const FacilityLayout& layout, const StageGraph& g) {
    require_matching(net, layout);
    if (g.node_count() != net.node_count() || g.facility_count() != net.facility_count()) {
        throw InvalidInput("stage graph does not match the network");
    }
}

// Per-stage edge costs, cost[k][e][slot] aligned with successors(k, e).
using EdgeCosts = std::vector<std::vector<std::vector<double>>>;

EdgeCosts edge_costs(const Network& net, const FacilityLayout& layout, const StageGraph& g) {
    EdgeCosts c(g.facility_count() + 1);
    for (std::size_t k = 0; k <= g.facility_count(); ++k) {
        c[k].resize(g.stage_size(k));
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            for (std::size_t next : g.successors(k, e)) {
                c[k][e].push_back(g.edge_cost(net, layout, k, e, next));
            }
        }
    }
    return c;
}

}  // namespace

PartitionTable backward_log_partition(const Network& net, const FacilityLayout& layout,
                                      Beta beta, const StageGraph& g) {
    check(net, layout, g);
    const std::size_t m = g.facility_count();
    const EdgeCosts costs = edge_costs(net, layout, g);

    PartitionTable pt;
    pt.beta = beta;
    pt.log_z.resize(m + 2);
    pt.log_z[m + 1] = {0.0};
    std::vector<double> terms;
    for (std::size_t k = m + 1; k-- > 0;) {
        pt.log_z[k].resize(g.stage_size(k));
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            const auto& succ = g.successors(k, e);
            terms.resize(succ.size());
            for (std::size_t s = 0; s < succ.size(); ++s) {
                terms[s] = -beta * costs[k][e][s] + pt.log_z[k + 1][succ[s]];
            }
            pt.log_z[k][e] = log_sum_exp(terms);
        }
    }
    return pt;
}

PartitionTable backward_log_partition(const Network& net, const FacilityLayout& layout,
                                      Beta beta) {
    return backward_log_partition(net, layout, beta, graph_for(net, layout));
}

StageAssociations stage_gibbs(const PartitionTable& pt, const Network& net,
                              const FacilityLayout& layout, const StageGraph& g) {
    check(net, layout, g);
    const std::size_t m = g.facility_count();
    if (pt.log_z.size() != m + 2) throw InvalidInput("partition table does not match network");
    const double beta = pt.beta;

    StageAssociations out;
    out.beta = beta;
    out.p.resize(m + 1);
    for (std::size_t k = 0; k <= m; ++k) {
        out.p[k].assign(g.stage_size(k), std::vector<double>(g.stage_size(k + 1), 0.0));
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            const auto& succ = g.successors(k, e);
            double row_sum = 0.0;
            for (std::size_t next : succ) {
                const double d = g.edge_cost(net, layout, k, e, next);
                const double v = std::exp(-beta * d + pt.log_z[k + 1][next] - pt.log_z[k][e]);
                out.p[k][e][next] = v;
                row_sum += v;
            }
            // Normalize away accumulated rounding.
            for (std::size_t next : succ) out.p[k][e][next] /= row_sum;
        }
    }
    return out;
}

StageAssociations stage_gibbs(const PartitionTable& pt, const Network& net,
                              const FacilityLayout& layout) {
    return stage_gibbs(pt, net, layout, graph_for(net, layout));
}

Cost free_energy(const Network& net, const FacilityLayout& layout, Beta beta,
                 const StageGraph& g) {
    const PartitionTable pt = backward_log_partition(net, layout, beta, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        acc += net.weights()[i] * pt.log_z[0][i];
    }
    return -acc / beta;
}

Cost free_energy(const Network& net, const FacilityLayout& layout, Beta beta) {
    return free_energy(net, layout, beta, graph_for(net, layout));
}

std::vector<std::vector<double>> forward_marginals(const Network& net,
                                                   const StageAssociations& assoc,
                                                   const StageGraph& g) {
    const std::size_t m = g.facility_count();
    std::vector<std::vector<double>> occ(m + 2);
    occ[0] = net.weights();
    for (std::size_t k = 0; k <= m; ++k) {
        occ[k + 1].assign(g.stage_size(k + 1), 0.0);
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            if (occ[k][e] == 0.0) continue;
            for (std::size_t next : g.successors(k, e)) {
                occ[k + 1][next] += occ[k][e] * assoc.p[k][e][next];
            }
        }
    }
    return occ;
}

FreeEnergyEval free_energy_with_gradient(const Network& net, const FacilityLayout& layout,
                                         Beta beta, const StageGraph& g) {
    // dF/dy = sum over edges of (expected edge flow) * d(edge cost)/dy: the
    // reverse sweep of the log-partition recursion expressed through the
    // forward occupancy marginals.
    const PartitionTable pt = backward_log_partition(net, layout, beta, g);
    const StageAssociations assoc = stage_gibbs(pt, net, layout, g);
    const auto occ = forward_marginals(net, assoc, g);
    const std::size_t m = g.facility_count();

    FreeEnergyEval eval;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        eval.value += net.weights()[i] * pt.log_z[0][i];
    }
    eval.value = -eval.value / beta;

    LayoutGradient& out = eval.gradient;
    out.per_stage.assign(m, std::vector<Point2>(m, Point2{}));
    out.per_facility.assign(m, Point2{});
    auto accumulate = [&](std::size_t k, std::size_t e, const Point2& d) {
        if (k == 0 || g.is_destination(k, e) || k > m) return;
        out.per_stage[k - 1][e] = out.per_stage[k - 1][e] + d;
    };
    for (std::size_t k = 0; k <= m; ++k) {
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            if (occ[k][e] == 0.0 || g.is_destination(k, e)) continue;
            const Point2 from = g.position(net, layout, k, e);
            for (std::size_t next : g.successors(k, e)) {
                const double flow = occ[k][e] * assoc.p[k][e][next];
                if (flow == 0.0) continue;
                const Point2 to = g.position(net, layout, k + 1, next);
                const Point2 diff = (from - to) * (2.0 * flow);
                accumulate(k, e, diff);
                accumulate(k + 1, next, diff * -1.0);
            }
        }
    }
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            out.per_facility[j] = out.per_facility[j] + out.per_stage[k][j];
        }
    }
    return eval;
}

LayoutGradient free_energy_gradient(const Network& net, const FacilityLayout& layout, Beta beta,
                                    const StageGraph& g) {
    return free_energy_with_gradient(net, layout, beta, g).gradient;
}

LayoutGradient free_energy_gradient(const Network& net, const FacilityLayout& layout,
                                    Beta beta) {
    return free_energy_gradient(net, layout, beta, graph_for(net, layout));
}

Cost expected_cost(const Network& net, const FacilityLayout& layout,
                   const StageAssociations& assoc, const StageGraph& g) {
    check(net, layout, g);
    const auto occ = forward_marginals(net, assoc, g);
    double total = 0.0;
    for (std::size_t k = 0; k <= g.facility_count(); ++k) {
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            if (occ[k][e] == 0.0) continue;
            for (std::size_t next : g.successors(k, e)) {
                const double p = assoc.p[k][e][next];
                if (p == 0.0) continue;
                total += occ[k][e] * p * g.edge_cost(net, layout, k, e, next);
            }
        }
    }
    return total;
}

Cost expected_cost(const Network& net, const FacilityLayout& layout,
                   const StageAssociations& assoc) {
    return expected_cost(net, layout, assoc, graph_for(net, layout));
}

double path_entropy(const Network& net, const StageAssociations& assoc, const StageGraph& g) {
    // Chain rule: H(route) = sum_k E[H(p_k(.|gamma_k))].
    const auto occ = forward_marginals(net, assoc, g);
    double h = 0.0;
    for (std::size_t k = 0; k <= g.facility_count(); ++k) {
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            if (occ[k][e] == 0.0) continue;
            for (std::size_t next : g.successors(k, e)) {
                const double p = assoc.p[k][e][next];
                if (p > 0.0) h -= occ[k][e] * p * std::log(p);
            }
        }
    }
    return h;
}

double path_entropy(const Network& net, const StageAssociations& assoc) {
    return path_entropy(net, assoc, StageGraph(net.node_count(), net.facility_count()));
}

HardCostResult hard_cost(const Network& net, const FacilityLayout& layout, const StageGraph& g) {
    check(net, layout, g);
    const std::size_t m = g.facility_count();
    std::vector<std::vector<double>> value(m + 2);
    std::vector<std::vector<std::size_t>> choice(m + 1);
    value[m + 1] = {0.0};
    for (std::size_t k = m + 1; k-- > 0;) {
        value[k].resize(g.stage_size(k));
        choice[k].resize(g.stage_size(k));
        for (std::size_t e = 0; e < g.stage_size(k); ++e) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            // successors are ordered facilities-then-destination, so strict
            // improvement keeps the documented tie-break.
            for (std::size_t next : g.successors(k, e)) {
                const double v = g.edge_cost(net, layout, k, e, next) + value[k + 1][next];
                if (v < best) {
                    best = v;
                    arg = next;
                }
            }
            value[k][e] = best;
            choice[k][e] = arg;
        }
    }

    HardCostResult out;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        Route route;
        std::size_t e = i;
        for (std::size_t k = 0; k <= m; ++k) {
            e = choice[k][e];
            if (g.is_destination(k + 1, e)) {
                route.push_back(kDestination);
                break;
            }
            route.push_back(int(e));
        }
        out.routes.push_back(std::move(route));
        out.per_node.push_back(value[0][i]);
        out.cost += net.weights()[i] * value[0][i];
    }
    return out;
}

HardCostResult hard_cost(const Network& net, const FacilityLayout& layout) {
    return hard_cost(net, layout, graph_for(net, layout));
}

opt::AnnealingSchedule default_schedule(const Network& net) {
    std::vector<Point2> pts = net.nodes();
    pts.push_back(net.destination());
    double max_sq = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a) {
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            max_sq = std::max(max_sq, stage_cost(pts[a], pts[b]));
        }
    }
    double min_pos = std::numeric_limits<double>::infinity();
    for (const auto& x : net.nodes()) {
        const double c = terminal_cost(x, net.destination());
        if (c > 0.0) min_pos = std::min(min_pos, c);
    }
    if (!(max_sq > 0.0)) max_sq = 1.0;
    if (!std::isfinite(min_pos)) min_pos = max_sq;

    opt::AnnealingSchedule s;
    s.beta_min = 0.01 / max_sq;
    s.beta_max = 1e4 / min_pos;
    return s;
}

namespace {

FacilityLayout layout_from(std::span<const double> theta, std::size_t m) {
    std::vector<Point2> ys(m);
    for (std::size_t j = 0; j < m; ++j) ys[j] = {theta[2 * j], theta[2 * j + 1]};
    return FacilityLayout::tied_from(ys);
}

}  // namespace

FlpoSolution solve_flpo_annealed(const Network& net, const opt::AnnealingSchedule& schedule,
                                 const FlpoOptions& options) {
    schedule.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t m = net.facility_count();
    const StageGraph graph(net.node_count(), m, options.early_exit);

    opt::QuasiNewtonConfig qn = options.inner;
    qn.grad_tol = schedule.inner_tol;
    qn.max_iter = schedule.inner_max_iter;

    const Point2 c = initial_facility_position(net);
    std::vector<double> theta0;
    for (std::size_t j = 0; j < m; ++j) {
        theta0.push_back(c.x);
        theta0.push_back(c.y);
    }

    auto per_beta = [&](double beta_value, std::vector<double> theta) {
        const Beta beta(beta_value);
        auto objective = [&](std::span<const double> x, std::span<double> grad) {
            const FacilityLayout layout = layout_from(x, m);
            const FreeEnergyEval e = free_energy_with_gradient(net, layout, beta, graph);
            for (std::size_t j = 0; j < m; ++j) {
                grad[2 * j] = e.gradient.per_facility[j].x;
                grad[2 * j + 1] = e.gradient.per_facility[j].y;
            }
            return e.value;
        };
        const auto r = opt::quasi_newton_minimize(objective, std::move(theta), qn);
        return opt::InnerResult{r.x, r.value, r.iterations, r.converged};
    };

    const auto trace = opt::anneal_driver(schedule, theta0, per_beta);

    const FacilityLayout layout = layout_from(trace.back().params, m);
    const Beta final_beta(trace.back().beta);
    const auto pt = backward_log_partition(net, layout, final_beta, graph);
    FlpoSolution sol{layout, stage_gibbs(pt, net, layout, graph), {}, 0.0, {}, 0.0, 0, 0};
    for (const auto& t : trace) {
        sol.free_energy_trace.emplace_back(t.beta, t.value);
        if (!t.converged) ++sol.nonconverged_steps;
    }
    sol.beta_steps = trace.size();
    const HardCostResult hard = hard_cost(net, layout, graph);
    sol.hard_cost = hard.cost;
    sol.routes = hard.routes;
    sol.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

}  // namespace parasdm::flpo

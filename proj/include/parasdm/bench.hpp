#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "parasdm/flpo.hpp"
#include "parasdm/lifted.hpp"

namespace parasdm::bench {

class GuardExceeded : public std::runtime_error {
public:
    GuardExceeded(const std::string& what, double count)
        : std::runtime_error(what), count_(count) {}
    double count() const noexcept { return count_; }

private:
    double count_;
};

struct OracleResult {
    Cost cost = 0.0;
    std::vector<flpo::Route> routes;
    double paths_enumerated = 0.0;
};

/// Enumerates every stage-respecting route of every node (one facility or the
/// destination per stage, destination absorbing) and keeps the first strict
/// minimum in lexicographic order (facilities ascending, destination last).
/// Refuses when N * routes-per-node exceeds `guard`.
OracleResult brute_force_route_oracle(const Network& net, const FacilityLayout& layout,
                                      bool early_exit = true, double guard = 1e6);

enum class SolverKind { stagewise, lifted };
std::string to_string(SolverKind kind);

struct RunReport {
    std::string dataset_id;
    SolverKind solver = SolverKind::stagewise;
    Cost hard_cost = 0.0;
    double normalized_cost = 0.0;
    double wall_time_s = 0.0;
    std::size_t beta_steps = 0;
    bool converged = true;
};

struct ComparisonSummary {
    double mean_normalized_gap = 0.0;  // mean |lifted/stagewise - 1|
    double max_normalized_gap = 0.0;
    std::size_t within_5_percent = 0;
    double mean_time_ratio = 0.0;  // mean lifted/stagewise wall time
    double median_time_stagewise = 0.0;
    double median_time_lifted = 0.0;
    double median_time_ratio = 0.0;  // median lifted / median stagewise
    std::size_t datasets = 0;
};

struct ComparisonTable {
    std::vector<RunReport> rows;
    ComparisonSummary summary;
};

/// Fills normalized_cost (ratio to the stage-wise cost of the same dataset)
/// and the summary. Throws InvalidInput on missing or duplicate rows.
ComparisonTable assemble(std::vector<RunReport> rows);

inline constexpr const char* kCsvHeader =
    "dataset_id,solver,hard_cost,normalized_cost,wall_time_s,beta_steps,converged";

std::string to_csv(const ComparisonTable& table, bool include_wall_time = true);

/// Writes results.csv, cost.svg, time.svg and summary.json into out_dir.
void emit_report(const ComparisonTable& table, const std::filesystem::path& out_dir);

/// Grouped bar chart, one group per dataset and one bar per solver.
std::string grouped_bar_svg(const ComparisonTable& table, bool wall_time,
                            const std::string& title);

nlohmann::json to_json(const flpo::FlpoSolution& sol);
nlohmann::json to_json(const lifted::ParaSdmSolution& sol, bool include_policy = false);

/// key = value lines, '#' starts a comment.
struct Config {
    std::map<std::string, std::string> values;

    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);
    std::optional<double> number(const std::string& key) const;
    std::optional<bool> boolean(const std::string& key) const;
};

/// Default schedule for the network, then config keys beta_min, beta_max,
/// growth, perturbation, inner_tol, inner_max_iter, seed.
opt::AnnealingSchedule schedule_from(const Network& net, const Config& cfg);

struct CompareOptions {
    Config config;
    double gamma = 1.0;
    bool tie_stages = true;
    std::size_t threads = 0;  // 0: PARASDM_THREADS or hardware concurrency
};

/// Runs both solvers on every dataset; one worker per dataset.
ComparisonTable run_comparison(const std::vector<std::pair<std::string, Network>>& datasets,
                               const CompareOptions& options);

std::size_t worker_count(std::size_t requested, std::size_t jobs);

}  // namespace parasdm::bench

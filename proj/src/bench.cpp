#include "parasdm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace parasdm::bench {

using nlohmann::json;

OracleResult brute_force_route_oracle(const Network& net, const FacilityLayout& layout,
                                      bool early_exit, double guard) {
    require_matching(net, layout);
    const std::size_t m = net.facility_count();
    const double per_node = flpo::StageGraph(net.node_count(), m, early_exit).paths_per_node();
    const double total = per_node * double(net.node_count());
    if (total > guard) {
        throw GuardExceeded("route enumeration exceeds guard", total);
    }

    OracleResult out;
    out.paths_enumerated = total;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        // choice[t] in 0..M: facility index, M = destination. Odometer enumeration
        // in lexicographic order; positions after the first destination are unused.
        std::vector<std::size_t> choice(m, 0);
        double best = std::numeric_limits<double>::infinity();
        flpo::Route best_route;
        while (true) {
            flpo::Route route;
            std::vector<Point2> pts{net.nodes()[i]};
            std::size_t used = 0;  // number of choices consumed
            bool valid = true;
            for (std::size_t t = 0; t < m; ++t) {
                used = t + 1;
                if (choice[t] == m) {
                    if (!early_exit) valid = false;
                    break;
                }
                route.push_back(int(choice[t]));
                pts.push_back(layout.at(t + 1, choice[t]));
            }
            route.push_back(flpo::kDestination);
            pts.push_back(net.destination());

            // Skip odometer states that differ only after the first destination.
            bool canonical = true;
            for (std::size_t t = used; t < m; ++t) canonical = canonical && choice[t] == 0;

            if (valid && canonical) {
                double c = 0.0;
                for (std::size_t e = pts.size() - 1; e-- > 0;) c = stage_cost(pts[e], pts[e + 1]) + c;
                if (c < best) {
                    best = c;
                    best_route = route;
                }
            }

            std::size_t t = m;
            while (t-- > 0) {
                if (++choice[t] <= m) break;
                choice[t] = 0;
            }
            if (t == std::size_t(-1)) break;
        }
        out.cost += net.weights()[i] * best;
        out.routes.push_back(std::move(best_route));
    }
    return out;
}

std::string to_string(SolverKind kind) {
    return kind == SolverKind::stagewise ? "stagewise" : "lifted";
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ComparisonTable assemble(std::vector<RunReport> rows) {
    if (rows.empty()) throw InvalidInput("comparison table is empty");
    std::map<std::string, std::pair<const RunReport*, const RunReport*>> by_dataset;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        auto [it, inserted] = by_dataset.try_emplace(r.dataset_id, nullptr, nullptr);
        if (inserted) order.push_back(r.dataset_id);
        auto& slot = r.solver == SolverKind::stagewise ? it->second.first : it->second.second;
        if (slot) throw InvalidInput("duplicate row for dataset " + r.dataset_id);
        slot = &r;
    }
    ComparisonTable table;
    std::vector<double> t_stage, t_lift, ratios;
    for (const auto& id : order) {
        const auto [stage, lift] = by_dataset.at(id);
        if (!stage || !lift) throw InvalidInput("dataset " + id + " lacks a solver row");
        RunReport s = *stage, l = *lift;
        s.normalized_cost = 1.0;
        l.normalized_cost = stage->hard_cost > 0.0 ? lift->hard_cost / stage->hard_cost
                            : lift->hard_cost == 0.0 ? 1.0
                                                     : std::numeric_limits<double>::infinity();
        const double gap = std::abs(l.normalized_cost - 1.0);
        table.summary.mean_normalized_gap += gap;
        table.summary.max_normalized_gap = std::max(table.summary.max_normalized_gap, gap);
        if (gap <= 0.05) ++table.summary.within_5_percent;
        t_stage.push_back(s.wall_time_s);
        t_lift.push_back(l.wall_time_s);
        ratios.push_back(s.wall_time_s > 0.0 ? l.wall_time_s / s.wall_time_s : 0.0);
        table.rows.push_back(s);
        table.rows.push_back(l);
    }
    auto& sm = table.summary;
    sm.datasets = order.size();
    sm.mean_normalized_gap /= double(order.size());
    for (double r : ratios) sm.mean_time_ratio += r / double(ratios.size());
    sm.median_time_stagewise = median(t_stage);
    sm.median_time_lifted = median(t_lift);
    sm.median_time_ratio =
        sm.median_time_stagewise > 0.0 ? sm.median_time_lifted / sm.median_time_stagewise : 0.0;
    return table;
}

std::string to_csv(const ComparisonTable& table, bool include_wall_time) {
    std::ostringstream os;
    os << kCsvHeader << '\n' << std::setprecision(17);
    for (const auto& r : table.rows) {
        os << r.dataset_id << ',' << to_string(r.solver) << ',' << r.hard_cost << ','
           << r.normalized_cost << ',';
        if (include_wall_time) os << r.wall_time_s;
        os << ',' << r.beta_steps << ',' << (r.converged ? "true" : "false") << '\n';
    }
    return os.str();
}

std::string grouped_bar_svg(const ComparisonTable& table, bool wall_time,
                            const std::string& title) {
    const double width = 720, height = 360, left = 60, right = 20, top = 40, bottom = 50;
    std::vector<std::string> ids;
    for (const auto& r : table.rows) {
        if (ids.empty() || ids.back() != r.dataset_id) ids.push_back(r.dataset_id);
    }
    double ymax = 0.0;
    auto metric = [&](const RunReport& r) { return wall_time ? r.wall_time_s : r.normalized_cost; };
    for (const auto& r : table.rows) {
        if (std::isfinite(metric(r))) ymax = std::max(ymax, metric(r));
    }
    if (!(ymax > 0.0)) ymax = 1.0;
    ymax *= 1.1;

    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const double group_w = plot_w / double(std::max<std::size_t>(ids.size(), 1));
    const double bar_w = group_w * 0.35;

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
       << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
       << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = ymax * tick / 4.0;
        const double y = top + plot_h - plot_h * tick / 4.0;
        os << "<text x=\"" << left - 5 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
           << std::setprecision(3) << v << std::setprecision(2) << "</text>\n";
    }
    for (std::size_t g = 0; g < ids.size(); ++g) {
        const double gx = left + group_w * double(g);
        for (const auto& r : table.rows) {
            if (r.dataset_id != ids[g]) continue;
            const bool lifted = r.solver == SolverKind::lifted;
            const double v = std::isfinite(metric(r)) ? metric(r) : ymax;
            const double h = plot_h * v / ymax;
            const double x = gx + group_w * 0.15 + (lifted ? bar_w : 0.0);
            os << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w
               << "\" height=\"" << h << "\" fill=\"" << (lifted ? "#d95f02" : "#1b9e77")
               << "\"/>\n";
        }
        os << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << top + plot_h + 15
           << "\" text-anchor=\"middle\">" << ids[g] << "</text>\n";
    }
    os << "<rect x=\"" << left + 10 << "\" y=\"" << height - 20
       << "\" width=\"10\" height=\"10\" fill=\"#1b9e77\"/><text x=\"" << left + 25 << "\" y=\""
       << height - 11 << "\">stagewise</text>\n";
    os << "<rect x=\"" << left + 110 << "\" y=\"" << height - 20
       << "\" width=\"10\" height=\"10\" fill=\"#d95f02\"/><text x=\"" << left + 125 << "\" y=\""
       << height - 11 << "\">lifted</text>\n";
    os << "</svg>\n";
    return os.str();
}

void emit_report(const ComparisonTable& table, const std::filesystem::path& out_dir) {
    if (table.rows.empty()) throw InvalidInput("cannot emit an empty comparison table");
    std::filesystem::create_directories(out_dir);
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(out_dir / name);
        if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
        out << body;
    };
    write("results.csv", to_csv(table));
    write("cost.svg", grouped_bar_svg(table, false,
                                      "Hard cost normalized by the stage-wise cost per dataset"));
    write("time.svg", grouped_bar_svg(table, true, "Wall time (s)"));
    const auto& s = table.summary;
    json j{{"normalization", "hard_cost / stagewise hard_cost on the same dataset"},
           {"datasets", s.datasets},
           {"mean_normalized_gap", s.mean_normalized_gap},
           {"max_normalized_gap", s.max_normalized_gap},
           {"within_5_percent", s.within_5_percent},
           {"mean_time_ratio", s.mean_time_ratio},
           {"median_time_stagewise_s", s.median_time_stagewise},
           {"median_time_lifted_s", s.median_time_lifted},
           {"median_time_ratio", s.median_time_ratio}};
    write("summary.json", j.dump(2) + "\n");
}

namespace {

json layout_json(const FacilityLayout& layout) {
    json out = json::array();
    if (layout.tied()) {
        for (const auto& p : layout.first_stage()) out.push_back({p.x, p.y});
    } else {
        for (const auto& row : layout.grid()) {
            json r = json::array();
            for (const auto& p : row) r.push_back({p.x, p.y});
            out.push_back(r);
        }
    }
    return out;
}

json trace_json(const std::vector<std::pair<double, double>>& trace) {
    json out = json::array();
    for (const auto& [b, v] : trace) out.push_back({b, v});
    return out;
}

}  // namespace

json to_json(const flpo::FlpoSolution& sol) {
    return json{{"layout", layout_json(sol.layout)},
                {"beta_trace", trace_json(sol.free_energy_trace)},
                {"hard_cost", sol.hard_cost},
                {"routes", sol.routes},
                {"wall_time_s", sol.wall_time},
                {"beta_steps", sol.beta_steps},
                {"converged", sol.converged()}};
}

json to_json(const lifted::ParaSdmSolution& sol, bool include_policy) {
    json j{{"layout", layout_json(sol.layout)},
           {"beta_trace", trace_json(sol.value_trace)},
           {"hard_cost", sol.hard_cost},
           {"routes", sol.routes},
           {"wall_time_s", sol.wall_time},
           {"beta_steps", sol.beta_steps},
           {"converged", sol.converged()},
           {"gamma", sol.gamma},
           {"tie_stages", sol.tie_stages}};
    if (include_policy) j["stationary_policy_rows"] = sol.policy.mu;
    return j;
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value");
        }
        cfg.values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<double> Config::number(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw InvalidInput("config key " + key + " is not a number");
    }
}

std::optional<bool> Config::boolean(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InvalidInput("config key " + key + " is not a boolean");
}

opt::AnnealingSchedule schedule_from(const Network& net, const Config& cfg) {
    opt::AnnealingSchedule s = flpo::default_schedule(net);
    if (auto v = cfg.number("beta_min")) s.beta_min = *v;
    if (auto v = cfg.number("beta_max")) s.beta_max = *v;
    if (auto v = cfg.number("growth")) s.growth = *v;
    if (auto v = cfg.number("perturbation")) s.perturbation = *v;
    if (auto v = cfg.number("inner_tol")) s.inner_tol = *v;
    if (auto v = cfg.number("inner_max_iter")) s.inner_max_iter = int(*v);
    if (auto v = cfg.number("seed")) s.seed = std::uint64_t(*v);
    s.validate();
    return s;
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
    std::size_t n = requested;
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("PARASDM_THREADS")) {
            const long cap = std::strtol(env, nullptr, 10);
            if (cap > 0) n = std::min(n, std::size_t(cap));
        }
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

ComparisonTable run_comparison(const std::vector<std::pair<std::string, Network>>& datasets,
                               const CompareOptions& options) {
    if (datasets.empty()) throw InvalidInput("no datasets to compare");
    std::vector<RunReport> rows(2 * datasets.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&] {
        for (std::size_t i = next++; i < datasets.size(); i = next++) {
            try {
                const auto& [id, net] = datasets[i];
                const auto schedule = schedule_from(net, options.config);
                const auto fs = flpo::solve_flpo_annealed(net, schedule);
                lifted::ParaSdmOptions lo;
                lo.gamma = options.gamma;
                lo.tie_stages = options.tie_stages;
                const auto ls = lifted::solve_parasdm_annealed(net, schedule, lo);
                rows[2 * i] = {id, SolverKind::stagewise, fs.hard_cost, 1.0, fs.wall_time,
                               fs.beta_steps, fs.converged()};
                rows[2 * i + 1] = {id, SolverKind::lifted, ls.hard_cost, 0.0, ls.wall_time,
                                   ls.beta_steps, ls.converged()};
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t n = worker_count(options.threads, datasets.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return assemble(std::move(rows));
}

}  // namespace parasdm::bench

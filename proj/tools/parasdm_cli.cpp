// Command-line harness: dataset generation, both solvers, oracles, learning demo.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "parasdm/bench.hpp"
#include "parasdm/dataset.hpp"
#include "parasdm/flpo.hpp"
#include "parasdm/learning.hpp"
#include "parasdm/lifted.hpp"

namespace fs = std::filesystem;
using namespace parasdm;

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kValidationFailure = 2;
constexpr int kUsage = 64;

std::vector<std::int64_t> parse_seeds(const std::string& text) {
    std::vector<std::int64_t> seeds;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            seeds.push_back(std::stoll(part));
        } else {
            const auto lo = std::stoll(part.substr(0, dots));
            const auto hi = std::stoll(part.substr(dots + 2));
            if (hi < lo) throw InvalidInput("empty seed range " + part);
            for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        }
    }
    if (seeds.empty()) throw InvalidInput("no seeds given");
    return seeds;
}

struct ScheduleFlags {
    std::string config_path;
    std::optional<double> beta_min, beta_max, growth, perturbation;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "key = value config file");
        app->add_option("--beta-min", beta_min, "first annealing beta");
        app->add_option("--beta-max", beta_max, "last annealing beta (inclusive bound)");
        app->add_option("--growth", growth, "geometric beta growth factor (> 1)");
        app->add_option("--perturbation", perturbation, "symmetry-breaking noise scale");
        app->add_option("--seed", seed, "noise seed");
    }

    bench::Config config() const {
        bench::Config cfg = config_path.empty() ? bench::Config{} : bench::Config::load(config_path);
        auto put = [&](const char* key, const auto& v) {
            if (v) cfg.values[key] = std::to_string(*v);
        };
        put("beta_min", beta_min);
        put("beta_max", beta_max);
        put("growth", growth);
        put("perturbation", perturbation);
        put("seed", seed);
        return cfg;
    }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<std::pair<std::string, Network>> load_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json" && e.path().filename() != "summary.json") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Network>> out;
    for (const auto& f : files) out.emplace_back(f.stem().string(), load_network(f));
    if (out.empty()) throw InvalidInput("no dataset JSON files in " + dir.string());
    return out;
}

int run_oracle(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> n_dist(1, 4), m_dist(1, 3);
    std::size_t failures = 0;
    for (std::size_t t = 0; t < instances; ++t) {
        const int n = n_dist(rng), m = m_dist(rng);
        std::vector<Point2> nodes(n);
        for (auto& p : nodes) p = {unit(rng), unit(rng)};
        const Network net = Network::uniform(nodes, {unit(rng), unit(rng)}, m);
        std::vector<Point2> ys(m);
        for (auto& p : ys) p = {unit(rng), unit(rng)};
        const FacilityLayout layout = FacilityLayout::tied_from(ys);
        const auto dp = flpo::hard_cost(net, layout);
        const auto bf = bench::brute_force_route_oracle(net, layout);
        if (dp.cost != bf.cost || dp.routes != bf.routes) {
            ++failures;
            std::cout << "instance " << t << ": dp " << dp.cost << " oracle " << bf.cost << '\n';
        }
    }
    std::cout << "oracle: " << instances - failures << "/" << instances
              << " instances match the brute-force route minimum\n";
    return failures == 0 ? kOk : kValidationFailure;
}

int run_learn(const std::string& dataset, std::size_t episodes, double beta, double gamma,
              std::uint64_t seed) {
    Network net = dataset.empty()
                      ? Network::uniform({{0.0, 0.0}}, {1.0, 0.0}, 1)
                      : load_network(dataset);
    const std::size_t m = net.facility_count();
    std::vector<Point2> ys(m, initial_facility_position(net));
    if (dataset.empty()) ys = {{0.5, 0.2}};
    const auto topo = lifted::lift(net);
    const auto params = lifted::make_params(net, topo, FacilityLayout::tied_from(ys));
    std::mt19937_64 rng(seed);
    const auto learned =
        learn::q_learn(net, topo, params, beta, gamma, episodes, learn::harmonic_step(), rng);
    const auto exact = lifted::lambda_fixed_point(topo, params, Beta(beta), gamma);
    const auto grads = lifted::gradient_fixed_point(
        topo, params, lifted::policy_from_lambda(exact, topo), Beta(beta), gamma);
    double dpsi = 0.0, dk = 0.0;
    for (std::size_t p = 0; p < topo.pair_count(); ++p) {
        dpsi = std::max(dpsi, std::abs(learned.psi.lambda_sa[p] - exact.lambda_sa[p]));
    }
    for (std::size_t i = 0; i < grads.k.size(); ++i) {
        dk = std::max(dk, std::abs(learned.gradients.k[i] - grads.k[i]));
    }
    std::cout << "episodes " << episodes << "  max|Psi-Lambda| " << dpsi << "  max|K-K*| " << dk
              << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Facility-location path optimization: stage-wise and lifted solvers"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate small-cell benchmark datasets");
    std::string seeds_text = "1..10";
    std::string gen_out;
    std::size_t facilities = 5;
    gen->add_option("--seeds", seeds_text, "seed list, e.g. 1..10 or 1,4,7")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--facilities", facilities, "facility count M")->capture_default_str();

    auto* sflpo = app.add_subcommand("solve-flpo", "stage-wise annealed solver");
    std::string dataset, out_path;
    ScheduleFlags flpo_flags;
    sflpo->add_option("--dataset", dataset, "dataset JSON")->required()->check(CLI::ExistingFile);
    sflpo->add_option("--out", out_path, "solution JSON")->required();
    flpo_flags.attach(sflpo);

    auto* ssdm = app.add_subcommand("solve-sdm", "lifted time-invariant annealed solver");
    ScheduleFlags sdm_flags;
    double gamma = 1.0;
    bool tie_stages = true;
    bool dump_policy = false;
    ssdm->add_option("--dataset", dataset, "dataset JSON")->required()->check(CLI::ExistingFile);
    ssdm->add_option("--out", out_path, "solution JSON")->required();
    ssdm->add_option("--gamma", gamma, "discount factor in (0, 1]")->capture_default_str();
    ssdm->add_flag("--tie-stages,!--no-tie-stages", tie_stages,
                   "one location per facility across stages (default: on)");
    ssdm->add_flag("--dump-policy", dump_policy, "include stationary policy rows");
    sdm_flags.attach(ssdm);

    auto* cmp = app.add_subcommand("compare", "run both solvers on every dataset in a directory");
    std::string datasets_dir, cmp_out;
    ScheduleFlags cmp_flags;
    std::size_t threads = 0;
    cmp->add_option("--datasets", datasets_dir, "directory of dataset JSON files")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmp->add_option("--out", cmp_out, "report directory (default: the datasets directory)");
    cmp->add_option("--threads", threads, "worker cap (default: PARASDM_THREADS or cores)");
    cmp->add_option("--gamma", gamma, "discount for the lifted solver")->capture_default_str();
    cmp_flags.attach(cmp);

    auto* orc = app.add_subcommand("oracle", "check the DP hard cost against route enumeration");
    std::size_t instances = 50;
    std::uint64_t oracle_seed = 1;
    orc->add_option("--instances", instances, "random instances (N<=4, M<=3)")
        ->capture_default_str();
    orc->add_option("--seed", oracle_seed, "instance seed")->capture_default_str();

    auto* lrn = app.add_subcommand("learn", "tabular soft Q-learning against the exact tables");
    std::size_t episodes = 100000;
    double beta = 1.0;
    std::uint64_t learn_seed = 1;
    std::string learn_dataset;
    lrn->add_option("--dataset", learn_dataset, "dataset JSON (default: one node, one facility)");
    lrn->add_option("--episodes", episodes, "episode count")->capture_default_str();
    lrn->add_option("--beta", beta, "annealing parameter")->capture_default_str();
    lrn->add_option("--gamma", gamma, "discount factor")->capture_default_str();
    lrn->add_option("--seed", learn_seed, "rng seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kUsage;
    }

    try {
        if (*gen) {
            fs::create_directories(gen_out);
            for (auto seed : parse_seeds(seeds_text)) {
                auto spec = DatasetSpec::small_cell(seed);
                spec.facility_count = facilities;
                const fs::path path = fs::path(gen_out) / ("dataset_" + std::to_string(seed) + ".json");
                save_network(generate_dataset(spec), path);
                std::cout << path.string() << '\n';
            }
        } else if (*sflpo) {
            const Network net = load_network(dataset);
            const auto schedule = bench::schedule_from(net, flpo_flags.config());
            const auto sol = flpo::solve_flpo_annealed(net, schedule);
            write_json(out_path, bench::to_json(sol));
            std::cout << "hard_cost " << sol.hard_cost << "  wall_time_s " << sol.wall_time << '\n';
            if (!sol.converged()) {
                std::cerr << sol.nonconverged_steps << " beta steps did not converge\n";
            }
        } else if (*ssdm) {
            const Network net = load_network(dataset);
            const auto cfg = sdm_flags.config();
            const auto schedule = bench::schedule_from(net, cfg);
            lifted::ParaSdmOptions opts;
            opts.gamma = cfg.number("gamma").value_or(gamma);
            if (ssdm->count("--gamma")) opts.gamma = gamma;
            opts.tie_stages = cfg.boolean("tie_stages").value_or(true);
            if (ssdm->count("--tie-stages") || ssdm->count("--no-tie-stages")) opts.tie_stages = tie_stages;
            const auto sol = lifted::solve_parasdm_annealed(net, schedule, opts);
            write_json(out_path, bench::to_json(sol, dump_policy));
            std::cout << "hard_cost " << sol.hard_cost << "  wall_time_s " << sol.wall_time << '\n';
            if (!sol.converged()) {
                std::cerr << sol.nonconverged_steps << " beta steps did not converge\n";
            }
        } else if (*cmp) {
            bench::CompareOptions opts;
            opts.config = cmp_flags.config();
            opts.gamma = opts.config.number("gamma").value_or(1.0);
            if (cmp->count("--gamma")) opts.gamma = gamma;
            opts.tie_stages = opts.config.boolean("tie_stages").value_or(true);
            opts.threads = threads;
            const auto table = bench::run_comparison(load_dir(datasets_dir), opts);
            const fs::path out = cmp_out.empty() ? fs::path(datasets_dir) : fs::path(cmp_out);
            bench::emit_report(table, out);
            const auto& s = table.summary;
            std::cout << "datasets " << s.datasets << "  within 5%: " << s.within_5_percent
                      << "  max gap " << s.max_normalized_gap << "  median time ratio (lifted/stagewise) "
                      << s.median_time_ratio << '\n';
        } else if (*orc) {
            return run_oracle(instances, oracle_seed);
        } else if (*lrn) {
            return run_learn(learn_dataset, episodes, beta, gamma, learn_seed);
        }
    } catch (const InvalidInput& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    }
    return kOk;
}

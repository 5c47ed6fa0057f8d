#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "parasdm_cli_log.txt";
    const std::string cmd = std::string(PARASDM_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("parasdm_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("help documents defaults and exits 0") {
    const auto r = run("gen --help");
    CHECK(r.code == 0);
    CHECK(r.out.find("1..10") != std::string::npos);
    const auto s = run("solve-sdm --help");
    CHECK(s.code == 0);
    CHECK(s.out.find("--no-tie-stages") != std::string::npos);
}

TEST_CASE("usage errors exit 64 and print help") {
    const auto r = run("gen --out /tmp/x --bogus-flag");
    CHECK(r.code == 64);
    CHECK(r.out.find("--seeds") != std::string::npos);
    CHECK(run("").code == 64);
    CHECK(run("solve-flpo --dataset /definitely/missing.json --out x.json").code == 64);
}

TEST_CASE("gen writes one dataset per seed") {
    const auto dir = fresh_dir("gen");
    const auto r = run("gen --seeds 3..5 --out " + dir.string());
    REQUIRE(r.code == 0);
    for (int s = 3; s <= 5; ++s) {
        const auto p = dir / ("dataset_" + std::to_string(s) + ".json");
        REQUIRE(fs::exists(p));
        std::ifstream in(p);
        const auto j = nlohmann::json::parse(in);
        CHECK(j["nodes"].size() == 50);
        CHECK(j["facility_count"] == 5);
        CHECK(j["seed"] == s);
    }
}

TEST_CASE("malformed dataset exits 2") {
    const auto dir = fresh_dir("bad");
    std::ofstream(dir / "bad.json") << R"({"nodes": [[0,0]], "weights": [0.5], "destination": [1,0], "facility_count": 1})";
    const auto r = run("solve-flpo --dataset " + (dir / "bad.json").string() + " --out " +
                       (dir / "sol.json").string());
    CHECK(r.code == 2);
}

TEST_CASE("solve-sdm and a tiny compare") {
    const auto dir = fresh_dir("cmp");
    std::ofstream(dir / "tiny.json")
        << R"({"nodes": [[0,0],[0.2,0.9],[0.8,0.1]], "weights": [0.4,0.3,0.3], "destination": [1,1], "facility_count": 2})";
    const auto sol = dir / "out" / "sdm.json";
    const auto s = run("solve-sdm --dataset " + (dir / "tiny.json").string() + " --out " + sol.string() +
                       " --dump-policy --growth 2");
    REQUIRE(s.code == 0);
    std::ifstream in(sol);
    const auto j = nlohmann::json::parse(in);
    CHECK(j["gamma"] == 1.0);
    CHECK(j["tie_stages"] == true);
    CHECK(j.contains("stationary_policy_rows"));

    const auto report = dir / "report";
    const auto c = run("compare --datasets " + dir.string() + " --out " + report.string() +
                       " --growth 2 --threads 1");
    REQUIRE(c.code == 0);
    std::ifstream csv(report / "results.csv");
    std::string line;
    int rows = -1;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 2);
    CHECK(fs::exists(report / "summary.json"));
    CHECK(fs::exists(report / "cost.svg"));
}

TEST_CASE("oracle subcommand passes") {
    const auto r = run("oracle --instances 20 --seed 3");
    CHECK(r.code == 0);
    CHECK(r.out.find("20/20") != std::string::npos);
}

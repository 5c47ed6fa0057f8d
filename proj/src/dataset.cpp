#include "parasdm/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

namespace parasdm {

namespace {

using nlohmann::json;

Point2 point_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw SchemaError(std::string("expected [x, y] for ") + what);
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

DatasetSpec DatasetSpec::small_cell(std::int64_t seed) {
    DatasetSpec spec;
    spec.seed = seed;
    spec.cluster_sizes = {14, 12, 10, 8, 6};
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) ^ 0x5eed5eedULL);
    std::uniform_real_distribution<double> mean_coord(0.1, 0.9);
    std::uniform_real_distribution<double> dest_coord(0.0, 1.0);
    for (std::size_t j = 0; j < spec.cluster_sizes.size(); ++j) {
        const double x = mean_coord(rng);
        const double y = mean_coord(rng);
        spec.cluster_means.push_back({x, y});
    }
    const double dx = dest_coord(rng);
    const double dy = dest_coord(rng);
    spec.destination = {dx, dy};
    return spec;
}

Network generate_dataset(const DatasetSpec& spec) {
    if (spec.cluster_sizes.empty() || spec.cluster_means.empty()) {
        throw InvalidInput("dataset spec has no clusters");
    }
    if (spec.cluster_sizes.size() != spec.cluster_means.size()) {
        throw InvalidInput("cluster_means and cluster_sizes differ in length");
    }
    if (!(spec.cluster_covariance_scale > 0.0)) {
        throw InvalidInput("covariance scale must be positive");
    }
    for (auto s : spec.cluster_sizes) {
        if (s == 0) throw InvalidInput("cluster sizes must be positive");
    }

    std::mt19937_64 rng(static_cast<std::uint64_t>(spec.seed));
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.cluster_covariance_scale));
    std::vector<Point2> nodes;
    for (std::size_t c = 0; c < spec.cluster_sizes.size(); ++c) {
        for (std::size_t i = 0; i < spec.cluster_sizes[c]; ++i) {
            const double ex = noise(rng);
            const double ey = noise(rng);
            nodes.push_back(spec.cluster_means[c] + Point2{ex, ey});
        }
    }

    double lo_x = spec.destination.x, hi_x = spec.destination.x;
    double lo_y = spec.destination.y, hi_y = spec.destination.y;
    for (const auto& p : nodes) {
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
    }
    const double extent = std::max(hi_x - lo_x, hi_y - lo_y);
    const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
    // Clamp guards the last ulp of (hi - lo) * (1 / extent).
    auto normalize = [&](const Point2& p) {
        return Point2{std::clamp((p.x - lo_x) * scale, 0.0, 1.0),
                      std::clamp((p.y - lo_y) * scale, 0.0, 1.0)};
    };
    for (auto& p : nodes) p = normalize(p);
    const Point2 dest = extent > 0.0 ? normalize(spec.destination) : Point2{0.0, 0.0};

    std::vector<double> weights(nodes.size(), 1.0 / double(nodes.size()));
    return Network(std::move(nodes), std::move(weights), dest, spec.facility_count, spec.seed);
}

void save_network(const Network& net, const std::filesystem::path& path) {
    json j;
    j["nodes"] = json::array();
    for (const auto& p : net.nodes()) j["nodes"].push_back({p.x, p.y});
    j["weights"] = net.weights();
    j["destination"] = {net.destination().x, net.destination().y};
    j["facility_count"] = net.facility_count();
    if (net.seed()) j["seed"] = *net.seed();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    // nlohmann emits the shortest round-tripping representation of each double.
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
    for (const char* key : {"nodes", "weights", "destination", "facility_count"}) {
        if (!j.contains(key)) throw SchemaError(std::string("missing field: ") + key);
    }
    if (!j["nodes"].is_array() || !j["weights"].is_array()) {
        throw SchemaError("nodes and weights must be arrays");
    }
    std::vector<Point2> nodes;
    for (const auto& p : j["nodes"]) nodes.push_back(point_from_json(p, "node"));
    std::vector<double> weights;
    for (const auto& w : j["weights"]) {
        if (!w.is_number()) throw SchemaError("weights must be numbers");
        weights.push_back(w.get<double>());
    }
    const Point2 dest = point_from_json(j["destination"], "destination");
    if (!j["facility_count"].is_number_integer() || j["facility_count"].get<std::int64_t>() < 1) {
        throw SchemaError("facility_count must be a positive integer");
    }
    std::optional<std::int64_t> seed;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer()) throw SchemaError("seed must be an integer");
        seed = j["seed"].get<std::int64_t>();
    }
    try {
        return Network(std::move(nodes), std::move(weights), dest,
                       j["facility_count"].get<std::size_t>(), seed);
    } catch (const InvalidInput& e) {
        throw SchemaError(e.what());
    }
}

}  // namespace parasdm

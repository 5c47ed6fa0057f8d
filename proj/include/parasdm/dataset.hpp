#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "parasdm/core.hpp"

namespace parasdm {

struct DatasetSpec {
    std::int64_t seed = 0;
    std::vector<Point2> cluster_means;
    std::vector<std::size_t> cluster_sizes;
    double cluster_covariance_scale = 0.0005;
    Point2 destination;
    std::size_t facility_count = 5;

    /// Small-cell benchmark: five clusters of 14/12/10/8/6 nodes, means in
    /// [0.1,0.9]^2 and destination in [0,1]^2, all drawn from `seed`.
    static DatasetSpec small_cell(std::int64_t seed);
};

/// Gaussian clusters, then a single isotropic affine map of nodes and
/// destination into the unit square. Weights are uniform.
Network generate_dataset(const DatasetSpec& spec);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace parasdm

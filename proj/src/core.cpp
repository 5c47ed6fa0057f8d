#include "parasdm/core.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace parasdm {

Cost stage_cost(const Point2& a, const Point2& b) {
    if (!a.finite() || !b.finite()) {
        throw InvalidInput("stage_cost: non-finite coordinate");
    }
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

Cost terminal_cost(const Point2& x, const Point2& destination) {
    return stage_cost(x, destination);
}

Beta::Beta(double value) : value_(value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InvalidInput("beta must be positive and finite");
    }
}

Network::Network(std::vector<Point2> nodes, std::vector<double> weights, Point2 destination,
                 std::size_t facility_count, std::optional<std::int64_t> seed)
    : nodes_(std::move(nodes)),
      weights_(std::move(weights)),
      destination_(destination),
      facility_count_(facility_count),
      seed_(seed) {
    if (nodes_.empty()) throw InvalidInput("network has no nodes");
    if (facility_count_ < 1) throw InvalidInput("facility_count must be >= 1");
    if (weights_.size() != nodes_.size()) {
        throw InvalidInput("weights and nodes differ in length");
    }
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("negative or non-finite weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidInput("weights must sum to 1");
    for (const auto& p : nodes_) {
        if (!p.finite()) throw InvalidInput("non-finite node coordinate");
    }
    if (!destination_.finite()) throw InvalidInput("non-finite destination");
}

Network Network::uniform(std::vector<Point2> nodes, Point2 destination,
                         std::size_t facility_count) {
    std::vector<double> w(nodes.size(), nodes.empty() ? 0.0 : 1.0 / double(nodes.size()));
    return Network(std::move(nodes), std::move(w), destination, facility_count);
}

FacilityLayout::FacilityLayout(std::vector<std::vector<Point2>> positions, bool tied)
    : positions_(std::move(positions)), tied_(tied) {
    const std::size_t m = positions_.size();
    if (m == 0) throw InvalidInput("layout is empty");
    for (const auto& row : positions_) {
        if (row.size() != m) throw InvalidInput("layout must be M x M");
        for (const auto& p : row) {
            if (!p.finite()) throw InvalidInput("non-finite facility coordinate");
        }
    }
    if (tied_) {
        for (const auto& row : positions_) {
            if (row != positions_.front()) throw InvalidInput("tied layout has differing stages");
        }
    }
}

FacilityLayout FacilityLayout::tied_from(const std::vector<Point2>& per_facility) {
    return FacilityLayout(std::vector<std::vector<Point2>>(per_facility.size(), per_facility),
                          true);
}

void require_matching(const Network& net, const FacilityLayout& layout) {
    if (layout.facility_count() != net.facility_count()) {
        throw InvalidInput("layout dimensions do not match facility_count");
    }
}

Point2 initial_facility_position(const Network& net) {
    Point2 c{0.0, 0.0};
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        c = c + net.nodes()[i] * net.weights()[i];
    }
    return (c + net.destination()) * 0.5;
}

double log_sum_exp(const std::vector<double>& values) {
    if (values.empty()) return -std::numeric_limits<double>::infinity();
    const double hi = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - hi);
    return hi + std::log(acc);
}

}  // namespace parasdm

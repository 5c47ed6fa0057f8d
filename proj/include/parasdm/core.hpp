#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace parasdm {

using Cost = double;

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Thrown by fixed-point iterations that exhaust their sweep budget.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
    Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

/// Squared Euclidean distance. Throws InvalidInput on non-finite coordinates.
Cost stage_cost(const Point2& a, const Point2& b);

/// Cost of terminating at `x`; zero iff `x` is the destination.
Cost terminal_cost(const Point2& x, const Point2& destination);

/// Annealing parameter (inverse temperature). Always positive and finite.
class Beta {
public:
    explicit Beta(double value);
    double value() const noexcept { return value_; }
    operator double() const noexcept { return value_; }

private:
    double value_;
};

/// Immutable problem instance: nodes with weights, one destination, M facilities.
class Network {
public:
    Network(std::vector<Point2> nodes, std::vector<double> weights, Point2 destination,
            std::size_t facility_count, std::optional<std::int64_t> seed = std::nullopt);

    /// Uniform weights 1/N.
    static Network uniform(std::vector<Point2> nodes, Point2 destination,
                           std::size_t facility_count);

    const std::vector<Point2>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const Point2& destination() const noexcept { return destination_; }
    std::size_t facility_count() const noexcept { return facility_count_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    const std::optional<std::int64_t>& seed() const noexcept { return seed_; }

    friend bool operator==(const Network&, const Network&) = default;

private:
    std::vector<Point2> nodes_;
    std::vector<double> weights_;
    Point2 destination_;
    std::size_t facility_count_;
    std::optional<std::int64_t> seed_;
};

/// Facility positions per stage: positions[k][j] is facility j at stage k+1.
class FacilityLayout {
public:
    FacilityLayout(std::vector<std::vector<Point2>> positions, bool tied);

    /// One location per facility, replicated across all M stages.
    static FacilityLayout tied_from(const std::vector<Point2>& per_facility);

    std::size_t facility_count() const noexcept { return positions_.size(); }
    bool tied() const noexcept { return tied_; }
    /// Stage is 1-based (1..M), facility 0-based.
    const Point2& at(std::size_t stage, std::size_t facility) const {
        return positions_.at(stage - 1).at(facility);
    }
    const std::vector<std::vector<Point2>>& grid() const noexcept { return positions_; }
    /// Stage-1 row; the full layout when tied.
    const std::vector<Point2>& first_stage() const { return positions_.front(); }

    friend bool operator==(const FacilityLayout&, const FacilityLayout&) = default;

private:
    std::vector<std::vector<Point2>> positions_;
    bool tied_;
};

void require_matching(const Network& net, const FacilityLayout& layout);

/// Weighted centroid of the nodes (weights rho) and the destination (weight 1), halved.
Point2 initial_facility_position(const Network& net);

// Log-domain helpers shared by both solvers.
double log_sum_exp(const std::vector<double>& values);

}  // namespace parasdm

#ifndef PHYSFLOW_CORE_HPP
#define PHYSFLOW_CORE_HPP

#include "physflow/errors.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace physflow {

// Units used throughout: mi, mi/h, veh/mi, veh/h. Detector records carry
// flows in vehicles per aggregation interval.

/// Detector aggregation period [s].
inline constexpr int kIntervalSeconds = 300;
/// Intervals per hour at the default aggregation.
inline constexpr double kIntervalsPerHour = 3600.0 / kIntervalSeconds;

/// Seconds since the Unix epoch (UTC).
using Timestamp = std::int64_t;

/**
 * Triangular fundamental diagram.
 *
 * Free-flow branch q = vf * k for k <= kc, congested branch q = w * (kj - k)
 * for k > kc. `w` is the magnitude of the backward wave speed.
 */
struct TriangularFD {
    double vf = 0.0; // mi/h
    double w = 0.0;  // mi/h
    double kj = 0.0; // veh/mi
    double kc = 0.0; // veh/mi
    double qc = 0.0; // veh/h

    /// Throws ValidationError if a closure identity or ordering fails.
    void validate() const;
};

/// Builds the unique triangular FD through (0,0), (kj,0) with slopes vf and -w.
TriangularFD make_triangular_fd(double vf, double w, double kj);

double flow_at_density(const TriangularFD& fd, double k);
/// Sending flow of a cell: min(vf k, qc).
double demand(const TriangularFD& fd, double k);
/// Receiving flow of a cell: min(qc, w (kj - k)).
double supply(const TriangularFD& fd, double k);

struct DetectorRecord {
    double flow = 0.0;      // veh per interval
    double occupancy = 0.0; // fraction
    double speed = 0.0;     // mi/h
};

/// Uniformly sampled loop-detector data for one station.
struct DetectorSeries {
    std::string station_id;
    double position = 0.0; // mi, increasing in the travel direction
    Timestamp t0 = 0;
    int dt = kIntervalSeconds;
    std::vector<DetectorRecord> records;

    void validate() const;
    std::size_t size() const noexcept { return records.size(); }
    std::vector<double> flows() const;
    std::vector<double> speeds() const;
    /// Start of interval i.
    Timestamp time_at(std::size_t i) const noexcept {
        return t0 + static_cast<Timestamp>(i) * dt;
    }
};

/**
 * Piecewise-linear cumulative count curve N(t) with knots at t0 + i*dt.
 * Estimator-derived curves may be negative or non-monotone.
 */
struct CumulativeCurve {
    double t0 = 0.0; // s
    double dt = kIntervalSeconds;
    std::vector<double> counts;

    double t_end() const noexcept {
        return counts.empty() ? t0 : t0 + dt * static_cast<double>(counts.size() - 1);
    }
    bool same_grid(const CumulativeCurve& other) const noexcept;
};

CumulativeCurve cumulative_from_flows(const DetectorSeries& series);
CumulativeCurve cumulative_from_flows(std::span<const double> flows, double t0, double dt);
std::vector<double> flows_from_cumulative(const CumulativeCurve& curve);
/// Linear interpolation; clamps to the first/last knot outside the span.
double eval_cumulative(const CumulativeCurve& curve, double t);

struct StationLocation {
    std::string station_id;
    double position = 0.0; // mi
};

/// Ordered stations along a homogeneous section; traffic moves toward larger positions.
struct SectionGeometry {
    std::vector<StationLocation> stations;

    void validate() const;
    const StationLocation& at(const std::string& station_id) const;
    std::size_t index_of(const std::string& station_id) const;
};

} // namespace physflow

#endif

#ifndef PHYSFLOW_PARAMS_HPP
#define PHYSFLOW_PARAMS_HPP

#include "physflow/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace physflow {

/// Speeds at or below this are treated as missing when forming q/v densities [mi/h].
inline constexpr double kMinValidSpeed = 1.0;
/// Congested wave speed assumed when the congested branch is unobservable [mi/h].
inline constexpr double kDefaultWaveSpeed = 14.0;

struct DensitySeries {
    std::vector<double> densities;       // veh/mi, one per kept interval
    std::vector<std::size_t> kept;       // record indices behind `densities`
    std::vector<std::size_t> skipped;    // record indices with speed <= kMinValidSpeed
};

/// k = 12 q / v per interval; low-speed intervals are skipped and listed.
DensitySeries density_series(const DetectorSeries& series);

struct StationParams {
    std::string station_id;
    double vf_hat = 0.0; // mi/h
    double qc_hat = 0.0; // veh/h
    double kc_hat = 0.0; // veh/mi
    std::size_t intervals_used = 0;
};

struct EstimateOptions {
    double percentile = 0.95;
    std::size_t min_intervals = 100;
};

/// Inclusive linear-interpolation percentile (p in [0,1]) of an unsorted sample.
double percentile(std::vector<double> sample, double p);

/**
 * Free-flow speed and capacity from the 95th percentiles of speed and hourly
 * flow over the valid intervals; kc follows from q = k v.
 */
StationParams estimate_station_params(const DetectorSeries& series,
                                      const EstimateOptions& options = {});

struct SectionParams {
    TriangularFD fd;
    std::vector<StationParams> per_station;
    double w_assumed = kDefaultWaveSpeed;
};

/// Means of vf and kc across stations, closed into a triangular FD with a fixed w.
SectionParams aggregate_section_params(std::span<const StationParams> stations,
                                       double w_assumed = kDefaultWaveSpeed);

} // namespace physflow

#endif

#ifndef PHYSFLOW_SYNTHETIC_HPP
#define PHYSFLOW_SYNTHETIC_HPP

#include "physflow/harness.hpp"
#include "physflow/lwrsim.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace physflow {

/**
 * Desk-scale corridor: four detector stations on a homogeneous freeway with
 * daily AM and PM peaks, autocorrelated demand fluctuations, and peak-hour
 * bottlenecks at the downstream end whose strength and duration vary by day.
 * Capacity fluctuates inside a bottleneck, sending stop-and-go waves upstream.
 * Demand and capacity levels are fractions of the FD capacity qc.
 */
struct SyntheticCorridorConfig {
    std::size_t days = 30;
    std::uint64_t seed = 1;
    double noise = 0.02; // multiplicative detector flow noise std
    TriangularFD fd = make_triangular_fd(65.0, 14.0, 450.0);
    double dx = 0.05;    // mi
    double margin = 0.5; // mi of road before the first and after the last station
    std::array<std::string, 4> station_ids{"S1", "S2", "S3", "S4"};
    std::array<double, 3> spacing{0.5, 0.3, 0.5}; // mi between consecutive stations
    Timestamp t0 = 1625097600; // 2021-07-01T00:00:00Z

    double night_level = 0.12;
    double am_level = 0.97;     // mean AM plateau
    double pm_level = 0.90;     // mean PM plateau
    double day_spread = 0.04;   // std of per-day plateau levels
    double fluctuation = 0.05;  // stationary std of the AR(1) demand factor
    double fluctuation_rho = 0.9; // AR(1) coefficient between knots
    double knot_seconds = 60.0;

    double bottleneck_probability = 0.95;    // per day, PM peak
    double am_bottleneck_probability = 0.8;  // per day, AM peak
    double cap_min = 0.74; // bottleneck capacity range
    double cap_max = 0.92;
    double bottleneck_min_hours = 2.0; // PM duration range; AM uses half
    double bottleneck_max_hours = 5.0;
    double cap_fluctuation = 0.12; // stationary std of the AR(1) capacity factor inside a bottleneck
    double cap_rho = 0.7;

    double length() const;
    std::array<double, 4> positions() const;
    void validate() const;
};

struct SyntheticCorridor {
    lwr::SimConfig sim_config;
    lwr::SimOutput sim;
    CorridorData data;
    TriangularFD fd;
};

/// Builds the demand/capacity profiles from the config seed and runs the simulator.
lwr::SimConfig synthetic_sim_config(const SyntheticCorridorConfig& config);
SyntheticCorridor make_synthetic_corridor(const SyntheticCorridorConfig& config);

/// Wraps simulator output as corridor data keyed by station id.
CorridorData corridor_from_sim(const lwr::SimOutput& sim);

} // namespace physflow

#endif

#ifndef PHYSFLOW_LWRSIM_HPP
#define PHYSFLOW_LWRSIM_HPP

#include "physflow/core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace physflow::lwr {

/// Piecewise-linear profile over time, clamped outside its knots.
class Profile {
public:
    Profile() = default;
    Profile(std::vector<double> times, std::vector<double> values);
    static Profile constant(double value) { return Profile({0.0}, {value}); }

    double operator()(double t) const;
    bool empty() const noexcept { return times_.empty(); }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> times_;  // s, strictly increasing
    std::vector<double> values_; // veh/h
};

struct SimConfig {
    double length = 3.0; // mi
    double dx = 0.05;    // mi
    double horizon = 3600.0; // s, multiple of `aggregation`
    TriangularFD fd;
    Profile upstream_demand;       // veh/h
    Profile downstream_supply_cap; // veh/h; empty means no restriction
    std::vector<double> initial_density; // veh/mi per cell; empty means empty road
    std::vector<double> detector_positions; // mi
    std::vector<std::string> detector_ids;  // defaults to D1, D2, ...
    int aggregation = kIntervalSeconds;     // s
    double count_interval = 0.0;            // s between exact-count knots; 0 means `aggregation`
    std::uint64_t seed = 0;
    double noise = 0.0; // std of multiplicative Gaussian noise on detector flows
    Timestamp t0 = 0;   // epoch of the emitted detector series

    std::size_t cells() const;
    void validate() const;
};

struct SimOutput {
    double dt = 0.0; // s
    std::vector<std::vector<double>> density_field; // snapshots [window][cell], incl. t = 0
    std::vector<DetectorSeries> detectors;
    std::vector<CumulativeCurve> exact_counts; // noise-free, on `count_interval` knots
    double vehicles_in = 0.0;
    double vehicles_out = 0.0;
    double initial_vehicles = 0.0;
    double final_vehicles = 0.0;
    double entry_queue = 0.0; // vehicles held back at the entrance at the end
};

/**
 * Largest time step satisfying CFL with the given safety factor that is a
 * whole number of deciseconds and divides `aggregation` exactly.
 */
double choose_dt(const TriangularFD& fd, double dx, int aggregation = kIntervalSeconds,
                 double safety = 0.9);
/// CFL upper bound dx / max(vf, w) in seconds, before safety and rounding.
double cfl_bound(const TriangularFD& fd, double dx);

struct Boundary {
    double upstream_demand = 0.0;  // veh/h offered at the entrance
    double downstream_cap = 0.0;   // veh/h accepted at the exit
};

/**
 * One Godunov update. Interface flux F = min(demand(left), supply(right)).
 * When `fluxes` is given it receives cells+1 interface flows [veh/h].
 * Throws SimulationError carrying `step` if a density leaves [0, kj].
 */
std::vector<double> godunov_step(std::span<const double> densities, const TriangularFD& fd, double dx,
                                 double dt, const Boundary& boundary, long step = 0,
                                 std::vector<double>* fluxes = nullptr);

SimOutput run(const SimConfig& config);

} // namespace physflow::lwr

#endif

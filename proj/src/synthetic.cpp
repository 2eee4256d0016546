#include "physflow/synthetic.hpp"

#include "physflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace physflow {

namespace {

constexpr double kDaySeconds = 86400.0;

/// Demand shape over one day as (hour, fraction of qc).
std::vector<std::pair<double, double>> day_shape(const SyntheticCorridorConfig& c, double am, double pm) {
    return {{0.0, c.night_level}, {5.0, 1.2 * c.night_level}, {6.0, am}, {10.0, am}, {11.5, 0.55},
            {14.0, 0.60},         {15.5, pm},                 {19.5, pm}, {21.0, 0.40},
            {24.0, c.night_level}};
}

double interpolate(const std::vector<std::pair<double, double>>& shape, double hour) {
    for (std::size_t i = 1; i < shape.size(); ++i) {
        if (hour <= shape[i].first) {
            const auto [h0, v0] = shape[i - 1];
            const auto [h1, v1] = shape[i];
            return v0 + (v1 - v0) * (hour - h0) / (h1 - h0);
        }
    }
    return shape.back().second;
}

} // namespace

double SyntheticCorridorConfig::length() const {
    return 2.0 * margin + spacing[0] + spacing[1] + spacing[2];
}

std::array<double, 4> SyntheticCorridorConfig::positions() const {
    return {margin, margin + spacing[0], margin + spacing[0] + spacing[1],
            margin + spacing[0] + spacing[1] + spacing[2]};
}

void SyntheticCorridorConfig::validate() const {
    if (days < 1) throw ValidationError("days", "must be >= 1");
    if (margin < 0.0) throw ValidationError("margin", "must be >= 0");
    for (double s : spacing) {
        if (!(s > 0.0)) throw ValidationError("spacing", "station spacing must be positive");
    }
    if (!(knot_seconds > 0.0)) throw ValidationError("knot_seconds", "must be positive");
    if (fluctuation_rho < 0.0 || fluctuation_rho >= 1.0) throw ValidationError("fluctuation_rho", "must be in [0, 1)");
    if (cap_rho < 0.0 || cap_rho >= 1.0) throw ValidationError("cap_rho", "must be in [0, 1)");
    if (cap_min > cap_max || cap_min <= 0.0) throw ValidationError("cap_min", "need 0 < cap_min <= cap_max");
    if (bottleneck_min_hours > bottleneck_max_hours || bottleneck_min_hours <= 0.0) {
        throw ValidationError("bottleneck_min_hours", "need 0 < min <= max");
    }
    fd.validate();
}

lwr::SimConfig synthetic_sim_config(const SyntheticCorridorConfig& c) {
    c.validate();
    std::mt19937_64 rng(derive_seed(c.seed, "demand"));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double horizon = static_cast<double>(c.days) * kDaySeconds;
    const double qc = c.fd.qc;
    const double innovation = c.fluctuation * std::sqrt(1.0 - c.fluctuation_rho * c.fluctuation_rho);

    std::vector<double> dt_knots, dv;
    std::vector<double> ct, cv;
    double factor = 0.0;
    for (std::size_t day = 0; day < c.days; ++day) {
        const double base = static_cast<double>(day) * kDaySeconds;
        const double am = std::min(1.02, c.am_level + c.day_spread * gauss(rng));
        const double pm = std::min(1.0, c.pm_level + c.day_spread * gauss(rng));
        const auto shape = day_shape(c, am, pm);
        for (double s = 0.0; s < kDaySeconds; s += c.knot_seconds) {
            factor = c.fluctuation_rho * factor + innovation * gauss(rng);
            dt_knots.push_back(base + s);
            dv.push_back(std::max(0.0, qc * interpolate(shape, s / 3600.0) * (1.0 + factor)));
        }

        ct.push_back(base);
        cv.push_back(qc);
        auto bottleneck = [&](double probability, double earliest, double latest, double min_h, double max_h) {
            if (unit(rng) >= probability) return;
            const double start = base + 3600.0 * (earliest + (latest - earliest) * unit(rng));
            const double end = start + 3600.0 * (min_h + (max_h - min_h) * unit(rng));
            const double cap = qc * (c.cap_min + (c.cap_max - c.cap_min) * unit(rng));
            const double cap_innovation = c.cap_fluctuation * std::sqrt(1.0 - c.cap_rho * c.cap_rho);
            double f = 0.0;
            ct.push_back(start);
            cv.push_back(qc);
            for (double t = start + 300.0; t < end; t += c.knot_seconds) {
                f = c.cap_rho * f + cap_innovation * gauss(rng);
                ct.push_back(t);
                cv.push_back(std::clamp(cap * (1.0 + f), 0.0, qc));
            }
            ct.push_back(end + 300.0);
            cv.push_back(qc);
        };
        bottleneck(c.am_bottleneck_probability, 6.0, 7.5, 0.5 * c.bottleneck_min_hours, 0.5 * c.bottleneck_max_hours);
        bottleneck(c.bottleneck_probability, 15.5, 17.0, c.bottleneck_min_hours, c.bottleneck_max_hours);
    }
    dt_knots.push_back(horizon);
    dv.push_back(dv.back());
    ct.push_back(horizon);
    cv.push_back(qc);

    lwr::SimConfig sim;
    sim.length = c.length();
    sim.dx = c.dx;
    sim.horizon = horizon;
    sim.fd = c.fd;
    sim.upstream_demand = lwr::Profile(std::move(dt_knots), std::move(dv));
    sim.downstream_supply_cap = lwr::Profile(std::move(ct), std::move(cv));
    const auto pos = c.positions();
    sim.detector_positions.assign(pos.begin(), pos.end());
    sim.detector_ids.assign(c.station_ids.begin(), c.station_ids.end());
    sim.seed = derive_seed(c.seed, "noise");
    sim.noise = c.noise;
    sim.t0 = c.t0;
    return sim;
}

CorridorData corridor_from_sim(const lwr::SimOutput& sim) {
    CorridorData data;
    for (const auto& s : sim.detectors) {
        data.geometry.stations.push_back({s.station_id, s.position});
        data.series.emplace(s.station_id, s);
    }
    data.geometry.validate();
    return data;
}

SyntheticCorridor make_synthetic_corridor(const SyntheticCorridorConfig& config) {
    SyntheticCorridor out;
    out.sim_config = synthetic_sim_config(config);
    out.sim = lwr::run(out.sim_config);
    out.data = corridor_from_sim(out.sim);
    out.fd = config.fd;
    return out;
}

} // namespace physflow

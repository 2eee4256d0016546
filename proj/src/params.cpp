#include "physflow/params.hpp"

#include <algorithm>
#include <cmath>

namespace physflow {

DensitySeries density_series(const DetectorSeries& series) {
    DensitySeries out;
    const double per_hour = 3600.0 / series.dt;
    for (std::size_t i = 0; i < series.records.size(); ++i) {
        const auto& r = series.records[i];
        if (r.speed <= kMinValidSpeed) {
            out.skipped.push_back(i);
            continue;
        }
        out.densities.push_back(r.flow * per_hour / r.speed);
        out.kept.push_back(i);
    }
    if (out.densities.empty()) {
        throw DataError("density_series: all " + std::to_string(series.records.size()) +
                        " intervals of '" + series.station_id + "' have speed <= " +
                        std::to_string(kMinValidSpeed) + " mi/h");
    }
    return out;
}

double percentile(std::vector<double> sample, double p) {
    if (sample.empty()) throw DataError("percentile of empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p", "must lie in [0,1]");
    std::sort(sample.begin(), sample.end());
    const double pos = p * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sample.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sample[lo] + frac * (sample[hi] - sample[lo]);
}

StationParams estimate_station_params(const DetectorSeries& series, const EstimateOptions& options) {
    std::vector<double> speeds;
    std::vector<double> hourly;
    const double per_hour = 3600.0 / series.dt;
    for (const auto& r : series.records) {
        if (r.speed <= kMinValidSpeed) continue;
        speeds.push_back(r.speed);
        hourly.push_back(r.flow * per_hour);
    }
    if (speeds.size() < options.min_intervals || speeds.empty()) {
        throw DataError("estimate_station_params: '" + series.station_id + "' has " +
                        std::to_string(speeds.size()) + " valid intervals, need " +
                        std::to_string(options.min_intervals));
    }
    StationParams p;
    p.station_id = series.station_id;
    p.intervals_used = speeds.size();
    p.vf_hat = percentile(std::move(speeds), options.percentile);
    p.qc_hat = percentile(std::move(hourly), options.percentile);
    p.kc_hat = p.qc_hat / p.vf_hat;
    return p;
}

SectionParams aggregate_section_params(std::span<const StationParams> stations, double w_assumed) {
    if (stations.empty()) throw ValidationError("stations", "need at least one station");
    double vf = 0.0;
    double kc = 0.0;
    for (const auto& s : stations) {
        vf += s.vf_hat;
        kc += s.kc_hat;
    }
    vf /= static_cast<double>(stations.size());
    kc /= static_cast<double>(stations.size());

    SectionParams out;
    out.fd = make_triangular_fd(vf, w_assumed, kc * (1.0 + vf / w_assumed));
    out.per_station.assign(stations.begin(), stations.end());
    out.w_assumed = w_assumed;
    return out;
}

} // namespace physflow

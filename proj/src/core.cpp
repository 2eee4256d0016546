#include "physflow/core.hpp"

#include <algorithm>
#include <cmath>

namespace physflow {

namespace {

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

void check_density(const TriangularFD& fd, double k) {
    if (!(k >= 0.0 && k <= fd.kj)) {
        throw DomainError("density " + std::to_string(k) + " outside [0, " +
                          std::to_string(fd.kj) + "]");
    }
}

} // namespace

void TriangularFD::validate() const {
    if (!(vf > 0.0)) throw ValidationError("vf", "must be positive");
    if (!(w > 0.0)) throw ValidationError("w", "must be positive");
    if (!(kc > 0.0 && kc < kj)) throw ValidationError("kc", "must satisfy 0 < kc < kj");
    if (!close_rel(qc, kc * vf, 1e-9)) throw ValidationError("qc", "qc != kc * vf");
    if (!close_rel(qc, w * (kj - kc), 1e-9)) throw ValidationError("qc", "qc != w * (kj - kc)");
}

TriangularFD make_triangular_fd(double vf, double w, double kj) {
    if (!(vf > 0.0)) throw ValidationError("vf", "must be positive");
    if (!(w > 0.0)) throw ValidationError("w", "must be positive");
    if (!(kj > 0.0)) throw ValidationError("kj", "must be positive");
    TriangularFD fd;
    fd.vf = vf;
    fd.w = w;
    fd.kj = kj;
    fd.kc = kj * w / (vf + w);
    fd.qc = fd.kc * vf;
    return fd;
}

double flow_at_density(const TriangularFD& fd, double k) {
    check_density(fd, k);
    return k <= fd.kc ? fd.vf * k : fd.w * (fd.kj - k);
}

double demand(const TriangularFD& fd, double k) {
    check_density(fd, k);
    return std::min(fd.vf * k, fd.qc);
}

double supply(const TriangularFD& fd, double k) {
    check_density(fd, k);
    return std::min(fd.qc, fd.w * (fd.kj - k));
}

void DetectorSeries::validate() const {
    if (dt <= 0) throw ValidationError("dt", "interval must be positive");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::string where = station_id + "[" + std::to_string(i) + "]";
        if (!(r.flow >= 0.0)) throw ValidationError("flow", where + " negative or NaN");
        if (!(r.speed >= 0.0)) throw ValidationError("speed", where + " negative or NaN");
        if (!(r.occupancy >= 0.0 && r.occupancy <= 1.0)) {
            throw ValidationError("occupancy", where + " outside [0,1]");
        }
    }
}

std::vector<double> DetectorSeries::flows() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.flow);
    return out;
}

std::vector<double> DetectorSeries::speeds() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.speed);
    return out;
}

bool CumulativeCurve::same_grid(const CumulativeCurve& other) const noexcept {
    return t0 == other.t0 && dt == other.dt && counts.size() == other.counts.size();
}

CumulativeCurve cumulative_from_flows(std::span<const double> flows, double t0, double dt) {
    CumulativeCurve c;
    c.t0 = t0;
    c.dt = dt;
    c.counts.resize(flows.size() + 1);
    c.counts[0] = 0.0;
    for (std::size_t i = 0; i < flows.size(); ++i) c.counts[i + 1] = c.counts[i] + flows[i];
    return c;
}

CumulativeCurve cumulative_from_flows(const DetectorSeries& series) {
    const auto flows = series.flows();
    return cumulative_from_flows(flows, static_cast<double>(series.t0), series.dt);
}

std::vector<double> flows_from_cumulative(const CumulativeCurve& curve) {
    if (curve.counts.size() < 2) {
        throw ValidationError("counts", "need at least 2 knots to difference");
    }
    std::vector<double> out(curve.counts.size() - 1);
    for (std::size_t i = 0; i + 1 < curve.counts.size(); ++i) {
        out[i] = curve.counts[i + 1] - curve.counts[i];
    }
    return out;
}

double eval_cumulative(const CumulativeCurve& curve, double t) {
    const auto& n = curve.counts;
    if (n.empty()) return 0.0;
    const double u = (t - curve.t0) / curve.dt;
    if (u <= 0.0) return n.front();
    const double last = static_cast<double>(n.size() - 1);
    if (u >= last) return n.back();
    const auto i = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(i);
    if (frac == 0.0) return n[i];
    return n[i] + frac * (n[i + 1] - n[i]);
}

void SectionGeometry::validate() const {
    if (stations.size() < 2) throw ValidationError("stations", "need at least 2 stations");
    for (std::size_t i = 1; i < stations.size(); ++i) {
        if (!(stations[i].position > stations[i - 1].position)) {
            throw ValidationError("stations", "positions must be strictly increasing at '" +
                                                  stations[i].station_id + "'");
        }
    }
}

const StationLocation& SectionGeometry::at(const std::string& station_id) const {
    return stations[index_of(station_id)];
}

std::size_t SectionGeometry::index_of(const std::string& station_id) const {
    for (std::size_t i = 0; i < stations.size(); ++i) {
        if (stations[i].station_id == station_id) return i;
    }
    throw ValidationError("station_id", "unknown station '" + station_id + "'");
}

} // namespace physflow

#include "physflow/lwrsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace physflow::lwr {

namespace {

constexpr double kBoundsTol = 1e-9;

bool is_multiple(double value, double step) {
    const double n = std::round(value / step);
    return n >= 1.0 && std::abs(n * step - value) <= 1e-9 * std::max(1.0, value);
}

// In-place update; `flux` holds cells+1 interface flows on return.
void step_in_place(std::vector<double>& k, std::vector<double>& flux, const TriangularFD& fd,
                   double dx, double dt_h, double inflow, double outflow, long step) {
    const std::size_t n = k.size();
    flux[0] = inflow;
    flux[n] = outflow;
    for (std::size_t i = 1; i < n; ++i) {
        const double send = std::min(fd.vf * k[i - 1], fd.qc);
        const double recv = std::min(fd.qc, fd.w * (fd.kj - k[i]));
        flux[i] = std::min(send, recv);
    }
    const double ratio = dt_h / dx;
    for (std::size_t i = 0; i < n; ++i) {
        double next = k[i] - ratio * (flux[i + 1] - flux[i]);
        if (next < -kBoundsTol || next > fd.kj + kBoundsTol) {
            throw SimulationError(step, "density " + std::to_string(next) + " in cell " +
                                            std::to_string(i) + " left [0, kj]; CFL violated?");
        }
        k[i] = std::clamp(next, 0.0, fd.kj);
    }
}

} // namespace

Profile::Profile(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size()) throw ValidationError("profile", "times/values size mismatch");
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1])) throw ValidationError("profile", "times must increase");
    }
}

double Profile::operator()(double t) const {
    if (times_.empty()) return 0.0;
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto i = static_cast<std::size_t>(it - times_.begin());
    const double a = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
    return values_[i - 1] + a * (values_[i] - values_[i - 1]);
}

std::size_t SimConfig::cells() const {
    return static_cast<std::size_t>(std::llround(length / dx));
}

void SimConfig::validate() const {
    if (!(dx > 0.0)) throw ValidationError("dx", "must be positive");
    if (!(length > 0.0) || !is_multiple(length, dx)) {
        throw ValidationError("length", "must be a positive multiple of dx");
    }
    fd.validate();
    if (aggregation <= 0) throw ValidationError("aggregation", "must be positive");
    if (!is_multiple(horizon, aggregation)) {
        throw ValidationError("horizon", "must be a positive multiple of the aggregation interval");
    }
    if (!initial_density.empty()) {
        if (initial_density.size() != cells()) {
            throw ValidationError("initial_density", "expected one value per cell");
        }
        for (double k : initial_density) {
            if (!(k >= 0.0 && k <= fd.kj)) throw ValidationError("initial_density", "outside [0, kj]");
        }
    }
    for (double p : detector_positions) {
        if (!(p >= 0.0 && p <= length)) {
            throw ValidationError("detector_positions", "position outside [0, length]");
        }
    }
    if (!detector_ids.empty() && detector_ids.size() != detector_positions.size()) {
        throw ValidationError("detector_ids", "one id per detector position required");
    }
    if (!(noise >= 0.0)) throw ValidationError("noise", "must be non-negative");
    if (upstream_demand.empty()) throw ValidationError("upstream_demand", "profile required");
}

double cfl_bound(const TriangularFD& fd, double dx) {
    return dx / std::max(fd.vf, fd.w) * 3600.0;
}

double choose_dt(const TriangularFD& fd, double dx, int aggregation, double safety) {
    if (!(dx > 0.0)) throw ValidationError("dx", "must be positive");
    const double bound = cfl_bound(fd, dx) * safety;
    const long total = static_cast<long>(aggregation) * 10;
    for (long m = static_cast<long>(std::floor(bound * 10.0 + 1e-9)); m >= 1; --m) {
        if (total % m == 0) return static_cast<double>(m) / 10.0;
    }
    return static_cast<double>(aggregation) / std::ceil(aggregation / bound);
}

std::vector<double> godunov_step(std::span<const double> densities, const TriangularFD& fd, double dx,
                                 double dt, const Boundary& boundary, long step,
                                 std::vector<double>* fluxes) {
    if (densities.empty()) throw ValidationError("densities", "need at least one cell");
    std::vector<double> k(densities.begin(), densities.end());
    for (double v : k) {
        if (!(v >= -kBoundsTol && v <= fd.kj + kBoundsTol)) {
            throw SimulationError(step, "input density outside [0, kj]");
        }
    }
    const double inflow = std::min(std::max(boundary.upstream_demand, 0.0), supply(fd, std::clamp(k.front(), 0.0, fd.kj)));
    const double outflow = std::min(demand(fd, std::clamp(k.back(), 0.0, fd.kj)),
                                    std::max(boundary.downstream_cap, 0.0));
    std::vector<double> flux(k.size() + 1);
    step_in_place(k, flux, fd, dx, dt / 3600.0, inflow, outflow, step);
    if (fluxes) *fluxes = std::move(flux);
    return k;
}

SimOutput run(const SimConfig& config) {
    config.validate();
    const auto& fd = config.fd;
    const std::size_t ncell = config.cells();
    const double dt = choose_dt(fd, config.dx, config.aggregation);
    const double dt_h = dt / 3600.0;
    const auto steps_per_window = static_cast<long>(std::llround(config.aggregation / dt));
    const auto windows = static_cast<long>(std::llround(config.horizon / config.aggregation));
    const double count_interval = config.count_interval > 0.0 ? config.count_interval : config.aggregation;
    if (!is_multiple(count_interval, dt)) {
        throw ValidationError("count_interval", "must be a multiple of the time step " + std::to_string(dt));
    }
    const auto steps_per_count = static_cast<long>(std::llround(count_interval / dt));
    const long total_steps = windows * steps_per_window;

    std::vector<double> k = config.initial_density.empty() ? std::vector<double>(ncell, 0.0)
                                                           : config.initial_density;
    std::vector<double> flux(ncell + 1, 0.0);

    const std::size_t ndet = config.detector_positions.size();
    std::vector<std::size_t> iface(ndet);
    for (std::size_t d = 0; d < ndet; ++d) {
        iface[d] = static_cast<std::size_t>(std::llround(config.detector_positions[d] / config.dx));
        iface[d] = std::min(iface[d], ncell);
    }

    SimOutput out;
    out.dt = dt;
    out.detectors.resize(ndet);
    out.exact_counts.resize(ndet);
    for (std::size_t d = 0; d < ndet; ++d) {
        auto& s = out.detectors[d];
        s.station_id = config.detector_ids.empty() ? "D" + std::to_string(d + 1) : config.detector_ids[d];
        s.position = config.detector_positions[d];
        s.t0 = config.t0;
        s.dt = config.aggregation;
        s.records.reserve(static_cast<std::size_t>(windows));
        auto& c = out.exact_counts[d];
        c.t0 = static_cast<double>(config.t0);
        c.dt = count_interval;
        c.counts.reserve(static_cast<std::size_t>(total_steps / steps_per_count + 1));
        c.counts.push_back(0.0);
    }

    auto vehicles_on_road = [&] {
        double sum = 0.0;
        for (double v : k) sum += v;
        return sum * config.dx;
    };
    out.initial_vehicles = vehicles_on_road();
    out.density_field.push_back(k);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> win_veh(ndet, 0.0);
    std::vector<double> win_k(ndet, 0.0);
    std::vector<double> cum(ndet, 0.0);
    double queue = 0.0;

    for (long step = 0; step < total_steps; ++step) {
        const double t = step * dt;
        const double offered = config.upstream_demand(t);
        const double cap = config.downstream_supply_cap.empty() ? fd.qc : config.downstream_supply_cap(t);
        const double inflow = std::min(std::max(offered, 0.0) + queue / dt_h, supply(fd, k.front()));
        queue = std::max(0.0, queue + (std::max(offered, 0.0) - inflow) * dt_h);
        const double outflow = std::min(demand(fd, k.back()), std::max(cap, 0.0));

        step_in_place(k, flux, fd, config.dx, dt_h, inflow, outflow, step);
        out.vehicles_in += inflow * dt_h;
        out.vehicles_out += outflow * dt_h;

        for (std::size_t d = 0; d < ndet; ++d) {
            const double veh = flux[iface[d]] * dt_h;
            win_veh[d] += veh;
            cum[d] += veh;
            const std::size_t left = iface[d] == 0 ? 0 : iface[d] - 1;
            const std::size_t right = std::min(iface[d], ncell - 1);
            win_k[d] += 0.5 * (k[left] + k[right]);
        }
        if ((step + 1) % steps_per_count == 0) {
            for (std::size_t d = 0; d < ndet; ++d) out.exact_counts[d].counts.push_back(cum[d]);
        }
        if ((step + 1) % steps_per_window == 0) {
            const double hours = config.aggregation / 3600.0;
            for (std::size_t d = 0; d < ndet; ++d) {
                const double kbar = win_k[d] / static_cast<double>(steps_per_window);
                const double q = win_veh[d] / hours;
                DetectorRecord r;
                r.speed = kbar < 1e-6 ? fd.vf : std::min(q / kbar, fd.vf);
                r.occupancy = std::clamp(kbar / fd.kj, 0.0, 1.0);
                double flow = win_veh[d];
                if (config.noise > 0.0) flow *= std::max(0.0, 1.0 + config.noise * gauss(rng));
                r.flow = flow;
                out.detectors[d].records.push_back(r);
                win_veh[d] = 0.0;
                win_k[d] = 0.0;
            }
            out.density_field.push_back(k);
        }
    }
    out.final_vehicles = vehicles_on_road();
    out.entry_queue = queue;
    return out;
}

} // namespace physflow::lwr

// Acceptance suite: one PASS/FAIL line per criterion A1..A12.
// Usage: acceptance [A1 A5 ...]   (no arguments runs everything)

#include "physflow/harness.hpp"
#include "physflow/lwrsim.hpp"
#include "physflow/newell.hpp"
#include "physflow/nn/train.hpp"
#include "physflow/params.hpp"
#include "physflow/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace physflow;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double rmse_of(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

const TriangularFD kSimFd = make_triangular_fd(65.0, 14.0, 450.0);

lwr::SimConfig freeway(double hours) {
    lwr::SimConfig c;
    c.length = 3.0;
    c.dx = 0.05;
    c.horizon = hours * 3600.0;
    c.fd = kSimFd;
    c.count_interval = 60.0;
    return c;
}

// ---------------------------------------------------------------------------

Outcome a1_algebra() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> count(0, 700);
    std::size_t series = 0;
    bool roundtrip = true;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> f(1 + trial * 10);
        for (auto& v : f) v = trial % 2 ? count(rng) : count(rng) * 0.125;
        roundtrip = roundtrip && flows_from_cumulative(cumulative_from_flows(f, 0.0, 300.0)) == f;
        ++series;
    }

    std::uniform_real_distribution<double> speed(1.0, 150.0), jam(20.0, 1000.0);
    double worst_closure = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto fd = make_triangular_fd(speed(rng), speed(rng), jam(rng));
        worst_closure = std::max({worst_closure, std::abs(fd.qc - fd.vf * fd.kc) / fd.qc,
                                  std::abs(fd.qc - fd.w * (fd.kj - fd.kc)) / fd.qc});
    }

    double worst_consistency = 0.0;
    for (const auto& fd : {kSimFd, make_triangular_fd(60.0, 15.0, 150.0), make_triangular_fd(60.0, 60.0, 100.0)}) {
        for (int i = 0; i < 1000; ++i) {
            const double k = fd.kj * i / 999.0;
            const double lhs = std::min(demand(fd, k), supply(fd, k));
            worst_consistency = std::max(worst_consistency, std::abs(lhs - flow_at_density(fd, k)) / fd.qc);
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = roundtrip && worst_closure <= 1e-9 && worst_consistency <= 1e-12 && secs < 1.0;
    return {pass, fmt("roundtrip exact on %zu integer/dyadic series: %s; max closure rel err %.1e; "
                      "max |min(demand,supply)-q|/qc on 1000-point grids %.1e; %.3f s",
                      series, roundtrip ? "yes" : "no", worst_closure, worst_consistency, secs)};
}

Outcome a2_ff_exactness() {
    const auto t0 = Clock::now();
    auto c = freeway(4.0);
    const double qc = kSimFd.qc;
    // Constant sub-capacity demand, then a peak that stays below capacity.
    c.upstream_demand = lwr::Profile({0, 3600, 7200, 10800, 14400}, {0.45 * qc, 0.45 * qc, 0.9 * qc, 0.9 * qc, 0.5 * qc});
    c.detector_positions = {0.5, 2.5};
    const auto out = lwr::run(c);
    const double d = 2.0;
    const auto est = flows_from_cumulative(ff_shift_downstream(cumulative_from_flows(out.detectors[0]), d, kSimFd.vf));
    const auto obs = out.detectors[1].flows();
    const std::vector<double> e(est.begin() + 1, est.end()), o(obs.begin() + 1, obs.end());
    const double err = rmse_of(e, o), m = mean(o);
    const double secs = seconds_since(t0);
    const bool pass = err < 0.02 * m && secs < 30.0;
    return {pass, fmt("FF estimate 2.0 mi downstream: RMSE %.3f veh/5min = %.3f%% of mean flow %.1f "
                      "(limit 2%%) over %zu intervals; %.1f s",
                      err, 100.0 * err / m, m, o.size(), secs)};
}

Outcome a3_fc_exactness() {
    const auto t0 = Clock::now();
    auto c = freeway(4.0);
    const double qc = kSimFd.qc;
    c.upstream_demand = lwr::Profile::constant(0.7 * qc);
    // Exit capacity drops for two hours and keeps varying: the queue spills back over both detectors.
    c.downstream_supply_cap = lwr::Profile({0, 3600, 3610, 6000, 8400, 10800, 10810},
                                           {qc, qc, 0.5 * qc, 0.5 * qc, 0.35 * qc, 0.45 * qc, qc});
    c.detector_positions = {1.5, 2.5};
    const auto out = lwr::run(c);
    const double d = 1.0;
    const auto est = flows_from_cumulative(
        congested_shift_upstream(cumulative_from_flows(out.detectors[1]), d, kSimFd.w, kSimFd.kj));
    const auto obs = out.detectors[0].flows();
    const auto up = state_mask(out.detectors[0]), down = state_mask(out.detectors[1]);
    auto jam = [&](std::size_t i) { return up[i] == TrafficState::Congestion && down[i] == TrafficState::Congestion; };
    // An interval is inside the congested window when its neighbours are congested too;
    // the first and last flagged intervals straddle the passing shock or recovery wave.
    std::vector<double> e, o, e_all, o_all;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!jam(i)) continue;
        e_all.push_back(est[i]);
        o_all.push_back(obs[i]);
        if (i > 0 && i + 1 < obs.size() && jam(i - 1) && jam(i + 1)) {
            e.push_back(est[i]);
            o.push_back(obs[i]);
        }
    }
    if (o.size() < 12) return {false, fmt("only %zu jointly congested intervals (need 1 h)", o.size())};
    const double err = rmse_of(e, o), m = mean(o);
    const double err_all = rmse_of(e_all, o_all) / mean(o_all);
    const double secs = seconds_since(t0);
    const bool pass = err < 0.05 * m && secs < 30.0;
    return {pass, fmt("FC estimate 1.0 mi upstream over %zu interior congested intervals (%.1f h): RMSE %.3f = %.3f%% "
                      "of mean flow %.1f (limit 5%%); including the %zu boundary intervals %.2f%%; %.1f s",
                      o.size(), o.size() / 12.0, err, 100.0 * err / m, m, o_all.size() - o.size(), 100.0 * err_all,
                      secs)};
}

Outcome a4_newell_min() {
    const auto t0 = Clock::now();
    auto c = freeway(3.0);
    const double qc = kSimFd.qc;
    c.upstream_demand = lwr::Profile::constant(0.7 * qc);
    // A permanent capacity drop at the exit: one shock travels upstream past all three detectors.
    c.downstream_supply_cap = lwr::Profile({0, 1800, 1810}, {qc, qc, 0.55 * qc});
    c.detector_positions = {1.0, 1.5, 2.0};
    const auto out = lwr::run(c);
    const double d = 0.5;
    const auto ff = ff_shift_downstream(out.exact_counts[0], d, kSimFd.vf);
    const auto fc = congested_shift_upstream(out.exact_counts[2], d, kSimFd.w, kSimFd.kj);
    const auto est = newell_min(ff, fc);
    const auto& obs = out.exact_counts[1];
    double worst = 0.0;
    std::size_t ff_side = 0, fc_side = 0;
    for (std::size_t i = 0; i < obs.counts.size(); ++i) {
        worst = std::max(worst, std::abs(est.counts[i] - obs.counts[i]));
        (ff.counts[i] <= fc.counts[i] ? ff_side : fc_side)++;
    }
    const auto mid = state_mask(out.detectors[1]);
    const bool crossed = mid.front() == TrafficState::FreeFlow && mid.back() == TrafficState::Congestion;
    const double bound = kSimFd.kj * c.dx;
    const double secs = seconds_since(t0);
    const bool pass = crossed && ff_side > 0 && fc_side > 0 && worst < bound && secs < 30.0;
    return {pass, fmt("shock crosses middle detector: %s; knots on FF side %zu, FC side %zu; max |N_min - N_obs| "
                      "%.3f veh (bound kj*dx = %.2f); %.1f s",
                      crossed ? "yes" : "no", ff_side, fc_side, worst, bound, secs)};
}

Outcome a5_gradients() {
    const auto t0 = Clock::now();
    using namespace nn;
    // A wide probe so every layer type owns at least 200 parameters.
    ModelSpec probe;
    probe.stations = 3;
    probe.lag = 8;
    probe.conv = {36, 3, 2, Padding::Same};
    probe.lstm_units = {10, 6};
    probe.dense = {{32, Activation::ReLU}, {1, Activation::Linear}};

    auto data = [](const Model& m, std::size_t n, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> x(n * m.spec().input_size()), y(n);
        for (auto& v : x) v = g(rng);
        for (auto& v : y) v = g(rng);
        return std::pair{x, y};
    };
    auto indices_where = [](const Model& m, const std::string& prefix) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < m.param_count(); ++i) {
            if (m.param_name(i).rfind(prefix, 0) == 0) idx.push_back(i);
        }
        return idx;
    };
    auto sample = [](std::vector<std::size_t> idx, std::size_t k, std::uint64_t seed) {
        if (idx.size() > k) {
            std::shuffle(idx.begin(), idx.end(), std::mt19937_64(seed));
            idx.resize(k);
            std::sort(idx.begin(), idx.end());
        }
        return idx;
    };

    // Finite differences are only meaningful away from ReLU kinks; with init seed 11
    // a conv pre-activation sits within 1e-6 of zero, so this fixture uses 12.
    Model pm(probe);
    pm.init_glorot(12);
    const auto [px, py] = data(pm, 4, 13);
    struct Row {
        std::string name;
        GradCheckReport rep;
    };
    std::vector<Row> rows;
    for (const char* layer : {"conv", "lstm", "dense"}) {
        const auto idx = sample(indices_where(pm, layer), 250, 13);
        rows.push_back({layer, grad_check_indices(pm, px, py, 4, idx)});
    }
    for (const auto& [name, spec] : {std::pair{"dataset1", dataset1_spec(3, 10)}, std::pair{"dataset2", dataset2_spec(4, 20)}}) {
        Model m(spec);
        m.init_glorot(21);
        const auto [x, y] = data(m, 4, 22);
        rows.push_back({name, grad_check(m, x, y, 4, 1e-5, 250, 23)});
    }
    bool pass = true;
    std::string detail;
    for (const auto& r : rows) {
        pass = pass && r.rep.checked >= 200 && r.rep.max_rel_error < 1e-4;
        detail += fmt("%s %zu params max rel %.1e; ", r.name.c_str(), r.rep.checked, r.rep.max_rel_error);
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 60.0;
    return {pass, detail + fmt("%.1f s", secs)};
}

Outcome a6_adadelta() {
    nn::AdadeltaConfig cfg; // lr 0.10, rho 0.95, eps 1e-7
    std::vector<double> p{0.0};
    nn::AdadeltaState st(1);
    const std::vector<double> g1{1.0}, g2{-0.5};
    nn::adadelta_step(p, g1, st, cfg);
    const double step1 = p[0];
    nn::adadelta_step(p, g2, st, cfg);
    const double step2 = p[0] - step1;

    // Hand evaluation of the recurrence.
    const double eps = 1e-7, rho = 0.95, lr = 0.10;
    const double eg1 = (1 - rho) * 1.0;
    const double dx1 = -std::sqrt(0.0 + eps) / std::sqrt(eg1 + eps) * 1.0;
    const double ed1 = (1 - rho) * dx1 * dx1;
    const double eg2 = rho * eg1 + (1 - rho) * 0.25;
    const double dx2 = -std::sqrt(ed1 + eps) / std::sqrt(eg2 + eps) * -0.5;
    const bool pass = close_rel(step1, lr * dx1, 1e-9) && close_rel(step2, lr * dx2, 1e-9) &&
                      close_rel(step1, -1.41421e-4, 1e-5);
    return {pass, fmt("step 1 (g=1) %.9e vs %.9e; step 2 (g=-0.5) %.9e vs %.9e", step1, lr * dx1, step2, lr * dx2)};
}

// ---------------------------------------------------------------------------
// Synthetic-corridor criteria share one dataset and a cache of trained models.

const SyntheticCorridor& corridor() {
    static const SyntheticCorridor c = [] {
        const auto t0 = Clock::now();
        auto sc = make_synthetic_corridor(SyntheticCorridorConfig{});
        std::printf("   corridor: %zu days, %zu intervals per station, simulated in %.1f s\n", SyntheticCorridorConfig{}.days,
                    sc.data.intervals(), seconds_since(t0));
        return sc;
    }();
    return c;
}

struct Run {
    TrainedScenario trained;
    LocationReport target;
    LocationReport transfer;
    double seconds = 0.0;
};

const Run& trained_run(const std::string& scenario, FeatureVariant v, std::uint64_t seed, std::size_t horizon = 1) {
    static std::map<std::tuple<std::string, FeatureVariant, std::uint64_t, std::size_t>, Run> cache;
    const auto key = std::tuple{scenario, v, seed, horizon};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const auto& c = corridor();
    const auto spec = build_scenario(scenario, c.data.geometry);
    HarnessConfig hc;
    hc.train.seed = seed;
    hc.horizon = horizon;
    const auto t0 = Clock::now();
    auto tr = train_scenario(v, spec, c.data, c.fd, hc);
    auto tg = evaluate(tr.model, v, spec, Location::Target, c.data, c.fd, hc);
    auto tf = evaluate(tr.model, v, spec, Location::Transfer, c.data, c.fd, hc);
    const double secs = seconds_since(t0);
    std::printf("   trained %s %s seed %llu h%zu: target RMSE %.3f, transfer RMSE %.3f (%.1f s)\n", scenario.c_str(),
                std::string(to_string(v)).c_str(), static_cast<unsigned long long>(seed), horizon,
                tg.states.at("Combined").rmse, tf.states.at("Combined").rmse, secs);
    std::fflush(stdout);
    return cache.emplace(key, Run{std::move(tr), std::move(tg), std::move(tf), secs}).first->second;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

Outcome a7_training() {
    bool pass = true;
    std::string detail;
    for (auto seed : kSeeds) {
        const auto& r = trained_run("A1", FeatureVariant::Regular, seed);
        const auto& vl = r.trained.val_loss;
        const double drop = 1.0 - vl[r.trained.best_epoch] / vl[0];
        const double r2v = r.target.states.at("Combined").r2.value_or(-1.0);
        pass = pass && drop >= 0.5 && r2v >= 0.90 && r.seconds < 300.0;
        detail += fmt("seed %llu: val MSE %.4f -> %.4f (-%.1f%%), test R2 %.4f, %.1f s; ",
                      static_cast<unsigned long long>(seed), vl[0], vl[r.trained.best_epoch], 100 * drop, r2v, r.seconds);
    }
    return {pass, "A1 Regular, Dataset-1 architecture: " + detail};
}

Outcome a8_transfer() {
    auto compare = [](const char* scenario, FeatureVariant physics) {
        int wins = 0;
        std::string s;
        for (auto seed : kSeeds) {
            const double p = trained_run(scenario, physics, seed).transfer.states.at("Combined").rmse;
            const double r = trained_run(scenario, FeatureVariant::Regular, seed).transfer.states.at("Combined").rmse;
            wins += p <= r;
            s += fmt(" %.3f/%.3f", p, r);
        }
        return std::pair{wins, s};
    };
    const auto [a_wins, a_detail] = compare("A1", FeatureVariant::Hybrid);
    const auto [b_wins, b_detail] = compare("B1", FeatureVariant::PhysicsFF);
    return {a_wins >= 2 && b_wins >= 2,
            fmt("Case A (A1) Hybrid <= Regular transfer RMSE in %d/3 seeds [Hybrid/Regular:%s]; "
                "Case B (B1) PhysicsFF <= Regular in %d/3 seeds [FF/Regular:%s]",
                a_wins, a_detail.c_str(), b_wins, b_detail.c_str())};
}

Outcome a9_horizons() {
    const auto& c = corridor();
    const auto spec = build_scenario("A1", c.data.geometry);
    const std::vector<FeatureVariant> variants{FeatureVariant::Regular, FeatureVariant::Hybrid};
    std::vector<SweepReport> sweeps;
    for (auto seed : kSeeds) {
        HarnessConfig hc;
        hc.train.seed = seed;
        const auto t0 = Clock::now();
        sweeps.push_back(horizon_sweep(c.data, spec, variants, c.fd, hc));
        std::printf("   sweep seed %llu: %zu rows in %.1f s\n", static_cast<unsigned long long>(seed),
                    sweeps.back().rows.size(), seconds_since(t0));
        std::fflush(stdout);
    }

    bool monotone = true;
    std::string detail;
    for (auto v : variants) {
        for (auto loc : {Location::Target, Location::Transfer}) {
            std::vector<double> m(5, 0.0);
            for (std::size_t h = 1; h <= 5; ++h) {
                for (const auto& s : sweeps) m[h - 1] += s.find(v, h, loc).combined.rmse / 3.0;
            }
            int inversions = 0;
            bool small = true;
            for (std::size_t h = 1; h < 5; ++h) {
                if (m[h] < m[h - 1]) {
                    ++inversions;
                    small = small && (m[h - 1] - m[h]) <= 0.02 * m[h - 1];
                }
            }
            const bool ok = inversions == 0 || (inversions == 1 && small);
            monotone = monotone && ok;
            detail += fmt("%s %s mean RMSE h1..h5 %.2f %.2f %.2f %.2f %.2f (%s); ", std::string(to_string(v)).c_str(),
                          std::string(to_string(loc)).c_str(), m[0], m[1], m[2], m[3], m[4], ok ? "ok" : "not monotone");
        }
    }
    int wins = 0;
    std::string h5;
    for (const auto& s : sweeps) {
        const double hy = s.find(FeatureVariant::Hybrid, 5, Location::Transfer).combined.rmse;
        const double re = s.find(FeatureVariant::Regular, 5, Location::Transfer).combined.rmse;
        wins += hy <= re;
        h5 += fmt(" %.3f/%.3f", hy, re);
    }
    return {monotone && wins >= 2,
            detail + fmt("h5 transfer Hybrid <= Regular in %d/3 seeds [Hybrid/Regular:%s]", wins, h5.c_str())};
}

Outcome a10_recovery() {
    const auto& c = corridor();
    std::vector<StationParams> per;
    double worst_ff_share = 1.0;
    for (const auto& st : c.data.geometry.stations) {
        const auto& s = c.data.at(st.station_id);
        const auto mask = state_mask(s);
        const double ff = static_cast<double>(std::count(mask.begin(), mask.end(), TrafficState::FreeFlow)) /
                          static_cast<double>(mask.size());
        worst_ff_share = std::min(worst_ff_share, ff);
        per.push_back(estimate_station_params(s));
    }
    const auto sec = aggregate_section_params(per);
    const double vf_err = std::abs(sec.fd.vf - c.fd.vf) / c.fd.vf;
    const double kc_err = std::abs(sec.fd.kc - c.fd.kc) / c.fd.kc;
    double worst_station_vf = 0.0, worst_station_kc = 0.0;
    for (const auto& p : per) {
        worst_station_vf = std::max(worst_station_vf, std::abs(p.vf_hat - c.fd.vf) / c.fd.vf);
        worst_station_kc = std::max(worst_station_kc, std::abs(p.kc_hat - c.fd.kc) / c.fd.kc);
    }
    const bool pass = worst_ff_share >= 0.20 && vf_err <= 0.05 && kc_err <= 0.10;
    return {pass, fmt("free-flow share >= %.1f%% at every station; section vf %.3f vs %.3f (%.2f%%), kc %.3f vs %.3f "
                      "(%.2f%%); worst station errors vf %.2f%%, kc %.2f%%",
                      100 * worst_ff_share, sec.fd.vf, c.fd.vf, 100 * vf_err, sec.fd.kc, c.fd.kc, 100 * kc_err,
                      100 * worst_station_vf, 100 * worst_station_kc)};
}

Outcome a11_scenarios() {
    using R = Role;
    const std::map<std::string, std::array<Role, 4>> table = {
        {"A1", {R::Source1, R::Target, R::Transfer, R::Source2}}, {"A2", {R::Source1, R::Transfer, R::Target, R::Source2}},
        {"B1", {R::Source1, R::Source2, R::Target, R::Transfer}}, {"B2", {R::Source1, R::Source2, R::Transfer, R::Target}},
        {"C1", {R::Transfer, R::Target, R::Source1, R::Source2}}, {"C2", {R::Target, R::Transfer, R::Source1, R::Source2}},
        {"D1", {R::Target, R::Source1, R::Source2, R::Transfer}}, {"D2", {R::Transfer, R::Source1, R::Source2, R::Target}},
    };
    const auto& c = corridor();
    int rows_ok = 0;
    for (const auto& [id, roles] : table) rows_ok += build_scenario(id, c.data.geometry).roles == roles;

    // A stand-in model: refusal must happen before any shape check.
    const nn::TrainedModel dummy{nn::Model(nn::dataset1_spec(2)), {}, {}};
    HarnessConfig hc;
    auto refused = [&](FeatureVariant v, const std::string& id) {
        const auto spec = build_scenario(id, c.data.geometry);
        for (auto loc : {Location::Target, Location::Transfer}) {
            try {
                evaluate(dummy, v, spec, loc, c.data, c.fd, hc);
                return false;
            } catch (const UnsupportedVariant&) {
            } catch (const std::exception&) {
                return false;
            }
        }
        return true;
    };
    int refusals = 0, expected = 0, spurious = 0;
    for (const auto& [id, roles] : table) {
        const char k = id[0];
        for (auto v : kAllVariants) {
            const bool should_refuse =
                (v == FeatureVariant::Hybrid && (k == 'B' || k == 'D')) || (v == FeatureVariant::PhysicsFC && k == 'B');
            if (should_refuse) {
                ++expected;
                refusals += refused(v, id);
            } else {
                spurious += !is_supported(v, build_scenario(id, c.data.geometry), false);
            }
        }
    }
    hc.fc_extension = true;
    const bool fc_ext = is_supported(FeatureVariant::PhysicsFC, build_scenario("B1", c.data.geometry), true) &&
                        !refused(FeatureVariant::PhysicsFC, "B1");
    const bool pass = rows_ok == 8 && refusals == expected && spurious == 0 && fc_ext;
    return {pass, fmt("%d/8 scenario rows exact; %d/%d expected refusals (Hybrid in B and D, FC in B); %d spurious; "
                      "FC in B accepted with the extension flag: %s",
                      rows_ok, refusals, expected, spurious, fc_ext ? "yes" : "no")};
}

Outcome a12_metrics() {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> len(1, 300);
    std::uniform_real_distribution<double> u(0.0, 400.0), noise(-50.0, 50.0), pick(0.0, 1.0);
    double worst = 0.0;
    std::size_t excluded_total = 0, with_exclusions = 0, r2_undefined = 0;
    bool counts_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = static_cast<std::size_t>(len(rng));
        std::vector<double> y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = pick(rng) < 0.05 ? pick(rng) * 0.999 : u(rng); // some near-zero true flows
            p[i] = std::max(0.0, y[i] + noise(rng));
        }
        if (trial == 7) std::fill(y.begin(), y.end(), 42.0);

        // Brute-force references.
        long double se = 0, ape = 0, mu = 0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < n; ++i) {
            se += (long double)(y[i] - p[i]) * (y[i] - p[i]);
            mu += y[i];
            if (std::abs(y[i]) >= 1.0) {
                ape += std::abs((long double)(y[i] - p[i]) / y[i]);
                ++used;
            }
        }
        mu /= n;
        long double sst = 0;
        for (double v : y) sst += (v - mu) * (v - mu);
        const double ref_rmse = std::sqrt(static_cast<double>(se / n));
        const double ref_mape = used ? static_cast<double>(100 * ape / used) : std::nan("");
        const std::optional<double> ref_r2 = sst > 0 ? std::optional<double>(static_cast<double>(1 - se / sst)) : std::nullopt;

        auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
        worst = std::max(worst, rel(rmse(y, p), ref_rmse));
        const auto m = mape(y, p);
        counts_ok = counts_ok && m.used == used && m.excluded == n - used;
        if (used) worst = std::max(worst, rel(m.percent, ref_mape));
        const auto r = r2(y, p);
        counts_ok = counts_ok && r.has_value() == ref_r2.has_value();
        if (r && ref_r2) worst = std::max(worst, rel(*r, *ref_r2));
        if (!r) ++r2_undefined;
        excluded_total += m.excluded;
        with_exclusions += m.excluded > 0;
    }
    const bool pass = worst <= 1e-12 && counts_ok;
    return {pass, fmt("100 random vectors: max rel deviation from brute force %.1e; MAPE excluded %zu samples with "
                      "|y| < 1 across %zu vectors (counts match: %s); r2 undefined for %zu constant vector(s)",
                      worst, excluded_total, with_exclusions, counts_ok ? "yes" : "no", r2_undefined)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"A1", a1_algebra},     {"A2", a2_ff_exactness}, {"A3", a3_fc_exactness}, {"A4", a4_newell_min},
        {"A5", a5_gradients},   {"A6", a6_adadelta},     {"A7", a7_training},     {"A8", a8_transfer},
        {"A9", a9_horizons},    {"A10", a10_recovery},   {"A11", a11_scenarios},  {"A12", a12_metrics},
    };
    std::set<std::string> wanted(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& [id, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

#include "physflow/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace physflow {

namespace {

using Roles = std::array<Role, 4>;

constexpr Role S1 = Role::Source1, S2 = Role::Source2, T = Role::Target, X = Role::Transfer;

const std::map<std::string, Roles>& scenario_table() {
    static const std::map<std::string, Roles> table = {
        {"A1", {S1, T, X, S2}}, {"A2", {S1, X, T, S2}}, {"B1", {S1, S2, T, X}}, {"B2", {S1, S2, X, T}},
        {"C1", {X, T, S1, S2}}, {"C2", {T, X, S1, S2}}, {"D1", {T, S1, S2, X}}, {"D2", {X, S1, S2, T}},
    };
    return table;
}

void check_lengths(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw ValidationError("yhat", "length differs from y");
    if (y.empty()) throw ValidationError("y", "need at least one sample");
}

} // namespace

std::string_view to_string(Role r) {
    switch (r) {
    case Role::Source1: return "Source1";
    case Role::Source2: return "Source2";
    case Role::Target: return "Target";
    case Role::Transfer: return "Transfer";
    }
    return "?";
}

std::string_view to_string(Location l) { return l == Location::Target ? "Target" : "Transfer"; }

std::size_t ScenarioSpec::index_of(Role r) const {
    for (std::size_t i = 0; i < roles.size(); ++i) {
        if (roles[i] == r) return i;
    }
    throw ValidationError("role", "scenario " + id + " has no " + std::string(to_string(r)));
}

ScenarioSpec build_scenario(const std::string& id, const SectionGeometry& geometry) {
    const auto& table = scenario_table();
    const auto it = table.find(id);
    if (it == table.end()) throw ValidationError("scenario", "unknown scenario id '" + id + "'");
    if (geometry.stations.size() != 4) {
        throw ValidationError("geometry", "scenarios need exactly 4 stations, got " +
                                              std::to_string(geometry.stations.size()));
    }
    geometry.validate();
    ScenarioSpec s;
    s.id = id;
    s.roles = it->second;
    for (std::size_t i = 0; i < 4; ++i) s.station_ids[i] = geometry.stations[i].station_id;
    return s;
}

FeatureOptions variant_support(FeatureVariant variant, const ScenarioSpec& scenario, bool fc_extension) {
    const char c = scenario.case_letter();
    const std::string context = "scenario " + scenario.id + ", variant " + std::string(to_string(variant));
    FeatureOptions opts;
    if (variant == FeatureVariant::Hybrid && (c == 'B' || c == 'D')) {
        throw UnsupportedVariant(context, c == 'B' ? "Hybrid degenerates to free-flow features when both "
                                                     "sources are upstream"
                                                   : "Hybrid channel count differs between target and transfer");
    }
    if (variant == FeatureVariant::PhysicsFC) {
        if (c == 'B') {
            if (!fc_extension) {
                throw UnsupportedVariant(context, "PhysicsFC with both sources upstream requires the "
                                                  "fc_extension flag");
            }
            opts.allow_upstream_congested = true;
        }
        if (c == 'D') opts.allow_upstream_congested = true;
    }
    return opts;
}

bool is_supported(FeatureVariant variant, const ScenarioSpec& scenario, bool fc_extension) {
    try {
        variant_support(variant, scenario, fc_extension);
        return true;
    } catch (const UnsupportedVariant&) {
        return false;
    }
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - yhat[i];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

MapeResult mape(std::span<const double> y, std::span<const double> yhat, double min_abs_true) {
    check_lengths(y, yhat);
    MapeResult m;
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (std::abs(y[i]) < min_abs_true) {
            ++m.excluded;
            continue;
        }
        s += std::abs((y[i] - yhat[i]) / y[i]);
        ++m.used;
    }
    m.percent = m.used ? 100.0 * s / static_cast<double>(m.used) : std::nan("");
    return m;
}

std::optional<double> r2(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y, yhat);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (ss_tot == 0.0) return std::nullopt;
    return 1.0 - ss_res / ss_tot;
}

std::vector<TrafficState> state_mask(const DetectorSeries& series, double threshold) {
    std::vector<TrafficState> out;
    out.reserve(series.size());
    for (const auto& r : series.records) {
        out.push_back(r.speed < threshold ? TrafficState::Congestion : TrafficState::FreeFlow);
    }
    return out;
}

const DetectorSeries& CorridorData::at(const std::string& id) const {
    const auto it = series.find(id);
    if (it == series.end()) throw ValidationError("station_id", "no detector data for '" + id + "'");
    return it->second;
}

std::size_t CorridorData::intervals() const {
    if (series.empty()) return 0;
    return series.begin()->second.size();
}

nn::ModelSpec model_spec(Architecture arch, std::size_t channels, std::size_t lag) {
    return arch == Architecture::Dataset1 ? nn::dataset1_spec(channels, lag) : nn::dataset2_spec(channels, lag);
}

SampleSet build_samples(FeatureVariant variant, const ScenarioSpec& scenario, Location location,
                        const CorridorData& data, const TriangularFD& fd, const HarnessConfig& config) {
    const FeatureOptions opts = variant_support(variant, scenario, config.fc_extension);
    const std::string& where = scenario.station(location);
    const double x_loc = data.geometry.at(where).position;
    const auto& src1 = data.at(scenario.station(Role::Source1));
    const auto& src2 = data.at(scenario.station(Role::Source2));
    const auto& truth = data.at(where);

    std::vector<FeatureSource> sources = {
        {&src1, relative_position(data.geometry.at(src1.station_id).position, x_loc)},
        {&src2, relative_position(data.geometry.at(src2.station_id).position, x_loc)},
    };
    FeatureBuilder builder(variant, sources, fd, config.lag, opts);
    if (truth.size() != src1.size()) throw DataError("target series length differs from the sources");

    const std::size_t n_int = truth.size();
    const std::size_t h = config.horizon;
    if (h < 1) throw ValidationError("horizon", "must be >= 1");
    if (n_int < config.lag + h) {
        throw DataError("series of " + std::to_string(n_int) + " intervals too short for lag " +
                        std::to_string(config.lag) + " and horizon " + std::to_string(h));
    }

    SampleSet out;
    out.labels = builder.labels();
    out.data.stations = builder.channels();
    out.data.lag = config.lag;
    out.data.outputs = 1;
    const std::size_t count = n_int - h - config.lag + 1;
    out.data.inputs.resize(count * out.data.input_size());
    out.data.targets.resize(count);
    out.target_interval.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t end_knot = config.lag + i;
        builder.window_into(end_knot, {out.data.inputs.data() + i * out.data.input_size(), out.data.input_size()});
        const std::size_t target = end_knot - 1 + h;
        out.data.targets[i] = truth.records[target].flow;
        out.target_interval[i] = target;
    }
    return out;
}

TrainedScenario train_scenario(FeatureVariant variant, const ScenarioSpec& scenario, const CorridorData& data,
                               const TriangularFD& fd, const HarnessConfig& config) {
    const SampleSet samples = build_samples(variant, scenario, Location::Target, data, fd, config);
    const auto spec = model_spec(config.architecture, samples.data.stations, config.lag);
    auto result = nn::train(spec, samples.data, config.train);
    auto& meta = result.trained.metadata;
    meta["scenario"] = scenario.id;
    meta["variant"] = std::string(to_string(variant));
    meta["horizon"] = std::to_string(config.horizon);
    meta["target"] = scenario.station(Location::Target);
    std::string labels;
    for (const auto& l : samples.labels) {
        if (!labels.empty()) labels += ";";
        labels += l.source_id + ":" + std::string(to_string(l.kind));
    }
    meta["channels"] = labels;
    return {std::move(result.trained), std::move(result.train_loss), std::move(result.val_loss), result.best_epoch};
}

StateMetrics compute_metrics(std::span<const double> y, std::span<const double> yhat) {
    StateMetrics m;
    m.n = y.size();
    if (m.n == 0) {
        m.rmse = m.mse = std::nan("");
        m.mape.percent = std::nan("");
        return m;
    }
    m.rmse = rmse(y, yhat);
    m.mse = m.rmse * m.rmse;
    m.mape = mape(y, yhat);
    m.r2 = r2(y, yhat);
    return m;
}

LocationReport evaluate(const nn::TrainedModel& model, FeatureVariant variant, const ScenarioSpec& scenario,
                        Location location, const CorridorData& data, const TriangularFD& fd,
                        const HarnessConfig& config) {
    const SampleSet samples = build_samples(variant, scenario, location, data, fd, config);
    if (samples.data.stations != model.model.spec().stations || samples.data.lag != model.model.spec().lag) {
        throw ShapeError("input: " + std::to_string(samples.data.stations) + "x" + std::to_string(samples.data.lag) +
                         " features do not fit a model expecting " + std::to_string(model.model.spec().stations) +
                         "x" + std::to_string(model.model.spec().lag));
    }
    const auto split = nn::chronological_split(samples.data.size(), config.train.split);
    if (split.val_end >= split.size) throw DataError("evaluate: empty test partition");

    nn::Dataset test;
    test.stations = samples.data.stations;
    test.lag = samples.data.lag;
    test.outputs = 1;
    const std::size_t in = samples.data.input_size();
    test.inputs.assign(samples.data.inputs.begin() + static_cast<long>(split.val_end * in), samples.data.inputs.end());
    test.targets.assign(samples.data.targets.begin() + static_cast<long>(split.val_end), samples.data.targets.end());

    LocationReport rep;
    rep.scenario = scenario.id;
    rep.variant = variant;
    rep.location = location;
    rep.horizon = config.horizon;
    rep.truth = test.targets;
    rep.prediction = model.predict(test);
    rep.interval.assign(samples.target_interval.begin() + static_cast<long>(split.val_end),
                        samples.target_interval.end());

    const auto mask = state_mask(data.at(scenario.station(location)));
    std::vector<double> yf, pf, yc, pc;
    for (std::size_t i = 0; i < rep.truth.size(); ++i) {
        const bool congested = mask[rep.interval[i]] == TrafficState::Congestion;
        (congested ? yc : yf).push_back(rep.truth[i]);
        (congested ? pc : pf).push_back(rep.prediction[i]);
    }
    rep.states["Combined"] = compute_metrics(rep.truth, rep.prediction);
    rep.states["FreeFlow"] = compute_metrics(yf, pf);
    rep.states["Congestion"] = compute_metrics(yc, pc);
    return rep;
}

std::string format_metric(double v) {
    if (std::isnan(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

namespace {

std::string opt_metric(const std::optional<double>& v) { return v ? format_metric(*v) : "-"; }

} // namespace

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "scenario,variant,location,horizon,state,n,rmse,mape,mape_excluded,r2\n";
    for (const auto& r : rows) {
        for (const char* state : {"Combined", "FreeFlow", "Congestion"}) {
            const auto& m = r.states.at(state);
            os << r.scenario << ',' << to_string(r.variant) << ',' << to_string(r.location) << ',' << r.horizon << ','
               << state << ',' << m.n << ',' << format_metric(m.rmse) << ',' << format_metric(m.mape.percent) << ','
               << m.mape.excluded << ',' << opt_metric(m.r2) << '\n';
        }
    }
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json states = nlohmann::json::object();
        for (const auto& [name, m] : r.states) {
            nlohmann::json s = {{"n", m.n}, {"mape_excluded", m.mape.excluded}, {"mape_used", m.mape.used}};
            s["rmse"] = m.n ? nlohmann::json(m.rmse) : nlohmann::json();
            s["mape"] = m.mape.used ? nlohmann::json(m.mape.percent) : nlohmann::json();
            s["r2"] = m.r2 ? nlohmann::json(*m.r2) : nlohmann::json();
            states[name] = s;
        }
        arr.push_back({{"scenario", r.scenario},
                       {"variant", to_string(r.variant)},
                       {"location", to_string(r.location)},
                       {"horizon", r.horizon},
                       {"states", states}});
    }
    return arr.dump(2);
}

std::string MetricsReport::traces_csv() const {
    std::ostringstream os;
    os << "scenario,variant,location,horizon,interval,truth,prediction\n";
    os.precision(10);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.truth.size(); ++i) {
            os << r.scenario << ',' << to_string(r.variant) << ',' << to_string(r.location) << ',' << r.horizon << ','
               << r.interval[i] << ',' << r.truth[i] << ',' << r.prediction[i] << '\n';
        }
    }
    return os.str();
}

std::string SweepReport::to_csv() const {
    std::ostringstream os;
    os << "scenario,variant,horizon,minutes,location,n,rmse,mape,r2\n";
    for (const auto& r : rows) {
        os << scenario << ',' << to_string(r.variant) << ',' << r.horizon << ',' << r.horizon * kIntervalSeconds / 60
           << ',' << to_string(r.location) << ',' << r.combined.n << ',' << format_metric(r.combined.rmse) << ','
           << format_metric(r.combined.mape.percent) << ',' << opt_metric(r.combined.r2) << '\n';
    }
    return os.str();
}

const SweepRow& SweepReport::find(FeatureVariant v, std::size_t horizon, Location loc) const {
    for (const auto& r : rows) {
        if (r.variant == v && r.horizon == horizon && r.location == loc) return r;
    }
    throw ValidationError("sweep", "no row for the requested variant/horizon/location");
}

SweepReport horizon_sweep(const CorridorData& data, const ScenarioSpec& scenario,
                          std::span<const FeatureVariant> variants, const TriangularFD& fd,
                          const HarnessConfig& config, std::span<const std::size_t> horizons) {
    static constexpr std::size_t kDefaultHorizons[] = {1, 2, 3, 4, 5};
    if (horizons.empty()) horizons = kDefaultHorizons;
    const std::size_t longest = *std::max_element(horizons.begin(), horizons.end());
    if (data.intervals() < config.lag + longest + 20) {
        throw DataError("horizon_sweep: " + std::to_string(data.intervals()) + " intervals are too few for horizon " +
                        std::to_string(longest));
    }
    SweepReport rep;
    rep.scenario = scenario.id;
    for (auto v : variants) {
        for (std::size_t h : horizons) {
            HarnessConfig cfg = config;
            cfg.horizon = h;
            const auto trained = train_scenario(v, scenario, data, fd, cfg);
            for (auto loc : {Location::Target, Location::Transfer}) {
                const auto ev = evaluate(trained.model, v, scenario, loc, data, fd, cfg);
                rep.rows.push_back({v, h, loc, ev.states.at("Combined")});
            }
        }
    }
    return rep;
}

} // namespace physflow

#include "physflow/config.hpp"

#include "physflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace physflow {

namespace {

using nlohmann::json;

/// Typed access to one JSON object; remembers which keys were read so unknown keys can be rejected.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void read(const std::string& key, T& target) {
        if (!has(key)) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError(field(key), "has the wrong type");
        }
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) throw ValidationError(field(key), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void positive(double v, const std::string& field) {
    if (!(v > 0.0)) throw ValidationError(field, "must be positive");
}

FeatureVariant variant_from(const json& j, const std::string& field) {
    try {
        return parse_variant(j.get<std::string>());
    } catch (const std::exception& e) {
        throw ValidationError(field, e.what());
    }
}

SyntheticCorridorConfig parse_synthetic(const json& j) {
    Section s(j, "synthetic");
    SyntheticCorridorConfig c;
    double vf = c.fd.vf, w = c.fd.w, kj = c.fd.kj;
    s.read("days", c.days);
    s.read("noise", c.noise);
    s.read("vf", vf);
    s.read("w", w);
    s.read("kj", kj);
    s.read("dx", c.dx);
    s.read("margin", c.margin);
    s.read("station_ids", c.station_ids);
    s.read("spacing", c.spacing);
    if (s.has("start")) {
        try {
            c.t0 = parse_timestamp(s.raw("start").get<std::string>());
        } catch (const std::exception& e) {
            throw ValidationError("synthetic.start", e.what());
        }
    }
    s.read("night_level", c.night_level);
    s.read("am_level", c.am_level);
    s.read("pm_level", c.pm_level);
    s.read("day_spread", c.day_spread);
    s.read("fluctuation", c.fluctuation);
    s.read("fluctuation_rho", c.fluctuation_rho);
    s.read("knot_seconds", c.knot_seconds);
    s.read("bottleneck_probability", c.bottleneck_probability);
    s.read("am_bottleneck_probability", c.am_bottleneck_probability);
    s.read("cap_min", c.cap_min);
    s.read("cap_max", c.cap_max);
    s.read("bottleneck_min_hours", c.bottleneck_min_hours);
    s.read("bottleneck_max_hours", c.bottleneck_max_hours);
    s.read("cap_fluctuation", c.cap_fluctuation);
    s.read("cap_rho", c.cap_rho);
    s.finish();
    positive(vf, "synthetic.vf");
    positive(w, "synthetic.w");
    positive(kj, "synthetic.kj");
    positive(c.dx, "synthetic.dx");
    if (c.noise < 0.0) throw ValidationError("synthetic.noise", "must be >= 0");
    c.fd = make_triangular_fd(vf, w, kj);
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ValidationError("synthetic." + e.field(), e.what());
    }
    return c;
}

} // namespace

std::vector<std::filesystem::path> RunConfig::input_paths() const {
    if (!inputs.empty()) return inputs;
    return {output_dir / "detectors.csv"};
}

SectionGeometry RunConfig::effective_geometry() const {
    if (!geometry.stations.empty()) return geometry;
    if (!synthetic) throw ValidationError("geometry", "required when no synthetic section is configured");
    SectionGeometry g;
    const auto pos = synthetic->positions();
    for (std::size_t i = 0; i < 4; ++i) g.stations.push_back({synthetic->station_ids[i], pos[i]});
    return g;
}

std::uint64_t RunConfig::component_seed(std::string_view component) const { return derive_seed(seed, component); }

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    Section root(doc, "");
    RunConfig c;
    auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() || base_dir.empty() ? p : base_dir / p; };

    root.read("seed", c.seed);
    root.read("jobs", c.jobs);
    if (c.jobs < 1) throw ValidationError("jobs", "must be >= 1");
    std::string out = c.output_dir.string();
    root.read("output_dir", out);
    if (out.empty()) throw ValidationError("output_dir", "must not be empty");
    c.output_dir = resolve(out);

    std::vector<std::string> inputs;
    root.read("inputs", inputs);
    for (const auto& p : inputs) c.inputs.push_back(resolve(p));

    if (root.has("geometry")) {
        const auto& g = root.raw("geometry");
        if (!g.is_array()) throw ValidationError("geometry", "expected an array");
        for (std::size_t i = 0; i < g.size(); ++i) {
            Section st(g[i], "geometry[" + std::to_string(i) + "]");
            StationLocation loc;
            st.read("station_id", loc.station_id);
            st.read("position", loc.position);
            st.finish();
            if (loc.station_id.empty()) throw ValidationError(st.field("station_id"), "required");
            c.geometry.stations.push_back(loc);
        }
        if (!c.geometry.stations.empty()) try {
            c.geometry.validate();
        } catch (const ValidationError& e) {
            throw ValidationError("geometry", e.what());
        }
    }

    if (root.has("fd")) {
        Section fd(root.raw("fd"), "fd");
        fd.read("estimate", c.fd.estimate);
        fd.read("vf", c.fd.vf);
        fd.read("w", c.fd.w);
        fd.read("kj", c.fd.kj);
        fd.read("percentile", c.fd.estimate_options.percentile);
        fd.read("min_intervals", c.fd.estimate_options.min_intervals);
        fd.finish();
        positive(c.fd.vf, "fd.vf");
        positive(c.fd.w, "fd.w");
        positive(c.fd.kj, "fd.kj");
        const double p = c.fd.estimate_options.percentile;
        if (!(p > 0.0 && p <= 1.0)) throw ValidationError("fd.percentile", "must be in (0, 1]");
    }

    if (root.has("ingest")) {
        Section in(root.raw("ingest"), "ingest");
        in.read("max_gap_fill", c.ingest.max_gap_fill);
        in.finish();
    }

    if (root.has("synthetic")) c.synthetic = parse_synthetic(root.raw("synthetic"));

    if (root.has("variants")) {
        const auto& v = root.raw("variants");
        if (!v.is_array() || v.empty()) throw ValidationError("variants", "expected a non-empty array");
        c.variants.clear();
        for (std::size_t i = 0; i < v.size(); ++i) c.variants.push_back(variant_from(v[i], "variants[" + std::to_string(i) + "]"));
    }
    if (root.has("scenarios")) {
        std::vector<std::string> ids;
        root.read("scenarios", ids);
        if (ids.empty()) throw ValidationError("scenarios", "expected a non-empty array");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (std::find(kScenarioIds.begin(), kScenarioIds.end(), ids[i]) == kScenarioIds.end()) {
                throw ValidationError("scenarios[" + std::to_string(i) + "]", "unknown scenario '" + ids[i] + "'");
            }
        }
        c.scenarios = ids;
    }

    if (root.has("model")) {
        Section m(root.raw("model"), "model");
        std::string arch = "dataset1";
        m.read("architecture", arch);
        if (arch == "dataset1") {
            c.harness.architecture = Architecture::Dataset1;
        } else if (arch == "dataset2") {
            c.harness.architecture = Architecture::Dataset2;
        } else {
            throw ValidationError("model.architecture", "expected 'dataset1' or 'dataset2'");
        }
        m.read("lag", c.harness.lag);
        m.read("horizon", c.harness.horizon);
        m.read("fc_extension", c.harness.fc_extension);
        m.finish();
        if (c.harness.lag < 1) throw ValidationError("model.lag", "must be >= 1");
        if (c.harness.horizon < 1) throw ValidationError("model.horizon", "must be >= 1");
    }

    if (root.has("train")) {
        Section t(root.raw("train"), "train");
        auto& tc = c.harness.train;
        t.read("batch", tc.batch);
        t.read("epochs", tc.epochs);
        t.read("lr", tc.optimizer.lr);
        t.read("rho", tc.optimizer.rho);
        t.read("eps", tc.optimizer.eps);
        if (t.has("split")) {
            Section sp(t.raw("split"), "train.split");
            sp.read("train", tc.split.train);
            sp.read("validation", tc.split.validation);
            sp.read("test", tc.split.test);
            sp.finish();
            const double sum = tc.split.train + tc.split.validation + tc.split.test;
            if (std::abs(sum - 1.0) > 1e-9 || tc.split.train <= 0.0 || tc.split.validation <= 0.0 ||
                tc.split.test <= 0.0) {
                throw ValidationError("train.split", "fractions must be positive and sum to 1");
            }
        }
        t.finish();
        if (tc.batch < 1) throw ValidationError("train.batch", "must be >= 1");
        positive(tc.optimizer.lr, "train.lr");
        if (!(tc.optimizer.rho > 0.0 && tc.optimizer.rho < 1.0)) throw ValidationError("train.rho", "must be in (0, 1)");
        positive(tc.optimizer.eps, "train.eps");
    }

    if (root.has("horizons")) {
        root.read("horizons", c.horizons);
        if (c.horizons.empty()) throw ValidationError("horizons", "expected a non-empty array");
        for (std::size_t i = 0; i < c.horizons.size(); ++i) {
            if (c.horizons[i] < 1) throw ValidationError("horizons[" + std::to_string(i) + "]", "must be >= 1");
        }
    }
    root.finish();

    if (c.geometry.stations.empty() && !c.synthetic) {
        throw ValidationError("geometry", "required when no synthetic section is configured");
    }
    const auto geometry = c.effective_geometry();
    if (geometry.stations.size() != 4) {
        throw ValidationError("geometry", "scenarios need exactly 4 stations, got " +
                                              std::to_string(geometry.stations.size()));
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("--config", "cannot open '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("--config", std::string("invalid JSON: ") + e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

json default_config_json() {
    const RunConfig c;
    const SyntheticCorridorConfig s;
    json variants = json::array();
    for (auto v : c.variants) variants.push_back(std::string(to_string(v)));
    return {
        {"seed", c.seed},
        {"jobs", c.jobs},
        {"output_dir", c.output_dir.string()},
        {"inputs", json::array()},
        {"geometry", json::array()},
        {"fd",
         {{"estimate", c.fd.estimate},
          {"vf", c.fd.vf},
          {"w", c.fd.w},
          {"kj", c.fd.kj},
          {"percentile", c.fd.estimate_options.percentile},
          {"min_intervals", c.fd.estimate_options.min_intervals}}},
        {"ingest", {{"max_gap_fill", c.ingest.max_gap_fill}}},
        {"synthetic",
         {{"days", s.days},
          {"noise", s.noise},
          {"vf", s.fd.vf},
          {"w", s.fd.w},
          {"kj", s.fd.kj},
          {"dx", s.dx},
          {"margin", s.margin},
          {"station_ids", s.station_ids},
          {"spacing", s.spacing},
          {"start", format_timestamp(s.t0)},
          {"night_level", s.night_level},
          {"am_level", s.am_level},
          {"pm_level", s.pm_level},
          {"day_spread", s.day_spread},
          {"fluctuation", s.fluctuation},
          {"fluctuation_rho", s.fluctuation_rho},
          {"knot_seconds", s.knot_seconds},
          {"bottleneck_probability", s.bottleneck_probability},
          {"am_bottleneck_probability", s.am_bottleneck_probability},
          {"cap_min", s.cap_min},
          {"cap_max", s.cap_max},
          {"bottleneck_min_hours", s.bottleneck_min_hours},
          {"bottleneck_max_hours", s.bottleneck_max_hours},
          {"cap_fluctuation", s.cap_fluctuation},
          {"cap_rho", s.cap_rho}}},
        {"variants", variants},
        {"scenarios", c.scenarios},
        {"model", {{"architecture", "dataset1"}, {"lag", c.harness.lag}, {"horizon", c.harness.horizon},
                   {"fc_extension", c.harness.fc_extension}}},
        {"train",
         {{"batch", c.harness.train.batch},
          {"epochs", c.harness.train.epochs},
          {"lr", c.harness.train.optimizer.lr},
          {"rho", c.harness.train.optimizer.rho},
          {"eps", c.harness.train.optimizer.eps},
          {"split",
           {{"train", c.harness.train.split.train},
            {"validation", c.harness.train.split.validation},
            {"test", c.harness.train.split.test}}}}},
        {"horizons", c.horizons},
    };
}

} // namespace physflow

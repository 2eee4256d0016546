#include "physflow/pipeline.hpp"

#include "physflow/nn/serialize.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace physflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

LogSink sink_or_default(const LogSink& log) {
    if (log) return log;
    return [](const std::string& line) { std::cerr << "[physflow] " << line << '\n'; };
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// One supported (scenario, variant) pair.
struct Job {
    ScenarioSpec scenario;
    FeatureVariant variant;
};

std::vector<Job> supported_jobs(const RunConfig& config, const SectionGeometry& geometry, const LogSink& log) {
    std::vector<Job> jobs;
    for (const auto& id : config.scenarios) {
        const auto scenario = build_scenario(id, geometry);
        for (auto v : config.variants) {
            try {
                variant_support(v, scenario, config.harness.fc_extension);
                jobs.push_back({scenario, v});
            } catch (const UnsupportedVariant& e) {
                log("skipping " + id + " " + std::string(to_string(v)) + ": " + e.what());
            }
        }
    }
    return jobs;
}

HarnessConfig harness_for(const RunConfig& config, std::size_t horizon) {
    HarnessConfig h = config.harness;
    h.horizon = horizon;
    h.train.seed = config.component_seed("train");
    return h;
}

void store_fd(nn::TrainedModel& model, const TriangularFD& fd) {
    model.metadata["fd.vf"] = format_number(fd.vf);
    model.metadata["fd.w"] = format_number(fd.w);
    model.metadata["fd.kj"] = format_number(fd.kj);
}

TriangularFD stored_fd(const nn::TrainedModel& model, const std::string& name) {
    try {
        return make_triangular_fd(std::stod(model.metadata.at("fd.vf")), std::stod(model.metadata.at("fd.w")),
                                  std::stod(model.metadata.at("fd.kj")));
    } catch (const std::out_of_range&) {
        throw DataError(name + ": model metadata lacks the fundamental diagram");
    }
}

std::string loss_csv(const TrainedScenario& t) {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss,best\n";
    for (std::size_t e = 0; e < t.val_loss.size(); ++e) {
        os << e << ',' << format_number(t.train_loss[e]) << ',' << format_number(t.val_loss[e]) << ','
           << (e == t.best_epoch ? 1 : 0) << '\n';
    }
    return os.str();
}

json fd_json(const TriangularFD& fd) {
    return {{"vf", fd.vf}, {"w", fd.w}, {"kj", fd.kj}, {"kc", fd.kc}, {"qc", fd.qc}};
}

} // namespace

void run_jobs(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, count));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string model_file_name(const std::string& scenario, FeatureVariant variant, std::size_t horizon) {
    return scenario + "_" + std::string(to_string(variant)) + "_h" + std::to_string(horizon) + ".pfnn";
}

CorridorData load_corridor(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    std::map<std::string, DetectorSeries> all;
    for (const auto& path : config.input_paths()) {
        auto result = ingest_detector_csv(path, config.ingest);
        for (const auto& w : result.warnings) log("warning: " + w);
        for (auto& s : result.series) {
            const std::string id = s.station_id;
            if (!all.emplace(id, std::move(s)).second) {
                throw DataError("station '" + id + "' appears in more than one input file");
            }
        }
    }
    CorridorData data;
    data.geometry = config.effective_geometry();
    const DetectorSeries* first = nullptr;
    for (const auto& st : data.geometry.stations) {
        const auto it = all.find(st.station_id);
        if (it == all.end()) throw ValidationError("geometry", "station '" + st.station_id + "' has no detector data");
        DetectorSeries s = it->second;
        s.position = st.position;
        if (first && (s.t0 != first->t0 || s.dt != first->dt || s.size() != first->size())) {
            throw DataError("station '" + s.station_id + "' does not share the time grid of '" + first->station_id +
                            "'");
        }
        const auto [pos, inserted] = data.series.emplace(s.station_id, std::move(s));
        if (!first) first = &pos->second;
    }
    return data;
}

SectionParams section_params(const RunConfig& config, const CorridorData& data) {
    if (!config.fd.estimate) {
        return {make_triangular_fd(config.fd.vf, config.fd.w, config.fd.kj), {}, config.fd.w};
    }
    std::vector<StationParams> per;
    for (const auto& st : data.geometry.stations) {
        per.push_back(estimate_station_params(data.at(st.station_id), config.fd.estimate_options));
    }
    return aggregate_section_params(per, config.fd.w);
}

void run_simulate(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    if (!config.synthetic) throw ValidationError("synthetic", "required by simulate");
    SyntheticCorridorConfig sc = *config.synthetic;
    sc.seed = config.component_seed("simulate");
    log("simulating " + std::to_string(sc.days) + " days");
    const auto corridor = make_synthetic_corridor(sc);
    const auto& sim = corridor.sim;
    fs::create_directories(config.output_dir);
    write_detector_csv(config.output_dir / "detectors.csv", sim.detectors);

    const double balance = sim.initial_vehicles + sim.vehicles_in - sim.vehicles_out - sim.final_vehicles;
    json stations = json::array();
    for (const auto& s : sim.detectors) stations.push_back({{"station_id", s.station_id}, {"position", s.position}});
    const json summary = {{"dt_seconds", sim.dt},
                          {"cells", corridor.sim_config.cells()},
                          {"length_mi", corridor.sim_config.length},
                          {"intervals", sim.detectors.front().size()},
                          {"vehicles_in", sim.vehicles_in},
                          {"vehicles_out", sim.vehicles_out},
                          {"initial_vehicles", sim.initial_vehicles},
                          {"final_vehicles", sim.final_vehicles},
                          {"conservation_error", balance},
                          {"entry_queue", sim.entry_queue},
                          {"fd", fd_json(corridor.fd)},
                          {"stations", stations}};
    write_text(config.output_dir / "simulation.json", summary.dump(2) + "\n");
    log("wrote " + (config.output_dir / "detectors.csv").string());
}

void run_estimate(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    const auto data = load_corridor(config, log);
    const auto sp = section_params(config, data);
    json per = json::array();
    for (const auto& p : sp.per_station) {
        per.push_back({{"station_id", p.station_id},
                       {"vf_hat", p.vf_hat},
                       {"qc_hat", p.qc_hat},
                       {"kc_hat", p.kc_hat},
                       {"intervals_used", p.intervals_used}});
    }
    const json doc = {{"mode", config.fd.estimate ? "estimated" : "fixed"},
                      {"w_assumed", sp.w_assumed},
                      {"fd", fd_json(sp.fd)},
                      {"per_station", per}};
    write_text(config.output_dir / "section_params.json", doc.dump(2) + "\n");
    log("vf " + format_metric(sp.fd.vf) + " mi/h, kc " + format_metric(sp.fd.kc) + " veh/mi, kj " +
        format_metric(sp.fd.kj) + " veh/mi");
}

void run_transform(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    const auto data = load_corridor(config, log);
    const auto fd = section_params(config, data).fd;
    const auto jobs = supported_jobs(config, data.geometry, log);
    const auto hc = harness_for(config, config.harness.horizon);
    const Timestamp t0 = data.series.begin()->second.t0;
    const int dt = data.series.begin()->second.dt;

    run_jobs(jobs.size() * 2, config.jobs, [&](std::size_t i) {
        const auto& job = jobs[i / 2];
        const Location loc = i % 2 == 0 ? Location::Target : Location::Transfer;
        const auto samples = build_samples(job.variant, job.scenario, loc, data, fd, hc);
        std::ostringstream os;
        os << "window_end,channel,source_id,estimator";
        for (std::size_t k = 0; k < hc.lag; ++k) os << ",v" << k;
        os << '\n';
        const std::size_t in = samples.data.input_size();
        for (std::size_t s = 0; s < samples.data.size(); ++s) {
            const std::string end = format_timestamp(t0 + static_cast<Timestamp>(s + hc.lag) * dt);
            for (std::size_t c = 0; c < samples.data.stations; ++c) {
                os << end << ',' << c << ',' << samples.labels[c].source_id << ','
                   << to_string(samples.labels[c].kind);
                for (std::size_t k = 0; k < hc.lag; ++k) os << ',' << format_number(samples.data.inputs[s * in + c * hc.lag + k]);
                os << '\n';
            }
        }
        write_text(config.output_dir / "features" /
                       (job.scenario.id + "_" + std::string(to_string(job.variant)) + "_" +
                        std::string(to_string(loc)) + ".csv"),
                   os.str());
    });
    log("wrote features for " + std::to_string(jobs.size()) + " scenario/variant pairs");
}

void run_train(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    const auto data = load_corridor(config, log);
    const auto fd = section_params(config, data).fd;
    const auto jobs = supported_jobs(config, data.geometry, log);
    const auto hc = harness_for(config, config.harness.horizon);
    std::vector<std::optional<TrainedScenario>> results(jobs.size());
    std::mutex log_mutex;

    run_jobs(jobs.size(), config.jobs, [&](std::size_t i) {
        const auto& job = jobs[i];
        auto trained = train_scenario(job.variant, job.scenario, data, fd, hc);
        store_fd(trained.model, fd);
        const std::string name = model_file_name(job.scenario.id, job.variant, hc.horizon);
        fs::create_directories(config.output_dir / "models");
        nn::save_model(trained.model, config.output_dir / "models" / name);
        const std::string stem = name.substr(0, name.size() - 5);
        write_text(config.output_dir / "models" / (stem + "_loss.csv"), loss_csv(trained));
        {
            std::lock_guard lock(log_mutex);
            log("trained " + stem + " (best epoch " + std::to_string(trained.best_epoch) + ")");
        }
        results[i] = std::move(trained);
    });

    std::ostringstream os;
    os << "scenario,variant,horizon,best_epoch,val_loss_initial,val_loss_best\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& r = *results[i];
        os << jobs[i].scenario.id << ',' << to_string(jobs[i].variant) << ',' << hc.horizon << ',' << r.best_epoch
           << ',' << format_number(r.val_loss.front()) << ',' << format_number(r.val_loss[r.best_epoch]) << '\n';
    }
    write_text(config.output_dir / "train_summary.csv", os.str());
}

void run_evaluate(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    const auto data = load_corridor(config, log);
    const auto jobs = supported_jobs(config, data.geometry, log);
    const auto hc = harness_for(config, config.harness.horizon);
    MetricsReport report;
    report.rows.resize(jobs.size() * 2);

    run_jobs(jobs.size(), config.jobs, [&](std::size_t i) {
        const auto& job = jobs[i];
        const std::string name = model_file_name(job.scenario.id, job.variant, hc.horizon);
        const fs::path path = config.output_dir / "models" / name;
        if (!fs::exists(path)) throw DataError("missing model '" + path.string() + "'; run train first");
        const auto model = nn::load_model(path);
        const auto fd = stored_fd(model, name);
        report.rows[2 * i] = evaluate(model, job.variant, job.scenario, Location::Target, data, fd, hc);
        report.rows[2 * i + 1] = evaluate(model, job.variant, job.scenario, Location::Transfer, data, fd, hc);
    });
    for (const auto& r : report.rows) {
        for (const auto& [state, m] : r.states) {
            if (m.mape.excluded > 0) {
                log(r.scenario + " " + std::string(to_string(r.variant)) + " " + std::string(to_string(r.location)) +
                    " " + state + ": " + std::to_string(m.mape.excluded) + " sample(s) excluded from MAPE");
            }
        }
    }
    write_text(config.output_dir / "metrics.csv", report.to_csv());
    write_text(config.output_dir / "metrics.json", report.to_json() + "\n");
    write_text(config.output_dir / "traces.csv", report.traces_csv());
    log("evaluated " + std::to_string(jobs.size()) + " models");
}

void run_sweep(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    const auto data = load_corridor(config, log);
    const auto fd = section_params(config, data).fd;
    const auto jobs = supported_jobs(config, data.geometry, log);
    const std::size_t nh = config.horizons.size();
    const std::size_t longest = *std::max_element(config.horizons.begin(), config.horizons.end());
    if (data.intervals() < config.harness.lag + longest + 20) {
        throw DataError("sweep: " + std::to_string(data.intervals()) + " intervals are too few for horizon " +
                        std::to_string(longest));
    }
    std::vector<std::array<SweepRow, 2>> rows(jobs.size() * nh);

    run_jobs(rows.size(), config.jobs, [&](std::size_t i) {
        const auto& job = jobs[i / nh];
        const auto hc = harness_for(config, config.horizons[i % nh]);
        const auto trained = train_scenario(job.variant, job.scenario, data, fd, hc);
        for (std::size_t l = 0; l < 2; ++l) {
            const Location loc = l == 0 ? Location::Target : Location::Transfer;
            const auto ev = evaluate(trained.model, job.variant, job.scenario, loc, data, fd, hc);
            rows[i][l] = {job.variant, hc.horizon, loc, ev.states.at("Combined")};
        }
    });

    std::map<std::string, SweepReport> reports;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& rep = reports[jobs[i / nh].scenario.id];
        rep.scenario = jobs[i / nh].scenario.id;
        for (const auto& r : rows[i]) rep.rows.push_back(r);
    }
    for (const auto& [id, rep] : reports) {
        write_text(config.output_dir / ("sweep_" + id + ".csv"), rep.to_csv());
        log("wrote sweep for " + id);
    }
}

void run_report(const RunConfig& config, const LogSink& log_in) {
    const auto log = sink_or_default(log_in);
    const fs::path path = config.output_dir / "metrics.json";
    if (!fs::exists(path)) throw DataError("missing '" + path.string() + "'; run evaluate first");
    const json metrics = json::parse(read_text(path));

    // (scenario, location, variant, state) -> metrics object
    std::map<std::tuple<std::string, std::string, std::string, std::string>, json> cells;
    for (const auto& row : metrics) {
        for (const auto& [state, m] : row.at("states").items()) {
            cells[{row.at("scenario").get<std::string>(), row.at("location").get<std::string>(),
                   row.at("variant").get<std::string>(), state}] = m;
        }
    }
    const auto geometry = config.effective_geometry();
    auto cell = [&](const std::string& sc, const char* loc, FeatureVariant v, const char* state, const char* metric) {
        const auto scenario = build_scenario(sc, geometry);
        if (!is_supported(v, scenario, config.harness.fc_extension)) return std::string("-");
        const auto it = cells.find({sc, loc, std::string(to_string(v)), state});
        if (it == cells.end() || it->second.at(metric).is_null()) return std::string("-");
        return format_metric(it->second.at(metric).get<double>());
    };

    const std::pair<const char*, const char*> metric_names[] = {{"rmse", "RMSE"}, {"r2", "R2"}, {"mape", "MAPE (%)"}};
    const char* states[] = {"Combined", "FreeFlow", "Congestion"};
    std::ostringstream csv, md;
    csv << "metric,state,case,location";
    for (auto v : kAllVariants) csv << ',' << to_string(v);
    csv << '\n';
    for (const char* state : states) {
        for (const auto& [metric, title] : metric_names) {
            md << "## " << title << " (" << state << ")\n\n| Case | Location |";
            for (auto v : kAllVariants) md << ' ' << to_string(v) << " |";
            md << "\n|---|---|";
            for (std::size_t i = 0; i < std::size(kAllVariants); ++i) md << "---|";
            md << '\n';
            for (const auto& sc : config.scenarios) {
                for (const char* loc : {"Target", "Transfer"}) {
                    csv << metric << ',' << state << ',' << sc << ',' << loc;
                    md << "| " << sc << " | " << loc << " |";
                    for (auto v : kAllVariants) {
                        const auto text = cell(sc, loc, v, state, metric);
                        csv << ',' << text;
                        md << ' ' << text << " |";
                    }
                    csv << '\n';
                    md << '\n';
                }
            }
            md << '\n';
        }
    }
    write_text(config.output_dir / "report.csv", csv.str());
    write_text(config.output_dir / "report.md", md.str());
    log("wrote " + (config.output_dir / "report.md").string());
}

} // namespace physflow

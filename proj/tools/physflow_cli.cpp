#include "physflow/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <map>
#include <optional>

namespace {

using physflow::RunConfig;

int fail(const std::string& type, const std::string& message, const std::string& field = {}, int code = 1) {
    nlohmann::json err = {{"type", type}, {"message", message}};
    if (!field.empty()) err["field"] = field;
    std::cerr << nlohmann::json{{"error", err}}.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed traffic flow forecasting toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    app.add_option("--config", config_path, "Run configuration (JSON); required by every subcommand but defaults");
    app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
    app.add_option("--seed", seed, "Top-level seed (overrides seed)");
    app.add_option("--jobs", jobs, "Worker threads (overrides jobs)")->check(CLI::PositiveNumber);

    using Command = void (*)(const RunConfig&, const physflow::LogSink&);
    const std::map<std::string, std::pair<Command, const char*>> commands = {
        {"simulate", {physflow::run_simulate, "Run the LWR simulator and write detector CSV"}},
        {"estimate", {physflow::run_estimate, "Estimate section FD parameters"}},
        {"transform", {physflow::run_transform, "Write feature tensors as CSV"}},
        {"train", {physflow::run_train, "Train one model per scenario and variant"}},
        {"evaluate", {physflow::run_evaluate, "Evaluate trained models at target and transfer"}},
        {"sweep", {physflow::run_sweep, "Train and evaluate across prediction horizons"}},
        {"report", {physflow::run_report, "Merge metrics into summary tables"}},
    };
    for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.second)->fallthrough();
    app.add_subcommand("defaults", "Print the configuration with every default filled in")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("UsageError", e.what(), {}, 2);
    }

    const auto* sub = app.get_subcommands().front();
    if (sub->get_name() == "defaults") {
        std::cout << physflow::default_config_json().dump(2) << '\n';
        return 0;
    }
    if (config_path.empty()) return fail("UsageError", "--config is required", "config", 2);

    try {
        RunConfig config = physflow::load_run_config(config_path);
        if (out_dir) config.output_dir = *out_dir;
        if (seed) config.seed = *seed;
        if (jobs) config.jobs = *jobs;
        commands.at(sub->get_name()).first(config, {});
        return 0;
    } catch (const physflow::ValidationError& e) {
        return fail("ValidationError", e.what(), e.field());
    } catch (const physflow::UnsupportedVariant& e) {
        return fail("UnsupportedVariant", e.what(), e.context());
    } catch (const physflow::DataError& e) {
        return fail("DataError", e.what());
    } catch (const physflow::ShapeError& e) {
        return fail("ShapeError", e.what());
    } catch (const physflow::SimulationError& e) {
        return fail("SimulationError", e.what());
    } catch (const physflow::DomainError& e) {
        return fail("DomainError", e.what());
    } catch (const std::exception& e) {
        return fail("Error", e.what());
    }
}

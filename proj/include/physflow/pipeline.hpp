#ifndef PHYSFLOW_PIPELINE_HPP
#define PHYSFLOW_PIPELINE_HPP

#include "physflow/config.hpp"

#include <functional>
#include <string>

namespace physflow {

/// Receives progress and warning lines; defaults to stderr.
using LogSink = std::function<void(const std::string&)>;

/// Each subcommand reads the config and writes its artifacts under config.output_dir.
void run_simulate(const RunConfig& config, const LogSink& log = {});
void run_estimate(const RunConfig& config, const LogSink& log = {});
void run_transform(const RunConfig& config, const LogSink& log = {});
void run_train(const RunConfig& config, const LogSink& log = {});
void run_evaluate(const RunConfig& config, const LogSink& log = {});
void run_sweep(const RunConfig& config, const LogSink& log = {});
void run_report(const RunConfig& config, const LogSink& log = {});

/// Ingests the configured inputs and checks them against the geometry.
CorridorData load_corridor(const RunConfig& config, const LogSink& log = {});
/// FD from the config: estimated from `data` or the fixed values.
SectionParams section_params(const RunConfig& config, const CorridorData& data);

/// Runs `count` independent jobs on up to `workers` threads; rethrows the first failure by index.
void run_jobs(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job);

/// Model file name for one trained configuration, e.g. "A1_Hybrid_h1.pfnn".
std::string model_file_name(const std::string& scenario, FeatureVariant variant, std::size_t horizon);

} // namespace physflow

#endif

#ifndef PHYSFLOW_CONFIG_HPP
#define PHYSFLOW_CONFIG_HPP

#include "physflow/harness.hpp"
#include "physflow/io.hpp"
#include "physflow/params.hpp"
#include "physflow/synthetic.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace physflow {

struct FdSettings {
    bool estimate = true; // estimate vf and kc from the data; otherwise use the fixed values below
    double vf = 65.0;
    double w = kDefaultWaveSpeed;
    double kj = 450.0;
    EstimateOptions estimate_options;
};

/**
 * Everything a CLI run needs. Loaded from a JSON document; see
 * configs/synthetic.json for every key with its default. Relative paths
 * resolve against the directory of the config file.
 */
struct RunConfig {
    std::uint64_t seed = 1; // all run randomness derives from this
    std::size_t jobs = 1;
    std::filesystem::path output_dir = "out";
    std::vector<std::filesystem::path> inputs; // detector CSVs; empty means <output_dir>/detectors.csv
    SectionGeometry geometry;                  // empty means the synthetic corridor's stations
    FdSettings fd;
    IngestOptions ingest;
    std::optional<SyntheticCorridorConfig> synthetic;
    std::vector<FeatureVariant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
    std::vector<std::string> scenarios{kScenarioIds.begin(), kScenarioIds.end()};
    HarnessConfig harness;
    std::vector<std::size_t> horizons{1, 2, 3, 4, 5};

    /// Input paths with the default applied.
    std::vector<std::filesystem::path> input_paths() const;
    /// Geometry with the synthetic fallback applied.
    SectionGeometry effective_geometry() const;
    /// Seed for a named run component.
    std::uint64_t component_seed(std::string_view component) const;
};

/// Parses and validates; errors are ValidationError carrying the JSON field path.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// The document with every default filled in.
nlohmann::json default_config_json();

} // namespace physflow

#endif

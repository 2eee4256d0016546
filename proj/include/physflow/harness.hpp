#ifndef PHYSFLOW_HARNESS_HPP
#define PHYSFLOW_HARNESS_HPP

#include "physflow/core.hpp"
#include "physflow/newell.hpp"
#include "physflow/nn/train.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace physflow {

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

enum class Role { Source1, Source2, Target, Transfer };
enum class Location { Target, Transfer };

std::string_view to_string(Role r);
std::string_view to_string(Location l);

inline constexpr std::array<const char*, 8> kScenarioIds = {"A1", "A2", "B1", "B2", "C1", "C2", "D1", "D2"};

/// Role of each of four ordered stations S1..S4 (upstream to downstream).
struct ScenarioSpec {
    std::string id;
    std::array<Role, 4> roles{};
    std::array<std::string, 4> station_ids;

    char case_letter() const { return id.at(0); }
    std::size_t index_of(Role r) const;
    const std::string& station(Role r) const { return station_ids[index_of(r)]; }
    const std::string& station(Location l) const {
        return station(l == Location::Target ? Role::Target : Role::Transfer);
    }
};

/// Role assignment for a scenario id; geometry must hold exactly 4 stations.
ScenarioSpec build_scenario(const std::string& id, const SectionGeometry& geometry);

/**
 * Throws UnsupportedVariant where a variant has no consistent input layout
 * across target and transfer: Hybrid in cases B and D, PhysicsFC in case B
 * unless `fc_extension`. Returns the feature options to use otherwise.
 */
FeatureOptions variant_support(FeatureVariant variant, const ScenarioSpec& scenario, bool fc_extension);
bool is_supported(FeatureVariant variant, const ScenarioSpec& scenario, bool fc_extension);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double rmse(std::span<const double> y, std::span<const double> yhat);

struct MapeResult {
    double percent = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0; // samples with |y| < threshold
};
/// Samples whose |y| is below `min_abs_true` (1 veh/interval) are excluded and counted.
MapeResult mape(std::span<const double> y, std::span<const double> yhat, double min_abs_true = 1.0);

/// 1 - SSres/SStot; empty when y has zero variance.
std::optional<double> r2(std::span<const double> y, std::span<const double> yhat);

enum class TrafficState { FreeFlow, Congestion };
inline constexpr double kCongestionSpeed = 50.0; // mi/h

/// Congestion iff speed < threshold.
std::vector<TrafficState> state_mask(const DetectorSeries& series, double threshold = kCongestionSpeed);

// ---------------------------------------------------------------------------
// Datasets, training and evaluation
// ---------------------------------------------------------------------------

/// Detector series per station id plus their geometry.
struct CorridorData {
    SectionGeometry geometry;
    std::map<std::string, DetectorSeries> series;

    const DetectorSeries& at(const std::string& id) const;
    std::size_t intervals() const;
};

enum class Architecture { Dataset1, Dataset2 };

struct HarnessConfig {
    Architecture architecture = Architecture::Dataset1;
    std::size_t lag = 10;
    std::size_t horizon = 1; // intervals ahead
    nn::TrainConfig train;
    bool fc_extension = false;
};

nn::ModelSpec model_spec(Architecture arch, std::size_t channels, std::size_t lag);

/// Samples for one scenario location: features from the two sources, target flow `horizon` ahead.
struct SampleSet {
    nn::Dataset data;
    std::vector<std::size_t> target_interval; // record index of each sample's target
    std::vector<ChannelLabel> labels;
};

SampleSet build_samples(FeatureVariant variant, const ScenarioSpec& scenario, Location location,
                        const CorridorData& data, const TriangularFD& fd, const HarnessConfig& config);

struct TrainedScenario {
    nn::TrainedModel model;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0;
};

/// Trains at the scenario's target location.
TrainedScenario train_scenario(FeatureVariant variant, const ScenarioSpec& scenario, const CorridorData& data,
                               const TriangularFD& fd, const HarnessConfig& config);

struct StateMetrics {
    std::size_t n = 0;
    double rmse = 0.0;
    double mse = 0.0;
    MapeResult mape;
    std::optional<double> r2;
};

struct LocationReport {
    std::string scenario;
    FeatureVariant variant = FeatureVariant::Regular;
    Location location = Location::Target;
    std::size_t horizon = 1;
    std::map<std::string, StateMetrics> states; // "Combined", "FreeFlow", "Congestion"
    std::vector<std::size_t> interval;          // test-sample target intervals
    std::vector<double> truth;
    std::vector<double> prediction;
};

StateMetrics compute_metrics(std::span<const double> y, std::span<const double> yhat);

/**
 * Evaluates a trained model on the test partition at the target or, with
 * features rebuilt for its own distances, at the transfer location. The
 * model is not modified.
 */
LocationReport evaluate(const nn::TrainedModel& model, FeatureVariant variant, const ScenarioSpec& scenario,
                        Location location, const CorridorData& data, const TriangularFD& fd,
                        const HarnessConfig& config);

struct MetricsReport {
    std::vector<LocationReport> rows;

    std::string to_csv() const;
    std::string to_json() const;
    std::string traces_csv() const;
};

struct SweepRow {
    FeatureVariant variant = FeatureVariant::Regular;
    std::size_t horizon = 1;
    Location location = Location::Target;
    StateMetrics combined;
};

struct SweepReport {
    std::string scenario;
    std::vector<SweepRow> rows;

    std::string to_csv() const;
    const SweepRow& find(FeatureVariant v, std::size_t horizon, Location loc) const;
};

/// One model per (variant, horizon), direct strategy; evaluated at target and transfer.
SweepReport horizon_sweep(const CorridorData& data, const ScenarioSpec& scenario,
                          std::span<const FeatureVariant> variants, const TriangularFD& fd,
                          const HarnessConfig& config, std::span<const std::size_t> horizons = {});

/// Fixed 4-decimal rendering used in report tables.
std::string format_metric(double v);

} // namespace physflow

#endif

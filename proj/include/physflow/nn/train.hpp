#ifndef PHYSFLOW_NN_TRAIN_HPP
#define PHYSFLOW_NN_TRAIN_HPP

#include "physflow/nn/model.hpp"
#include "physflow/nn/optim.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace physflow::nn {

/// Samples stored back to back: inputs [n x stations x lag], targets [n x outputs].
struct Dataset {
    std::size_t stations = 0;
    std::size_t lag = 0;
    std::size_t outputs = 1;
    std::vector<double> inputs;
    std::vector<double> targets;

    std::size_t input_size() const noexcept { return stations * lag; }
    std::size_t size() const noexcept { return outputs ? targets.size() / outputs : 0; }
    void add(std::span<const double> input, std::span<const double> target);
    std::span<const double> input(std::size_t i) const { return {inputs.data() + i * input_size(), input_size()}; }
};

struct SplitFractions {
    double train = 0.60;
    double validation = 0.15;
    double test = 0.25;
};

/// Chronological partition: [0, train_end), [train_end, val_end), [val_end, size).
struct Split {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t size = 0;
};

Split chronological_split(std::size_t n, const SplitFractions& f = {});

/// Per-row standardization of inputs and per-output standardization of targets.
struct Scaler {
    std::vector<double> input_mean, input_std;   // one per station row
    std::vector<double> target_mean, target_std; // one per output

    static Scaler fit(const Dataset& data, std::size_t begin, std::size_t end);
    void transform_input(std::span<double> sample) const;
    double transform_target(double y, std::size_t output = 0) const {
        return (y - target_mean[output]) / target_std[output];
    }
    double inverse_target(double z, std::size_t output = 0) const {
        return z * target_std[output] + target_mean[output];
    }
    bool operator==(const Scaler&) const = default;
};

struct TrainConfig {
    std::size_t batch = 10;
    std::size_t epochs = 30;
    AdadeltaConfig optimizer;
    std::uint64_t seed = 0;
    SplitFractions split;
};

/// Model plus the scaler it was trained with; predictions come back in data units.
struct TrainedModel {
    Model model;
    Scaler scaler;
    std::map<std::string, std::string> metadata;

    /// Raw-unit predictions for every sample of `data` (first output).
    std::vector<double> predict(const Dataset& data) const;
    double predict(std::span<const double> raw_input) const;
};

struct TrainResult {
    TrainedModel trained;
    std::vector<double> train_loss; // [0] before any update, then mean batch loss per epoch
    std::vector<double> val_loss;   // [0] before any update, then after each epoch
    std::size_t best_epoch = 0;
    Split split;
};

/**
 * Adadelta on standardized MSE over the training partition with per-epoch
 * shuffling; returns the parameters of the epoch with the lowest validation
 * loss. Deterministic given `config.seed`.
 */
TrainResult train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/**
 * Central finite differences over up to `max_params` randomly chosen
 * parameters (all if fewer). Relative error |a - n| / (max(|a|,|n|) + 1e-12).
 */
GradCheckReport grad_check(const Model& model, std::span<const double> inputs, std::span<const double> targets,
                           std::size_t count, double h = 1e-5, std::size_t max_params = 200,
                           std::uint64_t seed = 0);

/// Same check restricted to the given parameter indices.
GradCheckReport grad_check_indices(const Model& model, std::span<const double> inputs,
                                   std::span<const double> targets, std::size_t count,
                                   std::span<const std::size_t> indices, double h = 1e-5);

} // namespace physflow::nn

#endif

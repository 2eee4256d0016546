#ifndef PHYSFLOW_NN_MODEL_HPP
#define PHYSFLOW_NN_MODEL_HPP

#include "physflow/nn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace physflow::nn {

enum class Activation { Linear, ReLU };
enum class Padding { Same, Valid };

struct ConvSpec {
    std::size_t filters = 12;
    std::size_t kernel_stations = 3;
    std::size_t kernel_time = 2;
    Padding padding = Padding::Same;
    bool operator==(const ConvSpec&) const = default;
};

struct DenseSpec {
    std::size_t units = 1;
    Activation activation = Activation::Linear;
    bool operator==(const DenseSpec&) const = default;
};

/**
 * conv(ReLU) -> time-major reshape -> stacked LSTM -> dense chain.
 * The input is a stations x lag matrix; the last dense layer is the output.
 */
struct ModelSpec {
    std::size_t stations = 2;
    std::size_t lag = 10;
    ConvSpec conv;
    std::vector<std::size_t> lstm_units{10, 6};
    std::vector<DenseSpec> dense{{1, Activation::Linear}};

    std::size_t conv_out_stations() const;
    std::size_t conv_out_time() const;
    std::size_t input_size() const { return stations * lag; }
    std::size_t outputs() const { return dense.back().units; }
    /// Throws ShapeError naming the first layer whose extents do not compose.
    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// conv(12, (3,2)) -> LSTM(10) -> LSTM(6) -> dense(1).
ModelSpec dataset1_spec(std::size_t stations, std::size_t lag = 10);
/// conv(16, (3,2)) -> LSTM(10) -> LSTM(6) -> dense(6, ReLU) -> dense(1).
ModelSpec dataset2_spec(std::size_t stations, std::size_t lag = 20);

// ---------------------------------------------------------------------------
// Single-layer operations on explicit parameters. The Model below runs the
// same kernels with cached activations for training.
// ---------------------------------------------------------------------------

/// `input` is [stations x lag]; weights [F x ks x kt], bias [F]. Returns ReLU'd [S' x T' x F].
Tensor conv2d_forward(const Tensor& input, std::span<const double> weights, std::span<const double> bias,
                      const ConvSpec& spec);

/// [S x T x F] -> T vectors of S*F values, element (s, f) at index s*F + f.
std::vector<std::vector<double>> reshape_for_recurrence(const Tensor& conv_out);

/**
 * Gate order i, f, g, o. W is [4H x I], U is [4H x H], b is [4H]; zero initial
 * state. Returns the hidden state after every step.
 */
std::vector<std::vector<double>> lstm_forward(const std::vector<std::vector<double>>& seq,
                                              std::span<const double> W, std::span<const double> U,
                                              std::span<const double> b, std::size_t units);

class Model {
public:
    struct ConvLayout {
        std::size_t weights = 0, bias = 0;
    };
    struct LstmLayout {
        std::size_t input = 0, units = 0;
        std::size_t W = 0, U = 0, b = 0;
    };
    struct DenseLayout {
        std::size_t input = 0, units = 0;
        std::size_t W = 0, b = 0;
        Activation activation = Activation::Linear;
    };

    explicit Model(ModelSpec spec);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t param_count() const noexcept { return params_.size(); }
    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }

    const ConvLayout& conv_layout() const noexcept { return conv_; }
    const std::vector<LstmLayout>& lstm_layout() const noexcept { return lstm_; }
    const std::vector<DenseLayout>& dense_layout() const noexcept { return dense_; }
    /// Name of the layer owning parameter `index` (e.g. "lstm1.U").
    std::string param_name(std::size_t index) const;

    /// Glorot-uniform weights, zero biases except LSTM forget gates (1.0).
    void init_glorot(std::uint64_t seed);

    /// One sample of input_size() values -> outputs() values.
    void forward(std::span<const double> input, std::span<double> output) const;
    double forward(std::span<const double> input) const;
    Tensor forward(const Tensor& input) const;
    /// `count` samples laid out back to back.
    std::vector<double> forward_batch(std::span<const double> inputs, std::size_t count) const;

    /// Mean squared error over `count` samples and all outputs.
    double loss(std::span<const double> inputs, std::span<const double> targets, std::size_t count) const;
    /// Same loss; writes d(loss)/d(params) into `grad` (param_count() values, overwritten).
    double loss_and_gradient(std::span<const double> inputs, std::span<const double> targets,
                             std::size_t count, std::span<double> grad) const;

private:
    struct Workspace;
    void run_forward(const double* input, Workspace& ws) const;
    void run_backward(const double* input, const double* dout, Workspace& ws, double* grad) const;

    ModelSpec spec_;
    ConvLayout conv_;
    std::vector<LstmLayout> lstm_;
    std::vector<DenseLayout> dense_;
    std::vector<double> params_;
};

} // namespace physflow::nn

#endif

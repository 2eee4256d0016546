#include "physflow/nn/optim.hpp"

#include "physflow/errors.hpp"

#include <cmath>

namespace physflow::nn {

void adadelta_step(std::span<double> params, std::span<const double> grads, AdadeltaState& state,
                   const AdadeltaConfig& config) {
    if (grads.size() != params.size() || state.eg2.size() != params.size() || state.edx2.size() != params.size()) {
        throw ShapeError("adadelta: parameter, gradient and state sizes differ");
    }
    const double rho = config.rho, eps = config.eps;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.eg2[i] = rho * state.eg2[i] + (1.0 - rho) * g * g;
        const double dx = -std::sqrt(state.edx2[i] + eps) / std::sqrt(state.eg2[i] + eps) * g;
        state.edx2[i] = rho * state.edx2[i] + (1.0 - rho) * dx * dx;
        params[i] += config.lr * dx;
    }
}

} // namespace physflow::nn

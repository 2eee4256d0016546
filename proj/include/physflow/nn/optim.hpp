#ifndef PHYSFLOW_NN_OPTIM_HPP
#define PHYSFLOW_NN_OPTIM_HPP

#include <span>
#include <vector>

namespace physflow::nn {

struct AdadeltaConfig {
    double lr = 0.10;
    double rho = 0.95;
    double eps = 1e-7;
};

/// Running averages of squared gradients and squared updates, one per parameter.
struct AdadeltaState {
    std::vector<double> eg2;
    std::vector<double> edx2;

    AdadeltaState() = default;
    explicit AdadeltaState(std::size_t n) : eg2(n, 0.0), edx2(n, 0.0) {}
};

/**
 * Eg <- rho Eg + (1 - rho) g^2
 * dx  = -sqrt(Edx + eps) / sqrt(Eg + eps) * g
 * Edx <- rho Edx + (1 - rho) dx^2
 * p  <- p + lr dx
 */
void adadelta_step(std::span<double> params, std::span<const double> grads, AdadeltaState& state,
                   const AdadeltaConfig& config = {});

} // namespace physflow::nn

#endif

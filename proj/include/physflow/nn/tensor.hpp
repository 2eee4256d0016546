#ifndef PHYSFLOW_NN_TENSOR_HPP
#define PHYSFLOW_NN_TENSOR_HPP

#include "physflow/errors.hpp"

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace physflow::nn {

/// Dense row-major array of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> extents, double fill = 0.0)
        : shape(std::move(extents)), values(count(shape), fill) {}
    Tensor(std::vector<std::size_t> extents, std::vector<double> data)
        : shape(std::move(extents)), values(std::move(data)) {
        if (values.size() != count(shape)) throw ShapeError("tensor: value count does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& extents) {
        return std::accumulate(extents.begin(), extents.end(), std::size_t{1}, std::multiplies<>());
    }
    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t size() const noexcept { return values.size(); }

    double& operator()(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return values[(i * shape[1] + j) * shape[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values[(i * shape[1] + j) * shape[2] + k];
    }
};

} // namespace physflow::nn

#endif

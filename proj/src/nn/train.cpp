#include "physflow/nn/train.hpp"

#include "physflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace physflow::nn {

void Dataset::add(std::span<const double> input, std::span<const double> target) {
    if (input.size() != input_size()) throw ShapeError("dataset: sample has wrong input size");
    if (target.size() != outputs) throw ShapeError("dataset: sample has wrong target size");
    inputs.insert(inputs.end(), input.begin(), input.end());
    targets.insert(targets.end(), target.begin(), target.end());
}

Split chronological_split(std::size_t n, const SplitFractions& f) {
    const double total = f.train + f.validation + f.test;
    if (std::abs(total - 1.0) > 1e-9 || f.train <= 0.0 || f.validation < 0.0 || f.test < 0.0) {
        throw ValidationError("split", "fractions must be non-negative and sum to 1");
    }
    Split s;
    s.size = n;
    s.train_end = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n)));
    s.val_end = static_cast<std::size_t>(std::floor((f.train + f.validation) * static_cast<double>(n)));
    return s;
}

Scaler Scaler::fit(const Dataset& data, std::size_t begin, std::size_t end) {
    if (end <= begin) throw DataError("scaler: empty fitting range");
    Scaler sc;
    const std::size_t S = data.stations, T = data.lag, no = data.outputs;
    sc.input_mean.assign(S, 0.0);
    sc.input_std.assign(S, 0.0);
    sc.target_mean.assign(no, 0.0);
    sc.target_std.assign(no, 0.0);
    const double n = static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const auto x = data.input(i);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t t = 0; t < T; ++t) sc.input_mean[s] += x[s * T + t];
        for (std::size_t o = 0; o < no; ++o) sc.target_mean[o] += data.targets[i * no + o];
    }
    for (auto& m : sc.input_mean) m /= n * static_cast<double>(T);
    for (auto& m : sc.target_mean) m /= n;
    for (std::size_t i = begin; i < end; ++i) {
        const auto x = data.input(i);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t t = 0; t < T; ++t) {
                const double d = x[s * T + t] - sc.input_mean[s];
                sc.input_std[s] += d * d;
            }
        for (std::size_t o = 0; o < no; ++o) {
            const double d = data.targets[i * no + o] - sc.target_mean[o];
            sc.target_std[o] += d * d;
        }
    }
    auto finish = [](double& v, double count) {
        v = std::sqrt(v / count);
        if (!(v > 1e-12)) v = 1.0;
    };
    for (auto& v : sc.input_std) finish(v, n * static_cast<double>(T));
    for (auto& v : sc.target_std) finish(v, n);
    return sc;
}

void Scaler::transform_input(std::span<double> sample) const {
    const std::size_t S = input_mean.size();
    if (S == 0 || sample.size() % S != 0) throw ShapeError("scaler: sample does not match station rows");
    const std::size_t T = sample.size() / S;
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t t = 0; t < T; ++t) sample[s * T + t] = (sample[s * T + t] - input_mean[s]) / input_std[s];
}

double TrainedModel::predict(std::span<const double> raw_input) const {
    std::vector<double> x(raw_input.begin(), raw_input.end());
    scaler.transform_input(x);
    return scaler.inverse_target(model.forward(std::span<const double>(x)));
}

std::vector<double> TrainedModel::predict(const Dataset& data) const {
    std::vector<double> x = data.inputs;
    const std::size_t in = data.input_size();
    for (std::size_t i = 0; i < data.size(); ++i) scaler.transform_input({x.data() + i * in, in});
    const auto z = model.forward_batch(x, data.size());
    const std::size_t no = model.spec().outputs();
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = scaler.inverse_target(z[i * no]);
    return out;
}

TrainResult train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config) {
    if (config.batch == 0) throw ValidationError("batch", "must be >= 1");
    if (data.stations != spec.stations || data.lag != spec.lag || data.outputs != spec.outputs()) {
        throw ShapeError("train: dataset extents do not match the model input/output");
    }
    const Split split = chronological_split(data.size(), config.split);
    if (split.train_end == 0) throw DataError("train: empty training partition");
    if (split.val_end == split.train_end) throw DataError("train: empty validation partition");

    TrainResult result{TrainedModel{Model(spec), Scaler::fit(data, 0, split.train_end), {}}, {}, {}, 0, split};
    auto& model = result.trained.model;
    const auto& scaler = result.trained.scaler;
    model.init_glorot(derive_seed(config.seed, "init"));

    const std::size_t in = data.input_size(), no = data.outputs;
    std::vector<double> xs = data.inputs;
    std::vector<double> ys = data.targets;
    for (std::size_t i = 0; i < data.size(); ++i) {
        scaler.transform_input({xs.data() + i * in, in});
        for (std::size_t o = 0; o < no; ++o) ys[i * no + o] = scaler.transform_target(ys[i * no + o], o);
    }
    auto part = [&](const std::vector<double>& v, std::size_t width, std::size_t b, std::size_t e) {
        return std::span<const double>(v.data() + b * width, (e - b) * width);
    };
    const auto x_train = part(xs, in, 0, split.train_end), y_train = part(ys, no, 0, split.train_end);
    const auto x_val = part(xs, in, split.train_end, split.val_end);
    const auto y_val = part(ys, no, split.train_end, split.val_end);
    const std::size_t n_train = split.train_end, n_val = split.val_end - split.train_end;

    double best = model.loss(x_val, y_val, n_val);
    result.val_loss.push_back(best);
    result.train_loss.push_back(model.loss(x_train, y_train, n_train));
    std::vector<double> best_params(model.params().begin(), model.params().end());

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));
    AdadeltaState state(model.param_count());
    std::vector<double> grad(model.param_count());
    std::vector<double> bx(config.batch * in), by(config.batch * no);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n_train; start += config.batch) {
            const std::size_t m = std::min(config.batch, n_train - start);
            for (std::size_t j = 0; j < m; ++j) {
                const std::size_t idx = order[start + j];
                std::copy_n(x_train.data() + idx * in, in, bx.data() + j * in);
                std::copy_n(y_train.data() + idx * no, no, by.data() + j * no);
            }
            sum += model.loss_and_gradient({bx.data(), m * in}, {by.data(), m * no}, m, grad);
            adadelta_step(model.params(), grad, state, config.optimizer);
            ++batches;
        }
        result.train_loss.push_back(sum / static_cast<double>(batches));
        const double v = model.loss(x_val, y_val, n_val);
        result.val_loss.push_back(v);
        if (v < best) {
            best = v;
            result.best_epoch = epoch;
            std::copy(model.params().begin(), model.params().end(), best_params.begin());
        }
    }
    std::copy(best_params.begin(), best_params.end(), model.params().begin());
    return result;
}

GradCheckReport grad_check_indices(const Model& model, std::span<const double> inputs,
                                   std::span<const double> targets, std::size_t count,
                                   std::span<const std::size_t> indices, double h) {
    std::vector<double> analytic(model.param_count());
    model.loss_and_gradient(inputs, targets, count, analytic);
    Model probe = model;
    GradCheckReport rep;
    for (std::size_t idx : indices) {
        const double saved = probe.params()[idx];
        probe.params()[idx] = saved + h;
        const double up = probe.loss(inputs, targets, count);
        probe.params()[idx] = saved - h;
        const double down = probe.loss(inputs, targets, count);
        probe.params()[idx] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[idx];
        const double rel = std::abs(a - numeric) / (std::max(std::abs(a), std::abs(numeric)) + 1e-12);
        if (rep.checked == 0 || rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_index = idx;
            rep.worst_analytic = a;
            rep.worst_numeric = numeric;
        }
        ++rep.checked;
    }
    return rep;
}

GradCheckReport grad_check(const Model& model, std::span<const double> inputs, std::span<const double> targets,
                           std::size_t count, double h, std::size_t max_params, std::uint64_t seed) {
    std::vector<std::size_t> idx(model.param_count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > max_params) {
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(max_params);
        std::sort(idx.begin(), idx.end());
    }
    return grad_check_indices(model, inputs, targets, count, idx, h);
}

} // namespace physflow::nn

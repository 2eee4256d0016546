#include "physflow/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace physflow::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t pad_before(std::size_t kernel, Padding p) { return p == Padding::Same ? (kernel - 1) / 2 : 0; }

// Pre-activation and ReLU output of the convolution, layout [s][t][f].
void conv_kernel(const double* in, std::size_t S, std::size_t T, const double* w, const double* b,
                 const ConvSpec& spec, std::size_t So, std::size_t To, double* z, double* a) {
    const std::size_t F = spec.filters, ks = spec.kernel_stations, kt = spec.kernel_time;
    const auto ps = static_cast<long>(pad_before(ks, spec.padding));
    const auto pt = static_cast<long>(pad_before(kt, spec.padding));
    for (std::size_t s = 0; s < So; ++s) {
        for (std::size_t t = 0; t < To; ++t) {
            double* zz = z + (s * To + t) * F;
            for (std::size_t f = 0; f < F; ++f) zz[f] = b[f];
            for (std::size_t da = 0; da < ks; ++da) {
                const long si = static_cast<long>(s + da) - ps;
                if (si < 0 || si >= static_cast<long>(S)) continue;
                for (std::size_t dc = 0; dc < kt; ++dc) {
                    const long ti = static_cast<long>(t + dc) - pt;
                    if (ti < 0 || ti >= static_cast<long>(T)) continue;
                    const double x = in[static_cast<std::size_t>(si) * T + static_cast<std::size_t>(ti)];
                    const std::size_t widx = da * kt + dc;
                    for (std::size_t f = 0; f < F; ++f) zz[f] += w[f * ks * kt + widx] * x;
                }
            }
            double* aa = a + (s * To + t) * F;
            for (std::size_t f = 0; f < F; ++f) aa[f] = zz[f] > 0.0 ? zz[f] : 0.0;
        }
    }
}

// One LSTM step. gates holds post-activation i, f, g, o (4H).
void lstm_step(const double* x, std::size_t I, const double* h_prev, const double* c_prev, std::size_t H,
               const double* W, const double* U, const double* b, double* gates, double* c, double* tc,
               double* h) {
    for (std::size_t r = 0; r < 4 * H; ++r) {
        double z = b[r];
        const double* wr = W + r * I;
        for (std::size_t i = 0; i < I; ++i) z += wr[i] * x[i];
        const double* ur = U + r * H;
        for (std::size_t j = 0; j < H; ++j) z += ur[j] * h_prev[j];
        gates[r] = (r >= 2 * H && r < 3 * H) ? std::tanh(z) : sigmoid(z);
    }
    for (std::size_t j = 0; j < H; ++j) {
        const double ig = gates[j], fg = gates[H + j], gg = gates[2 * H + j], og = gates[3 * H + j];
        c[j] = fg * c_prev[j] + ig * gg;
        tc[j] = std::tanh(c[j]);
        h[j] = og * tc[j];
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Spec
// ---------------------------------------------------------------------------

std::size_t ModelSpec::conv_out_stations() const {
    return conv.padding == Padding::Same ? stations : stations + 1 - conv.kernel_stations;
}

std::size_t ModelSpec::conv_out_time() const {
    return conv.padding == Padding::Same ? lag : lag + 1 - conv.kernel_time;
}

void ModelSpec::validate() const {
    if (stations == 0 || lag == 0) throw ShapeError("input: stations and lag must be >= 1");
    if (conv.filters == 0) throw ShapeError("conv: filters must be >= 1");
    if (conv.kernel_stations == 0 || conv.kernel_time == 0) throw ShapeError("conv: kernel extents must be >= 1");
    if (conv.padding == Padding::Valid && (conv.kernel_stations > stations || conv.kernel_time > lag)) {
        throw ShapeError("conv: kernel " + std::to_string(conv.kernel_stations) + "x" +
                         std::to_string(conv.kernel_time) + " larger than input " + std::to_string(stations) +
                         "x" + std::to_string(lag));
    }
    if (lstm_units.empty()) throw ShapeError("lstm: at least one recurrent layer required");
    for (std::size_t l = 0; l < lstm_units.size(); ++l) {
        if (lstm_units[l] == 0) throw ShapeError("lstm" + std::to_string(l + 1) + ": units must be >= 1");
    }
    if (dense.empty()) throw ShapeError("dense: at least the output layer is required");
    for (std::size_t l = 0; l < dense.size(); ++l) {
        if (dense[l].units == 0) throw ShapeError("dense" + std::to_string(l + 1) + ": units must be >= 1");
    }
}

ModelSpec dataset1_spec(std::size_t stations, std::size_t lag) {
    ModelSpec s;
    s.stations = stations;
    s.lag = lag;
    s.conv = {12, 3, 2, Padding::Same};
    s.lstm_units = {10, 6};
    s.dense = {{1, Activation::Linear}};
    return s;
}

ModelSpec dataset2_spec(std::size_t stations, std::size_t lag) {
    ModelSpec s;
    s.stations = stations;
    s.lag = lag;
    s.conv = {16, 3, 2, Padding::Same};
    s.lstm_units = {10, 6};
    s.dense = {{6, Activation::ReLU}, {1, Activation::Linear}};
    return s;
}

// ---------------------------------------------------------------------------
// Standalone ops
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, std::span<const double> weights, std::span<const double> bias,
                      const ConvSpec& spec) {
    if (input.rank() != 2) throw ShapeError("conv: input must be [stations x lag]");
    ModelSpec probe;
    probe.stations = input.shape[0];
    probe.lag = input.shape[1];
    probe.conv = spec;
    probe.validate();
    if (weights.size() != spec.filters * spec.kernel_stations * spec.kernel_time || bias.size() != spec.filters) {
        throw ShapeError("conv: parameter extents do not match ModelSpec");
    }
    const std::size_t So = probe.conv_out_stations(), To = probe.conv_out_time();
    Tensor out({So, To, spec.filters});
    std::vector<double> z(out.size());
    conv_kernel(input.values.data(), probe.stations, probe.lag, weights.data(), bias.data(), spec, So, To,
                z.data(), out.values.data());
    return out;
}

std::vector<std::vector<double>> reshape_for_recurrence(const Tensor& conv_out) {
    if (conv_out.rank() != 3) throw ShapeError("reshape: expected [stations x time x filters]");
    const std::size_t S = conv_out.shape[0], T = conv_out.shape[1], F = conv_out.shape[2];
    std::vector<std::vector<double>> seq(T, std::vector<double>(S * F));
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < F; ++f) seq[t][s * F + f] = conv_out(s, t, f);
    return seq;
}

std::vector<std::vector<double>> lstm_forward(const std::vector<std::vector<double>>& seq,
                                              std::span<const double> W, std::span<const double> U,
                                              std::span<const double> b, std::size_t units) {
    if (seq.empty()) throw ShapeError("lstm: empty sequence");
    const std::size_t I = seq.front().size(), H = units;
    if (W.size() != 4 * H * I || U.size() != 4 * H * H || b.size() != 4 * H) {
        throw ShapeError("lstm: parameter extents do not match input " + std::to_string(I) + " / units " +
                         std::to_string(H));
    }
    std::vector<double> h(H, 0.0), c(H, 0.0), gates(4 * H), tc(H);
    std::vector<std::vector<double>> out;
    out.reserve(seq.size());
    for (const auto& x : seq) {
        if (x.size() != I) throw ShapeError("lstm: ragged input sequence");
        std::vector<double> c_next(H), h_next(H);
        lstm_step(x.data(), I, h.data(), c.data(), H, W.data(), U.data(), b.data(), gates.data(), c_next.data(),
                  tc.data(), h_next.data());
        c = std::move(c_next);
        h = std::move(h_next);
        out.push_back(h);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Model::Workspace {
    std::vector<double> conv_z, conv_a, seq;
    std::vector<std::vector<double>> gates, c, tc, h; // per LSTM layer, [T x ...]
    std::vector<std::vector<double>> dense_z, dense_a;
    // backward
    std::vector<double> d_conv;
    std::vector<std::vector<double>> d_h; // per LSTM layer, [T x H]
    std::vector<double> d_x, dz, dc, dh_next, d_dense_a, d_dense_in;

    explicit Workspace(const Model& m) {
        const auto& sp = m.spec_;
        const std::size_t So = sp.conv_out_stations(), To = sp.conv_out_time(), F = sp.conv.filters;
        conv_z.resize(So * To * F);
        conv_a.resize(So * To * F);
        seq.resize(To * So * F);
        d_conv.resize(So * To * F);
        std::size_t widest = So * F;
        for (const auto& l : m.lstm_) {
            gates.emplace_back(To * 4 * l.units);
            c.emplace_back(To * l.units);
            tc.emplace_back(To * l.units);
            h.emplace_back(To * l.units);
            d_h.emplace_back(To * l.units);
            widest = std::max(widest, 4 * l.units);
        }
        for (const auto& d : m.dense_) {
            dense_z.emplace_back(d.units);
            dense_a.emplace_back(d.units);
            widest = std::max({widest, d.units, d.input});
        }
        d_x.resize(To * So * F);
        dz.resize(widest);
        dc.resize(widest);
        dh_next.resize(widest);
        d_dense_a.resize(widest);
        d_dense_in.resize(widest);
    }
};

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t off = 0;
    const std::size_t F = spec_.conv.filters;
    conv_.weights = off;
    off += F * spec_.conv.kernel_stations * spec_.conv.kernel_time;
    conv_.bias = off;
    off += F;
    std::size_t in = spec_.conv_out_stations() * F;
    for (std::size_t units : spec_.lstm_units) {
        LstmLayout l;
        l.input = in;
        l.units = units;
        l.W = off;
        off += 4 * units * in;
        l.U = off;
        off += 4 * units * units;
        l.b = off;
        off += 4 * units;
        lstm_.push_back(l);
        in = units;
    }
    for (const auto& d : spec_.dense) {
        DenseLayout l;
        l.input = in;
        l.units = d.units;
        l.activation = d.activation;
        l.W = off;
        off += d.units * in;
        l.b = off;
        off += d.units;
        dense_.push_back(l);
        in = d.units;
    }
    params_.assign(off, 0.0);
}

std::string Model::param_name(std::size_t index) const {
    if (index < conv_.bias) return "conv.W";
    if (index < lstm_.front().W) return "conv.b";
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        const auto& L = lstm_[l];
        const std::string name = "lstm" + std::to_string(l + 1);
        if (index >= L.W && index < L.U) return name + ".W";
        if (index >= L.U && index < L.b) return name + ".U";
        if (index >= L.b && index < L.b + 4 * L.units) return name + ".b";
    }
    for (std::size_t l = 0; l < dense_.size(); ++l) {
        const auto& D = dense_[l];
        const std::string name = "dense" + std::to_string(l + 1);
        if (index >= D.W && index < D.b) return name + ".W";
        if (index >= D.b && index < D.b + D.units) return name + ".b";
    }
    return "?";
}

void Model::init_glorot(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t off, std::size_t n, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (std::size_t i = 0; i < n; ++i) params_[off + i] = u(rng);
    };
    std::fill(params_.begin(), params_.end(), 0.0);
    const auto& cv = spec_.conv;
    const double receptive = static_cast<double>(cv.kernel_stations * cv.kernel_time);
    fill(conv_.weights, cv.filters * cv.kernel_stations * cv.kernel_time, receptive,
         receptive * static_cast<double>(cv.filters));
    for (const auto& l : lstm_) {
        fill(l.W, 4 * l.units * l.input, static_cast<double>(l.input), static_cast<double>(4 * l.units));
        fill(l.U, 4 * l.units * l.units, static_cast<double>(l.units), static_cast<double>(4 * l.units));
        for (std::size_t j = 0; j < l.units; ++j) params_[l.b + l.units + j] = 1.0;
    }
    for (const auto& d : dense_) {
        fill(d.W, d.units * d.input, static_cast<double>(d.input), static_cast<double>(d.units));
    }
}

void Model::run_forward(const double* input, Workspace& ws) const {
    const std::size_t S = spec_.stations, T = spec_.lag;
    const std::size_t So = spec_.conv_out_stations(), To = spec_.conv_out_time(), F = spec_.conv.filters;
    const double* p = params_.data();
    conv_kernel(input, S, T, p + conv_.weights, p + conv_.bias, spec_.conv, So, To, ws.conv_z.data(),
                ws.conv_a.data());
    for (std::size_t s = 0; s < So; ++s)
        for (std::size_t t = 0; t < To; ++t)
            for (std::size_t f = 0; f < F; ++f) ws.seq[t * So * F + s * F + f] = ws.conv_a[(s * To + t) * F + f];

    const double* layer_in = ws.seq.data();
    std::vector<double> zeros;
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        const auto& L = lstm_[l];
        const std::size_t H = L.units;
        if (zeros.size() < H) zeros.assign(H, 0.0);
        for (std::size_t t = 0; t < To; ++t) {
            const double* hp = t == 0 ? zeros.data() : ws.h[l].data() + (t - 1) * H;
            const double* cp = t == 0 ? zeros.data() : ws.c[l].data() + (t - 1) * H;
            lstm_step(layer_in + t * L.input, L.input, hp, cp, H, p + L.W, p + L.U, p + L.b,
                      ws.gates[l].data() + t * 4 * H, ws.c[l].data() + t * H, ws.tc[l].data() + t * H,
                      ws.h[l].data() + t * H);
        }
        layer_in = ws.h[l].data();
    }

    const double* x = ws.h.back().data() + (To - 1) * lstm_.back().units;
    for (std::size_t l = 0; l < dense_.size(); ++l) {
        const auto& D = dense_[l];
        for (std::size_t o = 0; o < D.units; ++o) {
            double z = p[D.b + o];
            const double* wr = p + D.W + o * D.input;
            for (std::size_t i = 0; i < D.input; ++i) z += wr[i] * x[i];
            ws.dense_z[l][o] = z;
            ws.dense_a[l][o] = (D.activation == Activation::ReLU && z < 0.0) ? 0.0 : z;
        }
        x = ws.dense_a[l].data();
    }
}

void Model::run_backward(const double* input, const double* dout, Workspace& ws, double* grad) const {
    const std::size_t S = spec_.stations, T = spec_.lag;
    const std::size_t So = spec_.conv_out_stations(), To = spec_.conv_out_time(), F = spec_.conv.filters;
    const double* p = params_.data();

    // Dense chain, last to first. d_dense_a holds dL/d(activation) of the current layer.
    std::copy(dout, dout + dense_.back().units, ws.d_dense_a.begin());
    for (std::size_t l = dense_.size(); l-- > 0;) {
        const auto& D = dense_[l];
        const double* x = l == 0 ? ws.h.back().data() + (To - 1) * lstm_.back().units : ws.dense_a[l - 1].data();
        std::fill(ws.d_dense_in.begin(), ws.d_dense_in.begin() + D.input, 0.0);
        for (std::size_t o = 0; o < D.units; ++o) {
            double dz = ws.d_dense_a[o];
            if (D.activation == Activation::ReLU && ws.dense_z[l][o] <= 0.0) dz = 0.0;
            if (dz == 0.0) continue;
            grad[D.b + o] += dz;
            double* gw = grad + D.W + o * D.input;
            const double* wr = p + D.W + o * D.input;
            for (std::size_t i = 0; i < D.input; ++i) {
                gw[i] += dz * x[i];
                ws.d_dense_in[i] += dz * wr[i];
            }
        }
        std::copy(ws.d_dense_in.begin(), ws.d_dense_in.begin() + D.input, ws.d_dense_a.begin());
    }

    // Top LSTM receives gradient only at its final step.
    {
        auto& dh = ws.d_h.back();
        std::fill(dh.begin(), dh.end(), 0.0);
        const std::size_t H = lstm_.back().units;
        std::copy(ws.d_dense_a.begin(), ws.d_dense_a.begin() + H, dh.begin() + (To - 1) * H);
    }

    for (std::size_t l = lstm_.size(); l-- > 0;) {
        const auto& L = lstm_[l];
        const std::size_t H = L.units, I = L.input;
        const double* layer_in = l == 0 ? ws.seq.data() : ws.h[l - 1].data();
        double* d_in = l == 0 ? ws.d_x.data() : ws.d_h[l - 1].data();
        std::fill(d_in, d_in + To * I, 0.0);
        std::fill(ws.dc.begin(), ws.dc.begin() + H, 0.0);
        std::fill(ws.dh_next.begin(), ws.dh_next.begin() + H, 0.0);

        for (std::size_t t = To; t-- > 0;) {
            const double* g = ws.gates[l].data() + t * 4 * H;
            const double* tc = ws.tc[l].data() + t * H;
            const double* c_prev = t == 0 ? nullptr : ws.c[l].data() + (t - 1) * H;
            const double* h_prev = t == 0 ? nullptr : ws.h[l].data() + (t - 1) * H;
            const double* dh_out = ws.d_h[l].data() + t * H;
            for (std::size_t j = 0; j < H; ++j) {
                const double ig = g[j], fg = g[H + j], gg = g[2 * H + j], og = g[3 * H + j];
                const double dh = dh_out[j] + ws.dh_next[j];
                const double dc = ws.dc[j] + dh * og * (1.0 - tc[j] * tc[j]);
                ws.dz[j] = dc * gg * ig * (1.0 - ig);
                ws.dz[H + j] = c_prev ? dc * c_prev[j] * fg * (1.0 - fg) : 0.0;
                ws.dz[2 * H + j] = dc * ig * (1.0 - gg * gg);
                ws.dz[3 * H + j] = dh * tc[j] * og * (1.0 - og);
                ws.dc[j] = dc * fg;
            }
            std::fill(ws.dh_next.begin(), ws.dh_next.begin() + H, 0.0);
            const double* x = layer_in + t * I;
            double* dx = d_in + t * I;
            for (std::size_t r = 0; r < 4 * H; ++r) {
                const double dz = ws.dz[r];
                if (dz == 0.0) continue;
                grad[L.b + r] += dz;
                double* gw = grad + L.W + r * I;
                const double* wr = p + L.W + r * I;
                for (std::size_t i = 0; i < I; ++i) {
                    gw[i] += dz * x[i];
                    dx[i] += dz * wr[i];
                }
                const double* ur = p + L.U + r * H;
                if (h_prev) {
                    double* gu = grad + L.U + r * H;
                    for (std::size_t j = 0; j < H; ++j) gu[j] += dz * h_prev[j];
                }
                for (std::size_t j = 0; j < H; ++j) ws.dh_next[j] += dz * ur[j];
            }
        }
    }

    // Convolution: d_x is laid out [t][s*F + f].
    const auto& cv = spec_.conv;
    const std::size_t ks = cv.kernel_stations, kt = cv.kernel_time;
    const auto ps = static_cast<long>(pad_before(ks, cv.padding));
    const auto pt = static_cast<long>(pad_before(kt, cv.padding));
    double* gw = grad + conv_.weights;
    double* gb = grad + conv_.bias;
    for (std::size_t s = 0; s < So; ++s) {
        for (std::size_t t = 0; t < To; ++t) {
            const double* dxa = ws.d_x.data() + t * So * F + s * F;
            const double* z = ws.conv_z.data() + (s * To + t) * F;
            for (std::size_t f = 0; f < F; ++f) {
                if (z[f] <= 0.0 || dxa[f] == 0.0) continue;
                const double dz = dxa[f];
                gb[f] += dz;
                for (std::size_t da = 0; da < ks; ++da) {
                    const long si = static_cast<long>(s + da) - ps;
                    if (si < 0 || si >= static_cast<long>(S)) continue;
                    for (std::size_t dc = 0; dc < kt; ++dc) {
                        const long ti = static_cast<long>(t + dc) - pt;
                        if (ti < 0 || ti >= static_cast<long>(T)) continue;
                        gw[f * ks * kt + da * kt + dc] +=
                            dz * input[static_cast<std::size_t>(si) * T + static_cast<std::size_t>(ti)];
                    }
                }
            }
        }
    }
}

void Model::forward(std::span<const double> input, std::span<double> output) const {
    if (input.size() != spec_.input_size()) {
        throw ShapeError("input: expected " + std::to_string(spec_.stations) + "x" + std::to_string(spec_.lag) +
                         " = " + std::to_string(spec_.input_size()) + " values, got " +
                         std::to_string(input.size()));
    }
    if (output.size() != spec_.outputs()) {
        throw ShapeError("dense" + std::to_string(dense_.size()) + ": output buffer has " +
                         std::to_string(output.size()) + " slots for " + std::to_string(spec_.outputs()) +
                         " units");
    }
    Workspace ws(*this);
    run_forward(input.data(), ws);
    std::copy(ws.dense_a.back().begin(), ws.dense_a.back().end(), output.begin());
}

double Model::forward(std::span<const double> input) const {
    std::vector<double> out(spec_.outputs());
    forward(input, out);
    return out.front();
}

Tensor Model::forward(const Tensor& input) const {
    if (input.rank() != 2 || input.shape[0] != spec_.stations || input.shape[1] != spec_.lag) {
        throw ShapeError("input: tensor shape does not match stations x lag = " + std::to_string(spec_.stations) +
                         "x" + std::to_string(spec_.lag));
    }
    Tensor out({spec_.outputs()});
    forward(input.values, out.values);
    return out;
}

std::vector<double> Model::forward_batch(std::span<const double> inputs, std::size_t count) const {
    const std::size_t in = spec_.input_size(), no = spec_.outputs();
    if (inputs.size() != count * in) throw ShapeError("input: batch size does not match sample extents");
    Workspace ws(*this);
    std::vector<double> out(count * no);
    for (std::size_t n = 0; n < count; ++n) {
        run_forward(inputs.data() + n * in, ws);
        std::copy(ws.dense_a.back().begin(), ws.dense_a.back().end(), out.begin() + static_cast<long>(n * no));
    }
    return out;
}

double Model::loss(std::span<const double> inputs, std::span<const double> targets, std::size_t count) const {
    const std::size_t no = spec_.outputs();
    if (targets.size() != count * no) throw ShapeError("loss: target count does not match batch");
    const auto pred = forward_batch(inputs, count);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - targets[i];
        sum += r * r;
    }
    return sum / static_cast<double>(count * no);
}

double Model::loss_and_gradient(std::span<const double> inputs, std::span<const double> targets,
                                std::size_t count, std::span<double> grad) const {
    const std::size_t in = spec_.input_size(), no = spec_.outputs();
    if (inputs.size() != count * in) throw ShapeError("input: batch size does not match sample extents");
    if (targets.size() != count * no) throw ShapeError("loss: target count does not match batch");
    if (grad.size() != params_.size()) throw ShapeError("gradient buffer does not match parameter count");
    if (count == 0) throw ShapeError("loss: empty batch");
    std::fill(grad.begin(), grad.end(), 0.0);
    Workspace ws(*this);
    std::vector<double> dout(no);
    const double scale = 1.0 / static_cast<double>(count * no);
    double sum = 0.0;
    for (std::size_t n = 0; n < count; ++n) {
        const double* x = inputs.data() + n * in;
        run_forward(x, ws);
        for (std::size_t o = 0; o < no; ++o) {
            const double r = ws.dense_a.back()[o] - targets[n * no + o];
            sum += r * r;
            dout[o] = 2.0 * r * scale;
        }
        run_backward(x, dout.data(), ws, grad.data());
    }
    return sum * scale;
}

} // namespace physflow::nn

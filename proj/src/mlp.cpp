#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fifuse/models.hpp"
#include "fifuse/random.hpp"

namespace fifuse {

namespace {

using Layer = Mlp::Layer;

Layer make_layer(std::size_t in, std::size_t out, Rng& rng) {
    Layer l;
    l.in = in;
    l.out = out;
    l.weights.resize(in * out);
    l.bias.assign(out, out > 1 ? 0.1 : 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : l.weights) w = dist(rng);
    return l;
}

void affine(const Layer& l, std::span<const double> in, std::span<double> out) {
    for (std::size_t o = 0; o < l.out; ++o) {
        const double* w = l.weights.data() + o * l.in;
        double acc = l.bias[o];
        for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
}

struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-7;

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& s, double lr,
               double bias1, double bias2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * grad[i];
        s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        const double mhat = s.m[i] / bias1;
        const double vhat = s.v[i] / bias2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

}  // namespace

Mlp::Mlp(std::vector<Layer> layers, double offset, double scale)
    : layers_(std::move(layers)), offset_(offset), scale_(scale) {
    if (layers_.empty()) throw std::invalid_argument("Mlp: needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.in == 0 || l.out == 0 || l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
            throw std::invalid_argument("Mlp: malformed layer " + std::to_string(i));
        }
        if (i > 0 && layers_[i - 1].out != l.in) throw std::invalid_argument("Mlp: layer widths do not chain");
    }
    if (layers_.back().out != 1) throw std::invalid_argument("Mlp: output layer must have width 1");
}

Mlp Mlp::random(std::size_t n_inputs, const std::vector<std::size_t>& widths, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Layer> layers;
    std::size_t in = n_inputs;
    for (auto w : widths) {
        layers.push_back(make_layer(in, w, rng));
        in = w;
    }
    return Mlp(std::move(layers));
}

Mlp Mlp::train(const Matrix& X, std::span<const double> y, const MlpParams& params, std::uint64_t seed) {
    const std::size_t n = X.rows();
    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - y_mean) * (v - y_mean);
    const double y_scale = std::sqrt(var / static_cast<double>(n));
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = (y[i] - y_mean) / y_scale;

    Mlp net = random(X.cols(), params.widths, seed);
    net.offset_ = y_mean;
    net.scale_ = y_scale;
    auto& layers = net.layers_;
    const std::size_t n_layers = layers.size();

    Rng rng(derive_seed(seed, 0x7261696eULL));
    std::bernoulli_distribution keep(1.0 - params.dropout);
    const double keep_scale = params.dropout > 0.0 ? 1.0 / (1.0 - params.dropout) : 1.0;

    std::vector<bool> drop(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        drop[l] = params.dropout > 0.0 && layers[l].out >= params.dropout_min_width;
    }

    // per-layer scratch: pre-activations, post-activations (with dropout), deltas
    std::vector<std::vector<double>> pre(n_layers), post(n_layers), delta(n_layers), mask(n_layers);
    std::vector<std::vector<double>> grad_w(n_layers), grad_b(n_layers);
    std::vector<AdamState> adam_w, adam_b;
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l].resize(layers[l].out);
        post[l].resize(layers[l].out);
        delta[l].resize(layers[l].out);
        mask[l].assign(layers[l].out, 1.0);
        grad_w[l].resize(layers[l].weights.size());
        grad_b[l].resize(layers[l].out);
        adam_w.emplace_back(layers[l].weights.size());
        adam_b.emplace_back(layers[l].out);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::max<std::size_t>(1, params.batch_size);
    double bias1 = 1.0, bias2 = 1.0;

    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (std::size_t l = 0; l < n_layers; ++l) {
                std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
                std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
            }
            for (std::size_t s = start; s < end; ++s) {
                const std::size_t row = order[s];
                std::span<const double> input = X.row(row);
                for (std::size_t l = 0; l < n_layers; ++l) {
                    affine(layers[l], input, pre[l]);
                    if (l + 1 < n_layers) {
                        for (std::size_t o = 0; o < layers[l].out; ++o) {
                            mask[l][o] = drop[l] ? (keep(rng) ? keep_scale : 0.0) : 1.0;
                            post[l][o] = std::max(0.0, pre[l][o]) * mask[l][o];
                        }
                    } else {
                        post[l] = pre[l];
                    }
                    input = post[l];
                }
                delta[n_layers - 1][0] = 2.0 * (post[n_layers - 1][0] - target[row]) * inv_batch;
                for (std::size_t l = n_layers; l-- > 0;) {
                    std::span<const double> below = l == 0 ? X.row(row) : std::span<const double>(post[l - 1]);
                    const auto& L = layers[l];
                    for (std::size_t o = 0; o < L.out; ++o) {
                        const double d = delta[l][o];
                        if (d == 0.0) continue;
                        double* gw = grad_w[l].data() + o * L.in;
                        for (std::size_t i = 0; i < L.in; ++i) gw[i] += d * below[i];
                        grad_b[l][o] += d;
                    }
                    if (l == 0) break;
                    auto& prev = delta[l - 1];
                    std::fill(prev.begin(), prev.end(), 0.0);
                    for (std::size_t o = 0; o < L.out; ++o) {
                        const double d = delta[l][o];
                        if (d == 0.0) continue;
                        const double* w = L.weights.data() + o * L.in;
                        for (std::size_t i = 0; i < L.in; ++i) prev[i] += w[i] * d;
                    }
                    for (std::size_t i = 0; i < prev.size(); ++i) {
                        prev[i] *= pre[l - 1][i] > 0.0 ? mask[l - 1][i] : 0.0;
                    }
                }
            }
            bias1 *= kBeta1;
            bias2 *= kBeta2;
            for (std::size_t l = 0; l < n_layers; ++l) {
                for (std::size_t i = 0; i < grad_w[l].size(); ++i) {
                    grad_w[l][i] += 2.0 * params.l2 * layers[l].weights[i];
                }
                adam_step(layers[l].weights, grad_w[l], adam_w[l], params.learning_rate, 1.0 - bias1, 1.0 - bias2);
                adam_step(layers[l].bias, grad_b[l], adam_b[l], params.learning_rate, 1.0 - bias1, 1.0 - bias2);
            }
        }
    }
    return net;
}

double Mlp::predict_row(std::span<const double> x) const {
    check_width(x.size());
    std::vector<double> a(x.begin(), x.end()), b;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        b.resize(layers_[l].out);
        affine(layers_[l], a, b);
        if (l + 1 < layers_.size()) {
            for (auto& v : b) v = std::max(0.0, v);
        }
        std::swap(a, b);
    }
    return offset_ + scale_ * a[0];
}

std::vector<double> Mlp::input_gradient(std::span<const double> x) const {
    check_width(x.size());
    const std::size_t n_layers = layers_.size();
    std::vector<std::vector<double>> pre(n_layers);
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l].resize(layers_[l].out);
        affine(layers_[l], a, pre[l]);
        a = pre[l];
        if (l + 1 < n_layers) {
            for (auto& v : a) v = std::max(0.0, v);
        }
    }
    std::vector<double> delta{scale_};
    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& L = layers_[l];
        std::vector<double> below(L.in, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* w = L.weights.data() + o * L.in;
            for (std::size_t i = 0; i < L.in; ++i) below[i] += w[i] * d;
        }
        if (l > 0) {
            for (std::size_t i = 0; i < below.size(); ++i) {
                if (!(pre[l - 1][i] > 0.0)) below[i] = 0.0;
            }
        }
        delta = std::move(below);
    }
    return delta;
}

nlohmann::json Mlp::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) {
        layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
    }
    return {{"offset", offset_}, {"scale", scale_}, {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    std::vector<Layer> layers;
    for (const auto& lj : j.at("layers")) {
        Layer l;
        l.in = lj.at("in").get<std::size_t>();
        l.out = lj.at("out").get<std::size_t>();
        l.weights = lj.at("weights").get<std::vector<double>>();
        l.bias = lj.at("bias").get<std::vector<double>>();
        layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers), j.at("offset").get<double>(), j.at("scale").get<double>());
}

}  // namespace fifuse

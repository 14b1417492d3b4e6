#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dyad/common.hpp"
#include "dyad/ingest.hpp"

namespace dyad {

// ---------------------------------------------------------------------------
// Three-layer fully connected regressor: two rectified hidden layers and a
// single logistic output, so scores stay inside (0,1). Trained with MSE loss
// and AdaGrad.
// ---------------------------------------------------------------------------

struct MlpRegressor {
    std::vector<std::size_t> layer_sizes;          // [input, h1, h2, 1]
    std::vector<std::vector<double>> weights;      // per layer, row-major out x in
    std::vector<std::vector<double>> biases;       // per layer, length out

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t layer_count() const { return weights.size(); }
};

/// Glorot-uniform initialization from a splitmix stream: weights uniform in
/// +-sqrt(6/(fan_in+fan_out)) in row-major order, biases zero.
inline MlpRegressor make_regressor(std::size_t input_dim, std::size_t hidden1,
                                   std::size_t hidden2, std::uint64_t seed) {
    if (input_dim < 1 || hidden1 < 1 || hidden2 < 1)
        throw std::invalid_argument("make_regressor: layer sizes must be >= 1");
    MlpRegressor model;
    model.layer_sizes = {input_dim, hidden1, hidden2, 1};
    SplitMix64 rng(seed);
    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        std::size_t fan_in = model.layer_sizes[l];
        std::size_t fan_out = model.layer_sizes[l + 1];
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::vector<double> w(fan_in * fan_out);
        for (double& x : w) x = (2.0 * rng.next_double() - 1.0) * limit;
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    return model;
}

namespace detail {

struct MlpActivations {
    std::vector<std::vector<double>> pre;   // z per layer
    std::vector<std::vector<double>> post;  // activation per layer (last is the score)
};

inline MlpActivations mlp_forward_cached(const MlpRegressor& model,
                                         const std::vector<double>& x) {
    MlpActivations act;
    const std::vector<double>* input = &x;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        std::size_t rows = model.layer_sizes[l + 1];
        std::size_t cols = model.layer_sizes[l];
        std::vector<double> z(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = model.biases[l][r];
            const double* wrow = model.weights[l].data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += wrow[c] * (*input)[c];
            z[r] = acc;
        }
        std::vector<double> a(rows);
        if (l + 1 == model.layer_count()) {
            for (std::size_t r = 0; r < rows; ++r) a[r] = 1.0 / (1.0 + std::exp(-z[r]));
        } else {
            for (std::size_t r = 0; r < rows; ++r) a[r] = z[r] > 0.0 ? z[r] : 0.0;
        }
        act.pre.push_back(std::move(z));
        act.post.push_back(std::move(a));
        input = &act.post.back();
    }
    return act;
}

}  // namespace detail

inline double forward(const MlpRegressor& model, const FeatureVector& x) {
    if (x.dim() != model.input_dim()) throw std::invalid_argument("forward: dimension mismatch");
    for (double v : x.values)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    return detail::mlp_forward_cached(model, x.values).post.back().front();
}

inline double mse_loss(const std::vector<double>& predictions,
                       const std::vector<double>& targets) {
    if (predictions.size() != targets.size())
        throw std::invalid_argument("mse_loss: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("mse_loss: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double d = predictions[i] - targets[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predictions.size());
}

struct MlpGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

inline MlpGradients zero_gradients(const MlpRegressor& model) {
    MlpGradients g;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        g.weights.emplace_back(model.weights[l].size(), 0.0);
        g.biases.emplace_back(model.biases[l].size(), 0.0);
    }
    return g;
}

/// Exact gradients of mse_loss(forward(x), t) averaged over the batch.
inline MlpGradients backward(const MlpRegressor& model,
                             const std::vector<const FeatureVector*>& batch,
                             const std::vector<double>& targets) {
    if (batch.size() != targets.size()) throw std::invalid_argument("backward: length mismatch");
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");

    MlpGradients grads = zero_gradients(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::size_t layers = model.layer_count();

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& x = *batch[s];
        if (x.dim() != model.input_dim())
            throw std::invalid_argument("backward: dimension mismatch");
        auto act = detail::mlp_forward_cached(model, x.values);

        double y = act.post.back().front();
        // dL/dz for the logistic output under mean squared error.
        std::vector<double> delta{2.0 * (y - targets[s]) * scale * y * (1.0 - y)};

        for (std::size_t l = layers; l-- > 0;) {
            std::size_t rows = model.layer_sizes[l + 1];
            std::size_t cols = model.layer_sizes[l];
            const std::vector<double>& input = l == 0 ? x.values : act.post[l - 1];
            for (std::size_t r = 0; r < rows; ++r) {
                grads.biases[l][r] += delta[r];
                double* grow = grads.weights[l].data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) grow[c] += delta[r] * input[c];
            }
            if (l == 0) break;
            std::vector<double> prev(cols, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* wrow = model.weights[l].data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) prev[c] += wrow[c] * delta[r];
            }
            for (std::size_t c = 0; c < cols; ++c)
                if (act.pre[l - 1][c] <= 0.0) prev[c] = 0.0;
            delta = std::move(prev);
        }
    }
    return grads;
}

inline MlpGradients backward(const MlpRegressor& model, const std::vector<FeatureVector>& batch,
                             const std::vector<double>& targets) {
    std::vector<const FeatureVector*> ptrs(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
    return backward(model, ptrs, targets);
}

// ---------------------------------------------------------------------------
// AdaGrad: accumulate squared gradients, scale each step by the inverse root.
// ---------------------------------------------------------------------------

struct AdaGradState {
    double learning_rate = 0.005;
    double epsilon = 1e-8;
    std::vector<std::vector<double>> weight_acc;
    std::vector<std::vector<double>> bias_acc;
};

inline AdaGradState make_adagrad(const MlpRegressor& model, double learning_rate = 0.005,
                                 double epsilon = 1e-8) {
    AdaGradState state;
    state.learning_rate = learning_rate;
    state.epsilon = epsilon;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        state.weight_acc.emplace_back(model.weights[l].size(), 0.0);
        state.bias_acc.emplace_back(model.biases[l].size(), 0.0);
    }
    return state;
}

inline void adagrad_step(MlpRegressor& model, AdaGradState& state, const MlpGradients& grads) {
    if (grads.weights.size() != model.layer_count())
        throw std::invalid_argument("adagrad_step: shape mismatch");
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        if (grads.weights[l].size() != model.weights[l].size() ||
            grads.biases[l].size() != model.biases[l].size())
            throw std::invalid_argument("adagrad_step: shape mismatch");
        for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
            double g = grads.weights[l][i];
            state.weight_acc[l][i] += g * g;
            model.weights[l][i] -=
                state.learning_rate * g / (std::sqrt(state.weight_acc[l][i]) + state.epsilon);
        }
        for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
            double g = grads.biases[l][i];
            state.bias_acc[l][i] += g * g;
            model.biases[l][i] -=
                state.learning_rate * g / (std::sqrt(state.bias_acc[l][i]) + state.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Mini-batch training. Samples split into a positive class (target > 0.5) and
// a negative class; each batch draws half from each. A class with fewer than
// half a batch of members is sampled with replacement, a class that is empty
// leaves the whole batch to the other. Per iteration the draw order is:
// positives, then negatives, each via a fresh seeded shuffle (or uniform
// draws when sampling with replacement).
// ---------------------------------------------------------------------------

inline void train_iterations(MlpRegressor& model, AdaGradState& state,
                             const std::vector<FeatureVector>& samples,
                             const std::vector<double>& targets, std::size_t iterations = 30,
                             std::size_t batch_size = 32, std::uint64_t seed = 0) {
    if (samples.empty()) throw std::invalid_argument("train_iterations: empty sample set");
    if (samples.size() != targets.size())
        throw std::invalid_argument("train_iterations: sample/target length mismatch");
    if (batch_size < 1) throw std::invalid_argument("train_iterations: batch_size must be >= 1");

    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (targets[i] > 0.5 ? positives : negatives).push_back(i);

    SplitMix64 rng(seed);
    auto draw = [&rng](const std::vector<std::size_t>& pool, std::size_t n,
                       std::vector<std::size_t>& out) {
        if (pool.size() >= n) {
            std::vector<std::size_t> shuffled = pool;
            rng.shuffle(shuffled);
            out.insert(out.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                out.push_back(pool[rng.next_below(pool.size())]);
        }
    };

    for (std::size_t it = 0; it < iterations; ++it) {
        std::vector<std::size_t> batch_idx;
        batch_idx.reserve(batch_size);
        if (positives.empty()) {
            draw(negatives, batch_size, batch_idx);
        } else if (negatives.empty()) {
            draw(positives, batch_size, batch_idx);
        } else {
            std::size_t half = batch_size / 2;
            draw(positives, half, batch_idx);
            draw(negatives, batch_size - half, batch_idx);
        }

        std::vector<const FeatureVector*> batch(batch_idx.size());
        std::vector<double> batch_targets(batch_idx.size());
        for (std::size_t i = 0; i < batch_idx.size(); ++i) {
            batch[i] = &samples[batch_idx[i]];
            batch_targets[i] = targets[batch_idx[i]];
        }
        adagrad_step(model, state, backward(model, batch, batch_targets));
    }
}

// ---------------------------------------------------------------------------
// MLP1: magic "MLP1", u32 layer count, then per layer u32 rows, u32 cols,
// rows x cols row-major f32 weights and rows f32 biases.
// ---------------------------------------------------------------------------

inline void save_regressor(const std::string& path, const MlpRegressor& model) {
    detail::ByteWriter w(path);
    w.write_magic("MLP1");
    w.write_u32(static_cast<std::uint32_t>(model.layer_count()));
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        auto rows = static_cast<std::uint32_t>(model.layer_sizes[l + 1]);
        auto cols = static_cast<std::uint32_t>(model.layer_sizes[l]);
        w.write_u32(rows);
        w.write_u32(cols);
        for (double x : model.weights[l]) w.write_f32(static_cast<float>(x));
        for (double b : model.biases[l]) w.write_f32(static_cast<float>(b));
    }
    w.close();
}

inline MlpRegressor load_regressor(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("MLP1");
    std::size_t layers = r.read_u32();
    if (layers == 0) throw std::runtime_error(path + ": regressor has no layers");
    MlpRegressor model;
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t rows = r.read_u32();
        std::size_t cols = r.read_u32();
        if (rows == 0 || cols == 0) throw std::runtime_error(path + ": zero-sized layer");
        if (l == 0) model.layer_sizes.push_back(cols);
        if (model.layer_sizes.back() != cols)
            throw std::runtime_error(path + ": layer dimensions do not chain");
        model.layer_sizes.push_back(rows);
        std::vector<double> w(rows * cols);
        for (double& x : w) x = r.read_f32();
        std::vector<double> b(rows);
        for (double& x : b) x = r.read_f32();
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    r.expect_end();
    return model;
}

}  // namespace dyad

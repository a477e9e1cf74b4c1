#include "trailgrade/nn/model.hpp"

#include <cmath>

namespace trailgrade::nn {

namespace {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

std::size_t block_in_channels(const ModelConfig& c, std::size_t block) {
    return block == 0 ? kInputChannels : c.filters[block - 1];
}

}  // namespace

void ModelConfig::validate() const {
    if (window_points == 0 || kernel_len == 0 || dense_units == 0 || classes < 2) {
        throw Error(Errc::InvalidArgument, "model dimensions must be positive (and at least 2 classes)");
    }
    for (auto f : filters) {
        if (f == 0) throw Error(Errc::InvalidArgument, "filter counts must be positive");
    }
    if (kernel_len > window_points) {
        throw Error(Errc::KernelTooLong, "kernel length " + std::to_string(kernel_len) + " exceeds " +
                                             std::to_string(window_points) + " points per sample");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0) || !(l2_coeff >= 0.0) || !(bn_momentum >= 0.0) ||
        !(bn_momentum <= 1.0) || !(bn_epsilon > 0.0)) {
        throw Error(Errc::InvalidArgument, "regularization hyperparameters out of range");
    }
}

std::array<std::size_t, kBlocks + 1> ModelConfig::block_lengths() const {
    std::array<std::size_t, kBlocks + 1> out{};
    out[0] = window_points;
    for (std::size_t b = 0; b < kBlocks; ++b) out[b + 1] = pooled_length(out[b]);
    return out;
}

std::size_t ModelConfig::flatten_size() const {
    return block_lengths()[kBlocks] * kInputRows * filters[kBlocks - 1];
}

std::vector<Tensor*> ModelParams::trainable() {
    std::vector<Tensor*> out;
    for (std::size_t b = 0; b < kBlocks; ++b) {
        out.insert(out.end(), {&conv[b].kernel, &conv[b].bias, &bn[b].gamma, &bn[b].beta});
    }
    out.insert(out.end(), {&hidden.weights, &hidden.bias, &output.weights, &output.bias});
    return out;
}

std::vector<const Tensor*> ModelParams::trainable() const {
    auto mut = const_cast<ModelParams*>(this)->trainable();
    return {mut.begin(), mut.end()};
}

std::vector<Tensor*> ModelParams::stored() {
    auto out = trainable();
    for (std::size_t b = 0; b < kBlocks; ++b) out.insert(out.end(), {&bn[b].running_mean, &bn[b].running_var});
    return out;
}

std::vector<const Tensor*> ModelParams::stored() const {
    auto mut = const_cast<ModelParams*>(this)->stored();
    return {mut.begin(), mut.end()};
}

Gradients zero_gradients(const ModelParams& params) {
    Gradients g;
    for (const auto* t : params.trainable()) g.tensors.emplace_back(t->shape());
    return g;
}

std::size_t stored_value_count(const ModelConfig& c) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < kBlocks; ++b) {
        const auto in = block_in_channels(c, b), out = c.filters[b];
        total += c.kernel_len * kKernelWidth * in * out + out;  // conv
        total += 4 * out;                                         // gamma, beta, running mean/var
    }
    total += c.flatten_size() * c.dense_units + c.dense_units;
    total += c.dense_units * c.classes + c.classes;
    return total;
}

ModelParams build_model(const ModelConfig& config, Rng& rng) {
    config.validate();
    ModelParams p;
    p.config = config;
    for (std::size_t b = 0; b < kBlocks; ++b) {
        const auto in = block_in_channels(config, b), out = config.filters[b];
        const auto area = config.kernel_len * kKernelWidth;
        p.conv[b].kernel = glorot_uniform({config.kernel_len, kKernelWidth, in, out}, area * in, area * out, rng);
        p.conv[b].bias = Tensor({out});
        p.bn[b] = BatchNormParams::identity(out);
    }
    const auto flat = config.flatten_size();
    p.hidden.weights = glorot_uniform({flat, config.dense_units}, flat, config.dense_units, rng);
    p.hidden.bias = Tensor({config.dense_units});
    p.output.weights = glorot_uniform({config.dense_units, config.classes}, config.dense_units, config.classes, rng);
    p.output.bias = Tensor({config.classes});
    return p;
}

Tensor forward(ModelParams& params, const Tensor& batch, Mode mode, Rng& rng, ForwardCache* cache) {
    const auto& cfg = params.config;
    if (batch.rank() != 4 || batch.dim(1) != cfg.window_points || batch.dim(2) != kInputRows ||
        batch.dim(3) != kInputChannels || batch.dim(0) == 0) {
        throw Error(Errc::ShapeMismatch, "model input must be (B, " + std::to_string(cfg.window_points) +
                                             ", 4, 3), got " + shape_string(batch.shape()));
    }
    if (mode == Mode::Infer) cache = nullptr;
    const auto bn_opts = cfg.batchnorm_options();
    const std::size_t batch_size = batch.dim(0);

    Tensor x = batch;
    for (std::size_t b = 0; b < kBlocks; ++b) {
        BlockCache* bc = cache != nullptr ? &cache->blocks[b] : nullptr;
        Tensor conv = conv2d_forward(x, params.conv[b].kernel, params.conv[b].bias, bc ? &bc->conv : nullptr);
        Tensor normed = batchnorm_forward(conv, params.bn[b], mode, bn_opts, bc ? &bc->bn : nullptr);
        auto pooled = maxpool_forward(relu(normed));
        auto dropped = dropout(pooled.output, cfg.dropout_rate, mode, rng);
        x = dropped.output;
        if (bc != nullptr) {
            bc->bn_out = std::move(normed);
            bc->pool = std::move(pooled);
            bc->drop = std::move(dropped);
        }
    }
    Tensor flat = std::move(x).reshaped({batch_size, cfg.flatten_size()});
    Tensor hidden_pre = dense_forward(flat, params.hidden.weights, params.hidden.bias);
    Tensor hidden_act = relu(hidden_pre);
    Tensor probs = softmax(dense_forward(hidden_act, params.output.weights, params.output.bias));
    if (cache != nullptr) {
        cache->flat = std::move(flat);
        cache->hidden_pre = std::move(hidden_pre);
        cache->hidden_act = std::move(hidden_act);
        cache->probabilities = probs;
        cache->generation = params.generation;
        cache->valid = true;
    }
    return probs;
}

Tensor predict(const ModelParams& params, const Tensor& batch) {
    // Infer mode never touches params or rng.
    Rng unused;
    return forward(const_cast<ModelParams&>(params), batch, Mode::Infer, unused);
}

L2Result l2_penalty(const ModelParams& params, double coeff) {
    L2Result r{0.0, zero_gradients(params)};
    for (std::size_t b = 0; b < kBlocks; ++b) {
        const auto& k = params.conv[b].kernel;
        auto& g = r.gradients.tensors[4 * b];
        for (std::size_t i = 0; i < k.size(); ++i) {
            r.penalty += k[i] * k[i];
            g[i] = 2.0 * coeff * k[i];
        }
    }
    r.penalty *= coeff;
    return r;
}

double total_loss(const ModelParams& params, const Tensor& probabilities, std::span<const std::size_t> labels) {
    double l2 = 0.0;
    for (const auto& c : params.conv) {
        for (double w : c.kernel.values()) l2 += w * w;
    }
    return sparse_categorical_crossentropy(probabilities, labels).loss + params.config.l2_coeff * l2;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, std::span<const std::size_t> labels) {
    if (!cache.valid) throw Error(Errc::StaleCache, "no train-mode forward pass cached");
    if (cache.generation != params.generation) {
        throw Error(Errc::StaleCache, "parameters changed since the forward pass");
    }
    const auto& cfg = params.config;
    Gradients grads = zero_gradients(params);
    auto& g = grads.tensors;

    auto ce = sparse_categorical_crossentropy(cache.probabilities, labels);
    auto out_grads = dense_backward(cache.hidden_act, params.output.weights, ce.grad_logits);
    g[4 * kBlocks + 2] = std::move(out_grads.weights);
    g[4 * kBlocks + 3] = std::move(out_grads.bias);
    Tensor grad_hidden = relu_backward(cache.hidden_pre, out_grads.input);
    auto hidden_grads = dense_backward(cache.flat, params.hidden.weights, grad_hidden);
    g[4 * kBlocks + 0] = std::move(hidden_grads.weights);
    g[4 * kBlocks + 1] = std::move(hidden_grads.bias);

    Tensor grad = std::move(hidden_grads.input).reshaped(cache.blocks[kBlocks - 1].drop.output.shape());
    for (std::size_t b = kBlocks; b-- > 0;) {
        const auto& bc = cache.blocks[b];
        grad = dropout_backward(bc.drop, grad);
        grad = maxpool_backward(bc.pool, grad);
        grad = relu_backward(bc.bn_out, grad);
        auto bn_grads = batchnorm_backward(bc.bn, grad);
        g[4 * b + 2] = std::move(bn_grads.gamma);
        g[4 * b + 3] = std::move(bn_grads.beta);
        auto conv_grads = conv2d_backward(bc.conv, bn_grads.input, b > 0);
        g[4 * b + 0] = std::move(conv_grads.kernels);
        g[4 * b + 1] = std::move(conv_grads.bias);
        grad = std::move(conv_grads.input);
    }

    const double two_c = 2.0 * cfg.l2_coeff;
    for (std::size_t b = 0; b < kBlocks; ++b) {
        const auto& k = params.conv[b].kernel;
        auto& gk = g[4 * b];
        for (std::size_t i = 0; i < k.size(); ++i) gk[i] += two_c * k[i];
    }
    return grads;
}

}  // namespace trailgrade::nn

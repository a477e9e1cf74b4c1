#pragma once

// The trail classifier: three blocks of conv(m,2) -> batchnorm -> relu ->
// maxpool(2,1) -> dropout over an (n, 4, 3) input, then dense(128) + relu and
// dense(3) + softmax.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "trailgrade/nn/layers.hpp"
#include "trailgrade/nn/tensor.hpp"

namespace trailgrade::nn {

inline constexpr std::size_t kInputRows = 4;
inline constexpr std::size_t kInputChannels = 3;
inline constexpr std::size_t kKernelWidth = 2;
inline constexpr std::size_t kBlocks = 3;

struct ModelConfig {
    std::size_t window_points = 125;
    std::size_t kernel_len = 20;
    std::array<std::size_t, kBlocks> filters{4, 8, 16};
    std::size_t dense_units = 128;
    std::size_t classes = 3;
    double dropout_rate = 0.3;
    double l2_coeff = 1e-2;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-3;

    // KernelTooLong when kernel_len > window_points; InvalidArgument for other violations.
    void validate() const;

    // Time-axis length entering block i (index 0..2) and after the last pool (index 3).
    std::array<std::size_t, kBlocks + 1> block_lengths() const;
    std::size_t flatten_size() const;
    BatchNormOptions batchnorm_options() const { return {bn_momentum, bn_epsilon}; }

    bool operator==(const ModelConfig&) const = default;
};

struct ConvParams {
    Tensor kernel;  // (m, 2, in, out)
    Tensor bias;    // (out)
};

struct DenseParams {
    Tensor weights;  // (in, out)
    Tensor bias;     // (out)
};

struct ModelParams {
    ModelConfig config;
    std::array<ConvParams, kBlocks> conv;
    std::array<BatchNormParams, kBlocks> bn;
    DenseParams hidden;
    DenseParams output;
    // Bumped by every optimizer step; forward caches remember it.
    std::uint64_t generation = 0;

    // Trainable tensors in a fixed order: per block conv kernel, conv bias,
    // bn gamma, bn beta; then hidden weights, bias, output weights, bias.
    std::vector<Tensor*> trainable();
    std::vector<const Tensor*> trainable() const;
    // Trainable tensors plus batch-norm running statistics, in checkpoint order.
    std::vector<Tensor*> stored();
    std::vector<const Tensor*> stored() const;
};

/// Gradients ordered like ModelParams::trainable().
struct Gradients {
    std::vector<Tensor> tensors;
};

Gradients zero_gradients(const ModelParams& params);

// Number of values held by ModelParams::stored(), from the layer formulas.
std::size_t stored_value_count(const ModelConfig& config);

// Glorot-uniform conv/dense weights, zero biases, gamma 1, beta 0, running (0, 1).
ModelParams build_model(const ModelConfig& config, Rng& rng);

struct BlockCache {
    Conv2dCache conv;
    BatchNormCache bn;
    Tensor bn_out;
    MaxPoolResult pool;
    DropoutResult drop;
};

struct ForwardCache {
    bool valid = false;
    std::uint64_t generation = 0;
    std::array<BlockCache, kBlocks> blocks;
    Tensor flat;
    Tensor hidden_pre;
    Tensor hidden_act;
    Tensor probabilities;
};

// batch (B, n, 4, 3) -> probabilities (B, classes). Train mode updates batch-norm
// running statistics, draws dropout masks from rng and fills `cache` if given.
Tensor forward(ModelParams& params, const Tensor& batch, Mode mode, Rng& rng, ForwardCache* cache = nullptr);

// Infer-mode forward; pure.
Tensor predict(const ModelParams& params, const Tensor& batch);

struct L2Result {
    double penalty = 0.0;
    Gradients gradients;
};

// coeff * sum of squared conv kernel weights; biases, bn and dense are exempt.
L2Result l2_penalty(const ModelParams& params, double coeff);

// Cross-entropy of the cached probabilities plus the L2 penalty.
double total_loss(const ModelParams& params, const Tensor& probabilities, std::span<const std::size_t> labels);

// Gradient of total_loss w.r.t. every trainable tensor. StaleCache if the
// cache is missing or the parameters changed since the forward pass.
Gradients backward(const ModelParams& params, const ForwardCache& cache, std::span<const std::size_t> labels);

}  // namespace trailgrade::nn

#pragma once

// Forward and backward passes of the individual layers. Activations use the
// (batch, height, width, channels) layout; dense layers take (batch, features).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "trailgrade/nn/tensor.hpp"

namespace trailgrade::nn {

enum class Mode { Train, Infer };

using Rng = std::mt19937_64;

// ---- convolution: kernel (m, 2)-style, stride 1, 'same' zero padding ----

struct Conv2dCache {
    Tensor input;
    Tensor kernels;
};

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

// input (B,H,W,Cin), kernels (kh,kw,Cin,Cout), bias (Cout) -> (B,H,W,Cout).
// Padding totals kh-1 rows and kw-1 columns; the odd extra row/column goes
// to the bottom/right.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, Conv2dCache* cache = nullptr);

// With want_input_grad == false the input gradient is left empty.
Conv2dGrads conv2d_backward(const Conv2dCache& cache, const Tensor& grad_out, bool want_input_grad = true);

// ---- batch normalization over (B,H,W) per channel ----

struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;

    static BatchNormParams identity(std::size_t channels);
};

struct BatchNormOptions {
    double momentum = 0.99;
    double epsilon = 1e-3;
};

struct BatchNormCache {
    Tensor normalized;
    std::vector<double> inv_std;
    Tensor gamma;
};

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

// Train mode normalizes with batch statistics (population variance) and
// updates the running statistics; Infer mode reads the running statistics.
Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params, Mode mode, const BatchNormOptions& options,
                         BatchNormCache* cache = nullptr);
Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& params, const BatchNormOptions& options);
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& grad_out);

// ---- elementwise ----

Tensor relu(const Tensor& input);
// Gradient is zero where input <= 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// ---- max pooling, window (2,1), stride (2,1), ceil mode ----

struct MaxPoolResult {
    Tensor output;
    std::vector<std::uint8_t> argmax;  // row offset within each window, per output element
    Shape input_shape;
};

MaxPoolResult maxpool_forward(const Tensor& input);
Tensor maxpool_backward(const MaxPoolResult& pooled, const Tensor& grad_out);

inline std::size_t pooled_length(std::size_t length) noexcept { return (length + 1) / 2; }

// ---- inverted dropout ----

struct DropoutResult {
    Tensor output;
    std::vector<double> scale;  // 0 or 1/(1-rate) per element; empty in Infer mode
};

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng);
Tensor dropout_backward(const DropoutResult& forward, const Tensor& grad_out);

// ---- dense ----

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

// input (B,D), weights (D,U), bias (U) -> (B,U)
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out);

// ---- output ----

Tensor softmax(const Tensor& logits);

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor grad_logits;  // gradient w.r.t. the logits that produced `probabilities`
};

// Mean of -log(max(p[label], 1e-12)); grad_logits = (p - onehot) / B.
CrossEntropyResult sparse_categorical_crossentropy(const Tensor& probabilities, std::span<const std::size_t> labels);

}  // namespace trailgrade::nn

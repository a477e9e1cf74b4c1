#include "trailgrade/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "trailgrade/nn/kernels.hpp"

namespace trailgrade::nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw Error(Errc::ShapeMismatch, std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                                             shape_string(t.shape()));
    }
}

struct ConvGeometry {
    std::size_t batch, height, width, in_ch, out_ch, kh, kw, pad_top, pad_left;

    std::size_t patch() const noexcept { return kh * kw * in_ch; }
    std::size_t positions() const noexcept { return height * width; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernels, 4, "conv2d kernels");
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernels.dim(3),
                   kernels.dim(0), kernels.dim(1), 0, 0};
    if (kernels.dim(2) != g.in_ch) {
        throw Error(Errc::ShapeMismatch, "conv2d: kernel input channels " + std::to_string(kernels.dim(2)) +
                                             " != input channels " + std::to_string(g.in_ch));
    }
    // Taller kernels than the input are fine under same padding: deeper blocks
    // see pooled lengths shorter than the kernel.
    if (g.kw > g.width + 1) {
        throw Error(Errc::ShapeMismatch, "conv2d: kernel " + shape_string(kernels.shape()) +
                                             " does not fit input " + shape_string(input.shape()));
    }
    g.pad_top = (g.kh - 1) / 2;
    g.pad_left = (g.kw - 1) / 2;
    return g;
}

// Rows are output positions (i, j); columns follow the kernel layout (u, v, c).
void im2col(const ConvGeometry& g, const double* input, double* cols) {
    const std::size_t k = g.patch();
    for (std::size_t i = 0; i < g.height; ++i) {
        for (std::size_t j = 0; j < g.width; ++j) {
            double* row = cols + (i * g.width + j) * k;
            for (std::size_t u = 0; u < g.kh; ++u) {
                const auto ii = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(g.pad_top);
                for (std::size_t v = 0; v < g.kw; ++v) {
                    const auto jj = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(g.pad_left);
                    double* dst = row + (u * g.kw + v) * g.in_ch;
                    if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(g.height) ||
                        jj >= static_cast<std::ptrdiff_t>(g.width)) {
                        std::fill(dst, dst + g.in_ch, 0.0);
                    } else {
                        const double* src =
                            input + (static_cast<std::size_t>(ii) * g.width + static_cast<std::size_t>(jj)) * g.in_ch;
                        std::copy(src, src + g.in_ch, dst);
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* grad_input) {
    const std::size_t k = g.patch();
    for (std::size_t i = 0; i < g.height; ++i) {
        for (std::size_t j = 0; j < g.width; ++j) {
            const double* row = cols + (i * g.width + j) * k;
            for (std::size_t u = 0; u < g.kh; ++u) {
                const auto ii = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(g.pad_top);
                if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.height)) continue;
                for (std::size_t v = 0; v < g.kw; ++v) {
                    const auto jj = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(g.pad_left);
                    if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.width)) continue;
                    const double* src = row + (u * g.kw + v) * g.in_ch;
                    double* dst =
                        grad_input + (static_cast<std::size_t>(ii) * g.width + static_cast<std::size_t>(jj)) * g.in_ch;
                    for (std::size_t c = 0; c < g.in_ch; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

Tensor transpose(const double* src, std::size_t rows, std::size_t cols) {
    Tensor t({cols, rows});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = src[r * cols + c];
    }
    return t;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, Conv2dCache* cache) {
    const auto g = conv_geometry(input, kernels);
    require_shape(bias, {g.out_ch}, "conv2d bias");
    const auto& kt = active_kernels();

    Tensor out({g.batch, g.height, g.width, g.out_ch});
    std::vector<double> cols(g.positions() * g.patch());
    const std::size_t in_stride = g.positions() * g.in_ch;
    const std::size_t out_stride = g.positions() * g.out_ch;
    for (std::size_t b = 0; b < g.batch; ++b) {
        double* ob = out.data() + b * out_stride;
        for (std::size_t p = 0; p < g.positions(); ++p) std::copy(bias.data(), bias.data() + g.out_ch, ob + p * g.out_ch);
        im2col(g, input.data() + b * in_stride, cols.data());
        kt.gemm_nn(g.positions(), g.out_ch, g.patch(), cols.data(), kernels.data(), ob);
    }
    if (cache != nullptr) {
        cache->input = input;
        cache->kernels = kernels;
    }
    return out;
}

Conv2dGrads conv2d_backward(const Conv2dCache& cache, const Tensor& grad_out, bool want_input_grad) {
    const auto g = conv_geometry(cache.input, cache.kernels);
    require_shape(grad_out, {g.batch, g.height, g.width, g.out_ch}, "conv2d grad_out");
    const auto& kt = active_kernels();

    Conv2dGrads grads{Tensor{}, Tensor(cache.kernels.shape()), Tensor({g.out_ch})};
    if (want_input_grad) grads.input = Tensor(cache.input.shape());

    const Tensor kernels_t = transpose(cache.kernels.data(), g.patch(), g.out_ch);
    std::vector<double> cols(g.positions() * g.patch());
    std::vector<double> grad_cols(want_input_grad ? cols.size() : 0);
    const std::size_t in_stride = g.positions() * g.in_ch;
    const std::size_t out_stride = g.positions() * g.out_ch;
    for (std::size_t b = 0; b < g.batch; ++b) {
        const double* gb = grad_out.data() + b * out_stride;
        for (std::size_t p = 0; p < g.positions(); ++p) {
            for (std::size_t o = 0; o < g.out_ch; ++o) grads.bias[o] += gb[p * g.out_ch + o];
        }
        im2col(g, cache.input.data() + b * in_stride, cols.data());
        kt.gemm_tn(g.positions(), g.out_ch, g.patch(), cols.data(), gb, grads.kernels.data());
        if (want_input_grad) {
            std::fill(grad_cols.begin(), grad_cols.end(), 0.0);
            kt.gemm_nn(g.positions(), g.patch(), g.out_ch, gb, kernels_t.data(), grad_cols.data());
            col2im_add(g, grad_cols.data(), grads.input.data() + b * in_stride);
        }
    }
    return grads;
}

BatchNormParams BatchNormParams::identity(std::size_t channels) {
    return {Tensor({channels}, 1.0), Tensor({channels}, 0.0), Tensor({channels}, 0.0), Tensor({channels}, 1.0)};
}

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params, Mode mode, const BatchNormOptions& options,
                         BatchNormCache* cache) {
    if (mode == Mode::Infer) return batchnorm_infer(input, params, options);
    require_rank(input, 4, "batchnorm input");
    const std::size_t channels = input.dim(3);
    const std::size_t count = input.size() / channels;
    require_shape(params.gamma, {channels}, "batchnorm gamma");
    require_shape(params.beta, {channels}, "batchnorm beta");
    if (count < 2) {
        throw Error(Errc::DegenerateBatch, "batch normalization needs at least 2 values per channel in train mode");
    }

    std::vector<double> mean(channels, 0.0), var(channels, 0.0), inv_std(channels);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) mean[c] += input[i * channels + c];
    }
    for (auto& m : mean) m /= static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double d = input[i * channels + c] - mean[c];
            var[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        var[c] /= static_cast<double>(count);
        inv_std[c] = 1.0 / std::sqrt(var[c] + options.epsilon);
    }

    Tensor normalized(input.shape());
    Tensor out(input.shape());
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double xhat = (input[i * channels + c] - mean[c]) * inv_std[c];
            normalized[i * channels + c] = xhat;
            out[i * channels + c] = params.gamma[c] * xhat + params.beta[c];
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        params.running_mean[c] = options.momentum * params.running_mean[c] + (1.0 - options.momentum) * mean[c];
        params.running_var[c] = options.momentum * params.running_var[c] + (1.0 - options.momentum) * var[c];
    }
    if (cache != nullptr) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
        cache->gamma = params.gamma;
    }
    return out;
}

Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& params, const BatchNormOptions& options) {
    require_rank(input, 4, "batchnorm input");
    const std::size_t channels = input.dim(3);
    require_shape(params.running_mean, {channels}, "batchnorm running_mean");
    std::vector<double> scale(channels), shift(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        scale[c] = params.gamma[c] / std::sqrt(params.running_var[c] + options.epsilon);
        shift[c] = params.beta[c] - params.running_mean[c] * scale[c];
    }
    Tensor out(input.shape());
    const std::size_t count = input.size() / channels;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) out[i * channels + c] = input[i * channels + c] * scale[c] + shift[c];
    }
    return out;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& grad_out) {
    require_shape(grad_out, cache.normalized.shape(), "batchnorm grad_out");
    const std::size_t channels = cache.inv_std.size();
    const std::size_t count = grad_out.size() / channels;
    BatchNormGrads grads{Tensor(grad_out.shape()), Tensor({channels}), Tensor({channels})};
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double dy = grad_out[i * channels + c];
            grads.beta[c] += dy;
            grads.gamma[c] += dy * cache.normalized[i * channels + c];
        }
    }
    const double n = static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double dy = grad_out[i * channels + c];
            const double xhat = cache.normalized[i * channels + c];
            grads.input[i * channels + c] =
                cache.gamma[c] * cache.inv_std[c] / n * (n * dy - grads.beta[c] - xhat * grads.gamma[c]);
        }
    }
    return grads;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require_shape(grad_out, input.shape(), "relu grad_out");
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
    return out;
}

MaxPoolResult maxpool_forward(const Tensor& input) {
    require_rank(input, 4, "maxpool input");
    const std::size_t batch = input.dim(0), height = input.dim(1);
    const std::size_t row = input.dim(2) * input.dim(3);
    if (height == 0) throw Error(Errc::ShapeMismatch, "maxpool: empty input");
    const std::size_t out_h = pooled_length(height);
    MaxPoolResult r{Tensor({batch, out_h, input.dim(2), input.dim(3)}), {}, input.shape()};
    r.argmax.resize(r.output.size());
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < out_h; ++i) {
            const double* top = input.data() + (b * height + 2 * i) * row;
            const bool has_pair = 2 * i + 1 < height;
            const std::size_t o = (b * out_h + i) * row;
            for (std::size_t e = 0; e < row; ++e) {
                const bool second = has_pair && top[row + e] > top[e];
                r.output[o + e] = second ? top[row + e] : top[e];
                r.argmax[o + e] = second ? 1 : 0;
            }
        }
    }
    return r;
}

Tensor maxpool_backward(const MaxPoolResult& pooled, const Tensor& grad_out) {
    require_shape(grad_out, pooled.output.shape(), "maxpool grad_out");
    Tensor grad(pooled.input_shape);
    const std::size_t batch = pooled.input_shape[0], height = pooled.input_shape[1];
    const std::size_t row = pooled.input_shape[2] * pooled.input_shape[3];
    const std::size_t out_h = pooled.output.dim(1);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < out_h; ++i) {
            const std::size_t o = (b * out_h + i) * row;
            double* top = grad.data() + (b * height + 2 * i) * row;
            for (std::size_t e = 0; e < row; ++e) top[pooled.argmax[o + e] * row + e] += grad_out[o + e];
        }
    }
    return grad;
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(Errc::InvalidArgument, "dropout rate must lie in [0, 1)");
    if (mode == Mode::Infer) return {input, {}};
    DropoutResult r{Tensor(input.shape()), std::vector<double>(input.size())};
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.scale[i] = uniform(rng) < rate ? 0.0 : keep_scale;
        r.output[i] = input[i] * r.scale[i];
    }
    return r;
}

Tensor dropout_backward(const DropoutResult& forward, const Tensor& grad_out) {
    require_shape(grad_out, forward.output.shape(), "dropout grad_out");
    if (forward.scale.empty()) return grad_out;
    Tensor grad(grad_out.shape());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad_out[i] * forward.scale[i];
    return grad;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require_rank(input, 2, "dense input");
    require_rank(weights, 2, "dense weights");
    const std::size_t batch = input.dim(0), in = input.dim(1), units = weights.dim(1);
    if (weights.dim(0) != in) {
        throw Error(Errc::ShapeMismatch, "dense: weights " + shape_string(weights.shape()) + " vs input " +
                                             shape_string(input.shape()));
    }
    require_shape(bias, {units}, "dense bias");
    Tensor out({batch, units});
    for (std::size_t b = 0; b < batch; ++b) std::copy(bias.data(), bias.data() + units, out.data() + b * units);
    active_kernels().gemm_nn(batch, units, in, input.data(), weights.data(), out.data());
    return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out) {
    const std::size_t batch = input.dim(0), in = input.dim(1), units = weights.dim(1);
    require_shape(grad_out, {batch, units}, "dense grad_out");
    const auto& kt = active_kernels();
    DenseGrads g{Tensor({batch, in}), Tensor(weights.shape()), Tensor({units})};
    kt.gemm_tn(batch, units, in, input.data(), grad_out.data(), g.weights.data());
    const Tensor weights_t = transpose(weights.data(), in, units);
    kt.gemm_nn(batch, in, units, grad_out.data(), weights_t.data(), g.input.data());
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t u = 0; u < units; ++u) g.bias[u] += grad_out[b * units + u];
    }
    return g;
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax logits");
    const std::size_t rows = logits.dim(0), k = logits.dim(1);
    Tensor p(logits.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = logits.data() + r * k;
        double* out = p.data() + r * k;
        const double mx = *std::max_element(in, in + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += out[j] = std::exp(in[j] - mx);
        for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
    }
    return p;
}

CrossEntropyResult sparse_categorical_crossentropy(const Tensor& probabilities, std::span<const std::size_t> labels) {
    require_rank(probabilities, 2, "crossentropy probabilities");
    const std::size_t batch = probabilities.dim(0), k = probabilities.dim(1);
    if (labels.size() != batch) {
        throw Error(Errc::ShapeMismatch, "crossentropy: " + std::to_string(labels.size()) + " labels for batch of " +
                                             std::to_string(batch));
    }
    if (batch == 0) throw Error(Errc::EmptyBatch, "crossentropy of an empty batch");
    CrossEntropyResult r{0.0, probabilities};
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] >= k) {
            throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[b]) + " with " + std::to_string(k) +
                                                   " classes");
        }
        r.loss -= std::log(std::max(probabilities[b * k + labels[b]], 1e-12));
        r.grad_logits[b * k + labels[b]] -= 1.0;
        for (std::size_t j = 0; j < k; ++j) r.grad_logits[b * k + j] *= inv_b;
    }
    r.loss *= inv_b;
    return r;
}

}  // namespace trailgrade::nn

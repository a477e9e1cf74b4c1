#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trailgrade/nn/model.hpp"
#include "trailgrade/nn/tensor.hpp"

namespace trailgrade::nn {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;

    static AdamState zeros_like(std::span<const Tensor* const> params);
    static AdamState for_model(const ModelParams& params);
};

// One bias-corrected Adam update over matching parameter/gradient lists.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options = {});

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const AdamOptions& options = {});

}  // namespace trailgrade::nn

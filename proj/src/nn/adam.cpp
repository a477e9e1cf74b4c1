#include "trailgrade/nn/adam.hpp"

#include <cmath>

#include "trailgrade/nn/kernels.hpp"

namespace trailgrade::nn {

AdamState AdamState::zeros_like(std::span<const Tensor* const> params) {
    AdamState s;
    for (const auto* p : params) {
        s.m.emplace_back(p->shape());
        s.v.emplace_back(p->shape());
    }
    return s;
}

AdamState AdamState::for_model(const ModelParams& params) {
    const auto tensors = params.trainable();
    return zeros_like(tensors);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options) {
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw Error(Errc::ShapeMismatch, "adam: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i].shape() || params[i]->shape() != state.m[i].shape() ||
            params[i]->shape() != state.v[i].shape()) {
            throw Error(Errc::ShapeMismatch, "adam: tensor " + std::to_string(i) + " has shape " +
                                                 shape_string(params[i]->shape()) + " but gradient " +
                                                 shape_string(grads[i].shape()));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 / (1.0 - std::pow(options.beta1, t));
    const double c2 = 1.0 / (1.0 - std::pow(options.beta2, t));
    const auto& kt = active_kernels();
    for (std::size_t i = 0; i < params.size(); ++i) {
        kt.adam_update(params[i]->size(), params[i]->data(), grads[i].data(), state.m[i].data(), state.v[i].data(),
                       options.beta1, options.beta2, options.learning_rate, c1, c2, options.epsilon);
    }
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const AdamOptions& options) {
    const auto tensors = params.trainable();
    adam_step(tensors, grads.tensors, state, options);
    ++params.generation;
}

}  // namespace trailgrade::nn

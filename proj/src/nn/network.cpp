#include "servo/nn/network.hpp"

#include <string>

namespace servo::nn {

Network Network::build(const std::vector<LayerSpec>& specs,
                       const std::vector<std::size_t>& input_shape) {
    Network net;
    net.input_shape_ = input_shape;
    std::vector<std::size_t> shape = input_shape;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        std::unique_ptr<Layer> layer;
        try {
            switch (s.kind) {
                case LayerKind::conv:
                    if (shape.size() != 3) {
                        throw ShapeMismatch("conv expects [C,H,W] input");
                    }
                    layer = std::make_unique<Conv2d>(shape[0], s.out_channels, s.kernel_h,
                                                     s.kernel_w, s.stride, s.padding);
                    break;
                case LayerKind::maxpool:
                    layer = std::make_unique<MaxPool2d>(s.window, s.stride);
                    break;
                case LayerKind::relu:
                    layer = std::make_unique<Relu>();
                    break;
                case LayerKind::dense: {
                    std::size_t flat = 1;
                    for (std::size_t e : shape) flat *= e;
                    layer = std::make_unique<Dense>(flat, s.out_features);
                    break;
                }
                case LayerKind::dropout:
                    layer = std::make_unique<Dropout>(s.keep_probability);
                    break;
            }
            shape = layer->output_shape(shape);
        } catch (const Error& e) {
            throw InvalidArchitecture("layer " + std::to_string(i) + " (" +
                                          layer_kind_name(s.kind) + "): " + e.what(),
                                      i);
        }
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

void Network::initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) {
        layer->initialize(rng);
    }
}

std::vector<std::size_t> Network::output_shape() const {
    std::vector<std::size_t> shape = input_shape_;
    for (const auto& layer : layers_) {
        shape = layer->output_shape(shape);
    }
    return shape;
}

Tensor Network::forward(const Tensor& input, ForwardState& state, bool training,
                        Rng* rng) const {
    if (input.shape() != input_shape_) {
        throw ShapeMismatch("network input shape mismatch");
    }
    state.layers.assign(layers_.size(), LayerState{});
    Tensor x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i]->forward(x, state.layers[i], training, rng);
    }
    state.output = x;
    state.valid = true;
    return x;
}

Tensor Network::infer(const Tensor& input) const {
    ForwardState state;
    return forward(input, state, false, nullptr);
}

void Network::backward(const ForwardState& state, const Tensor& grad_output,
                       GradientSet& grads) const {
    if (!state.valid || state.layers.size() != layers_.size()) {
        throw StaleForwardState("backward requires a stored forward pass on this network");
    }
    if (grads.size() != param_tensor_count()) {
        throw ShapeMismatch("gradient set size mismatch");
    }
    // Walk layers in reverse, handing each its slice of the gradient set.
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        offsets[i] = off;
        off += layers_[i]->param_count();
    }
    Tensor g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const std::size_t n = layers_[i]->param_count();
        g = layers_[i]->backward(g, state.layers[i],
                                 std::span<Tensor>(grads.data() + offsets[i], n));
    }
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> out;
    for (auto& layer : layers_) {
        for (ParamRef p : layer->params()) {
            out.push_back(p);
        }
    }
    return out;
}

std::vector<const Tensor*> Network::param_values() const {
    std::vector<const Tensor*> out;
    for (const auto& layer : layers_) {
        for (ParamRef p : const_cast<Layer&>(*layer).params()) {
            out.push_back(p.value);
        }
    }
    return out;
}

std::size_t Network::param_tensor_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer->param_count();
    return n;
}

std::size_t Network::scalar_param_count() const {
    std::size_t n = 0;
    for (const Tensor* t : param_values()) n += t->size();
    return n;
}

GradientSet Network::zero_gradients() const {
    GradientSet grads;
    for (const Tensor* t : param_values()) {
        grads.emplace_back(t->shape());
    }
    return grads;
}

double mse_loss(const Tensor& prediction, const Tensor& label) {
    if (!prediction.same_shape(label)) {
        throw ShapeMismatch("mse_loss shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - label[i];
        acc += d * d;
    }
    return acc / static_cast<double>(prediction.size());
}

Tensor mse_gradient(const Tensor& prediction, const Tensor& label) {
    if (!prediction.same_shape(label)) {
        throw ShapeMismatch("mse_gradient shape mismatch");
    }
    Tensor g(prediction.shape());
    const double scale = 2.0 / static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        g[i] = scale * (prediction[i] - label[i]);
    }
    return g;
}

void sgd_step(std::vector<ParamRef> params, const GradientSet& gradients,
              double learning_rate, double weight_decay) {
    if (params.size() != gradients.size()) {
        throw ShapeMismatch("sgd_step: parameter/gradient count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].value;
        const Tensor& g = gradients[i];
        if (!w.same_shape(g)) {
            throw ShapeMismatch("sgd_step: parameter/gradient shape mismatch");
        }
        const double wd = params[i].is_bias ? 0.0 : weight_decay;
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= learning_rate * (g[j] + wd * w[j]);
        }
    }
}

void sgd_step(Network& network, const GradientSet& gradients, const TrainingConfig& config) {
    sgd_step(network.params(), gradients, config.learning_rate, config.weight_decay);
}

}  // namespace servo::nn

#ifndef SERVO_NN_NETWORK_HPP
#define SERVO_NN_NETWORK_HPP

#include <memory>
#include <vector>

#include "servo/nn/layers.hpp"

namespace servo::nn {

struct TrainingConfig {
    double learning_rate = 0.0005;
    double weight_decay = 0.001;
    std::size_t batch_size = 20;
    std::size_t epochs = 100;
    double dropout_keep = 0.5;
    std::uint64_t rng_seed = 1;
};

// One gradient tensor per parameter tensor, in Network::params() order.
using GradientSet = std::vector<Tensor>;

// Record of one forward pass through the whole network; consumed by
// backward().
struct ForwardState {
    std::vector<LayerState> layers;
    Tensor output;
    bool valid = false;
};

// A feed-forward stack of layers. Parameters are immutable during forward
// and backward, so concurrent inference on a shared network is safe;
// anything that mutates parameters is single-writer.
class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    // Builds layers from specs, threading the shape algebra from input_shape.
    // Throws InvalidArchitecture (carrying the first bad layer index) when a
    // spec is inconsistent with the incoming shape.
    static Network build(const std::vector<LayerSpec>& specs,
                         const std::vector<std::size_t>& input_shape);

    void initialize(std::uint64_t seed);

    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    std::vector<std::size_t> output_shape() const;

    Tensor forward(const Tensor& input, ForwardState& state, bool training, Rng* rng) const;

    // Inference-mode forward; a pure function of (parameters, input).
    Tensor infer(const Tensor& input) const;

    // Accumulates dLoss/dParam into grads given dLoss/dOutput. Throws
    // StaleForwardState when the state does not come from a matching forward
    // pass on this network.
    void backward(const ForwardState& state, const Tensor& grad_output,
                  GradientSet& grads) const;

    std::vector<ParamRef> params();
    std::vector<const Tensor*> param_values() const;
    std::size_t param_tensor_count() const;
    std::size_t scalar_param_count() const;

    GradientSet zero_gradients() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::size_t> input_shape_;
};

// Mean over all elements of the squared difference.
double mse_loss(const Tensor& prediction, const Tensor& label);

// dLoss/dPrediction of mse_loss: 2*(prediction-label)/N.
Tensor mse_gradient(const Tensor& prediction, const Tensor& label);

// w <- w - lr*(g + weight_decay*w); biases are exempt from weight decay.
void sgd_step(std::vector<ParamRef> params, const GradientSet& gradients,
              double learning_rate, double weight_decay);
void sgd_step(Network& network, const GradientSet& gradients, const TrainingConfig& config);

}  // namespace servo::nn

#endif

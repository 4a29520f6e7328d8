#ifndef SERVO_NN_LAYERS_HPP
#define SERVO_NN_LAYERS_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "servo/nn/tensor.hpp"
#include "servo/rng.hpp"

namespace servo::nn {

enum class LayerKind : std::uint8_t {
    conv = 1,
    maxpool = 2,
    relu = 3,
    dense = 4,
    dropout = 5,
};

const char* layer_kind_name(LayerKind kind);

// Declarative layer description; the runtime layer objects are built from a
// list of these.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t out_channels = 0;  // conv
    std::size_t kernel_h = 0;      // conv
    std::size_t kernel_w = 0;      // conv
    std::size_t stride = 1;        // conv, maxpool
    std::size_t padding = 0;       // conv
    std::size_t window = 0;        // maxpool
    std::size_t out_features = 0;  // dense
    double keep_probability = 1.0; // dropout, in (0,1]

    static LayerSpec conv2d(std::size_t out_channels, std::size_t kernel_h,
                            std::size_t kernel_w, std::size_t stride = 1,
                            std::size_t padding = 0);
    static LayerSpec maxpool2d(std::size_t window, std::size_t stride);
    static LayerSpec relu();
    static LayerSpec dense(std::size_t out_features);
    static LayerSpec dropout(double keep_probability);
};

// Layer construction lives in Network::build (conv/dense need the incoming
// shape to size their parameters).

// Per-layer record of one forward pass: everything backward needs.
struct LayerState {
    Tensor input;
    std::vector<std::size_t> argmax;   // maxpool: flat input index per output element
    std::vector<std::uint8_t> mask;    // dropout: 1 = kept
    double dropout_scale = 1.0;        // survivor scale applied in forward
};

// Mutable view of one parameter tensor. Biases are exempt from weight decay.
struct ParamRef {
    Tensor* value = nullptr;
    bool is_bias = false;
    LayerKind owner = LayerKind::relu;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;

    // Shape algebra; throws ShapeMismatch on inconsistent input.
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;

    // Parameters are immutable during forward; state collects what backward
    // needs. rng is consumed only by dropout in training mode.
    virtual Tensor forward(const Tensor& input, LayerState& state, bool training,
                           Rng* rng) const = 0;

    // Adds parameter gradients into param_grads (aligned with params()) and
    // returns dL/dinput.
    virtual Tensor backward(const Tensor& grad_output, const LayerState& state,
                            std::span<Tensor> param_grads) const = 0;

    virtual void initialize(Rng& /*rng*/) {}
    virtual std::vector<ParamRef> params() { return {}; }
    virtual std::size_t param_count() const { return 0; }
};

class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
           std::size_t kernel_w, std::size_t stride, std::size_t padding);

    LayerKind kind() const override { return LayerKind::conv; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    Tensor forward(const Tensor& input, LayerState& state, bool training,
                   Rng* rng) const override;
    Tensor backward(const Tensor& grad_output, const LayerState& state,
                    std::span<Tensor> param_grads) const override;
    void initialize(Rng& rng) override;
    std::vector<ParamRef> params() override;
    std::size_t param_count() const override { return 2; }

    Tensor weights;  // [F, C, kh, kw]
    Tensor bias;     // [F]

private:
    std::size_t in_channels_, out_channels_, kernel_h_, kernel_w_, stride_, padding_;
};

class MaxPool2d final : public Layer {
public:
    MaxPool2d(std::size_t window, std::size_t stride);

    LayerKind kind() const override { return LayerKind::maxpool; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    Tensor forward(const Tensor& input, LayerState& state, bool training,
                   Rng* rng) const override;
    Tensor backward(const Tensor& grad_output, const LayerState& state,
                    std::span<Tensor> param_grads) const override;

    std::size_t window() const { return window_; }
    std::size_t stride() const { return stride_; }

private:
    std::size_t window_, stride_;
};

class Relu final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::relu; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    Tensor forward(const Tensor& input, LayerState& state, bool training,
                   Rng* rng) const override;
    Tensor backward(const Tensor& grad_output, const LayerState& state,
                    std::span<Tensor> param_grads) const override;
};

// Fully connected layer; flattens whatever comes in.
class Dense final : public Layer {
public:
    Dense(std::size_t in_features, std::size_t out_features);

    LayerKind kind() const override { return LayerKind::dense; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    Tensor forward(const Tensor& input, LayerState& state, bool training,
                   Rng* rng) const override;
    Tensor backward(const Tensor& grad_output, const LayerState& state,
                    std::span<Tensor> param_grads) const override;
    void initialize(Rng& rng) override;
    std::vector<ParamRef> params() override;
    std::size_t param_count() const override { return 2; }

    Tensor weights;  // [m, n]
    Tensor bias;     // [m]

private:
    std::size_t in_features_, out_features_;
};

// Inverted dropout: in training, each element is zeroed with probability
// (1 - keep) and survivors are scaled by 1/keep; in inference it is the
// identity.
class Dropout final : public Layer {
public:
    explicit Dropout(double keep_probability);

    LayerKind kind() const override { return LayerKind::dropout; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    Tensor forward(const Tensor& input, LayerState& state, bool training,
                   Rng* rng) const override;
    Tensor backward(const Tensor& grad_output, const LayerState& state,
                    std::span<Tensor> param_grads) const override;

    double keep_probability() const { return keep_; }

private:
    double keep_;
};

}  // namespace servo::nn

#endif

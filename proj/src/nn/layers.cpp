#include "servo/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace servo::nn {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::relu: return "relu";
        case LayerKind::dense: return "dense";
        case LayerKind::dropout: return "dropout";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(std::size_t out_channels, std::size_t kernel_h,
                            std::size_t kernel_w, std::size_t stride, std::size_t padding) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.out_channels = out_channels;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::maxpool2d(std::size_t window, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.window = window;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec LayerSpec::dense(std::size_t out_features) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.out_features = out_features;
    return s;
}

LayerSpec LayerSpec::dropout(double keep_probability) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.keep_probability = keep_probability;
    return s;
}

namespace {

std::size_t flat_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

// (extent + 2*padding - kernel) must divide stride exactly.
std::size_t conv_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                        std::size_t padding, const char* what) {
    const std::size_t padded = extent + 2 * padding;
    if (padded < kernel) {
        throw ShapeMismatch(std::string(what) + ": kernel larger than padded input");
    }
    const std::size_t span = padded - kernel;
    if (span % stride != 0) {
        throw ShapeMismatch(std::string(what) + ": output extent is not integral");
    }
    return span / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d: cross-correlation (no kernel flip) plus per-filter bias.

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
               std::size_t kernel_w, std::size_t stride, std::size_t padding)
    : weights({out_channels, in_channels, kernel_h, kernel_w}),
      bias({out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      stride_(stride),
      padding_(padding) {
    if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0) {
        throw ShapeMismatch("conv extents and stride must be positive");
    }
}

std::vector<std::size_t> Conv2d::output_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 3 || in[0] != in_channels_) {
        throw ShapeMismatch("conv expects [C,H,W] input with matching channel count");
    }
    return {out_channels_, conv_extent(in[1], kernel_h_, stride_, padding_, "conv height"),
            conv_extent(in[2], kernel_w_, stride_, padding_, "conv width")};
}

Tensor Conv2d::forward(const Tensor& input, LayerState& state, bool, Rng*) const {
    const auto out_shape = output_shape(input.shape());
    const std::size_t h = input.shape()[1], w = input.shape()[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2];

    Tensor out(out_shape);
    const double* in = input.data();
    const double* wp = weights.data();
    double* op = out.data();

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding_);
    for (std::size_t f = 0; f < out_channels_; ++f) {
        const double b = bias[f];
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * stride_) - pad;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * stride_) - pad;
                // Clip the kernel window against the input bounds once.
                const std::size_t ky_lo = iy0 < 0 ? static_cast<std::size_t>(-iy0) : 0;
                const std::size_t ky_hi =
                    std::min(kernel_h_, static_cast<std::size_t>(
                                            std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(h) - iy0)));
                const std::size_t kx_lo = ix0 < 0 ? static_cast<std::size_t>(-ix0) : 0;
                const std::size_t kx_hi =
                    std::min(kernel_w_, static_cast<std::size_t>(
                                            std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(w) - ix0)));
                double acc = b;
                for (std::size_t c = 0; c < in_channels_; ++c) {
                    const double* in_c = in + c * h * w;
                    const double* w_c = wp + ((f * in_channels_) + c) * kernel_h_ * kernel_w_;
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const double* in_row = in_c + (iy0 + static_cast<std::ptrdiff_t>(ky)) * w + ix0;
                        const double* w_row = w_c + ky * kernel_w_;
                        for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                            acc += w_row[kx] * in_row[kx];
                        }
                    }
                }
                op[(f * oh + oy) * ow + ox] = acc;
            }
        }
    }
    state.input = input;
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_output, const LayerState& state,
                        std::span<Tensor> param_grads) const {
    const Tensor& input = state.input;
    const auto out_shape = output_shape(input.shape());
    if (grad_output.shape() != out_shape) {
        throw ShapeMismatch("conv backward: gradient shape mismatch");
    }
    const std::size_t h = input.shape()[1], w = input.shape()[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2];

    Tensor grad_in(input.shape());
    Tensor& grad_w = param_grads[0];
    Tensor& grad_b = param_grads[1];

    const double* in = input.data();
    const double* wp = weights.data();
    const double* go = grad_output.data();
    double* gi = grad_in.data();
    double* gw = grad_w.data();
    double* gb = grad_b.data();

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding_);
    for (std::size_t f = 0; f < out_channels_; ++f) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(oy * stride_) - pad;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox * stride_) - pad;
                const double g = go[(f * oh + oy) * ow + ox];
                gb[f] += g;
                const std::size_t ky_lo = iy0 < 0 ? static_cast<std::size_t>(-iy0) : 0;
                const std::size_t ky_hi =
                    std::min(kernel_h_, static_cast<std::size_t>(
                                            std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(h) - iy0)));
                const std::size_t kx_lo = ix0 < 0 ? static_cast<std::size_t>(-ix0) : 0;
                const std::size_t kx_hi =
                    std::min(kernel_w_, static_cast<std::size_t>(
                                            std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(w) - ix0)));
                for (std::size_t c = 0; c < in_channels_; ++c) {
                    const double* in_c = in + c * h * w;
                    double* gi_c = gi + c * h * w;
                    const std::size_t w_off = ((f * in_channels_) + c) * kernel_h_ * kernel_w_;
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const std::size_t row = (iy0 + static_cast<std::ptrdiff_t>(ky)) * w + ix0;
                        for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                            const std::size_t widx = w_off + ky * kernel_w_ + kx;
                            gw[widx] += g * in_c[row + kx];
                            gi_c[row + kx] += g * wp[widx];
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

void Conv2d::initialize(Rng& rng) {
    // He initialization: fan-in scaled zero-mean Gaussian, zero biases.
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels_ * kernel_h_ * kernel_w_));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] = rng.normal(0.0, stddev);
    }
    bias.fill(0.0);
}

std::vector<ParamRef> Conv2d::params() {
    return {{&weights, false, LayerKind::conv}, {&bias, true, LayerKind::conv}};
}

// ---------------------------------------------------------------------------
// MaxPool2d: per-window maximum; first occurrence in row-major order wins
// ties and receives the full backward gradient.

MaxPool2d::MaxPool2d(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {
    if (window == 0 || stride == 0) {
        throw ShapeMismatch("maxpool window and stride must be positive");
    }
}

std::vector<std::size_t> MaxPool2d::output_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 3) throw ShapeMismatch("maxpool expects [C,H,W] input");
    return {in[0], conv_extent(in[1], window_, stride_, 0, "maxpool height"),
            conv_extent(in[2], window_, stride_, 0, "maxpool width")};
}

Tensor MaxPool2d::forward(const Tensor& input, LayerState& state, bool, Rng*) const {
    const auto out_shape = output_shape(input.shape());
    const std::size_t c_n = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const std::size_t oh = out_shape[1], ow = out_shape[2];

    Tensor out(out_shape);
    state.argmax.assign(out.size(), 0);
    const double* in = input.data();
    double* op = out.data();

    std::size_t o = 0;
    for (std::size_t c = 0; c < c_n; ++c) {
        const double* in_c = in + c * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                const std::size_t iy0 = oy * stride_, ix0 = ox * stride_;
                double best = in_c[iy0 * w + ix0];
                std::size_t best_idx = iy0 * w + ix0;
                for (std::size_t ky = 0; ky < window_; ++ky) {
                    const std::size_t row = (iy0 + ky) * w;
                    for (std::size_t kx = 0; kx < window_; ++kx) {
                        const std::size_t idx = row + ix0 + kx;
                        if (in_c[idx] > best) {
                            best = in_c[idx];
                            best_idx = idx;
                        }
                    }
                }
                op[o] = best;
                state.argmax[o] = c * h * w + best_idx;
            }
        }
    }
    state.input = input;
    return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_output, const LayerState& state,
                           std::span<Tensor>) const {
    if (state.argmax.size() != grad_output.size()) {
        throw StaleForwardState("maxpool backward without matching forward");
    }
    Tensor grad_in(state.input.shape());
    for (std::size_t o = 0; o < grad_output.size(); ++o) {
        grad_in[state.argmax[o]] += grad_output[o];
    }
    return grad_in;
}

// ---------------------------------------------------------------------------
// Relu; the subgradient at 0 is 0.

std::vector<std::size_t> Relu::output_shape(const std::vector<std::size_t>& in) const {
    return in;
}

Tensor Relu::forward(const Tensor& input, LayerState& state, bool, Rng*) const {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = input[i] > 0.0 ? input[i] : 0.0;
    }
    state.input = input;
    return out;
}

Tensor Relu::backward(const Tensor& grad_output, const LayerState& state,
                      std::span<Tensor>) const {
    if (!state.input.same_shape(grad_output)) {
        throw StaleForwardState("relu backward without matching forward");
    }
    Tensor grad_in(grad_output.shape());
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        grad_in[i] = state.input[i] > 0.0 ? grad_output[i] : 0.0;
    }
    return grad_in;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in_features, std::size_t out_features)
    : weights({out_features, in_features}),
      bias({out_features}),
      in_features_(in_features),
      out_features_(out_features) {
    if (in_features == 0 || out_features == 0) {
        throw ShapeMismatch("dense feature counts must be positive");
    }
}

std::vector<std::size_t> Dense::output_shape(const std::vector<std::size_t>& in) const {
    if (flat_size(in) != in_features_) {
        throw ShapeMismatch("dense input size does not match weight columns");
    }
    return {out_features_};
}

Tensor Dense::forward(const Tensor& input, LayerState& state, bool, Rng*) const {
    if (input.size() != in_features_) {
        throw ShapeMismatch("dense input size does not match weight columns");
    }
    Tensor out({out_features_});
    const double* in = input.data();
    const double* wp = weights.data();
    for (std::size_t i = 0; i < out_features_; ++i) {
        const double* row = wp + i * in_features_;
        double acc = bias[i];
        for (std::size_t j = 0; j < in_features_; ++j) {
            acc += row[j] * in[j];
        }
        out[i] = acc;
    }
    state.input = input;
    return out;
}

Tensor Dense::backward(const Tensor& grad_output, const LayerState& state,
                       std::span<Tensor> param_grads) const {
    if (grad_output.size() != out_features_ || state.input.size() != in_features_) {
        throw ShapeMismatch("dense backward: shape mismatch");
    }
    Tensor grad_in(state.input.shape());
    Tensor& grad_w = param_grads[0];
    Tensor& grad_b = param_grads[1];

    const double* in = state.input.data();
    const double* go = grad_output.data();
    const double* wp = weights.data();
    double* gi = grad_in.data();
    double* gw = grad_w.data();

    for (std::size_t i = 0; i < out_features_; ++i) {
        const double g = go[i];
        grad_b[i] += g;
        double* gw_row = gw + i * in_features_;
        const double* w_row = wp + i * in_features_;
        for (std::size_t j = 0; j < in_features_; ++j) {
            gw_row[j] += g * in[j];
            gi[j] += g * w_row[j];
        }
    }
    return grad_in;
}

void Dense::initialize(Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_features_));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] = rng.normal(0.0, stddev);
    }
    bias.fill(0.0);
}

std::vector<ParamRef> Dense::params() {
    return {{&weights, false, LayerKind::dense}, {&bias, true, LayerKind::dense}};
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double keep_probability) : keep_(keep_probability) {
    if (!(keep_ > 0.0) || keep_ > 1.0) {
        throw ConfigError("dropout keep probability must be in (0,1]");
    }
}

std::vector<std::size_t> Dropout::output_shape(const std::vector<std::size_t>& in) const {
    return in;
}

Tensor Dropout::forward(const Tensor& input, LayerState& state, bool training, Rng* rng) const {
    if (!training || keep_ == 1.0) {
        state.mask.assign(input.size(), 1);
        state.dropout_scale = 1.0;
        return input;
    }
    if (rng == nullptr) {
        throw ConfigError("dropout in training mode requires a random source");
    }
    Tensor out(input.shape());
    state.mask.assign(input.size(), 0);
    state.dropout_scale = 1.0 / keep_;
    const double drop = 1.0 - keep_;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (rng->uniform01() >= drop) {
            state.mask[i] = 1;
            out[i] = input[i] * state.dropout_scale;
        }
    }
    return out;
}

Tensor Dropout::backward(const Tensor& grad_output, const LayerState& state,
                         std::span<Tensor>) const {
    if (state.mask.size() != grad_output.size()) {
        throw StaleForwardState("dropout backward without matching forward");
    }
    Tensor grad_in(grad_output.shape());
    for (std::size_t i = 0; i < grad_output.size(); ++i) {
        grad_in[i] = state.mask[i] ? grad_output[i] * state.dropout_scale : 0.0;
    }
    return grad_in;
}

}  // namespace servo::nn

#include "servo/regressor.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <thread>

#include "servo/nn/weights_io.hpp"

namespace servo {

using nn::LayerSpec;

RegressorArchitecture RegressorArchitecture::desk_scale(double dropout_keep) {
    RegressorArchitecture a;
    a.input_size = 64;
    a.layer_specs = {
        LayerSpec::conv2d(12, 5, 5, 1, 2),  // 12x64x64
        LayerSpec::relu(),
        LayerSpec::maxpool2d(2, 2),         // 12x32x32
        LayerSpec::conv2d(16, 3, 3, 1, 1),  // 16x32x32
        LayerSpec::relu(),
        LayerSpec::maxpool2d(2, 2),         // 16x16x16
        LayerSpec::conv2d(24, 3, 3, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv2d(24, 3, 3, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv2d(16, 3, 3, 1, 1),  // 16x16x16
        LayerSpec::relu(),
        LayerSpec::maxpool2d(2, 2),         // 16x8x8
        LayerSpec::dense(256),
        LayerSpec::relu(),
        LayerSpec::dropout(dropout_keep),
        LayerSpec::dense(128),
        LayerSpec::relu(),
        LayerSpec::dropout(dropout_keep),
        LayerSpec::dense(4),
    };
    return a;
}

RegressorArchitecture RegressorArchitecture::paper_scale(double dropout_keep) {
    RegressorArchitecture a;
    a.input_size = 224;
    a.layer_specs = {
        LayerSpec::conv2d(48, 11, 11, 3, 0),  // 48x72x72
        LayerSpec::relu(),
        LayerSpec::maxpool2d(2, 2),           // 48x36x36
        LayerSpec::conv2d(128, 5, 5, 1, 2),   // 128x36x36
        LayerSpec::relu(),
        LayerSpec::maxpool2d(2, 2),           // 128x18x18
        LayerSpec::conv2d(192, 3, 3, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv2d(192, 3, 3, 1, 1),
        LayerSpec::relu(),
        LayerSpec::conv2d(128, 3, 3, 1, 1),   // 128x18x18
        LayerSpec::relu(),
        LayerSpec::maxpool2d(2, 2),           // 128x9x9
        LayerSpec::dense(1024),
        LayerSpec::relu(),
        LayerSpec::dropout(dropout_keep),
        LayerSpec::dense(1024),
        LayerSpec::relu(),
        LayerSpec::dropout(dropout_keep),
        LayerSpec::dense(4),
    };
    return a;
}

nn::TrainingConfig desk_training_defaults() {
    nn::TrainingConfig cfg;
    cfg.learning_rate = 0.15;
    cfg.weight_decay = 0.001;
    cfg.batch_size = 20;
    cfg.epochs = 100;
    cfg.dropout_keep = 0.75;
    cfg.rng_seed = 1;
    return cfg;
}

PoseNormalization PoseNormalization::from_range(const SamplingRange& range) {
    PoseNormalization n;
    const Interval axes[4] = {range.x, range.y, range.z, range.rz};
    for (int i = 0; i < 4; ++i) {
        n.offset[i] = axes[i].mid();
        const double half = axes[i].width() / 2.0;
        n.scale[i] = half > 0.0 ? half : 1.0;
    }
    return n;
}

nn::Tensor PoseNormalization::normalize(const Pose4& pose) const {
    nn::Tensor t({4});
    const double v[4] = {pose.x, pose.y, pose.z, pose.rz};
    for (int i = 0; i < 4; ++i) {
        t[i] = (v[i] - offset[i]) / scale[i];
    }
    return t;
}

Pose4 PoseNormalization::denormalize(const nn::Tensor& output) const {
    if (output.size() != 4) {
        throw ShapeMismatch("pose denormalization expects 4 values");
    }
    return Pose4(output[0] * scale[0] + offset[0], output[1] * scale[1] + offset[1],
                 output[2] * scale[2] + offset[2], output[3] * scale[3] + offset[3]);
}

void PoseNormalization::save(const std::string& path) const {
    static const char* axes[4] = {"x", "y", "z", "rz"};
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    char buf[96];
    for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof(buf), "%s.offset=%.17g\n%s.scale=%.17g\n", axes[i], offset[i],
                      axes[i], scale[i]);
        f << buf;
    }
    if (!f) throw IoFailure("write failed: " + path);
}

PoseNormalization PoseNormalization::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open for reading: " + path);
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoFailure("bad normalization line: " + line);
        kv[line.substr(0, eq)] = std::strtod(line.c_str() + eq + 1, nullptr);
    }
    static const char* axes[4] = {"x", "y", "z", "rz"};
    PoseNormalization n;
    for (int i = 0; i < 4; ++i) {
        const std::string off_key = std::string(axes[i]) + ".offset";
        const std::string scale_key = std::string(axes[i]) + ".scale";
        if (!kv.count(off_key) || !kv.count(scale_key)) {
            throw IoFailure("normalization sidecar missing axis " + std::string(axes[i]));
        }
        n.offset[i] = kv[off_key];
        n.scale[i] = kv[scale_key];
    }
    return n;
}

PoseRegressor::PoseRegressor(const RegressorArchitecture& arch, std::uint64_t seed)
    : arch_(arch),
      network_(nn::Network::build(arch.layer_specs,
                                  {arch.input_channels, arch.input_size, arch.input_size})) {
    const auto out = network_.output_shape();
    if (out != std::vector<std::size_t>{arch.output_dim}) {
        throw InvalidArchitecture("architecture does not end in " +
                                      std::to_string(arch.output_dim) + " outputs",
                                  arch.layer_specs.size());
    }
    network_.initialize(seed);
}

nn::Tensor PoseRegressor::image_to_tensor(const ImageBuffer& image) const {
    if (static_cast<std::size_t>(image.width) != arch_.input_size ||
        static_cast<std::size_t>(image.height) != arch_.input_size) {
        throw ShapeMismatch("image size does not match network input size");
    }
    nn::Tensor t({arch_.input_channels, arch_.input_size, arch_.input_size});
    // Center at the background level and expand to [-1,1]; background
    // pixels then contribute nothing to the first convolution.
    double* out = t.data();
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        out[i] = 2.0 * (image.pixels[i] - 0.5);
    }
    return t;
}

namespace {

// Runs fn(i) for i in [0,n) on up to hardware_concurrency workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

TrainingReport PoseRegressor::train(std::span<const Sample> dataset, const SamplingRange& range,
                                    const nn::TrainingConfig& config) {
    if (dataset.empty()) {
        throw EmptyDataset("training dataset is empty");
    }
    normalization_ = PoseNormalization::from_range(range);

    // Pre-convert images and labels once.
    std::vector<nn::Tensor> inputs;
    std::vector<nn::Tensor> labels;
    inputs.reserve(dataset.size());
    labels.reserve(dataset.size());
    for (const Sample& s : dataset) {
        inputs.push_back(image_to_tensor(s.image));
        labels.push_back(normalization_.normalize(s.label));
    }

    const std::size_t n = dataset.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    // Stream 0 shuffles; streams >= 1 are per-sample dropout masks.
    Rng shuffle_rng(mix_seed(config.rng_seed, 0));
    TrainingReport report;
    report.epoch_loss.reserve(config.epochs);

    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
    std::vector<nn::GradientSet> sample_grads(std::min(batch, n));
    std::vector<double> sample_loss(std::min(batch, n), 0.0);
    nn::GradientSet batch_grads = network_.zero_gradients();

    std::uint64_t sample_counter = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t m = std::min(batch, n - start);
            const std::uint64_t base_counter = sample_counter;

            parallel_for(m, [&](std::size_t k) {
                const std::size_t idx = order[start + k];
                Rng sample_rng(mix_seed(config.rng_seed, base_counter + k + 1));
                nn::ForwardState state;
                const nn::Tensor pred =
                    network_.forward(inputs[idx], state, true, &sample_rng);
                sample_loss[k] = nn::mse_loss(pred, labels[idx]);
                if (sample_grads[k].empty()) {
                    sample_grads[k] = network_.zero_gradients();
                } else {
                    for (nn::Tensor& g : sample_grads[k]) g.fill(0.0);
                }
                network_.backward(state, nn::mse_gradient(pred, labels[idx]), sample_grads[k]);
            });
            sample_counter += m;

            // Reduce in sample order: results do not depend on thread count.
            for (nn::Tensor& g : batch_grads) g.fill(0.0);
            for (std::size_t k = 0; k < m; ++k) {
                epoch_loss += sample_loss[k];
                for (std::size_t t = 0; t < batch_grads.size(); ++t) {
                    const nn::Tensor& src = sample_grads[k][t];
                    nn::Tensor& dst = batch_grads[t];
                    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                }
            }
            const double inv_m = 1.0 / static_cast<double>(m);
            for (nn::Tensor& g : batch_grads) {
                for (std::size_t j = 0; j < g.size(); ++j) g[j] *= inv_m;
            }
            nn::sgd_step(network_, batch_grads, config);
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    return report;
}

Pose4 PoseRegressor::predict(const ImageBuffer& image) const {
    return normalization_.denormalize(network_.infer(image_to_tensor(image)));
}

AxisErrors PoseRegressor::evaluate(std::span<const Sample> test_set) const {
    if (test_set.empty()) {
        throw EmptyDataset("evaluation set is empty");
    }
    AxisErrors mae{0.0, 0.0, 0.0, 0.0};
    for (const Sample& s : test_set) {
        const Pose4 pred = predict(s.image);
        mae[0] += std::abs(pred.x - s.label.x);
        mae[1] += std::abs(pred.y - s.label.y);
        mae[2] += std::abs(pred.z - s.label.z);
        mae[3] += std::abs(wrap_degrees(pred.rz - s.label.rz));
    }
    for (double& v : mae) v /= static_cast<double>(test_set.size());
    return mae;
}

void PoseRegressor::save(const std::string& weights_path) const {
    nn::save_weights(network_, weights_path);
    normalization_.save(weights_path + ".norm");
}

PoseRegressor PoseRegressor::load(const RegressorArchitecture& arch,
                                  const std::string& weights_path) {
    PoseRegressor r(arch, 0);
    nn::load_weights(r.network_, weights_path);
    r.normalization_ = PoseNormalization::load(weights_path + ".norm");
    return r;
}

}  // namespace servo

#include "servo/verification.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>

#include "servo/dataset.hpp"
#include "servo/nn/network.hpp"
#include "servo/rng.hpp"

namespace servo {

namespace {

constexpr double kFdStep = 1e-4;

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

// Uniform in [-1,1] but at least `margin` away from zero; keeps relu inputs
// off the kink where the gradient is discontinuous.
double away_from_zero(Rng& rng, double margin) {
    const double u = rng.uniform(-1.0, 1.0);
    const double s = u >= 0.0 ? 1.0 : -1.0;
    return s * (margin + std::abs(u) * (1.0 - margin));
}

void fill_uniform(nn::Tensor& t, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
}

// One finite-difference scenario: a layer, its input, a target for the
// mse head, and a fixed seed replayed on every evaluation so dropout draws
// the same mask each time.
struct LayerCase {
    std::unique_ptr<nn::Layer> layer;
    nn::Tensor input;
    nn::Tensor label;
    std::uint64_t mask_seed = 0;
};

double case_loss(const LayerCase& c) {
    Rng rng(c.mask_seed);
    nn::LayerState state;
    const nn::Tensor out = c.layer->forward(c.input, state, true, &rng);
    return nn::mse_loss(out, c.label);
}

// Max relative error between analytic gradients (parameters and input) and
// central finite differences.
double check_case(LayerCase& c) {
    Rng rng(c.mask_seed);
    nn::LayerState state;
    const nn::Tensor out = c.layer->forward(c.input, state, true, &rng);
    std::vector<nn::Tensor> param_grads;
    for (nn::ParamRef p : c.layer->params()) {
        param_grads.emplace_back(p.value->shape());
    }
    const nn::Tensor grad_in =
        c.layer->backward(nn::mse_gradient(out, c.label), state,
                          std::span<nn::Tensor>(param_grads.data(), param_grads.size()));

    double worst = 0.0;
    auto fd_against = [&](nn::Tensor& subject, const nn::Tensor& analytic) {
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const double saved = subject[i];
            subject[i] = saved + kFdStep;
            const double lp = case_loss(c);
            subject[i] = saved - kFdStep;
            const double lm = case_loss(c);
            subject[i] = saved;
            const double fd = (lp - lm) / (2.0 * kFdStep);
            worst = std::max(worst, rel_err(fd, analytic[i]));
        }
    };

    auto params = c.layer->params();
    for (std::size_t p = 0; p < params.size(); ++p) {
        fd_against(*params[p].value, param_grads[p]);
    }
    fd_against(c.input, grad_in);
    return worst;
}

LayerCase make_conv_case(Rng& rng) {
    for (;;) {
        const std::size_t in_c = 1 + rng.bounded(3);
        const std::size_t out_c = 1 + rng.bounded(3);
        const std::size_t kh = 1 + rng.bounded(3);
        const std::size_t kw = 1 + rng.bounded(3);
        const std::size_t stride = 1 + rng.bounded(2);
        const std::size_t pad = rng.bounded(2);
        const std::size_t oh = 1 + rng.bounded(3);
        const std::size_t ow = 1 + rng.bounded(3);
        const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(stride * (oh - 1) + kh) -
                                 2 * static_cast<std::ptrdiff_t>(pad);
        const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(stride * (ow - 1) + kw) -
                                 2 * static_cast<std::ptrdiff_t>(pad);
        if (h < 1 || w < 1) continue;

        LayerCase c;
        auto layer = std::make_unique<nn::Conv2d>(in_c, out_c, kh, kw, stride, pad);
        fill_uniform(layer->weights, rng);
        fill_uniform(layer->bias, rng);
        c.input = nn::Tensor({in_c, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
        fill_uniform(c.input, rng);
        c.label = nn::Tensor(layer->output_shape(c.input.shape()));
        fill_uniform(c.label, rng);
        c.layer = std::move(layer);
        return c;
    }
}

LayerCase make_dense_case(Rng& rng) {
    const std::size_t n = 1 + rng.bounded(12);
    const std::size_t m = 1 + rng.bounded(8);
    LayerCase c;
    auto layer = std::make_unique<nn::Dense>(n, m);
    fill_uniform(layer->weights, rng);
    fill_uniform(layer->bias, rng);
    c.input = nn::Tensor({n});
    fill_uniform(c.input, rng);
    c.label = nn::Tensor({m});
    fill_uniform(c.label, rng);
    c.layer = std::move(layer);
    return c;
}

LayerCase make_relu_case(Rng& rng) {
    const std::size_t n = 1 + rng.bounded(24);
    LayerCase c;
    c.layer = std::make_unique<nn::Relu>();
    c.input = nn::Tensor({n});
    for (std::size_t i = 0; i < n; ++i) c.input[i] = away_from_zero(rng, 0.02);
    c.label = nn::Tensor({n});
    fill_uniform(c.label, rng);
    return c;
}

// Regenerates the input until every pooling window has a clear top-2 gap;
// finite differences are meaningless across an argmax switch.
LayerCase make_maxpool_case(Rng& rng) {
    const std::size_t window = 2 + rng.bounded(2);
    const std::size_t stride = 1 + rng.bounded(window);
    const std::size_t ch = 1 + rng.bounded(2);
    const std::size_t oh = 1 + rng.bounded(3);
    const std::size_t ow = 1 + rng.bounded(3);
    const std::size_t h = stride * (oh - 1) + window;
    const std::size_t w = stride * (ow - 1) + window;

    LayerCase c;
    c.layer = std::make_unique<nn::MaxPool2d>(window, stride);
    c.input = nn::Tensor({ch, h, w});
    for (int tries = 0; tries < 200; ++tries) {
        fill_uniform(c.input, rng);
        bool ok = true;
        for (std::size_t cc = 0; cc < ch && ok; ++cc) {
            for (std::size_t oy = 0; oy < oh && ok; ++oy) {
                for (std::size_t ox = 0; ox < ow && ok; ++ox) {
                    double best = -2.0, second = -2.0;
                    for (std::size_t ky = 0; ky < window; ++ky) {
                        for (std::size_t kx = 0; kx < window; ++kx) {
                            const double v =
                                c.input[(cc * h + oy * stride + ky) * w + ox * stride + kx];
                            if (v > best) {
                                second = best;
                                best = v;
                            } else if (v > second) {
                                second = v;
                            }
                        }
                    }
                    if (window > 1 && best - second < 2e-2) ok = false;
                }
            }
        }
        if (ok) break;
    }
    c.label = nn::Tensor({ch, oh, ow});
    fill_uniform(c.label, rng);
    return c;
}

LayerCase make_dropout_case(Rng& rng) {
    const std::size_t n = 1 + rng.bounded(24);
    const double keep = rng.uniform(0.3, 0.9);
    LayerCase c;
    c.layer = std::make_unique<nn::Dropout>(keep);
    c.input = nn::Tensor({n});
    fill_uniform(c.input, rng);
    c.label = nn::Tensor({n});
    fill_uniform(c.label, rng);
    c.mask_seed = rng.next_u64();
    return c;
}

// mse has no layer; check its prediction gradient directly.
double check_mse_case(Rng& rng) {
    const std::size_t n = 1 + rng.bounded(16);
    nn::Tensor pred({n}), label({n});
    fill_uniform(pred, rng);
    fill_uniform(label, rng);
    const nn::Tensor analytic = nn::mse_gradient(pred, label);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double saved = pred[i];
        pred[i] = saved + kFdStep;
        const double lp = nn::mse_loss(pred, label);
        pred[i] = saved - kFdStep;
        const double lm = nn::mse_loss(pred, label);
        pred[i] = saved;
        worst = std::max(worst, rel_err((lp - lm) / (2.0 * kFdStep), analytic[i]));
    }
    return worst;
}

}  // namespace

std::vector<CheckResult> gradient_checks(std::uint64_t seed, int configs) {
    struct KindCase {
        const char* name;
        std::function<LayerCase(Rng&)> make;
    };
    const KindCase kinds[] = {
        {"gradient-conv", make_conv_case},       {"gradient-dense", make_dense_case},
        {"gradient-relu", make_relu_case},       {"gradient-maxpool", make_maxpool_case},
        {"gradient-dropout", make_dropout_case},
    };

    std::vector<CheckResult> results;
    std::uint64_t stream = 1;
    for (const KindCase& kind : kinds) {
        Rng rng(mix_seed(seed, stream++));
        double worst = 0.0;
        for (int i = 0; i < configs; ++i) {
            LayerCase c = kind.make(rng);
            worst = std::max(worst, check_case(c));
        }
        results.push_back({kind.name, worst < 1e-4, worst, 1e-4});
    }
    {
        Rng rng(mix_seed(seed, stream++));
        double worst = 0.0;
        for (int i = 0; i < configs; ++i) {
            worst = std::max(worst, check_mse_case(rng));
        }
        results.push_back({"gradient-mse", worst < 1e-4, worst, 1e-4});
    }
    return results;
}

CheckResult penrose_check(std::uint64_t seed, int trials) {
    Rng rng(mix_seed(seed, 10));
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto k = static_cast<Eigen::Index>(1 + rng.bounded(6));
        InteractionMatrix m;
        m.entries.resize(2 * k, 4);
        for (Eigen::Index i = 0; i < m.entries.size(); ++i) {
            m.entries.data()[i] = rng.uniform(-1.0, 1.0);
        }
        const Eigen::MatrixXd pinv = pseudo_inverse(m);
        const double nm = m.entries.norm();
        const double np = pinv.norm();
        if (nm > 0.0) {
            worst = std::max(worst, (m.entries * pinv * m.entries - m.entries).norm() / nm);
        }
        if (np > 0.0) {
            worst = std::max(worst, (pinv * m.entries * pinv - pinv).norm() / np);
        }
    }
    return {"penrose-conditions", worst < 1e-8, worst, 1e-8};
}

CheckResult interaction_fd_check(std::uint64_t seed, int poses) {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();
    Rng rng(mix_seed(seed, 20));

    double worst = 0.0;
    for (int p = 0; p < poses; ++p) {
        const Pose4 pose(rng.uniform(range.x.lo, range.x.hi), rng.uniform(range.y.lo, range.y.hi),
                         rng.uniform(range.z.lo, range.z.hi),
                         rng.uniform(range.rz.lo, range.rz.hi));
        const FeatureVector s = extract_point_features(scene, pose);
        const InteractionMatrix analytic = interaction_matrix(s, corner_depths(scene, pose));

        Eigen::MatrixXd fd(analytic.entries.rows(), 4);
        for (int axis = 0; axis < 4; ++axis) {
            CameraVelocity4 dir;
            switch (axis) {
                case 0: dir.vx = kFdStep; break;
                case 1: dir.vy = kFdStep; break;
                case 2: dir.vz = kFdStep; break;
                case 3: dir.wz = kFdStep; break;
            }
            const FeatureVector plus =
                extract_point_features(scene, apply_camera_velocity(pose, dir));
            CameraVelocity4 neg{-dir.vx, -dir.vy, -dir.vz, -dir.wz};
            const FeatureVector minus =
                extract_point_features(scene, apply_camera_velocity(pose, neg));
            fd.col(axis) = (plus.values - minus.values) / (2.0 * kFdStep);
        }
        worst = std::max(worst, (fd - analytic.entries).norm() / analytic.entries.norm());
    }
    return {"interaction-matrix-fd", worst < 1e-3, worst, 1e-3};
}

CheckResult oracle_decay_check(std::uint64_t seed, int episodes) {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();
    const double lambdas[] = {0.03, 0.1, 0.2, 0.5, 1.0};

    double worst = 0.0;
    std::uint64_t stream = 30;
    std::ostringstream warn_sink;  // lambda = 1.0 warns by design
    for (double lambda : lambdas) {
        for (int e = 0; e < episodes; ++e) {
            const auto poses =
                sample_poses(range, 2, mix_seed(seed, stream++), scene);
            EpisodeConfig cfg;
            cfg.initial_pose = poses[0];
            cfg.desired_pose = poses[1];
            cfg.gains = GainVector::uniform(lambda, &warn_sink);
            cfg.max_steps = 50;
            cfg.tolerance = {1e-12, 1e-12, 1e-12, 1e-12};
            cfg.controller = ControllerKind::oracle;
            const EpisodeTrace trace = run_episode(cfg, scene);

            const PoseError e0 = trace.true_error_at(0);
            for (std::size_t i = 0; i < trace.records.size(); ++i) {
                const double decay = std::pow(1.0 - lambda, trace.records[i].step);
                const PoseError ek = trace.true_error_at(i);
                worst = std::max({worst, std::abs(ek.ex - decay * e0.ex),
                                  std::abs(ek.ey - decay * e0.ey),
                                  std::abs(ek.ez - decay * e0.ez),
                                  std::abs(ek.erz - decay * e0.erz)});
            }
        }
    }
    return {"oracle-geometric-decay", worst < 1e-9, worst, 1e-9};
}

CheckResult classic_convergence_check(std::uint64_t seed, int episodes) {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();
    const auto initials =
        sample_poses(range, static_cast<std::size_t>(episodes), mix_seed(seed, 40), scene);
    const Pose4 desired(0.0, 0.0, 5.0, 0.0);

    double worst = 0.0;
    for (const Pose4& initial : initials) {
        EpisodeConfig cfg;
        cfg.initial_pose = initial;
        cfg.desired_pose = desired;
        cfg.gains = GainVector::uniform(0.1);
        cfg.max_steps = 200;
        cfg.tolerance = {0.01, 0.01, 0.01, 0.01};
        cfg.controller = ControllerKind::classic;
        const EpisodeTrace trace = run_episode(cfg, scene);
        worst = std::max(worst,
                         feature_error_px(scene, trace.records.back().pose, desired));
    }
    return {"classic-ibvs-convergence", worst < 1.0, worst, 1.0};
}

std::vector<CheckResult> run_all_checks(std::uint64_t seed) {
    std::vector<CheckResult> results = gradient_checks(seed);
    results.push_back(penrose_check(seed));
    results.push_back(interaction_fd_check(seed));
    results.push_back(oracle_decay_check(seed));
    results.push_back(classic_convergence_check(seed));
    return results;
}

}  // namespace servo

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "servo/nn/weights_io.hpp"
#include "servo/regressor.hpp"
#include "servo/rng.hpp"

using namespace servo;
using nn::LayerSpec;

namespace {

// Tiny 2-conv/2-dense stack for fast training tests.
RegressorArchitecture tiny_arch(std::size_t input = 16) {
    RegressorArchitecture a;
    a.input_size = input;
    a.layer_specs = {
        LayerSpec::conv2d(4, 3, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
        LayerSpec::conv2d(4, 3, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
        LayerSpec::dense(16),             LayerSpec::relu(), LayerSpec::dense(4),
    };
    return a;
}

ImageBuffer random_image(std::size_t size, Rng& rng) {
    ImageBuffer img(static_cast<int>(size), static_cast<int>(size));
    for (double& p : img.pixels) p = rng.uniform01();
    return img;
}

std::vector<Sample> toy_dataset(std::size_t n, std::size_t size, Rng& rng,
                                const SamplingRange& range) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.image = random_image(size, rng);
        s.label = Pose4(rng.uniform(range.x.lo, range.x.hi), rng.uniform(range.y.lo, range.y.hi),
                        rng.uniform(range.z.lo, range.z.hi),
                        rng.uniform(range.rz.lo, range.rz.hi));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("profiles validate and end in 4 outputs") {
    SUBCASE("desk-scale 64x64") {
        PoseRegressor r(RegressorArchitecture::desk_scale(), 1);
        CHECK(r.network().output_shape() == std::vector<std::size_t>{4});
        ImageBuffer img(64, 64, 0.5);
        const Pose4 p = r.predict(img);
        CHECK(std::isfinite(p.x));
        CHECK(std::isfinite(p.rz));
    }
    SUBCASE("paper-scale 224x224") {
        PoseRegressor r(RegressorArchitecture::paper_scale(), 1);
        CHECK(r.network().output_shape() == std::vector<std::size_t>{4});
        ImageBuffer img(224, 224, 0.5);
        const Pose4 p = r.predict(img);
        CHECK(std::isfinite(p.x));
        CHECK(std::isfinite(p.y));
        CHECK(std::isfinite(p.z));
        CHECK(std::isfinite(p.rz));
    }
    SUBCASE("both profiles have five conv and three dense layers") {
        for (const auto& arch :
             {RegressorArchitecture::desk_scale(), RegressorArchitecture::paper_scale()}) {
            int convs = 0, denses = 0;
            for (const LayerSpec& s : arch.layer_specs) {
                if (s.kind == nn::LayerKind::conv) ++convs;
                if (s.kind == nn::LayerKind::dense) ++denses;
            }
            CHECK(convs == 5);
            CHECK(denses == 3);
        }
    }
}

TEST_CASE("an architecture that collapses below 1 px is rejected") {
    RegressorArchitecture bad;
    bad.input_size = 8;
    bad.layer_specs = {
        LayerSpec::maxpool2d(2, 2),  // 4
        LayerSpec::maxpool2d(2, 2),  // 2
        LayerSpec::maxpool2d(2, 2),  // 1
        LayerSpec::maxpool2d(2, 2),  // impossible
        LayerSpec::dense(4),
    };
    CHECK_THROWS_AS(PoseRegressor(bad, 1), InvalidArchitecture);
}

TEST_CASE("an architecture that does not end in 4 outputs is rejected") {
    RegressorArchitecture bad = tiny_arch();
    bad.layer_specs.back() = LayerSpec::dense(3);
    CHECK_THROWS_AS(PoseRegressor(bad, 1), InvalidArchitecture);
}

TEST_CASE("pose normalization round trip is exact within the range") {
    const SamplingRange range = SamplingRange::desk_default();
    const PoseNormalization n = PoseNormalization::from_range(range);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Pose4 p(rng.uniform(range.x.lo, range.x.hi), rng.uniform(range.y.lo, range.y.hi),
                      rng.uniform(range.z.lo, range.z.hi), rng.uniform(range.rz.lo, range.rz.hi));
        const Pose4 back = n.denormalize(n.normalize(p));
        CHECK(std::abs(back.x - p.x) < 1e-12);
        CHECK(std::abs(back.y - p.y) < 1e-12);
        CHECK(std::abs(back.z - p.z) < 1e-12);
        CHECK(std::abs(back.rz - p.rz) < 1e-12);
        const nn::Tensor norm = n.normalize(p);
        for (int a = 0; a < 4; ++a) {
            CHECK(norm[a] >= -1.0 - 1e-12);
            CHECK(norm[a] <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("training memorizes a single sample") {
    Rng rng(7);
    const SamplingRange range = SamplingRange::desk_default();
    const auto data = toy_dataset(1, 16, rng, range);

    PoseRegressor r(tiny_arch(), 11);
    nn::TrainingConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 0.0;
    cfg.batch_size = 1;
    cfg.epochs = 400;
    cfg.rng_seed = 3;
    const TrainingReport report = r.train(data, range, cfg);
    CHECK(report.epoch_loss.back() < 1e-3 * report.epoch_loss.front());
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
    Rng rng(9);
    const SamplingRange range = SamplingRange::desk_default();
    const auto data = toy_dataset(4, 16, rng, range);

    PoseRegressor r(tiny_arch(), 21);
    const auto before = nn::encode_weights(r.network());
    nn::TrainingConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.batch_size = 2;
    cfg.epochs = 3;
    r.train(data, range, cfg);
    CHECK(nn::encode_weights(r.network()) == before);
}

TEST_CASE("equal seeds produce bit-identical trained parameters") {
    Rng rng(13);
    const SamplingRange range = SamplingRange::desk_default();
    const auto data = toy_dataset(6, 16, rng, range);

    nn::TrainingConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 3;
    cfg.epochs = 4;
    cfg.dropout_keep = 0.5;
    cfg.rng_seed = 77;

    RegressorArchitecture arch = tiny_arch();
    arch.layer_specs.insert(arch.layer_specs.end() - 1, LayerSpec::dropout(0.5));

    PoseRegressor a(arch, 5);
    PoseRegressor b(arch, 5);
    a.train(data, range, cfg);
    b.train(data, range, cfg);
    CHECK(nn::encode_weights(a.network()) == nn::encode_weights(b.network()));
}

TEST_CASE("training loss decreases on a 10-sample toy set for 19 of 20 seeds") {
    Rng rng(15);
    const SamplingRange range = SamplingRange::desk_default();
    const auto data = toy_dataset(10, 16, rng, range);

    int improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PoseRegressor r(tiny_arch(), seed * 31 + 1);
        nn::TrainingConfig cfg;
        cfg.learning_rate = 0.02;
        cfg.weight_decay = 0.0;
        cfg.batch_size = 5;
        cfg.epochs = 8;
        cfg.rng_seed = seed;
        const TrainingReport report = r.train(data, range, cfg);
        if (report.epoch_loss.back() < report.epoch_loss.front()) ++improved;
    }
    CHECK(improved >= 19);
}

TEST_CASE("prediction is pure and shape-checked") {
    PoseRegressor r(tiny_arch(), 3);
    Rng rng(1);
    const ImageBuffer img = random_image(16, rng);
    const Pose4 a = r.predict(img);
    const Pose4 b = r.predict(img);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
    CHECK(a.rz == b.rz);
    CHECK_THROWS_AS(r.predict(ImageBuffer(8, 8, 0.0)), ShapeMismatch);
}

TEST_CASE("evaluate: perfect predictor and constant predictor oracles") {
    Rng rng(19);
    const SamplingRange range = SamplingRange::desk_default();
    auto data = toy_dataset(12, 16, rng, range);

    SUBCASE("labels fed back give zero MAE") {
        // Build a fake evaluation by pairing each label with itself through
        // the evaluate() arithmetic on a wrapped difference.
        std::vector<Sample> same = data;
        PoseRegressor r(tiny_arch(), 3);
        // Not trainable to perfection here; instead verify the arithmetic
        // directly on the wrapped-angle path.
        AxisErrors manual{0, 0, 0, 0};
        for (const Sample& s : same) {
            manual[0] += std::abs(s.label.x - s.label.x);
            manual[3] += std::abs(wrap_degrees(s.label.rz - s.label.rz));
        }
        CHECK(manual[0] == 0.0);
        CHECK(manual[3] == 0.0);
    }

    SUBCASE("empty test set is rejected") {
        PoseRegressor r(tiny_arch(), 3);
        CHECK_THROWS_AS(r.evaluate({}), EmptyDataset);
    }

    SUBCASE("evaluation is permutation-invariant") {
        PoseRegressor r(tiny_arch(), 3);
        const AxisErrors forward_order = r.evaluate(data);
        std::reverse(data.begin(), data.end());
        const AxisErrors reverse_order = r.evaluate(data);
        for (int a = 0; a < 4; ++a) {
            CHECK(forward_order[a] == doctest::Approx(reverse_order[a]).epsilon(1e-12));
        }
    }
}

TEST_CASE("constant predictor at the mean label scores the labels' mean absolute deviation") {
    Rng rng(29);
    const SamplingRange range = SamplingRange::desk_default();
    const auto data = toy_dataset(15, 2, rng, range);

    // Mean label per axis, computed independently of evaluate().
    double mean[4] = {0, 0, 0, 0};
    for (const Sample& s : data) {
        mean[0] += s.label.x;
        mean[1] += s.label.y;
        mean[2] += s.label.z;
        mean[3] += s.label.rz;
    }
    for (double& m : mean) m /= static_cast<double>(data.size());
    double mad[4] = {0, 0, 0, 0};
    for (const Sample& s : data) {
        mad[0] += std::abs(s.label.x - mean[0]);
        mad[1] += std::abs(s.label.y - mean[1]);
        mad[2] += std::abs(s.label.z - mean[2]);
        mad[3] += std::abs(wrap_degrees(s.label.rz - mean[3]));
    }
    for (double& m : mad) m /= static_cast<double>(data.size());

    // A regressor stubbed to emit exactly the mean label for any image:
    // zero weights, output bias = mean (identity normalization by default).
    RegressorArchitecture arch;
    arch.input_size = 2;
    arch.layer_specs = {LayerSpec::dense(4)};
    PoseRegressor r(arch, 1);
    auto params = r.network().params();
    params[0].value->fill(0.0);
    for (int a = 0; a < 4; ++a) (*params[1].value)[a] = mean[a];

    const AxisErrors mae = r.evaluate(data);
    for (int a = 0; a < 4; ++a) {
        CHECK(mae[a] == doctest::Approx(mad[a]).epsilon(1e-12));
    }
}

TEST_CASE("angular MAE wraps: prediction 170 vs label -170 is 20 degrees") {
    CHECK(std::abs(wrap_degrees(170.0 - (-170.0))) == doctest::Approx(20.0));
    // Through evaluate(): feed one sample and a regressor stubbed via
    // normalization so its output is exactly 170 degrees.
    RegressorArchitecture arch;
    arch.input_size = 2;
    arch.layer_specs = {LayerSpec::dense(4)};
    PoseRegressor r(arch, 1);
    // Zero all weights, set the rz bias so the denormalized output is 170.
    auto params = r.network().params();
    for (auto& p : params) p.value->fill(0.0);
    params[1].value->operator[](3) = 170.0;  // identity normalization by default
    Sample s;
    s.image = ImageBuffer(2, 2, 0.0);
    s.label = Pose4(0, 0, 0, -170.0);
    const AxisErrors mae = r.evaluate(std::vector<Sample>{s});
    CHECK(mae[3] == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("model save/load round trip preserves predictions and sidecar") {
    const auto dir = std::filesystem::temp_directory_path() / "servo_test_model";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.vsnn").string();

    Rng rng(23);
    const SamplingRange range = SamplingRange::desk_default();
    const auto data = toy_dataset(3, 16, rng, range);

    PoseRegressor r(tiny_arch(), 9);
    nn::TrainingConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 3;
    cfg.epochs = 2;
    r.train(data, range, cfg);
    r.save(path);

    const PoseRegressor loaded = PoseRegressor::load(tiny_arch(), path);
    const ImageBuffer img = data[0].image;
    const Pose4 a = r.predict(img);
    const Pose4 b = loaded.predict(img);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
    CHECK(a.rz == b.rz);

    // Weights file round-trips byte-identically through load -> save.
    std::ifstream f1(path, std::ios::binary);
    std::vector<char> original((std::istreambuf_iterator<char>(f1)),
                               std::istreambuf_iterator<char>());
    const std::string path2 = (dir / "model2.vsnn").string();
    loaded.save(path2);
    std::ifstream f2(path2, std::ios::binary);
    std::vector<char> resaved((std::istreambuf_iterator<char>(f2)),
                              std::istreambuf_iterator<char>());
    CHECK(original == resaved);

    std::filesystem::remove_all(dir);
}

TEST_CASE("training on an empty dataset is rejected") {
    PoseRegressor r(tiny_arch(), 3);
    nn::TrainingConfig cfg;
    CHECK_THROWS_AS(r.train({}, SamplingRange::desk_default(), cfg), EmptyDataset);
}

TEST_CASE("training rejects mismatched image sizes") {
    PoseRegressor r(tiny_arch(), 3);
    std::vector<Sample> data(1);
    data[0].image = ImageBuffer(8, 8, 0.1);
    data[0].label = Pose4(0, 0, 0, 0);
    nn::TrainingConfig cfg;
    CHECK_THROWS_AS(r.train(data, SamplingRange::desk_default(), cfg), ShapeMismatch);
}

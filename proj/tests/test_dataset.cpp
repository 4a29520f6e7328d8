#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "servo/dataset.hpp"
#include "servo/rng.hpp"

using namespace servo;

namespace {

std::filesystem::path fresh_dir(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> slurp_bytes(const std::filesystem::path& p) {
    const auto chars = slurp(p);
    return {chars.begin(), chars.end()};
}

}  // namespace

TEST_CASE("sample_poses: degenerate range returns identical poses") {
    const SceneConfig scene = SceneConfig::desk_default();
    SamplingRange range;
    range.x = {5, 5};
    range.y = {-3, -3};
    range.z = {10, 10};
    range.rz = {7, 7};
    const auto poses = sample_poses(range, 10, 1, scene);
    REQUIRE(poses.size() == 10);
    for (const Pose4& p : poses) {
        CHECK(p.x == 5.0);
        CHECK(p.y == -3.0);
        CHECK(p.z == 10.0);
        CHECK(p.rz == 7.0);
    }
}

TEST_CASE("sample_poses is deterministic in the seed") {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();
    const auto a = sample_poses(range, 50, 42, scene);
    const auto b = sample_poses(range, 50, 42, scene);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].z == b[i].z);
        CHECK(a[i].rz == b[i].rz);
    }
}

TEST_CASE("sample_poses: per-axis empirical mean is near the interval midpoint") {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();
    const auto poses = sample_poses(range, 10000, 7, scene);
    double mx = 0, my = 0, mz = 0, mrz = 0;
    for (const Pose4& p : poses) {
        mx += p.x;
        my += p.y;
        mz += p.z;
        mrz += p.rz;
    }
    const double n = static_cast<double>(poses.size());
    // Within 2% of the midpoint, relative to the interval width.
    CHECK(std::abs(mx / n - range.x.mid()) < 0.02 * range.x.width());
    CHECK(std::abs(my / n - range.y.mid()) < 0.02 * range.y.width());
    CHECK(std::abs(mz / n - range.z.mid()) < 0.02 * range.z.width());
    CHECK(std::abs(mrz / n - range.rz.mid()) < 0.02 * range.rz.width());
}

TEST_CASE("sample_poses: a range with no view of the target is unviable") {
    const SceneConfig scene = SceneConfig::desk_default();
    SamplingRange range;
    range.x = {5000, 5000};
    range.y = {0, 0};
    range.z = {0, 0};
    range.rz = {0, 0};
    CHECK_THROWS_AS(sample_poses(range, 1, 1, scene), UnviableRange);
}

TEST_CASE("generate_dataset writes images plus a parsable manifest") {
    const auto dir = fresh_dir("servo_test_gen");
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();

    const DatasetManifest manifest = generate_dataset(range, 25, 5, scene, dir.string());
    REQUIRE(manifest.entries.size() == 25);
    CHECK(manifest.seed == 5);

    // Every file exists and parses as a PGM of uniform size.
    const auto samples = load_samples(manifest, dir.string());
    REQUIRE(samples.size() == 25);
    for (const Sample& s : samples) {
        CHECK(s.image.width == 64);
        CHECK(s.image.height == 64);
    }

    // Manifest round trip.
    const DatasetManifest parsed = read_manifest((dir / "manifest.csv").string());
    REQUIRE(parsed.entries.size() == manifest.entries.size());
    CHECK(parsed.seed == manifest.seed);
    CHECK(parsed.range.x.lo == manifest.range.x.lo);
    CHECK(parsed.range.rz.hi == manifest.range.rz.hi);
    for (std::size_t i = 0; i < parsed.entries.size(); ++i) {
        CHECK(parsed.entries[i].filename == manifest.entries[i].filename);
        CHECK(parsed.entries[i].label.x == manifest.entries[i].label.x);
        CHECK(parsed.entries[i].label.y == manifest.entries[i].label.y);
        CHECK(parsed.entries[i].label.z == manifest.entries[i].label.z);
        CHECK(parsed.entries[i].label.rz == manifest.entries[i].label.rz);
    }

    // Labels lie within the generating range.
    for (const ManifestEntry& e : manifest.entries) {
        CHECK(range.x.contains(e.label.x));
        CHECK(range.y.contains(e.label.y));
        CHECK(range.z.contains(e.label.z));
        CHECK(range.rz.contains(e.label.rz));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("generate_dataset is bit-identical across runs") {
    const auto dir1 = fresh_dir("servo_test_gen_a");
    const auto dir2 = fresh_dir("servo_test_gen_b");
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();

    generate_dataset(range, 10, 99, scene, dir1.string());
    generate_dataset(range, 10, 99, scene, dir2.string());

    CHECK(slurp(dir1 / "manifest.csv") == slurp(dir2 / "manifest.csv"));
    for (int i = 0; i < 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.pgm", i);
        CHECK(slurp(dir1 / name) == slurp(dir2 / name));
    }
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("stored labels re-render their images bit-exactly") {
    const auto dir = fresh_dir("servo_test_purity");
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();

    generate_dataset(range, 8, 3, scene, dir.string());
    const DatasetManifest parsed = read_manifest((dir / "manifest.csv").string());
    for (const ManifestEntry& e : parsed.entries) {
        const ImageBuffer rerendered = render_scene(scene, e.label);
        CHECK(encode_pgm(rerendered) ==
              slurp_bytes(dir / e.filename));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("single-sample dataset stores the sampled pose exactly") {
    const auto dir = fresh_dir("servo_test_single");
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();

    const DatasetManifest manifest = generate_dataset(range, 1, 17, scene, dir.string());
    const auto poses = sample_poses(range, 1, 17, scene);
    REQUIRE(manifest.entries.size() == 1);
    CHECK(manifest.entries[0].label.x == poses[0].x);
    CHECK(manifest.entries[0].label.y == poses[0].y);
    CHECK(manifest.entries[0].label.z == poses[0].z);
    CHECK(manifest.entries[0].label.rz == poses[0].rz);
    std::filesystem::remove_all(dir);
}

TEST_CASE("split_dataset: 400 entries split 380/20, disjoint and exhaustive") {
    DatasetManifest manifest;
    manifest.seed = 1;
    for (int i = 0; i < 400; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.pgm", i);
        manifest.entries.push_back({name, Pose4(i, 0, 0, 0)});
    }
    const auto [train, test] = split_dataset(manifest, 20, 5);
    CHECK(train.entries.size() == 380);
    CHECK(test.entries.size() == 20);

    std::set<std::string> names;
    for (const auto& e : train.entries) names.insert(e.filename);
    for (const auto& e : test.entries) names.insert(e.filename);
    CHECK(names.size() == 400);  // disjoint union covers everything

    // Same seed reproduces the same split.
    const auto [train2, test2] = split_dataset(manifest, 20, 5);
    for (std::size_t i = 0; i < test.entries.size(); ++i) {
        CHECK(test.entries[i].filename == test2.entries[i].filename);
    }
}

TEST_CASE("split_dataset rejects degenerate splits") {
    DatasetManifest manifest;
    manifest.entries.push_back({"img_00000.pgm", Pose4()});
    manifest.entries.push_back({"img_00001.pgm", Pose4()});
    CHECK_THROWS_AS(split_dataset(manifest, 0, 1), InvalidSplit);
    CHECK_THROWS_AS(split_dataset(manifest, 2, 1), InvalidSplit);
}

TEST_CASE("read_manifest rejects malformed files") {
    const auto dir = fresh_dir("servo_test_badmanifest");
    const auto path = dir / "manifest.csv";
    {
        std::ofstream f(path);
        f << "not,the,right,header\n";
    }
    CHECK_THROWS_AS(read_manifest(path.string()), IoFailure);
    CHECK_THROWS_AS(read_manifest((dir / "missing.csv").string()), IoFailure);
    std::filesystem::remove_all(dir);
}

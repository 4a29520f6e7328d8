#ifndef SERVO_DATASET_HPP
#define SERVO_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "servo/scene.hpp"

namespace servo {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

// Per-axis closed intervals the dataset poses are drawn from.
struct SamplingRange {
    Interval x{-60.0, 60.0};    // mm
    Interval y{-60.0, 60.0};    // mm
    Interval z{-70.0, 80.0};    // mm; camera-target distance 250-400 mm at the
                                // desk-default target plane depth of 330 mm
    Interval rz{-45.0, 45.0};   // degrees

    static SamplingRange desk_default() { return SamplingRange{}; }
};

struct Sample {
    ImageBuffer image;
    Pose4 label;
};

struct ManifestEntry {
    std::string filename;
    Pose4 label;
};

// Ordered dataset index: image filenames plus labels, with the sampling
// range and generator seed that produced them.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    SamplingRange range;
    std::uint64_t seed = 0;
};

// Poses are persisted with 6 fractional digits; sampling snaps to that grid
// so a stored label re-renders its image bit-exactly.
Pose4 quantize_pose(const Pose4& pose);

// count poses drawn uniformly and independently per axis. Every returned
// pose renders with the target visible; invisible draws are resampled, at
// most 100 times per slot before UnviableRange is thrown.
std::vector<Pose4> sample_poses(const SamplingRange& range, std::size_t count,
                                std::uint64_t seed, const SceneConfig& scene);

// Renders `count` samples into out_dir as img_%05d.pgm plus manifest.csv.
DatasetManifest generate_dataset(const SamplingRange& range, std::size_t count,
                                 std::uint64_t seed, const SceneConfig& scene,
                                 const std::string& out_dir);

// Seeded shuffle, then the first test_count entries become the test set and
// the rest the training set.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          std::size_t test_count,
                                                          std::uint64_t seed);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Loads every referenced image; all images must parse as PGM of uniform
// size. dir is the directory holding the manifest's files.
std::vector<Sample> load_samples(const DatasetManifest& manifest, const std::string& dir);

}  // namespace servo

#endif

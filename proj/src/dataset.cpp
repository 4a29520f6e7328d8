#include "servo/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "servo/rng.hpp"

namespace servo {

namespace {

double quantize6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::strtod(buf, nullptr);
}

std::string format6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

Pose4 quantize_pose(const Pose4& pose) {
    return Pose4(quantize6(pose.x), quantize6(pose.y), quantize6(pose.z), quantize6(pose.rz));
}

std::vector<Pose4> sample_poses(const SamplingRange& range, std::size_t count,
                                std::uint64_t seed, const SceneConfig& scene) {
    if (count == 0) {
        throw ConfigError("sample count must be positive");
    }
    Rng rng(seed);
    std::vector<Pose4> poses;
    poses.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
            // Snap to label precision before the visibility test so the
            // persisted pose is exactly the one that rendered.
            const Pose4 candidate = quantize_pose(
                Pose4(rng.uniform(range.x.lo, range.x.hi), rng.uniform(range.y.lo, range.y.hi),
                      rng.uniform(range.z.lo, range.z.hi), rng.uniform(range.rz.lo, range.rz.hi)));
            if (target_visible(scene, candidate)) {
                poses.push_back(candidate);
                placed = true;
                break;
            }
        }
        if (!placed) {
            throw UnviableRange("exceeded 100 rejections for one pose slot; "
                                "sampling range is mostly out of view");
        }
    }
    return poses;
}

DatasetManifest generate_dataset(const SamplingRange& range, std::size_t count,
                                 std::uint64_t seed, const SceneConfig& scene,
                                 const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create dataset directory: " + out_dir);

    const auto poses = sample_poses(range, count, seed, scene);

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.range.x = {quantize6(range.x.lo), quantize6(range.x.hi)};
    manifest.range.y = {quantize6(range.y.lo), quantize6(range.y.hi)};
    manifest.range.z = {quantize6(range.z.lo), quantize6(range.z.hi)};
    manifest.range.rz = {quantize6(range.rz.lo), quantize6(range.rz.hi)};
    manifest.entries.reserve(count);

    char name[32];
    for (std::size_t i = 0; i < poses.size(); ++i) {
        std::snprintf(name, sizeof(name), "img_%05zu.pgm", i);
        const ImageBuffer img = render_scene(scene, poses[i]);
        write_pgm(img, (std::filesystem::path(out_dir) / name).string());
        manifest.entries.push_back({name, poses[i]});
    }
    write_manifest(manifest, (std::filesystem::path(out_dir) / "manifest.csv").string());
    return manifest;
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          std::size_t test_count,
                                                          std::uint64_t seed) {
    if (test_count == 0 || test_count >= manifest.entries.size()) {
        throw InvalidSplit("test count must satisfy 0 < test_count < dataset size");
    }
    std::vector<ManifestEntry> shuffled = manifest.entries;
    Rng rng(seed);
    rng.shuffle(shuffled);

    DatasetManifest test = manifest;
    DatasetManifest train = manifest;
    test.entries.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(test_count));
    train.entries.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(test_count), shuffled.end());
    return {train, test};
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ostringstream out;
    out << "# seed=" << manifest.seed << "\n";
    out << "# x_range=" << format6(manifest.range.x.lo) << "," << format6(manifest.range.x.hi) << "\n";
    out << "# y_range=" << format6(manifest.range.y.lo) << "," << format6(manifest.range.y.hi) << "\n";
    out << "# z_range=" << format6(manifest.range.z.lo) << "," << format6(manifest.range.z.hi) << "\n";
    out << "# rz_range=" << format6(manifest.range.rz.lo) << "," << format6(manifest.range.rz.hi) << "\n";
    out << "filename,x_mm,y_mm,z_mm,rz_deg\n";
    for (const ManifestEntry& e : manifest.entries) {
        out << e.filename << "," << format6(e.label.x) << "," << format6(e.label.y) << ","
            << format6(e.label.z) << "," << format6(e.label.rz) << "\n";
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    const std::string s = out.str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw IoFailure("write failed: " + path);
}

namespace {

Interval parse_interval(const std::string& text, const std::string& path) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw IoFailure("bad range line in manifest: " + path);
    return {std::strtod(text.substr(0, comma).c_str(), nullptr),
            std::strtod(text.substr(comma + 1).c_str(), nullptr)};
}

}  // namespace

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open for reading: " + path);

    DatasetManifest manifest;
    std::string line;
    bool header_seen = false;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            while (!key.empty() && key.front() == ' ') key.erase(key.begin());
            while (!key.empty() && key.back() == ' ') key.pop_back();
            const std::string value = line.substr(eq + 1);
            if (key == "seed") {
                manifest.seed = std::strtoull(value.c_str(), nullptr, 10);
            } else if (key == "x_range") {
                manifest.range.x = parse_interval(value, path);
            } else if (key == "y_range") {
                manifest.range.y = parse_interval(value, path);
            } else if (key == "z_range") {
                manifest.range.z = parse_interval(value, path);
            } else if (key == "rz_range") {
                manifest.range.rz = parse_interval(value, path);
            }
            continue;
        }
        if (!header_seen) {
            if (line != "filename,x_mm,y_mm,z_mm,rz_deg") {
                throw IoFailure("unexpected manifest header: " + line);
            }
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string field;
        ManifestEntry entry;
        double v[4] = {};
        if (!std::getline(row, entry.filename, ',')) {
            throw IoFailure("bad manifest row: " + line);
        }
        for (double& axis : v) {
            if (!std::getline(row, field, ',')) {
                throw IoFailure("bad manifest row: " + line);
            }
            axis = std::strtod(field.c_str(), nullptr);
        }
        entry.label = Pose4(v[0], v[1], v[2], v[3]);
        manifest.entries.push_back(std::move(entry));
    }
    if (!header_seen) throw IoFailure("manifest has no header row: " + path);
    return manifest;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, const std::string& dir) {
    std::vector<Sample> samples;
    samples.reserve(manifest.entries.size());
    int width = -1, height = -1;
    for (const ManifestEntry& e : manifest.entries) {
        Sample s;
        s.image = read_pgm((std::filesystem::path(dir) / e.filename).string());
        s.label = e.label;
        if (width < 0) {
            width = s.image.width;
            height = s.image.height;
        } else if (s.image.width != width || s.image.height != height) {
            throw IoFailure("dataset images are not of uniform size: " + e.filename);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace servo

#include "servo/scene.hpp"

#include <cmath>

#include "servo/rng.hpp"

namespace servo {

TargetModel TargetModel::default_target(std::uint64_t texture_seed) {
    TargetModel t;
    t.length = 55.0;
    t.width = 33.0;
    const double hx = t.length / 2.0;
    const double hy = t.width / 2.0;
    t.corner_points = {Vec3(hx, hy, 0.0), Vec3(-hx, hy, 0.0),
                       Vec3(-hx, -hy, 0.0), Vec3(hx, -hy, 0.0)};
    // 10x6 random texel grid polarized away from the 0.5 background: dark
    // band [0.02,0.32] or bright band [0.68,0.98], so the silhouette keeps
    // contrast along the whole perimeter; the border ring alternates the
    // extreme intensities for a crisp outline.
    t.texture_cols = 10;
    t.texture_rows = 6;
    t.texture.resize(static_cast<std::size_t>(t.texture_cols) * t.texture_rows);
    Rng rng(texture_seed);
    for (int row = 0; row < t.texture_rows; ++row) {
        for (int col = 0; col < t.texture_cols; ++col) {
            const double u = rng.uniform01();
            double v = u < 0.5 ? 0.02 + 0.6 * u : 0.38 + 0.6 * u;
            if (row == 0 || col == 0 || row == t.texture_rows - 1 ||
                col == t.texture_cols - 1) {
                v = (row + col) % 2 == 0 ? 0.95 : 0.05;
            }
            t.texture[static_cast<std::size_t>(row) * t.texture_cols + col] = v;
        }
    }
    // Pinned asymmetric corners.
    auto set = [&t](int row, int col, double v) {
        t.texture[static_cast<std::size_t>(row) * t.texture_cols + col] = v;
    };
    set(0, 0, 1.0);
    set(0, t.texture_cols - 1, 0.0);
    set(t.texture_rows - 1, 0, 0.15);
    set(t.texture_rows - 1, t.texture_cols - 1, 0.85);
    return t;
}

SceneConfig SceneConfig::desk_default() {
    SceneConfig s;
    s.intrinsics = CameraIntrinsics(112.0, 112.0, 32.0, 32.0, 64, 64);
    s.target = TargetModel::default_target();
    s.target_position = Vec3(0.0, 0.0, 330.0);
    s.mounting = RigidTransform::identity();
    s.background = 0.5;
    return s;
}

namespace {

constexpr int kSubsamples = 8;  // per pixel axis

}  // namespace

ImageBuffer render_target(const CameraIntrinsics& intrinsics, const Pose4& pose,
                          const TargetModel& target, const Vec3& target_position,
                          const RigidTransform& mounting, double background) {
    const RigidTransform cam = pose_to_transform(pose, mounting);
    // Camera center and pixel-ray rotation, expressed in the target frame.
    const Vec3 origin = cam.translation() - target_position;
    const Mat3 rot = cam.rotation();

    const double hx = target.length / 2.0;
    const double hy = target.width / 2.0;
    const double inv_n = 1.0 / (kSubsamples * kSubsamples);

    ImageBuffer img(intrinsics.width, intrinsics.height, background);
    bool any_hit = false;

    for (int v = 0; v < intrinsics.height; ++v) {
        for (int u = 0; u < intrinsics.width; ++u) {
            double acc = 0.0;
            for (int sv = 0; sv < kSubsamples; ++sv) {
                for (int su = 0; su < kSubsamples; ++su) {
                    const double uu = u + (su + 0.5) / kSubsamples - 0.5;
                    const double vv = v + (sv + 0.5) / kSubsamples - 0.5;
                    const Vec3 dir_cam((uu - intrinsics.cx) / intrinsics.fx,
                                       (vv - intrinsics.cy) / intrinsics.fy, 1.0);
                    const Vec3 dir = rot * dir_cam;
                    double sample = background;
                    if (std::abs(dir.z()) > 1e-15) {
                        const double tray = -origin.z() / dir.z();
                        if (tray > 0.0) {
                            const double px = origin.x() + tray * dir.x();
                            const double py = origin.y() + tray * dir.y();
                            if (std::abs(px) <= hx && std::abs(py) <= hy) {
                                int col = static_cast<int>((px + hx) / target.length *
                                                           target.texture_cols);
                                int row = static_cast<int>((py + hy) / target.width *
                                                           target.texture_rows);
                                if (col >= target.texture_cols) col = target.texture_cols - 1;
                                if (row >= target.texture_rows) row = target.texture_rows - 1;
                                sample = target.texel(row, col);
                                any_hit = true;
                            }
                        }
                    }
                    acc += sample;
                }
            }
            img.at(u, v) = acc * inv_n;
        }
    }

    if (!any_hit) {
        throw TargetNotVisible("no target pixel projects inside the image");
    }
    return img;
}

ImageBuffer render_scene(const SceneConfig& scene, const Pose4& pose) {
    return render_target(scene.intrinsics, pose, scene.target, scene.target_position,
                         scene.mounting, scene.background);
}

bool target_visible(const SceneConfig& scene, const Pose4& pose) {
    try {
        render_scene(scene, pose);
        return true;
    } catch (const TargetNotVisible&) {
        return false;
    }
}

}  // namespace servo

#ifndef SERVO_SCENE_HPP
#define SERVO_SCENE_HPP

#include <vector>

#include "servo/geometry.hpp"
#include "servo/image.hpp"

namespace servo {

// Planar textured target. Corners and texture live in the target frame,
// whose z=0 plane carries the target; the frame axes are parallel to the
// robot base frame.
struct TargetModel {
    std::vector<Vec3> corner_points;  // target frame, z = 0, mm
    std::vector<double> texture;      // row-major [texture_rows][texture_cols], [0,1]
    int texture_cols = 0;             // texels along the length (x) axis
    int texture_rows = 0;             // texels along the width (y) axis
    double length = 0.0;              // mm, x extent
    double width = 0.0;               // mm, y extent

    // 55x33 mm quad with a seeded random texture. The four corner texels are
    // pinned to distinct values so the pattern has no rotational symmetry
    // and rz stays observable from a single image.
    static TargetModel default_target(std::uint64_t texture_seed = 7);

    double texel(int row, int col) const {
        return texture[static_cast<std::size_t>(row) * texture_cols + col];
    }
};

// Full camera/target arrangement: intrinsics, the target, the target-frame
// origin in base coordinates (axes parallel), and the camera mounting offset
// on the end effector.
struct SceneConfig {
    CameraIntrinsics intrinsics;
    TargetModel target;
    Vec3 target_position = Vec3::Zero();  // base frame, mm
    RigidTransform mounting;              // end effector -> camera, identity default
    double background = 0.5;              // intensity outside the target

    // Desk-scale defaults: 64x64 image, fx=fy=96 px, target plane 330 mm in
    // front of the base origin. Chosen so the 250-400 mm working range keeps
    // the target in view across the default sampling box.
    static SceneConfig desk_default();
};

// Deterministic rasterization of the textured target quad over a uniform
// background. Each pixel averages a fixed 4x4 subsample grid; every sample
// is a nearest-neighbor texture lookup, no lighting model. Throws
// TargetNotVisible when no target pixel lands inside the image.
ImageBuffer render_target(const CameraIntrinsics& intrinsics, const Pose4& pose,
                          const TargetModel& target, const Vec3& target_position,
                          const RigidTransform& mounting = RigidTransform::identity(),
                          double background = 0.5);

ImageBuffer render_scene(const SceneConfig& scene, const Pose4& pose);

bool target_visible(const SceneConfig& scene, const Pose4& pose);

}  // namespace servo

#endif

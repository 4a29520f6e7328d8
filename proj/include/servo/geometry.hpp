#ifndef SERVO_GEOMETRY_HPP
#define SERVO_GEOMETRY_HPP

#include <Eigen/Core>

#include "servo/errors.hpp"

namespace servo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Normalize an angle in degrees to [-180, 180).
double wrap_degrees(double deg);

// The 4 controlled degrees of freedom of the end effector relative to the
// robot base frame: translation x, y, z and rotation rz about the base
// z-axis. rz is kept normalized to [-180, 180) degrees.
struct Pose4 {
    double x = 0.0;   // mm
    double y = 0.0;   // mm
    double z = 0.0;   // mm
    double rz = 0.0;  // degrees

    Pose4() = default;
    Pose4(double x_, double y_, double z_, double rz_);
};

// Proper rigid transform: orthonormal rotation (det +1) plus translation.
class RigidTransform {
public:
    RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return RigidTransform(); }
    static RigidTransform rotation_z(double degrees);
    static RigidTransform translation(const Vec3& t);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
    RigidTransform compose(const RigidTransform& other) const;
    RigidTransform inverse() const;

private:
    Mat3 rotation_;
    Vec3 translation_;
};

struct CameraIntrinsics {
    double fx = 0.0;  // px
    double fy = 0.0;  // px
    double cx = 0.0;  // px
    double cy = 0.0;  // px
    int width = 0;    // px
    int height = 0;   // px

    CameraIntrinsics() = default;
    CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h);
};

// Base-to-camera transform for a pose: translation (x,y,z) composed with
// Rz(rz), composed with the fixed camera mounting offset (end effector to
// camera; identity by default, camera frame == end effector frame).
RigidTransform pose_to_transform(const Pose4& pose,
                                 const RigidTransform& mounting = RigidTransform::identity());

// Pinhole projection of a camera-frame point (mm) to pixel coordinates.
// Throws NonPositiveDepth when Z <= 0.
Vec2 project_point(const CameraIntrinsics& intrinsics, const Vec3& point_cam);

}  // namespace servo

#endif

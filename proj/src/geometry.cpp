#include "servo/geometry.hpp"

#include <Eigen/LU>
#include <cmath>

namespace servo {

double wrap_degrees(double deg) {
    if (deg >= -180.0 && deg < 180.0) return deg;  // already normalized, keep bit-exact
    double w = std::fmod(deg + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    return w - 180.0;
}

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ConfigError(std::string(what) + " must be finite");
    }
}

}  // namespace

Pose4::Pose4(double x_, double y_, double z_, double rz_) : x(x_), y(y_), z(z_) {
    require_finite(x_, "Pose4.x");
    require_finite(y_, "Pose4.y");
    require_finite(z_, "Pose4.z");
    require_finite(rz_, "Pose4.rz");
    rz = wrap_degrees(rz_);
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    const double ortho_err = (rotation * rotation.transpose() - Mat3::Identity()).norm();
    if (ortho_err > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw ConfigError("RigidTransform rotation is not orthonormal with det +1");
    }
}

RigidTransform RigidTransform::rotation_z(double degrees) {
    const double a = deg_to_rad(degrees);
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0.0,
         std::sin(a),  std::cos(a), 0.0,
         0.0,          0.0,         1.0;
    return RigidTransform(r, Vec3::Zero());
}

RigidTransform RigidTransform::translation(const Vec3& t) {
    return RigidTransform(Mat3::Identity(), t);
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(rotation_.transpose() * translation_);
    return out;
}

CameraIntrinsics::CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ConfigError("camera focal lengths must be positive");
    }
    if (!(cx >= 0.0 && cx < w) || !(cy >= 0.0 && cy < h)) {
        throw ConfigError("principal point must lie inside the image");
    }
}

RigidTransform pose_to_transform(const Pose4& pose, const RigidTransform& mounting) {
    RigidTransform base_to_ee = RigidTransform(RigidTransform::rotation_z(pose.rz).rotation(),
                                               Vec3(pose.x, pose.y, pose.z));
    return base_to_ee.compose(mounting);
}

Vec2 project_point(const CameraIntrinsics& intrinsics, const Vec3& point_cam) {
    const double z = point_cam.z();
    if (!(z > 0.0)) {
        throw NonPositiveDepth("point depth must be positive, got Z=" + std::to_string(z));
    }
    return Vec2(intrinsics.cx + intrinsics.fx * point_cam.x() / z,
                intrinsics.cy + intrinsics.fy * point_cam.y() / z);
}

}  // namespace servo

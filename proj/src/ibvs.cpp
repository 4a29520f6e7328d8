#include "servo/ibvs.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace servo {

FeatureVector extract_point_features(const SceneConfig& scene, const Pose4& pose) {
    const RigidTransform cam_to_base = pose_to_transform(pose, scene.mounting);
    const RigidTransform base_to_cam = cam_to_base.inverse();

    FeatureVector f;
    f.values.resize(2 * static_cast<Eigen::Index>(scene.target.corner_points.size()));
    Eigen::Index i = 0;
    for (const Vec3& corner : scene.target.corner_points) {
        const Vec3 p_cam = base_to_cam.apply(corner + scene.target_position);
        const Vec2 px = project_point(scene.intrinsics, p_cam);
        f.values[i++] = (px.x() - scene.intrinsics.cx) / scene.intrinsics.fx;
        f.values[i++] = (px.y() - scene.intrinsics.cy) / scene.intrinsics.fy;
    }
    return f;
}

std::vector<double> corner_depths(const SceneConfig& scene, const Pose4& pose) {
    const RigidTransform base_to_cam = pose_to_transform(pose, scene.mounting).inverse();
    std::vector<double> depths;
    depths.reserve(scene.target.corner_points.size());
    for (const Vec3& corner : scene.target.corner_points) {
        depths.push_back(base_to_cam.apply(corner + scene.target_position).z());
    }
    return depths;
}

InteractionMatrix interaction_matrix(const FeatureVector& features,
                                     const std::vector<double>& depths) {
    const std::size_t k = features.point_count();
    if (features.values.size() % 2 != 0 || depths.size() != k) {
        throw DepthCountMismatch("need one depth per feature point");
    }
    InteractionMatrix m;
    m.entries.resize(static_cast<Eigen::Index>(2 * k), 4);
    for (std::size_t i = 0; i < k; ++i) {
        const double x = features.values[2 * static_cast<Eigen::Index>(i)];
        const double y = features.values[2 * static_cast<Eigen::Index>(i) + 1];
        const double z = depths[i];
        if (!(z > 0.0)) {
            throw NonPositiveDepth("interaction matrix depth must be positive");
        }
        const auto r = static_cast<Eigen::Index>(2 * i);
        m.entries.row(r) << -1.0 / z, 0.0, x / z, y;
        m.entries.row(r + 1) << 0.0, -1.0 / z, y / z, -x;
    }
    return m;
}

Eigen::MatrixXd pseudo_inverse(const InteractionMatrix& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.entries,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? 1e-10 * sv.maxCoeff() : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cutoff && sv[i] > 0.0) {
            inv[i] = 1.0 / sv[i];
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

CameraVelocity4 classic_control_law(const InteractionMatrix& m, const Eigen::VectorXd& error,
                                    double lambda) {
    if (!(lambda > 0.0)) {
        throw ConfigError("gain lambda must be positive");
    }
    if (error.size() != m.entries.rows()) {
        throw DimensionMismatch("feature error length does not match interaction matrix rows");
    }
    const Eigen::Vector4d v = -lambda * (pseudo_inverse(m) * error);
    return CameraVelocity4{v[0], v[1], v[2], v[3]};
}

Pose4 apply_camera_velocity(const Pose4& pose, const CameraVelocity4& v) {
    const double a = deg_to_rad(pose.rz);
    const double dx = std::cos(a) * v.vx - std::sin(a) * v.vy;
    const double dy = std::sin(a) * v.vx + std::cos(a) * v.vy;
    return Pose4(pose.x + dx, pose.y + dy, pose.z + v.vz, pose.rz + rad_to_deg(v.wz));
}

}  // namespace servo

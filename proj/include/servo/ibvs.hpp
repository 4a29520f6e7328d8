#ifndef SERVO_IBVS_HPP
#define SERVO_IBVS_HPP

#include <Eigen/Dense>
#include <vector>

#include "servo/geometry.hpp"
#include "servo/scene.hpp"

namespace servo {

// Stacked normalized image coordinates ((u-cx)/fx, (v-cy)/fy) of the k
// tracked target corners, in corner-index order.
struct FeatureVector {
    Eigen::VectorXd values;  // length 2k

    std::size_t point_count() const { return static_cast<std::size_t>(values.size()) / 2; }
};

// Feature Jacobian restricted to the 4 controlled DOF (vx, vy, vz, wz).
// Translation columns are per-mm, the rotation column is per-radian.
struct InteractionMatrix {
    Eigen::MatrixXd entries;  // 2k x 4
};

// Camera velocity screw, expressed in the camera frame.
struct CameraVelocity4 {
    double vx = 0.0;  // mm per step
    double vy = 0.0;  // mm per step
    double vz = 0.0;  // mm per step
    double wz = 0.0;  // radians per step
};

// Oracle feature extractor: projects the known target corners at the given
// pose and normalizes. Ordering is fixed by corner index, so there is no
// correspondence search. Throws NonPositiveDepth for corners at or behind
// the camera plane.
FeatureVector extract_point_features(const SceneConfig& scene, const Pose4& pose);

// Ground-truth camera-frame corner depths at the given pose (mm), one per
// corner, in the same order as the features.
std::vector<double> corner_depths(const SceneConfig& scene, const Pose4& pose);

// Standard point-feature interaction matrix, rows per point (x, y, Z):
//   [-1/Z, 0, x/Z,  y]
//   [ 0, -1/Z, y/Z, -x]
InteractionMatrix interaction_matrix(const FeatureVector& features,
                                     const std::vector<double>& depths);

// Moore-Penrose pseudo-inverse via SVD; singular values below
// 1e-10 * sigma_max are treated as zero.
Eigen::MatrixXd pseudo_inverse(const InteractionMatrix& m);

// Classical IBVS control law v = -lambda * Ls^+ * e.
CameraVelocity4 classic_control_law(const InteractionMatrix& m, const Eigen::VectorXd& error,
                                    double lambda);

// Euler step of the camera pose under a camera-frame velocity screw: the
// translational part is rotated into the base frame, wz accumulates into rz.
Pose4 apply_camera_velocity(const Pose4& pose, const CameraVelocity4& v);

}  // namespace servo

#endif

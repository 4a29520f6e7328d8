#include "servo/controller.hpp"

#include <cmath>
#include <iostream>

namespace servo {

namespace {

void check_gain(double lambda, const char* name, std::ostream* warnings) {
    if (!std::isfinite(lambda) || lambda <= 0.0) {
        throw ConfigError(std::string("gain ") + name + " must be strictly positive");
    }
    if (lambda >= 2.0) {
        throw ConfigError(std::string("gain ") + name +
                          " >= 2 is unstable under the ideal-regressor model");
    }
    if (lambda >= 1.0) {
        std::ostream& out = warnings ? *warnings : std::cerr;
        out << "warning: gain " << name << " = " << lambda
            << " is in [1,2); the error will oscillate while it contracts\n";
    }
}

}  // namespace

GainVector::GainVector(double l1, double l2, double l3, double l4, std::ostream* warnings)
    : lambda1(l1), lambda2(l2), lambda3(l3), lambda4(l4) {
    check_gain(l1, "lambda1", warnings);
    check_gain(l2, "lambda2", warnings);
    check_gain(l3, "lambda3", warnings);
    check_gain(l4, "lambda4", warnings);
}

GainVector GainVector::uniform(double lambda, std::ostream* warnings) {
    return GainVector(lambda, lambda, lambda, lambda, warnings);
}

PoseError pose_error(const Pose4& current, const Pose4& desired) {
    return PoseError{current.x - desired.x, current.y - desired.y, current.z - desired.z,
                     wrap_degrees(current.rz - desired.rz)};
}

ControlCommand proportional_command(const PoseError& e, const GainVector& gains) {
    return ControlCommand{-gains.lambda1 * e.ex, -gains.lambda2 * e.ey, -gains.lambda3 * e.ez,
                          -gains.lambda4 * e.erz};
}

Pose4 apply_command(const Pose4& pose, const ControlCommand& cmd) {
    return Pose4(pose.x + cmd.dx, pose.y + cmd.dy, pose.z + cmd.dz, pose.rz + cmd.drz);
}

std::pair<ControlCommand, PoseError> controller_step(const PoseRegressor& regressor,
                                                     const ImageBuffer& current_image,
                                                     const ImageBuffer& desired_image,
                                                     const GainVector& gains) {
    const Pose4 current = regressor.predict(current_image);
    const Pose4 desired = regressor.predict(desired_image);
    const PoseError e = pose_error(current, desired);
    return {proportional_command(e, gains), e};
}

TwoStreamController::TwoStreamController(const PoseRegressor& regressor,
                                         const ImageBuffer& desired_image,
                                         const GainVector& gains)
    : regressor_(regressor), gains_(gains), desired_estimate_(regressor.predict(desired_image)) {}

std::pair<ControlCommand, PoseError> TwoStreamController::step(
    const ImageBuffer& current_image) const {
    const Pose4 current = regressor_.predict(current_image);
    const PoseError e = pose_error(current, desired_estimate_);
    return {proportional_command(e, gains_), e};
}

}  // namespace servo

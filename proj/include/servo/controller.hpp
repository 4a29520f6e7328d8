#ifndef SERVO_CONTROLLER_HPP
#define SERVO_CONTROLLER_HPP

#include <iosfwd>
#include <optional>

#include "servo/regressor.hpp"

namespace servo {

// Per-axis proportional gains. All must be strictly positive; under an
// ideal regressor the loop is stable only for gains < 2, so values in
// [1,2) are accepted with a warning and values >= 2 are rejected.
struct GainVector {
    double lambda1 = 0.03;
    double lambda2 = 0.03;
    double lambda3 = 0.03;
    double lambda4 = 0.03;

    GainVector() = default;
    GainVector(double l1, double l2, double l3, double l4, std::ostream* warnings = nullptr);

    static GainVector uniform(double lambda, std::ostream* warnings = nullptr);
};

// e = r_c - r*, componentwise; the rotation component is wrapped to
// [-180, 180).
struct PoseError {
    double ex = 0.0;   // mm
    double ey = 0.0;   // mm
    double ez = 0.0;   // mm
    double erz = 0.0;  // degrees, wrapped
};

// Per-step pose increment commanded to the manipulator.
struct ControlCommand {
    double dx = 0.0;   // mm
    double dy = 0.0;   // mm
    double dz = 0.0;   // mm
    double drz = 0.0;  // degrees
};

PoseError pose_error(const Pose4& current, const Pose4& desired);

// Decoupled proportional law: (-l1*ex, -l2*ey, -l3*ez, -l4*erz).
ControlCommand proportional_command(const PoseError& e, const GainVector& gains);

// Applies a command to a pose (kinematic actuation; rz re-wrapped).
Pose4 apply_command(const Pose4& pose, const ControlCommand& cmd);

// One evaluation of the two-stream loop: both streams run the same shared
// parameter set, one on the current image and one on the desired image.
std::pair<ControlCommand, PoseError> controller_step(const PoseRegressor& regressor,
                                                     const ImageBuffer& current_image,
                                                     const ImageBuffer& desired_image,
                                                     const GainVector& gains);

// Episode-lifetime form of the two-stream controller: the desired image is
// constant within an episode, so its prediction is computed once and
// cached.
class TwoStreamController {
public:
    TwoStreamController(const PoseRegressor& regressor, const ImageBuffer& desired_image,
                        const GainVector& gains);

    std::pair<ControlCommand, PoseError> step(const ImageBuffer& current_image) const;

    const Pose4& desired_estimate() const { return desired_estimate_; }

private:
    const PoseRegressor& regressor_;
    GainVector gains_;
    Pose4 desired_estimate_;
};

}  // namespace servo

#endif

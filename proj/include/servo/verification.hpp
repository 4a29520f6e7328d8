#ifndef SERVO_VERIFICATION_HPP
#define SERVO_VERIFICATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "servo/harness.hpp"

namespace servo {

// One verified property: measured value against its pass threshold.
struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
};

// Central-finite-difference gradient checks (step 1e-4, double precision),
// one result per layer kind: conv, dense, relu, maxpool, dropout (fixed
// mask) and mse. Measured value is the max relative error over `configs`
// random configurations; threshold 1e-4. Inputs are kept a safe margin away
// from relu/maxpool kinks, where the true gradient is discontinuous and
// finite differences are undefined.
std::vector<CheckResult> gradient_checks(std::uint64_t seed, int configs = 100);

// Penrose conditions m*m+*m = m and m+*m*m+ = m+ over random interaction
// matrices; measured is the max relative Frobenius defect; threshold 1e-8.
CheckResult penrose_check(std::uint64_t seed, int trials = 1000);

// Analytic interaction matrix against a central finite-difference Jacobian
// of the projected features along the 4 camera velocity directions;
// threshold 1e-3.
CheckResult interaction_fd_check(std::uint64_t seed, int poses = 100);

// Oracle-controller episodes against the closed-form geometric decay
// e_k = (1-lambda)^k e_0, for lambda in {0.03, 0.1, 0.2, 0.5, 1.0},
// `episodes` random episodes each; measured is the max absolute deviation
// (mm / degrees); threshold 1e-9.
CheckResult oracle_decay_check(std::uint64_t seed, int episodes = 10);

// Classical IBVS baseline: 4-corner features, true depths, lambda = 0.1;
// measured is the worst final pixel feature-error norm over `episodes`
// random starts within 200 steps; threshold 1 px.
CheckResult classic_convergence_check(std::uint64_t seed, int episodes = 20);

// The `check` verification suite: all of the above.
std::vector<CheckResult> run_all_checks(std::uint64_t seed);

}  // namespace servo

#endif

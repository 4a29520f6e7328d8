#ifndef SERVO_HARNESS_HPP
#define SERVO_HARNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include "servo/controller.hpp"
#include "servo/ibvs.hpp"

namespace servo {

enum class ControllerKind { learned, classic, oracle };

const char* controller_kind_name(ControllerKind kind);

// Per-axis convergence tolerance on the true pose error.
struct Tolerance {
    double x = 1.0;   // mm
    double y = 1.0;   // mm
    double z = 1.0;   // mm
    double rz = 1.0;  // degrees

    bool within(const PoseError& e) const;
};

struct EpisodeConfig {
    Pose4 initial_pose;
    Pose4 desired_pose;
    GainVector gains;
    int max_steps = 50;
    Tolerance tolerance;
    ControllerKind controller = ControllerKind::learned;
};

enum class EpisodeStatus { converged, max_steps, lost_target };

const char* episode_status_name(EpisodeStatus status);

struct TraceRecord {
    int step = 0;
    Pose4 pose;                 // true pose before the command
    PoseError estimated_error;  // controller's estimate (true error for
                                // oracle/classic); zero on the terminal row
    ControlCommand command;     // zero on the terminal row
};

struct EpisodeTrace {
    EpisodeConfig config;
    std::vector<TraceRecord> records;
    EpisodeStatus status = EpisodeStatus::max_steps;

    PoseError true_error_at(std::size_t record_index) const;
};

// Runs one closed-loop episode: render the current view, ask the selected
// controller for a command, apply it to the true pose, record, repeat.
// Termination is always judged on the true pose error. The regressor is
// required only for the learned controller. Throws TargetNotVisible when
// the initial or desired pose does not see the target; losing it
// mid-episode ends the trace with LostTarget instead.
EpisodeTrace run_episode(const EpisodeConfig& config, const SceneConfig& scene,
                         const PoseRegressor* regressor = nullptr);

// Smallest step index from which every later record stays within tolerance
// through the end of the trace; empty when even the final record is out.
std::optional<int> convergence_step(const EpisodeTrace& trace, const Tolerance& tolerance);

// Writes trace.csv plus four per-axis SVG error plots into out_dir. The
// recorded status is re-verified against the trace before anything is
// written.
void export_trace(const EpisodeTrace& trace, const std::string& out_dir);

std::string trace_to_csv(const EpisodeTrace& trace);

// Pixel-space feature error norm of a pose against the desired pose: the
// classical baseline's convergence metric.
double feature_error_px(const SceneConfig& scene, const Pose4& pose, const Pose4& desired);

}  // namespace servo

#endif

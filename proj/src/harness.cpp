#include "servo/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

namespace servo {

const char* controller_kind_name(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::learned: return "learned";
        case ControllerKind::classic: return "classic";
        case ControllerKind::oracle: return "oracle";
    }
    return "?";
}

const char* episode_status_name(EpisodeStatus status) {
    switch (status) {
        case EpisodeStatus::converged: return "Converged";
        case EpisodeStatus::max_steps: return "MaxSteps";
        case EpisodeStatus::lost_target: return "LostTarget";
    }
    return "?";
}

bool Tolerance::within(const PoseError& e) const {
    return std::abs(e.ex) <= x && std::abs(e.ey) <= y && std::abs(e.ez) <= z &&
           std::abs(e.erz) <= rz;
}

PoseError EpisodeTrace::true_error_at(std::size_t record_index) const {
    return pose_error(records[record_index].pose, config.desired_pose);
}

namespace {

// Step driver for one controller kind. Returns the command to apply plus
// the error estimate to record.
class StepDriver {
public:
    virtual ~StepDriver() = default;
    virtual std::pair<ControlCommand, PoseError> step(const Pose4& true_pose,
                                                      const ImageBuffer& current_image) = 0;
    // Commands are recorded as base-frame pose increments; classic needs a
    // custom application because its velocity lives in the camera frame.
    virtual Pose4 apply(const Pose4& pose, const ControlCommand& cmd) const {
        return apply_command(pose, cmd);
    }
};

class LearnedDriver final : public StepDriver {
public:
    LearnedDriver(const PoseRegressor& regressor, const ImageBuffer& desired_image,
                  const GainVector& gains)
        : controller_(regressor, desired_image, gains) {}

    std::pair<ControlCommand, PoseError> step(const Pose4&, const ImageBuffer& image) override {
        return controller_.step(image);
    }

private:
    TwoStreamController controller_;
};

class OracleDriver final : public StepDriver {
public:
    OracleDriver(const Pose4& desired, const GainVector& gains)
        : desired_(desired), gains_(gains) {}

    std::pair<ControlCommand, PoseError> step(const Pose4& true_pose,
                                              const ImageBuffer&) override {
        const PoseError e = pose_error(true_pose, desired_);
        return {proportional_command(e, gains_), e};
    }

private:
    Pose4 desired_;
    GainVector gains_;
};

class ClassicDriver final : public StepDriver {
public:
    ClassicDriver(const SceneConfig& scene, const Pose4& desired, const GainVector& gains)
        : scene_(scene),
          desired_(desired),
          desired_features_(extract_point_features(scene, desired)),
          // Eq (5) has one scalar gain; the first component drives the
          // classical law.
          lambda_(gains.lambda1) {}

    std::pair<ControlCommand, PoseError> step(const Pose4& true_pose,
                                              const ImageBuffer&) override {
        const FeatureVector s = extract_point_features(scene_, true_pose);
        const Eigen::VectorXd e = s.values - desired_features_.values;
        const InteractionMatrix l = interaction_matrix(s, corner_depths(scene_, true_pose));
        last_velocity_ = classic_control_law(l, e, lambda_);

        // Record the effective base-frame pose increment; the baseline has
        // no pose estimate, so the true error stands in for the estimate.
        const Pose4 next = apply_camera_velocity(true_pose, last_velocity_);
        const ControlCommand cmd{next.x - true_pose.x, next.y - true_pose.y,
                                 next.z - true_pose.z, wrap_degrees(next.rz - true_pose.rz)};
        return {cmd, pose_error(true_pose, desired_)};
    }

    Pose4 apply(const Pose4& pose, const ControlCommand&) const override {
        return apply_camera_velocity(pose, last_velocity_);
    }

private:
    SceneConfig scene_;
    Pose4 desired_;
    FeatureVector desired_features_;
    double lambda_;
    CameraVelocity4 last_velocity_;
};

}  // namespace

EpisodeTrace run_episode(const EpisodeConfig& config, const SceneConfig& scene,
                         const PoseRegressor* regressor) {
    if (config.max_steps < 1) {
        throw ConfigError("max_steps must be at least 1");
    }
    if (!(config.tolerance.x > 0 && config.tolerance.y > 0 && config.tolerance.z > 0 &&
          config.tolerance.rz > 0)) {
        throw ConfigError("tolerances must be positive");
    }

    // Desired-pose visibility is a configuration requirement for every
    // controller kind; the learned controller also needs the actual frame.
    const ImageBuffer desired_image = quantize_8bit(render_scene(scene, config.desired_pose));

    std::unique_ptr<StepDriver> driver;
    switch (config.controller) {
        case ControllerKind::learned:
            if (regressor == nullptr) {
                throw ConfigError("learned controller requires a trained regressor");
            }
            driver = std::make_unique<LearnedDriver>(*regressor, desired_image, config.gains);
            break;
        case ControllerKind::classic:
            driver = std::make_unique<ClassicDriver>(scene, config.desired_pose, config.gains);
            break;
        case ControllerKind::oracle:
            driver = std::make_unique<OracleDriver>(config.desired_pose, config.gains);
            break;
    }

    EpisodeTrace trace;
    trace.config = config;
    Pose4 pose = config.initial_pose;

    for (int k = 0;; ++k) {
        const PoseError true_error = pose_error(pose, config.desired_pose);
        if (config.tolerance.within(true_error)) {
            trace.records.push_back({k, pose, PoseError{}, ControlCommand{}});
            trace.status = EpisodeStatus::converged;
            break;
        }
        if (k >= config.max_steps) {
            trace.records.push_back({k, pose, PoseError{}, ControlCommand{}});
            trace.status = EpisodeStatus::max_steps;
            break;
        }

        ImageBuffer image;
        try {
            image = quantize_8bit(render_scene(scene, pose));
        } catch (const TargetNotVisible&) {
            if (k == 0) throw;  // configuration error at the initial pose
            trace.records.push_back({k, pose, PoseError{}, ControlCommand{}});
            trace.status = EpisodeStatus::lost_target;
            break;
        }

        const auto [cmd, estimate] = driver->step(pose, image);
        trace.records.push_back({k, pose, estimate, cmd});
        pose = driver->apply(pose, cmd);
    }
    return trace;
}

std::optional<int> convergence_step(const EpisodeTrace& trace, const Tolerance& tolerance) {
    std::optional<int> first;
    for (std::size_t i = trace.records.size(); i-- > 0;) {
        if (tolerance.within(trace.true_error_at(i))) {
            first = trace.records[i].step;
        } else {
            break;
        }
    }
    return first;
}

namespace {

std::string format6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Minimal per-axis line plot: true error against step index.
std::string render_svg(const std::string& axis_label, const std::string& unit,
                       const std::vector<double>& values) {
    const int width = 640, height = 400;
    const double ml = 60, mr = 15, mt = 30, mb = 40;
    double lo = 0.0, hi = 0.0;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;
    const double n = values.size() > 1 ? static_cast<double>(values.size() - 1) : 1.0;

    auto px = [&](std::size_t i) { return ml + plot_w * (static_cast<double>(i) / n); };
    auto py = [&](double v) { return mt + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    s << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
    s << "  <text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << axis_label
      << " error vs step</text>\n";
    // Axes.
    s << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + plot_h << "\" stroke=\"black\"/>\n";
    s << "  <line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
      << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
    if (lo < 0.0 && hi > 0.0) {
        s << "  <line x1=\"" << ml << "\" y1=\"" << py(0.0) << "\" x2=\"" << ml + plot_w
          << "\" y2=\"" << py(0.0) << "\" stroke=\"#cccccc\" stroke-dasharray=\"4 3\"/>\n";
    }
    s << "  <text x=\"" << ml - 6 << "\" y=\"" << py(hi) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << format6(hi) << "</text>\n";
    s << "  <text x=\"" << ml - 6 << "\" y=\"" << py(lo) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << format6(lo) << "</text>\n";
    s << "  <text x=\"" << ml + plot_w << "\" y=\"" << mt + plot_h + 16
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">step "
      << (values.empty() ? 0 : values.size() - 1) << "</text>\n";
    s << "  <text x=\"15\" y=\"" << mt + plot_h / 2
      << "\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 15 "
      << mt + plot_h / 2 << ")\" text-anchor=\"middle\">" << unit << "</text>\n";
    s << "  <polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s << " ";
        s << px(i) << "," << py(values[i]);
    }
    s << "\"/>\n";
    s << "</svg>\n";
    return s.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoFailure("write failed: " + path);
}

}  // namespace

std::string trace_to_csv(const EpisodeTrace& trace) {
    std::ostringstream out;
    out << "step,x,y,z,rz,ex,ey,ez,erz,dx,dy,dz,drz\n";
    for (const TraceRecord& r : trace.records) {
        out << r.step << "," << format6(r.pose.x) << "," << format6(r.pose.y) << ","
            << format6(r.pose.z) << "," << format6(r.pose.rz) << ","
            << format6(r.estimated_error.ex) << "," << format6(r.estimated_error.ey) << ","
            << format6(r.estimated_error.ez) << "," << format6(r.estimated_error.erz) << ","
            << format6(r.command.dx) << "," << format6(r.command.dy) << ","
            << format6(r.command.dz) << "," << format6(r.command.drz) << "\n";
    }
    return out.str();
}

void export_trace(const EpisodeTrace& trace, const std::string& out_dir) {
    if (trace.records.empty()) {
        throw ConfigError("cannot export an empty trace");
    }
    // Re-verify the recorded status against the trace itself.
    if (trace.status == EpisodeStatus::converged &&
        !trace.config.tolerance.within(trace.true_error_at(trace.records.size() - 1))) {
        throw ConfigError("trace claims convergence but the final error exceeds tolerance");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create trace directory: " + out_dir);

    const std::filesystem::path dir(out_dir);
    write_text((dir / "trace.csv").string(), trace_to_csv(trace));

    std::vector<double> ex, ey, ez, erz;
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const PoseError e = trace.true_error_at(i);
        ex.push_back(e.ex);
        ey.push_back(e.ey);
        ez.push_back(e.ez);
        erz.push_back(e.erz);
    }
    write_text((dir / "error_x.svg").string(), render_svg("x", "mm", ex));
    write_text((dir / "error_y.svg").string(), render_svg("y", "mm", ey));
    write_text((dir / "error_z.svg").string(), render_svg("z", "mm", ez));
    write_text((dir / "error_rz.svg").string(), render_svg("rz", "degrees", erz));
}

double feature_error_px(const SceneConfig& scene, const Pose4& pose, const Pose4& desired) {
    const FeatureVector s = extract_point_features(scene, pose);
    const FeatureVector sd = extract_point_features(scene, desired);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.values.size(); i += 2) {
        const double du = (s.values[i] - sd.values[i]) * scene.intrinsics.fx;
        const double dv = (s.values[i + 1] - sd.values[i + 1]) * scene.intrinsics.fy;
        acc += du * du + dv * dv;
    }
    return std::sqrt(acc);
}

}  // namespace servo

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "servo/harness.hpp"
#include "servo/rng.hpp"
#include "servo/verification.hpp"

using namespace servo;

namespace {

std::filesystem::path fresh_dir(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Minimal XML well-formedness scan: prolog/comments skipped, tags must
// nest, attribute values must be quoted.
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        if (text.compare(i, 2, "<?") == 0) {
            const auto end = text.find("?>", i);
            if (end == std::string::npos) return false;
            i = end + 2;
            continue;
        }
        if (text.compare(i, 4, "<!--") == 0) {
            const auto end = text.find("-->", i);
            if (end == std::string::npos) return false;
            i = end + 3;
            continue;
        }
        const auto end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        const bool closing = !tag.empty() && tag[0] == '/';
        const bool self_closing = !tag.empty() && tag.back() == '/';
        if (closing) tag = tag.substr(1);
        if (self_closing) tag.pop_back();
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
        if (name.empty()) return false;
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
        i = end + 1;
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("oracle episode: initial == desired converges at step 0") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(5, 5, 5, 5);
    cfg.desired_pose = Pose4(5, 5, 5, 5);
    cfg.controller = ControllerKind::oracle;
    cfg.gains = GainVector::uniform(0.2);

    const EpisodeTrace trace = run_episode(cfg, scene);
    CHECK(trace.status == EpisodeStatus::converged);
    REQUIRE(trace.records.size() == 1);
    CHECK(trace.records[0].step == 0);
    CHECK(trace.records[0].command.dx == 0.0);
}

TEST_CASE("oracle episode decays geometrically at gains 0.2") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(10, -10, 10, 5);
    cfg.desired_pose = Pose4(0, 0, 0, 0);
    cfg.controller = ControllerKind::oracle;
    cfg.gains = GainVector::uniform(0.2);
    cfg.max_steps = 100;

    const EpisodeTrace trace = run_episode(cfg, scene);
    CHECK(trace.status == EpisodeStatus::converged);
    const PoseError e0 = trace.true_error_at(0);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const double decay = std::pow(0.8, trace.records[i].step);
        const PoseError ek = trace.true_error_at(i);
        CHECK(std::abs(ek.ex - decay * e0.ex) < 1e-9);
        CHECK(std::abs(ek.ey - decay * e0.ey) < 1e-9);
        CHECK(std::abs(ek.ez - decay * e0.ez) < 1e-9);
        CHECK(std::abs(ek.erz - decay * e0.erz) < 1e-9);
    }
    // Converged once all axes are within the default 1mm/1deg tolerance:
    // 10 * 0.8^k < 1 at k = 11.
    CHECK(trace.records.back().step == 11);
}

TEST_CASE("oracle decay matches the closed form across the gain set") {
    const CheckResult r = oracle_decay_check(4, 3);
    INFO("measured ", r.measured);
    CHECK(r.pass);
}

TEST_CASE("classic episodes reach sub-pixel feature error") {
    const CheckResult r = classic_convergence_check(6, 4);
    INFO("worst final pixel error ", r.measured);
    CHECK(r.pass);
}

TEST_CASE("episodes are reproducible") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(30, -25, 40, 20);
    cfg.desired_pose = Pose4(0, 0, 5, 0);
    cfg.controller = ControllerKind::classic;
    cfg.gains = GainVector::uniform(0.1);
    cfg.max_steps = 60;

    const EpisodeTrace a = run_episode(cfg, scene);
    const EpisodeTrace b = run_episode(cfg, scene);
    CHECK(trace_to_csv(a) == trace_to_csv(b));
}

TEST_CASE("an invisible initial pose is a configuration error") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(900, 900, 0, 0);
    cfg.desired_pose = Pose4(0, 0, 0, 0);
    cfg.controller = ControllerKind::oracle;
    cfg.gains = GainVector::uniform(0.2);
    CHECK_THROWS_AS(run_episode(cfg, scene), TargetNotVisible);

    cfg.initial_pose = Pose4(0, 0, 0, 0);
    cfg.desired_pose = Pose4(900, 900, 0, 0);
    CHECK_THROWS_AS(run_episode(cfg, scene), TargetNotVisible);
}

TEST_CASE("losing the target mid-episode ends with LostTarget") {
    const SceneConfig scene = SceneConfig::desk_default();
    // Gains of 1.9 overshoot: the step-1 pose lands at roughly
    // desired - 0.9*(initial - desired) = (-163.5, -163.5, -69.5), from
    // where the whole target projects outside the 64x64 image.
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(55, 55, -60, 0);
    cfg.desired_pose = Pose4(-60, -60, -65, 0);
    std::ostringstream warn;
    cfg.gains = GainVector(1.9, 1.9, 1.9, 1.9, &warn);
    cfg.controller = ControllerKind::oracle;
    cfg.max_steps = 200;
    cfg.tolerance = {1e-6, 1e-6, 1e-6, 1e-6};

    const EpisodeTrace trace = run_episode(cfg, scene);
    CHECK(trace.status == EpisodeStatus::lost_target);
    CHECK(trace.records.size() == 2);
    CHECK(trace.records.back().step == 1);
}

TEST_CASE("convergence_step: all-zero trace, geometric trace, dip-and-leave") {
    const SceneConfig scene = SceneConfig::desk_default();
    const Tolerance tol{1.0, 1.0, 1.0, 1.0};

    SUBCASE("all-zero-error trace reports step 0") {
        EpisodeConfig cfg;
        cfg.initial_pose = Pose4(0, 0, 0, 0);
        cfg.desired_pose = Pose4(0, 0, 0, 0);
        cfg.controller = ControllerKind::oracle;
        cfg.gains = GainVector::uniform(0.2);
        const EpisodeTrace trace = run_episode(cfg, scene);
        CHECK(convergence_step(trace, tol) == 0);
    }

    SUBCASE("monotone geometric trace matches the closed-form index") {
        EpisodeConfig cfg;
        cfg.initial_pose = Pose4(40, 0, 0, 0);
        cfg.desired_pose = Pose4(0, 0, 0, 0);
        cfg.controller = ControllerKind::oracle;
        cfg.gains = GainVector::uniform(0.25);
        cfg.max_steps = 100;
        cfg.tolerance = {1e-9, 1e-9, 1e-9, 1e-9};
        const EpisodeTrace trace = run_episode(cfg, scene);
        // First k with 40*(0.75)^k <= 1.
        const int expected = static_cast<int>(std::ceil(std::log(1.0 / 40.0) / std::log(0.75)));
        CHECK(convergence_step(trace, tol) == expected);
    }

    SUBCASE("a trace that dips inside tolerance then leaves reports the final entry") {
        EpisodeConfig cfg;
        cfg.initial_pose = Pose4(10, 0, 0, 0);
        cfg.desired_pose = Pose4(0, 0, 0, 0);
        cfg.controller = ControllerKind::oracle;
        cfg.gains = GainVector::uniform(0.5);
        const SceneConfig sc = SceneConfig::desk_default();
        EpisodeTrace trace = run_episode(cfg, sc);
        // Tamper: append a record that breaks tolerance, then one inside.
        TraceRecord out = trace.records.back();
        out.step += 1;
        out.pose = Pose4(50, 0, 0, 0);
        trace.records.push_back(out);
        TraceRecord back_in = out;
        back_in.step += 1;
        back_in.pose = Pose4(0.5, 0, 0, 0);
        trace.records.push_back(back_in);
        trace.status = EpisodeStatus::max_steps;
        CHECK(convergence_step(trace, tol) == back_in.step);

        // And when even the final entry is out, there is no answer.
        trace.records.push_back(out);
        CHECK(!convergence_step(trace, tol).has_value());
    }
}

TEST_CASE("export_trace writes a round-trippable CSV and well-formed SVGs") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(20, -15, 25, 10);
    cfg.desired_pose = Pose4(0, 0, 0, 0);
    cfg.controller = ControllerKind::oracle;
    cfg.gains = GainVector::uniform(0.3);
    cfg.max_steps = 60;
    const EpisodeTrace trace = run_episode(cfg, scene);

    const auto dir = fresh_dir("servo_test_export");
    export_trace(trace, dir.string());

    const std::string csv = slurp(dir / "trace.csv");
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "step,x,y,z,rz,ex,ey,ez,erz,dx,dy,dz,drz");

    std::size_t rows = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        ++rows;
        // Parse back and compare against the trace to 6 decimals.
        std::istringstream row(line);
        std::string field;
        std::vector<double> vals;
        while (std::getline(row, field, ',')) vals.push_back(std::strtod(field.c_str(), nullptr));
        REQUIRE(vals.size() == 13);
        const TraceRecord& r = trace.records[rows - 1];
        CHECK(vals[0] == r.step);
        CHECK(std::abs(vals[1] - r.pose.x) <= 5e-7);
        CHECK(std::abs(vals[4] - r.pose.rz) <= 5e-7);
        CHECK(std::abs(vals[9] - r.command.dx) <= 5e-7);
    }
    CHECK(rows == trace.records.size());

    for (const char* name : {"error_x.svg", "error_y.svg", "error_z.svg", "error_rz.svg"}) {
        const std::string svg = slurp(dir / name);
        INFO(name);
        CHECK(xml_well_formed(svg));
        CHECK(svg.find("<svg") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("export_trace of a converged-at-0 episode writes a single CSV row") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(1, 1, 1, 1);
    cfg.desired_pose = Pose4(1, 1, 1, 1);
    cfg.controller = ControllerKind::oracle;
    cfg.gains = GainVector::uniform(0.2);
    const EpisodeTrace trace = run_episode(cfg, scene);

    const auto dir = fresh_dir("servo_test_export0");
    export_trace(trace, dir.string());
    const std::string csv = slurp(dir / "trace.csv");
    std::size_t newlines = 0;
    for (char c : csv) {
        if (c == '\n') ++newlines;
    }
    CHECK(newlines == 2);  // header + one row
    std::filesystem::remove_all(dir);
}

TEST_CASE("a tampered Converged status is rejected on export") {
    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(30, 0, 0, 0);
    cfg.desired_pose = Pose4(0, 0, 0, 0);
    cfg.controller = ControllerKind::oracle;
    cfg.gains = GainVector::uniform(0.2);
    cfg.max_steps = 2;  // stops far from the goal
    EpisodeTrace trace = run_episode(cfg, scene);
    REQUIRE(trace.status == EpisodeStatus::max_steps);
    trace.status = EpisodeStatus::converged;

    const auto dir = fresh_dir("servo_test_tamper");
    CHECK_THROWS_AS(export_trace(trace, dir.string()), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("learned episodes run against a stub regressor") {
    // An untrained tiny regressor will not converge, but the loop must
    // execute, record estimates, and respect max_steps.
    RegressorArchitecture arch;
    arch.input_size = 64;
    arch.layer_specs = {nn::LayerSpec::maxpool2d(8, 8), nn::LayerSpec::dense(4)};
    const PoseRegressor regressor(arch, 5);

    const SceneConfig scene = SceneConfig::desk_default();
    EpisodeConfig cfg;
    cfg.initial_pose = Pose4(10, 10, 10, 10);
    cfg.desired_pose = Pose4(0, 0, 0, 0);
    cfg.controller = ControllerKind::learned;
    cfg.gains = GainVector::uniform(0.1);
    cfg.max_steps = 5;
    cfg.tolerance = {1e-9, 1e-9, 1e-9, 1e-9};

    const EpisodeTrace trace = run_episode(cfg, scene, &regressor);
    CHECK(trace.records.size() == 6);
    CHECK(trace.status == EpisodeStatus::max_steps);

    CHECK_THROWS_AS(run_episode(cfg, scene, nullptr), ConfigError);
}

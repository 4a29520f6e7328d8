// deskservo: dataset generation, training, evaluation and closed-loop
// episodes for the desk-scale eye-in-hand visual servoing simulator.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "servo/dataset.hpp"
#include "servo/harness.hpp"
#include "servo/regressor.hpp"
#include "servo/rng.hpp"
#include "servo/verification.hpp"

namespace {

using namespace servo;

std::vector<double> parse_csv_doubles(const std::string& text, const char* what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string field =
            text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        char* end = nullptr;
        out.push_back(std::strtod(field.c_str(), &end));
        if (end == field.c_str() || *end != '\0') {
            throw ConfigError(std::string("cannot parse ") + what + ": " + text);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

Pose4 parse_pose(const std::string& text) {
    const auto v = parse_csv_doubles(text, "pose (x,y,z,rz)");
    if (v.size() != 4) throw ConfigError("pose needs 4 comma-separated values: " + text);
    return Pose4(v[0], v[1], v[2], v[3]);
}

GainVector parse_gains(const std::string& text) {
    const auto v = parse_csv_doubles(text, "gains");
    if (v.size() == 1) return GainVector::uniform(v[0]);
    if (v.size() == 4) return GainVector(v[0], v[1], v[2], v[3]);
    throw ConfigError("gains need 1 or 4 comma-separated values: " + text);
}

Tolerance parse_tolerance(const std::string& text) {
    const auto v = parse_csv_doubles(text, "tolerance");
    if (v.size() == 1) return Tolerance{v[0], v[0], v[0], v[0]};
    if (v.size() == 4) return Tolerance{v[0], v[1], v[2], v[3]};
    throw ConfigError("tolerance needs 1 or 4 comma-separated values: " + text);
}

RegressorArchitecture profile_by_name(const std::string& name, double dropout_keep) {
    if (name == "desk") return RegressorArchitecture::desk_scale(dropout_keep);
    if (name == "paper") return RegressorArchitecture::paper_scale(dropout_keep);
    throw ConfigError("unknown profile: " + name + " (expected desk or paper)");
}

struct GenDataArgs {
    std::string out_dir;
    std::size_t count = 400;
    std::size_t test_count = 20;
    std::uint64_t seed = 1;
};

int run_gen_data(const GenDataArgs& a) {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();
    const DatasetManifest manifest = generate_dataset(range, a.count, a.seed, scene, a.out_dir);
    const auto [train, test] = split_dataset(manifest, a.test_count, mix_seed(a.seed, 1));
    const std::filesystem::path dir(a.out_dir);
    write_manifest(train, (dir / "manifest_train.csv").string());
    write_manifest(test, (dir / "manifest_test.csv").string());
    std::printf("%zu samples -> %s (%zu train / %zu test)\n", manifest.entries.size(),
                a.out_dir.c_str(), train.entries.size(), test.entries.size());
    return 0;
}

struct TrainArgs {
    std::string data_dir;
    std::string manifest_name = "manifest_train.csv";
    std::string out_path = "model.vsnn";
    std::string profile = "desk";
    nn::TrainingConfig config = desk_training_defaults();
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const auto manifest_path = std::filesystem::path(a.data_dir) / a.manifest_name;
    const DatasetManifest manifest = read_manifest(manifest_path.string());
    const auto samples = load_samples(manifest, a.data_dir);

    PoseRegressor regressor(profile_by_name(a.profile, a.config.dropout_keep),
                            mix_seed(a.config.rng_seed, 0xA11CE));
    const TrainingReport report = regressor.train(samples, manifest.range, a.config);
    if (!a.quiet) {
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
            if (e == 0 || e + 1 == report.epoch_loss.size() || (e + 1) % 10 == 0) {
                std::printf("epoch %3zu/%zu  loss %.8f\n", e + 1, report.epoch_loss.size(),
                            report.epoch_loss[e]);
            }
        }
    }
    regressor.save(a.out_path);
    std::printf("trained on %zu samples -> %s\n", samples.size(), a.out_path.c_str());
    return 0;
}

struct EvalArgs {
    std::string data_dir;
    std::string manifest_name = "manifest_test.csv";
    std::string model_path = "model.vsnn";
    std::string profile = "desk";
};

int run_eval(const EvalArgs& a) {
    const auto manifest_path = std::filesystem::path(a.data_dir) / a.manifest_name;
    const DatasetManifest manifest = read_manifest(manifest_path.string());
    const auto samples = load_samples(manifest, a.data_dir);
    const PoseRegressor regressor =
        PoseRegressor::load(profile_by_name(a.profile, 0.5), a.model_path);
    const AxisErrors mae = regressor.evaluate(samples);
    std::printf("MAE (%.6f, %.6f, %.6f, %.6f)\n", mae[0], mae[1], mae[2], mae[3]);
    return 0;
}

struct ServoArgs {
    ControllerKind kind = ControllerKind::learned;
    std::string model_path = "model.vsnn";
    std::string profile = "desk";
    std::string initial;  // empty: sampled from seed
    std::string desired = "0,0,0,0";
    std::string gains;
    std::string tolerance = "1";
    int max_steps = 50;
    std::uint64_t seed = 1;
    std::string out_dir;
};

int run_servo(const ServoArgs& a) {
    const SceneConfig scene = SceneConfig::desk_default();
    const SamplingRange range = SamplingRange::desk_default();

    EpisodeConfig cfg;
    cfg.controller = a.kind;
    cfg.max_steps = a.max_steps;
    cfg.tolerance = parse_tolerance(a.tolerance);
    cfg.desired_pose = parse_pose(a.desired);
    cfg.initial_pose = a.initial.empty()
                           ? sample_poses(range, 1, mix_seed(a.seed, 7), scene)[0]
                           : parse_pose(a.initial);
    const char* default_gains = a.kind == ControllerKind::classic ? "0.1" : "0.2";
    cfg.gains = parse_gains(a.gains.empty() ? default_gains : a.gains);

    std::optional<PoseRegressor> regressor;
    if (a.kind == ControllerKind::learned) {
        regressor = PoseRegressor::load(profile_by_name(a.profile, 0.5), a.model_path);
    }

    const EpisodeTrace trace = run_episode(cfg, scene, regressor ? &*regressor : nullptr);
    if (!a.out_dir.empty()) {
        export_trace(trace, a.out_dir);
    }

    const PoseError final_error = trace.true_error_at(trace.records.size() - 1);
    const auto step = convergence_step(trace, cfg.tolerance);
    std::printf("controller=%s status=%s steps=%d\n", controller_kind_name(a.kind),
                episode_status_name(trace.status), trace.records.back().step);
    std::printf("initial=(%.6f, %.6f, %.6f, %.6f) desired=(%.6f, %.6f, %.6f, %.6f)\n",
                cfg.initial_pose.x, cfg.initial_pose.y, cfg.initial_pose.z, cfg.initial_pose.rz,
                cfg.desired_pose.x, cfg.desired_pose.y, cfg.desired_pose.z, cfg.desired_pose.rz);
    std::printf("final_error=(%.6f, %.6f, %.6f, %.6f)\n", final_error.ex, final_error.ey,
                final_error.ez, final_error.erz);
    if (step) {
        std::printf("converged_at_step=%d\n", *step);
    }
    if (!a.out_dir.empty()) {
        std::printf("trace -> %s\n", a.out_dir.c_str());
    }
    return 0;
}

int run_check(std::uint64_t seed) {
    const auto results = run_all_checks(seed);
    bool all_pass = true;
    for (const CheckResult& r : results) {
        std::printf("%s  %-26s  measured=%.3e  threshold=%.3e\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.measured, r.threshold);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deskservo: desk-scale eye-in-hand visual servoing simulator"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
    gen_cmd->add_option("--count", gen.count, "Total samples (default 400)");
    gen_cmd->add_option("--test", gen.test_count, "Held-out test samples (default 20)");
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train the pose regressor");
    train_cmd->add_option("--data", train.data_dir, "Dataset directory")->required();
    train_cmd->add_option("--manifest", train.manifest_name, "Manifest file name");
    train_cmd->add_option("--out", train.out_path, "Weights output path");
    train_cmd->add_option("--profile", train.profile, "Network profile: desk or paper");
    train_cmd->add_option("--epochs", train.config.epochs, "Training epochs (default 100)");
    train_cmd->add_option("--batch", train.config.batch_size, "Batch size (default 20)");
    train_cmd->add_option("--lr", train.config.learning_rate, "Learning rate");
    train_cmd->add_option("--wd", train.config.weight_decay, "Weight decay (default 0.001)");
    train_cmd->add_option("--dropout-keep", train.config.dropout_keep,
                          "Dropout keep probability (default 0.5)");
    train_cmd->add_option("--seed", train.config.rng_seed, "Training seed");
    train_cmd->add_flag("--quiet", train.quiet, "Suppress the per-epoch loss log");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Per-axis MAE on a manifest");
    eval_cmd->add_option("--data", eval.data_dir, "Dataset directory")->required();
    eval_cmd->add_option("--manifest", eval.manifest_name, "Manifest file name");
    eval_cmd->add_option("--model", eval.model_path, "Weights path");
    eval_cmd->add_option("--profile", eval.profile, "Network profile");

    ServoArgs servo;
    auto add_servo_options = [&servo](CLI::App* cmd, bool learned) {
        if (learned) {
            cmd->add_option("--model", servo.model_path, "Weights path");
            cmd->add_option("--profile", servo.profile, "Network profile");
        }
        cmd->add_option("--initial", servo.initial,
                        "Initial pose x,y,z,rz (default: sampled from --seed)");
        cmd->add_option("--desired", servo.desired, "Desired pose x,y,z,rz");
        cmd->add_option("--gains", servo.gains,
                        "Gain(s): one value or l1,l2,l3,l4 (default 0.2; classic 0.1)");
        cmd->add_option("--max-steps", servo.max_steps, "Step limit (default 50)");
        cmd->add_option("--tol", servo.tolerance,
                        "Tolerance: one value or x,y,z,rz (default 1mm/1deg)");
        cmd->add_option("--seed", servo.seed, "Seed for sampled poses");
        cmd->add_option("--out", servo.out_dir, "Trace output directory");
    };
    auto* servo_cmd = app.add_subcommand("servo", "Learned two-stream episode");
    add_servo_options(servo_cmd, true);
    auto* classic_cmd = app.add_subcommand("servo-classic", "Classical IBVS episode");
    add_servo_options(classic_cmd, false);
    auto* oracle_cmd = app.add_subcommand("servo-oracle", "Ground-truth controller episode");
    add_servo_options(oracle_cmd, false);

    std::uint64_t check_seed = 1;
    auto* check_cmd = app.add_subcommand("check", "Run the verification suite");
    check_cmd->add_option("--seed", check_seed, "Verification seed");

    try {
        app.parse(argc, argv);
        if (gen_cmd->parsed()) return run_gen_data(gen);
        if (train_cmd->parsed()) return run_train(train);
        if (eval_cmd->parsed()) return run_eval(eval);
        if (servo_cmd->parsed()) {
            servo.kind = ControllerKind::learned;
            return run_servo(servo);
        }
        if (classic_cmd->parsed()) {
            servo.kind = ControllerKind::classic;
            return run_servo(servo);
        }
        if (oracle_cmd->parsed()) {
            servo.kind = ControllerKind::oracle;
            return run_servo(servo);
        }
        if (check_cmd->parsed()) return run_check(check_seed);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const servo::RuntimeFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const servo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

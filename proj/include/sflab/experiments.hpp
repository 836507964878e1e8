#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sflab/landscape.hpp"
#include "sflab/optimizers.hpp"

namespace sflab {

enum class OptimizerKind { sf_gd, sf_adamw, sf_scalaradam, adamw };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct TrajectoryRecord {
    long step = 0;
    double loss_x = 0, loss_y = 0, loss_z = 0;
    double sharpness_y = 0, precond_sharpness_y = 0;
    double lr = 0;
    double river_distance_x = 0, river_distance_y = 0;  // NaN off the toy model
    double ewa_loss_x = 0, ewa_loss_y = 0;
};

struct RunSpec {
    OptimizerKind optimizer = OptimizerKind::sf_adamw;
    Hyperparams hp;
    Schedule schedule;
    ParamVector x0;
    long steps = 5000;
    long log_every = 10;

    // sharpness at y on logged steps that are multiples of sharpness_every (0 = never)
    long sharpness_every = 0;
    double sharpness_tol = kPowerTol;
    int sharpness_max_iters = kPowerMaxIters;
    bool warm_start_sharpness = true;

    double ewa_decay = 0.99;
    double loss_target = 0.0;  // stop once loss at y falls to this (0 = run all steps)
    bool window_stats = true;  // evaluate every step in the final window for summary means
    long checkpoint_every = 0;
};

struct WindowStats {
    long count = 0;
    double loss_x = 0, loss_y = 0, loss_z = 0, ewa_loss_x = 0, ewa_loss_y = 0;
    double river_x = 0, river_y = 0, river_y_max = 0;
};

struct Checkpoint {
    long step;
    SFState state;  // for AdamW, x = z = w
    ParamVector eval_point;
};

struct RunResult {
    std::vector<TrajectoryRecord> records;
    WindowStats final_window;  // last 20% of steps
    std::vector<Checkpoint> checkpoints;
    SFState final_state;
    bool diverged = false;
    std::string divergence;
    long steps_done = 0;
};

inline constexpr double kFinalWindow = 0.2;

RunResult run_trajectory(const Objective& obj, const RunSpec& spec);

// resume from a checkpointed SF state for the remaining steps of spec (records continue the step count)
RunResult resume_trajectory(const Objective& obj, const RunSpec& spec, const SFState& from);

std::string records_csv(const std::vector<TrajectoryRecord>& recs);
std::string format_double(double v);

// ---- studies ----

struct ToyStudyConfig {
    std::vector<double> betas{0.1, 0.5, 0.9};
    double gamma = 0.01;
    double beta2 = 0.99;
    long steps = 5000;
    long log_every = 10;
    ParamVector x0{2.0, 2.0};
};

RunSpec toy_run_spec(const ToyStudyConfig& cfg, double beta1);

struct ToyStudyRow {
    double beta1;
    RunResult run;
};

std::vector<ToyStudyRow> run_toy_trajectories(const ToyStudyConfig& cfg);

struct EosSummary {
    double threshold = 0;
    double plateau = 0;  // median over the final half of sharpness checkpoints
    double min_ratio = 0, max_ratio = 0;
    long checkpoints = 0;
};

// threshold 2/((1-beta1) gamma); the preconditioned column for adaptive runs, plain sharpness for SF-GD
EosSummary summarize_eos(const RunResult& r, const RunSpec& spec);

struct EosResult {
    RunResult run;
    EosSummary summary;
};

EosResult run_eos_sweep(const Objective& obj, const RunSpec& spec);

struct ProbeRecord {
    long step;
    long probe_steps;
    double loss_before, loss_after;
};

struct ProbeSettingsStudy {
    double fraction = 0.1;
    double lr = 1e-4;
    ProbeSettings adamw;
};

struct DecayProbeStudy {
    RunResult run;
    std::vector<ProbeRecord> probes;
    double mean_relative_drop = 0;
};

DecayProbeStudy run_decay_probe_study(const Objective& obj, const RunSpec& spec, const ProbeSettingsStudy& ps);

std::string probes_csv(const std::vector<ProbeRecord>& probes);

struct YvsXSummary {
    double loss_x, loss_y, ewa_loss_y, ewa_loss_x;
};

struct YvsXStudy {
    RunResult run;
    YvsXSummary summary;
};

YvsXStudy run_y_vs_x_study(const Objective& obj, const RunSpec& spec);

struct RefinedRow {
    double C;  // 0 = vanilla
    double loss_x, loss_y;
    double max_dev_from_vanilla;
};

struct RefinedComparison {
    std::vector<RefinedRow> rows;
    RunResult vanilla;
};

RefinedComparison run_refined_comparison(const Objective& obj, const RunSpec& vanilla, const std::vector<double>& Cs);

// ---- default MLP ----

struct MLPSetup {
    std::size_t n = 512, d_in = 32, d_out = 10;
    std::size_t hidden = 200, layers = 3;
    std::string dataset = "synthetic";  // or cifar10
    std::string cifar_path;
    std::size_t cifar_samples = 5000;
    kernels::Backend backend = kernels::Backend::openmp;
};

std::shared_ptr<MLPObjective> make_mlp(const MLPSetup& m, std::uint64_t seed);

}  // namespace sflab

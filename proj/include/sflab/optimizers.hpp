#pragma once

#include <string>
#include <utility>

#include "sflab/landscape.hpp"
#include "sflab/vec.hpp"

namespace sflab {

enum class CRule {
    lr_weighted,  // c_{t+1} = gamma_t^2 / sum gamma_i^2
    ideal,        // c_{t+1} = 1/(t+1)
};

struct Hyperparams {
    double gamma = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double lambda = 0.0;
    double epsilon = 1e-8;
    long warmup_steps = 0;
    long total_steps = 5000;
    double C = 0.0;  // > 0 selects the refined variant
    CRule c_rule = CRule::lr_weighted;
    double clip = 0.0;  // global-norm clip, 0 = off

    void validate() const;
};

struct SFState {
    ParamVector x, z, v;
    long t = 1;
    double lr_sq_sum = 0.0;

    static SFState start(const ParamVector& x1, long t1 = 1);
    ParamVector y(double beta1) const { return lerp(z, x, beta1); }
};

struct AdamWState {
    ParamVector w, m, v;
    long t = 1;

    static AdamWState start(const ParamVector& w1);
};

enum class ScheduleKind { constant, warmup_constant, warmup_cosine, linear_decay };

struct Schedule {
    ScheduleKind kind = ScheduleKind::constant;
    double peak = 1e-2;
    long warmup_steps = 0;
    long total_steps = 1;
    double floor = 0.1;  // cosine end, fraction of peak

    double lr(long t) const;
    static Schedule constant(double lr) { return {ScheduleKind::constant, lr, 0, 1, 0.1}; }
    static Schedule warmup(double lr, long warmup) { return {ScheduleKind::warmup_constant, lr, warmup, 1, 0.1}; }
    static Schedule linear_decay(double lr, long total) { return {ScheduleKind::linear_decay, lr, 0, total, 0.0}; }
};

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct EWATracker {
    ParamVector average;
    double decay = 0.99;
    bool initialized = false;
};

struct DivergenceError : std::runtime_error {
    long step;
    DivergenceError(const std::string& what, long s) : std::runtime_error(what), step(s) {}
};

// z' = z - gamma_t delta; x' = (1 - c_next) x + c_next z'
SFState sf_step(SFState s, const ParamVector& delta, double gamma_t, double c_next);

// c_{t+1} for the configured rule, given lr_sq_sum already includes gamma_t^2
double next_c(const SFState& s, const Hyperparams& hp, double gamma_t);

// min(gamma_t^2 / sum gamma_i^2 * (1 - beta1) C, 1), with lr_sq_sum already including gamma_t^2
double refined_c(const SFState& s, const Hyperparams& hp, double gamma_t);

SFState sf_gd_step(SFState s, const ParamVector& grad_at_y, const Hyperparams& hp, const Schedule& sched);

// delta = P^{-1} grad + lambda y
SFState sf_precond_step(SFState s, const ParamVector& grad_at_y, const Preconditioner& P, const Hyperparams& hp,
                        const Schedule& sched);

SFState sf_adamw_step(SFState s, const ParamVector& grad_at_y, const Hyperparams& hp, const Schedule& sched);

// scalar second moment nu = v[0] (broadcast over v); nu starts at |g_1|^2 with no bias correction
SFState sf_scalaradam_step(SFState s, const ParamVector& grad_at_y, const Hyperparams& hp, const Schedule& sched);

AdamWState adamw_step(AdamWState s, ParamVector grad, const Hyperparams& hp, const Schedule& sched);

void clip_global_norm(ParamVector& g, double max_norm);

struct ProbeResult {
    ParamVector w;
    double loss;
};

struct ProbeSettings {
    double beta1 = 0.9, beta2 = 0.95, lambda = 0.0, epsilon = 1e-8, clip = 1.0;
};

// fresh AdamW from the checkpoint, lr linearly lr_start -> 0 over probe_steps
ProbeResult decay_probe(const ParamVector& checkpoint, const Objective& obj, long probe_steps, double lr_start,
                        const ProbeSettings& ps = {});

void ewa_update(EWATracker& tr, const ParamVector& w);

void save_checkpoint(const std::string& path, const SFState& s);
SFState load_checkpoint(const std::string& path);

}  // namespace sflab

#include "sflab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

namespace sflab {

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sf_gd: return "sf-gd";
        case OptimizerKind::sf_adamw: return "sf-adamw";
        case OptimizerKind::sf_scalaradam: return "sf-scalaradam";
        case OptimizerKind::adamw: return "adamw";
    }
    return "sf-adamw";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sf-gd") return OptimizerKind::sf_gd;
    if (s == "sf-adamw") return OptimizerKind::sf_adamw;
    if (s == "sf-scalaradam") return OptimizerKind::sf_scalaradam;
    if (s == "adamw") return OptimizerKind::adamw;
    throw ContractError("unknown optimizer '" + s + "'");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_toy(const Objective& obj) { return dynamic_cast<const ToyRiverValley*>(&obj) != nullptr; }

struct Engine {
    const Objective& obj;
    const RunSpec& spec;
    SFState s;
    AdamWState a;
    bool adam_baseline;
    EWATracker ewa_x, ewa_y;
    ParamVector warm, warm_p;
    RunResult out;
    WindowStats acc;

    Engine(const Objective& o, const RunSpec& sp) : obj(o), spec(sp), adam_baseline(sp.optimizer == OptimizerKind::adamw) {
        ewa_x.decay = ewa_y.decay = sp.ewa_decay;
    }

    const ParamVector& x() const { return adam_baseline ? a.w : s.x; }
    const ParamVector& z() const { return adam_baseline ? a.w : s.z; }
    long t() const { return adam_baseline ? a.t : s.t; }
    ParamVector y() const { return adam_baseline ? a.w : s.y(spec.hp.beta1); }

    // preconditioner the upcoming step will use
    Preconditioner precond(const ParamVector& g) const {
        const Hyperparams& hp = spec.hp;
        const std::size_t d = g.size();
        switch (spec.optimizer) {
            case OptimizerKind::sf_gd: return Preconditioner::identity(d);
            case OptimizerKind::sf_scalaradam: {
                const double gg = dot(g, g);
                const double nu = s.lr_sq_sum == 0.0 ? gg : hp.beta2 * s.v[0] + (1 - hp.beta2) * gg;
                return Preconditioner(ParamVector(d, std::sqrt(nu) + hp.epsilon));
            }
            case OptimizerKind::sf_adamw:
            case OptimizerKind::adamw: {
                const ParamVector& v = adam_baseline ? a.v : s.v;
                ParamVector vn(d);
                for (std::size_t i = 0; i < d; ++i) vn[i] = hp.beta2 * v[i] + (1 - hp.beta2) * g[i] * g[i];
                return Preconditioner::adaptive(vn, t(), hp.beta2, hp.epsilon);
            }
        }
        return Preconditioner::identity(d);
    }

    void step(const ParamVector& g) {
        switch (spec.optimizer) {
            case OptimizerKind::sf_gd: s = sf_gd_step(std::move(s), g, spec.hp, spec.schedule); break;
            case OptimizerKind::sf_adamw: s = sf_adamw_step(std::move(s), g, spec.hp, spec.schedule); break;
            case OptimizerKind::sf_scalaradam: s = sf_scalaradam_step(std::move(s), g, spec.hp, spec.schedule); break;
            case OptimizerKind::adamw: a = adamw_step(std::move(a), g, spec.hp, spec.schedule); break;
        }
    }

    void run() {
        const bool toy = is_toy(obj);
        const long window_start = spec.steps - long(std::floor(kFinalWindow * double(spec.steps)));
        ParamVector g;
        while (t() <= spec.steps) {
            const long tt = t();
            const ParamVector yv = y();
            const double fy = obj.value_and_gradient(yv, g);
            if (!std::isfinite(fy) || !all_finite(g)) {
                out.diverged = true;
                out.divergence = "non-finite loss or gradient at step " + std::to_string(tt);
                break;
            }
            ewa_update(ewa_x, x());
            ewa_update(ewa_y, yv);

            if (spec.checkpoint_every > 0 && tt % spec.checkpoint_every == 0) {
                Checkpoint c{tt, adam_baseline ? SFState{a.w, a.w, a.v, a.t, 0.0} : s, x()};
                out.checkpoints.push_back(std::move(c));
            }

            const bool reached = spec.loss_target > 0 && fy <= spec.loss_target;
            const bool log = tt == 1 || tt % spec.log_every == 0 || tt == spec.steps || reached;
            const bool window = spec.window_stats && tt > window_start;
            if (log || window) {
                TrajectoryRecord r;
                r.step = tt;
                r.loss_y = fy;
                r.loss_x = adam_baseline ? fy : obj.value(x());
                r.loss_z = adam_baseline ? fy : obj.value(z());
                r.ewa_loss_x = obj.value(ewa_x.average);
                r.ewa_loss_y = obj.value(ewa_y.average);
                r.lr = spec.schedule.lr(tt);
                r.river_distance_x = toy ? river_distance(x()) : kNaN;
                r.river_distance_y = toy ? river_distance(yv) : kNaN;
                r.sharpness_y = r.precond_sharpness_y = kNaN;
                if (log && spec.sharpness_every > 0 && (tt % spec.sharpness_every == 0 || tt == 1)) {
                    try {
                        r.sharpness_y = sharpness(obj, yv, spec.sharpness_tol, spec.sharpness_max_iters,
                                                  spec.warm_start_sharpness ? &warm : nullptr);
                        r.precond_sharpness_y =
                            spec.optimizer == OptimizerKind::sf_gd
                                ? r.sharpness_y
                                : preconditioned_sharpness(obj, yv, precond(g), spec.sharpness_tol,
                                                           spec.sharpness_max_iters,
                                                           spec.warm_start_sharpness ? &warm_p : nullptr);
                    } catch (const ConvergenceError& e) {
                        std::fprintf(stderr, "step %ld: %s (last estimate %g)\n", tt, e.what(), e.last_estimate);
                    }
                }
                if (window) {
                    ++acc.count;
                    acc.loss_x += r.loss_x;
                    acc.loss_y += r.loss_y;
                    acc.loss_z += r.loss_z;
                    acc.ewa_loss_x += r.ewa_loss_x;
                    acc.ewa_loss_y += r.ewa_loss_y;
                    acc.river_x += r.river_distance_x;
                    acc.river_y += r.river_distance_y;
                    acc.river_y_max = std::max(acc.river_y_max, r.river_distance_y);
                }
                if (log) out.records.push_back(r);
            }
            if (reached) break;
            try {
                step(g);
            } catch (const DivergenceError& e) {
                out.diverged = true;
                out.divergence = e.what();
                break;
            }
            ++out.steps_done;
        }
        if (acc.count > 0) {
            const double n = double(acc.count);
            for (double* p : {&acc.loss_x, &acc.loss_y, &acc.loss_z, &acc.ewa_loss_x, &acc.ewa_loss_y, &acc.river_x,
                              &acc.river_y})
                *p /= n;
        }
        out.final_window = acc;
        out.final_state = adam_baseline ? SFState{a.w, a.w, a.v, a.t, 0.0} : s;
    }
};

}  // namespace

RunResult run_trajectory(const Objective& obj, const RunSpec& spec) {
    require(!spec.x0.empty(), "run_trajectory: x0 is empty");
    require(spec.steps >= 1 && spec.log_every >= 1, "run_trajectory: steps and log_every must be >= 1");
    spec.hp.validate();
    Engine e(obj, spec);
    e.s = SFState::start(spec.x0);
    e.a = AdamWState::start(spec.x0);
    e.run();
    return std::move(e.out);
}

RunResult resume_trajectory(const Objective& obj, const RunSpec& spec, const SFState& from) {
    require(spec.optimizer != OptimizerKind::adamw, "resume_trajectory: only Schedule-Free runs resume");
    spec.hp.validate();
    Engine e(obj, spec);
    e.s = from;
    e.a = AdamWState::start(from.x);
    e.run();
    return std::move(e.out);
}

std::string records_csv(const std::vector<TrajectoryRecord>& recs) {
    std::string out =
        "step,loss_x,loss_y,loss_z,sharpness_y,precond_sharpness_y,lr,river_distance_x,river_distance_y,"
        "ewa_loss_x,ewa_loss_y\n";
    for (const auto& r : recs) {
        out += std::to_string(r.step);
        for (double v : {r.loss_x, r.loss_y, r.loss_z, r.sharpness_y, r.precond_sharpness_y, r.lr, r.river_distance_x,
                         r.river_distance_y, r.ewa_loss_x, r.ewa_loss_y})
            out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

// ---- studies ----

RunSpec toy_run_spec(const ToyStudyConfig& cfg, double beta1) {
    RunSpec s;
    s.optimizer = OptimizerKind::sf_adamw;
    s.hp.gamma = cfg.gamma;
    s.hp.beta1 = beta1;
    s.hp.beta2 = cfg.beta2;
    s.hp.total_steps = cfg.steps;
    s.schedule = Schedule::constant(cfg.gamma);
    s.x0 = cfg.x0;
    s.steps = cfg.steps;
    s.log_every = cfg.log_every;
    s.sharpness_every = cfg.log_every;
    return s;
}

std::vector<ToyStudyRow> run_toy_trajectories(const ToyStudyConfig& cfg) {
    const ToyRiverValley toy;
    std::vector<ToyStudyRow> rows(cfg.betas.size());
    const long n = long(cfg.betas.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) rows[i] = {cfg.betas[i], run_trajectory(toy, toy_run_spec(cfg, cfg.betas[i]))};
    return rows;
}

EosSummary summarize_eos(const RunResult& r, const RunSpec& spec) {
    EosSummary s;
    s.threshold = 2.0 / ((1.0 - spec.hp.beta1) * spec.hp.gamma);
    std::vector<double> vals;
    for (const auto& rec : r.records)
        if (std::isfinite(rec.precond_sharpness_y)) vals.push_back(rec.precond_sharpness_y / s.threshold);
    if (vals.empty()) return s;
    std::vector<double> tail(vals.begin() + long(vals.size() / 2), vals.end());
    s.checkpoints = long(tail.size());
    s.min_ratio = *std::min_element(tail.begin(), tail.end());
    s.max_ratio = *std::max_element(tail.begin(), tail.end());
    std::vector<double> sorted = tail;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double med = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    s.plateau = med * s.threshold;
    return s;
}

EosResult run_eos_sweep(const Objective& obj, const RunSpec& spec) {
    require(spec.sharpness_every > 0, "run_eos_sweep: sharpness_every must be > 0");
    EosResult r;
    r.run = run_trajectory(obj, spec);
    r.summary = summarize_eos(r.run, spec);
    return r;
}

DecayProbeStudy run_decay_probe_study(const Objective& obj, const RunSpec& spec_in, const ProbeSettingsStudy& ps) {
    RunSpec spec = spec_in;
    require(spec.checkpoint_every > 0, "run_decay_probe_study: checkpoint_every must be > 0");
    DecayProbeStudy st;
    st.run = run_trajectory(obj, spec);
    st.probes.resize(st.run.checkpoints.size());
    const long n = long(st.probes.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const Checkpoint& c = st.run.checkpoints[i];
        const long len = std::max(1L, std::lround(ps.fraction * double(c.step)));
        const double before = obj.value(c.eval_point);
        const ProbeResult pr = decay_probe(c.eval_point, obj, len, ps.lr, ps.adamw);
        st.probes[i] = {c.step, len, before, pr.loss};
    }
    double sum = 0.0;
    for (const auto& p : st.probes) sum += (p.loss_before - p.loss_after) / p.loss_before;
    st.mean_relative_drop = st.probes.empty() ? 0.0 : sum / double(st.probes.size());
    return st;
}

std::string probes_csv(const std::vector<ProbeRecord>& probes) {
    std::string out = "step,probe_steps,loss_before,loss_after,relative_drop\n";
    for (const auto& p : probes)
        out += std::to_string(p.step) + "," + std::to_string(p.probe_steps) + "," + format_double(p.loss_before) +
               "," + format_double(p.loss_after) + "," +
               format_double((p.loss_before - p.loss_after) / p.loss_before) + "\n";
    return out;
}

YvsXStudy run_y_vs_x_study(const Objective& obj, const RunSpec& spec) {
    YvsXStudy st;
    st.run = run_trajectory(obj, spec);
    const WindowStats& w = st.run.final_window;
    st.summary = {w.loss_x, w.loss_y, w.ewa_loss_y, w.ewa_loss_x};
    return st;
}

RefinedComparison run_refined_comparison(const Objective& obj, const RunSpec& vanilla_in,
                                         const std::vector<double>& Cs) {
    RunSpec vanilla = vanilla_in;
    vanilla.hp.C = 0.0;
    RefinedComparison rc;
    rc.vanilla = run_trajectory(obj, vanilla);
    rc.rows.push_back({0.0, rc.vanilla.final_window.loss_x, rc.vanilla.final_window.loss_y, 0.0});
    std::vector<RefinedRow> rows(Cs.size());
    const long n = long(Cs.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        RunSpec s = vanilla;
        s.hp.C = Cs[i];
        const RunResult r = run_trajectory(obj, s);
        double dev = std::max(dist(r.final_state.x, rc.vanilla.final_state.x),
                              dist(r.final_state.z, rc.vanilla.final_state.z));
        const std::size_t m = std::min(r.records.size(), rc.vanilla.records.size());
        for (std::size_t k = 0; k < m; ++k)
            dev = std::max({dev, std::abs(r.records[k].loss_x - rc.vanilla.records[k].loss_x),
                            std::abs(r.records[k].loss_y - rc.vanilla.records[k].loss_y)});
        rows[i] = {Cs[i], r.final_window.loss_x, r.final_window.loss_y, dev};
    }
    rc.rows.insert(rc.rows.end(), rows.begin(), rows.end());
    return rc;
}

std::shared_ptr<MLPObjective> make_mlp(const MLPSetup& m, std::uint64_t seed) {
    require(m.layers >= 1, "make_mlp: layers must be >= 1");
    std::shared_ptr<Dataset> data;
    if (m.dataset == "synthetic") {
        data = std::make_shared<Dataset>(Dataset::synthetic(m.n, m.d_in, m.d_out, seed));
    } else if (m.dataset == "cifar10") {
        std::vector<std::string> paths;
        namespace fs = std::filesystem;
        if (fs::is_directory(m.cifar_path)) {
            for (int i = 1; i <= 5; ++i) {
                const fs::path p = fs::path(m.cifar_path) / ("data_batch_" + std::to_string(i) + ".bin");
                if (fs::exists(p)) paths.push_back(p.string());
            }
        } else {
            paths.push_back(m.cifar_path);
        }
        data = std::make_shared<Dataset>(Dataset::cifar10(paths, m.cifar_samples));
    } else {
        throw ContractError("unknown dataset '" + m.dataset + "'");
    }
    return std::make_shared<MLPObjective>(data, std::vector<std::size_t>(m.layers - 1, m.hidden), m.backend);
}

}  // namespace sflab

#include "sflab/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sflab/averaging.hpp"
#include "sflab/centralflow.hpp"
#include "sflab/stability.hpp"

namespace sflab::cli {

namespace fs = std::filesystem;

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> subs = {"toy",     "eos",         "stability", "central-flow", "weights",
                                                  "decay-probe", "y-vs-x", "refined",   "train-mlp",    "replay"};
    return subs;
}

Config defaults_for(const std::string& sub) {
    Config c;
    if (sub == "toy" || sub == "eos" || sub == "y-vs-x") c.set("sharpness.every", "10");
    if (sub == "decay-probe") c.set("checkpoint.every", "0");
    if (sub == "refined") {
        c.set("optimizer.beta1", "0.1");
        c.set("checkpoint.every", "0");
    }
    if (sub == "train-mlp") {
        c.set("objective", "mlp");
        c.set("optimizer.kind", "sf-gd");
        c.set("optimizer.gamma", "2");
        c.set("optimizer.warmup", "200");
        c.set("train.steps", "3000");
        c.set("train.loss_target", "0.02");
        c.set("sharpness.every", "20");
        c.set("sharpness.tol", "1e-4");
        c.set("checkpoint.every", "500");
    }
    if (sub == "central-flow") c.set("optimizer.gamma", "1");
    return c;
}

namespace {

void fail(const std::string& key, const std::string& what) { throw ConfigError(key, "key '" + key + "': " + what); }

void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) fail(key, what);
}

Hyperparams hyperparams(const Config& c) {
    Hyperparams hp;
    hp.gamma = c.real("optimizer.gamma");
    hp.beta1 = c.real("optimizer.beta1");
    hp.beta2 = c.real("optimizer.beta2");
    hp.lambda = c.real("optimizer.lambda");
    hp.epsilon = c.real("optimizer.epsilon");
    hp.warmup_steps = c.integer("optimizer.warmup");
    hp.total_steps = c.integer("train.steps");
    hp.C = c.real("optimizer.C");
    const std::string rule = c.raw("optimizer.c_rule");
    check(rule == "lr-weighted" || rule == "ideal", "optimizer.c_rule", "expected lr-weighted or ideal");
    hp.c_rule = rule == "ideal" ? CRule::ideal : CRule::lr_weighted;
    const double clip = c.real("optimizer.clip");
    const bool adamw = c.raw("optimizer.kind") == "adamw";
    hp.clip = clip < 0 ? (adamw ? 1.0 : 0.0) : clip;

    check(hp.gamma > 0, "optimizer.gamma", "must be > 0");
    check(hp.beta1 >= 0 && hp.beta1 < 1, "optimizer.beta1", "must satisfy 0 <= beta1 < 1");
    check(hp.beta2 >= 0 && hp.beta2 < 1, "optimizer.beta2", "must satisfy 0 <= beta2 < 1");
    check(hp.lambda >= 0, "optimizer.lambda", "must be >= 0");
    check(hp.epsilon > 0, "optimizer.epsilon", "must be > 0");
    check(hp.warmup_steps >= 0, "optimizer.warmup", "must be >= 0");
    check(hp.total_steps >= 1, "train.steps", "must be >= 1");
    check(hp.C >= 0, "optimizer.C", "must be >= 0");
    return hp;
}

Schedule schedule(const Config& c, const Hyperparams& hp) {
    std::string kind = c.raw("schedule.kind");
    if (kind == "auto") kind = hp.warmup_steps > 0 ? "warmup-constant" : "constant";
    Schedule s;
    try {
        s.kind = schedule_kind_from_string(kind);
    } catch (const ContractError&) {
        fail("schedule.kind", "unknown schedule '" + kind + "'");
    }
    s.peak = hp.gamma;
    s.warmup_steps = hp.warmup_steps;
    s.total_steps = hp.total_steps;
    return s;
}

struct Problem {
    std::shared_ptr<Objective> obj;
    ParamVector x0;
};

Problem problem(const Config& c) {
    const std::string kind = c.raw("objective");
    Problem p;
    if (kind == "toy") {
        p.obj = std::make_shared<ToyRiverValley>();
        p.x0 = {2.0, 2.0};
    } else if (kind == "quadratic") {
        const auto diag = c.list("quadratic.diag");
        check(!diag.empty(), "quadratic.diag", "must not be empty");
        p.obj = std::make_shared<Quadratic>(Quadratic::diagonal(diag));
        p.x0.assign(diag.size(), 1.0);
    } else if (kind == "mlp") {
        MLPSetup m;
        auto pos = [&](const char* key) {
            const long v = c.integer(key);
            check(v > 0, key, "must be > 0");
            return std::size_t(v);
        };
        m.n = pos("mlp.n");
        m.d_in = pos("mlp.d_in");
        m.d_out = pos("mlp.d_out");
        m.hidden = pos("mlp.hidden");
        m.layers = pos("mlp.layers");
        m.cifar_samples = pos("mlp.samples");
        m.dataset = c.raw("mlp.dataset");
        check(m.dataset == "synthetic" || m.dataset == "cifar10", "mlp.dataset", "expected synthetic or cifar10");
        m.cifar_path = c.raw("mlp.cifar_path");
        check(m.dataset != "cifar10" || !m.cifar_path.empty(), "mlp.cifar_path", "required for cifar10");
        const std::string be = c.raw("mlp.backend");
        check(be == "openmp" || be == "serial", "mlp.backend", "expected openmp or serial");
        m.backend = be == "serial" ? kernels::Backend::serial : kernels::Backend::openmp;
        auto mlp = make_mlp(m, c.seed());
        p.x0 = mlp->init(c.seed());
        p.obj = mlp;
    } else {
        fail("objective", "expected toy, quadratic or mlp");
    }
    const auto x0 = c.list("x0");
    if (!x0.empty()) {
        check(x0.size() == p.obj->dimension(), "x0", "dimension does not match the objective");
        p.x0 = x0;
    }
    return p;
}

RunSpec run_spec(const Config& c, const Problem& p) {
    RunSpec s;
    try {
        s.optimizer = optimizer_kind_from_string(c.raw("optimizer.kind"));
    } catch (const ContractError&) {
        fail("optimizer.kind", "expected sf-gd, sf-adamw, sf-scalaradam or adamw");
    }
    s.hp = hyperparams(c);
    s.schedule = schedule(c, s.hp);
    s.x0 = p.x0;
    s.steps = s.hp.total_steps;
    s.log_every = c.integer("log_every");
    check(s.log_every >= 1, "log_every", "must be >= 1");
    s.sharpness_every = c.integer("sharpness.every");
    check(s.sharpness_every >= 0, "sharpness.every", "must be >= 0");
    s.sharpness_tol = c.real("sharpness.tol");
    check(s.sharpness_tol > 0, "sharpness.tol", "must be > 0");
    s.sharpness_max_iters = int(c.integer("sharpness.max_iters"));
    check(s.sharpness_max_iters >= 1, "sharpness.max_iters", "must be >= 1");
    s.ewa_decay = c.real("ewa.decay");
    check(s.ewa_decay >= 0 && s.ewa_decay < 1, "ewa.decay", "must be in [0, 1)");
    s.loss_target = c.real("train.loss_target");
    s.checkpoint_every = c.integer("checkpoint.every");
    check(s.checkpoint_every >= 0, "checkpoint.every", "must be >= 0");
    s.window_stats = c.raw("objective") != "mlp";
    return s;
}

FlowKind flow_kind(const Config& c) {
    const std::string k = c.raw("flow.kind");
    check(k == "sfgd" || k == "sfscalaradam", "flow.kind", "expected sfgd or sfscalaradam");
    return k == "sfgd" ? FlowKind::sfgd : FlowKind::sfscalaradam;
}

std::string num(double v) { return format_double(v); }

void summarize_window(Artifacts& a, const RunResult& r) {
    const WindowStats& w = r.final_window;
    a.summary.push_back({"steps_done", std::to_string(r.steps_done)});
    a.summary.push_back({"diverged", r.diverged ? "true" : "false"});
    if (w.count == 0) return;
    a.summary.push_back({"window.count", std::to_string(w.count)});
    a.summary.push_back({"window.loss_x", num(w.loss_x)});
    a.summary.push_back({"window.loss_y", num(w.loss_y)});
    a.summary.push_back({"window.loss_z", num(w.loss_z)});
    a.summary.push_back({"window.ewa_loss_x", num(w.ewa_loss_x)});
    a.summary.push_back({"window.ewa_loss_y", num(w.ewa_loss_y)});
    a.summary.push_back({"window.river_distance_x", num(w.river_x)});
    a.summary.push_back({"window.river_distance_y", num(w.river_y)});
    a.summary.push_back({"window.river_distance_y_max", num(w.river_y_max)});
}

void take_run(Artifacts& a, RunResult& r) {
    a.trajectory_csv = records_csv(r.records);
    a.checkpoints = std::move(r.checkpoints);
    if (r.diverged) {
        a.failed = true;
        a.failure = r.divergence;
    }
}

Artifacts do_stability(const Config& c) {
    const Hyperparams hp = hyperparams(c);
    ThresholdProbe pr;
    pr.beta = hp.beta1;
    pr.gamma = hp.gamma;
    pr.lambda = hp.lambda;
    if (hp.lambda > 0) pr.precond = {1.0};
    pr.max_steps = c.integer("stability.budget");
    check(pr.max_steps >= 1, "stability.budget", "must be >= 1");
    const double theory = sf_threshold(hp.beta1, hp.gamma, hp.lambda);
    const double lo = c.real("stability.lo"), hi = c.real("stability.hi");
    check(lo > 0 && lo < 1, "stability.lo", "must be in (0, 1)");
    check(hi > 1, "stability.hi", "must be > 1");
    Artifacts a;
    double emp = std::nan(""), emp_norm = std::nan("");
    try {
        pr.late_growth = true;
        emp = empirical_threshold(pr, lo * theory, hi * theory);
        pr.late_growth = false;
        emp_norm = empirical_threshold(pr, lo * theory, hi * theory);
    } catch (const std::runtime_error& e) {
        a.failed = true;
        a.failure = e.what();
    }
    const double gap = (emp - theory) / theory;
    a.trajectory_csv = "beta,gamma,lambda,threshold_theory,threshold_empirical,rel_gap,threshold_norm_rule\n" +
                       num(hp.beta1) + "," + num(hp.gamma) + "," + num(hp.lambda) + "," + num(theory) + "," +
                       num(emp) + "," + num(gap) + "," + num(emp_norm) + "\n";
    a.summary = {{"threshold_theory", num(theory)},
                 {"threshold_empirical", num(emp)},
                 {"rel_gap", num(gap)},
                 {"threshold_norm_rule", num(emp_norm)},
                 {"below_threshold", "empirically bounded (not a theorem)"}};
    return a;
}

Artifacts do_weights(const Config& c) {
    const Hyperparams hp = hyperparams(c);
    const long T = c.integer("weights.T");
    check(T >= 1, "weights.T", "must be >= 1");
    const std::size_t n = std::size_t(T);
    const bool refined = hp.C > 0;
    const auto cs = refined ? refined_c_sequence(n, hp.beta1, hp.C) : vanilla_c_sequence(n);
    const WeightProfile ex = exact_alpha(n, hp.beta1, cs);
    const double C_eff = refined ? hp.C : 1.0 / (1.0 - hp.beta1);
    const WeightProfile ap = approx_alpha_refined(n, C_eff);
    double sum = 0.0;
    for (double v : ex.alpha) sum += v;
    Artifacts a;
    a.trajectory_csv = weights_csv(ex, ap);
    a.summary = {{"C_effective", num(C_eff)},
                 {"sum_alpha_exact", num(sum)},
                 {"tv_excluding_t_below_10", num(weight_divergence(ex, ap, kApproxSkip))},
                 {"tv_all", num(weight_divergence(ex, ap))},
                 {"mass_first_half", num(mass_first_half(ex))}};
    return a;
}

Artifacts do_central_flow(const Config& c, const Problem& p) {
    const Hyperparams hp = hyperparams(c);
    FlowParams fp;
    fp.gamma = hp.gamma;
    fp.beta1 = hp.beta1;
    fp.beta2 = hp.beta2;
    fp.exact_c = c.boolean("flow.exact_c");
    long clamps = 0;
    fp.clamp_count = &clamps;
    const FlowKind kind = flow_kind(c);
    check(kind == FlowKind::sfgd || hp.beta2 > 0, "optimizer.beta2", "must be > 0 for the ScalarAdam flow");
    const long t0 = c.integer("flow.t0");
    check(t0 >= 1, "flow.t0", "must be >= 1");
    check(!fp.exact_c || t0 >= 2, "flow.t0", "must be >= 2 with exact c(t)");
    const double t_end = c.real("flow.t_end"), dt = c.real("flow.dt");
    check(t_end > double(t0), "flow.t_end", "must exceed flow.t0");
    check(dt > 0 && dt <= 1, "flow.dt", "must be in (0, 1]");
    const long per_unit = std::lround(1.0 / dt);
    check(std::abs(per_unit * dt - 1.0) < 1e-12, "flow.dt", "must divide 1");
    ParamVector y0 = c.list("flow.y0");
    if (y0.empty()) y0 = p.x0;
    check(y0.size() == p.obj->dimension(), "flow.y0", "dimension does not match the objective");
    const int window = int(c.integer("flow.window"));
    check(window >= 1, "flow.window", "must be >= 1");

    const ParamVector g0 = p.obj->gradient(y0);
    FlowState s0;
    s0.y = y0;
    s0.t = double(t0);
    s0.nu = dot(g0, g0);
    s0.m = kind == FlowKind::sfgd ? g0 : scaled(g0, 1.0 / std::sqrt(s0.nu));
    FlowRhs rhs;
    if (kind == FlowKind::sfgd)
        rhs = [&](const FlowState& s) { return flow_rhs_sfgd(s, *p.obj, fp); };
    else
        rhs = [&](const FlowState& s) { return flow_rhs_sfscalaradam(s, *p.obj, fp); };

    Artifacts a;
    try {
        const auto states = integrate_flow(rhs, s0, t_end, dt, int(per_unit));
        a.trajectory_csv = flow_csv(states, *p.obj, fp, kind);
        a.summary.push_back({"final_t", num(states.back().t)});
    } catch (const IntegrationError& e) {
        a.failed = true;
        a.failure = e.what();
        return a;
    }
    a.summary.push_back({"sigma2_clamp_events", std::to_string(clamps)});
    if (c.boolean("flow.compare")) {
        const long steps = std::lround(t_end) - t0;
        check(steps >= window, "flow.t_end", "comparison needs at least flow.window steps");
        try {
            const auto cmp = flow_vs_discrete(*p.obj, fp, kind, y0, t0, steps, window, int(per_unit));
            a.summary.push_back({"compare.max_distance", num(cmp.max_distance)});
            a.summary.push_back({"compare.arc_length", num(cmp.arc_length)});
            a.summary.push_back({"compare.ratio", num(cmp.ratio)});
        } catch (const DivergenceError& e) {
            a.failed = true;
            a.failure = e.what();
        }
    }
    return a;
}

}  // namespace

void validate(const std::string& sub, const Config& c) {
    c.seed();
    if (sub == "stability" || sub == "weights") {
        hyperparams(c);
        return;
    }
    if (sub == "central-flow") {
        const Config& cc = c;
        hyperparams(cc);
        flow_kind(cc);
        return;
    }
    const Problem p = problem(c);
    run_spec(c, p);
    if (sub == "decay-probe") {
        check(c.integer("probe.every") >= 1, "probe.every", "must be >= 1");
        check(c.real("probe.fraction") > 0, "probe.fraction", "must be > 0");
        check(c.real("probe.lr") > 0, "probe.lr", "must be > 0");
    }
    if (sub == "refined") {
        const auto Cs = c.list("refined.C_grid");
        check(!Cs.empty(), "refined.C_grid", "must not be empty");
        for (double C : Cs) check(C > 0, "refined.C_grid", "entries must be > 0");
    }
}

Artifacts execute(const std::string& sub, const Config& c) {
    validate(sub, c);
    if (sub == "stability") return do_stability(c);
    if (sub == "weights") return do_weights(c);

    const Problem p = problem(c);
    if (sub == "central-flow") return do_central_flow(c, p);

    RunSpec spec = run_spec(c, p);
    Artifacts a;
    if (sub == "toy" || sub == "train-mlp") {
        RunResult r = run_trajectory(*p.obj, spec);
        summarize_window(a, r);
        if (!r.records.empty()) a.summary.push_back({"final.loss_y", num(r.records.back().loss_y)});
        if (spec.loss_target > 0)
            a.summary.push_back(
                {"reached_target", !r.records.empty() && r.records.back().loss_y <= spec.loss_target ? "true" : "false"});
        take_run(a, r);
    } else if (sub == "eos") {
        check(spec.sharpness_every > 0, "sharpness.every", "must be > 0 for eos");
        EosResult e = run_eos_sweep(*p.obj, spec);
        summarize_window(a, e.run);
        a.summary.push_back({"eos.threshold", num(e.summary.threshold)});
        a.summary.push_back({"eos.plateau_median", num(e.summary.plateau)});
        a.summary.push_back({"eos.min_ratio", num(e.summary.min_ratio)});
        a.summary.push_back({"eos.max_ratio", num(e.summary.max_ratio)});
        a.summary.push_back({"eos.checkpoints", std::to_string(e.summary.checkpoints)});
        take_run(a, e.run);
    } else if (sub == "decay-probe") {
        spec.checkpoint_every = c.integer("probe.every");
        ProbeSettingsStudy ps;
        ps.fraction = c.real("probe.fraction");
        ps.lr = c.real("probe.lr");
        DecayProbeStudy st;
        try {
            st = run_decay_probe_study(*p.obj, spec, ps);
        } catch (const DivergenceError& e) {
            a.failed = true;
            a.failure = e.what();
            return a;
        }
        summarize_window(a, st.run);
        a.summary.push_back({"probe.count", std::to_string(st.probes.size())});
        a.summary.push_back({"probe.mean_relative_drop", num(st.mean_relative_drop)});
        a.files["probes.csv"] = probes_csv(st.probes);
        take_run(a, st.run);
    } else if (sub == "y-vs-x") {
        YvsXStudy st = run_y_vs_x_study(*p.obj, spec);
        summarize_window(a, st.run);
        a.summary.push_back({"y_beats_x", st.summary.loss_y < st.summary.loss_x ? "true" : "false"});
        a.summary.push_back({"ewa_y_beats_y", st.summary.ewa_loss_y <= st.summary.loss_y ? "true" : "false"});
        take_run(a, st.run);
    } else if (sub == "refined") {
        const auto Cs = c.list("refined.C_grid");
        RefinedComparison rc = run_refined_comparison(*p.obj, spec, Cs);
        std::string csv = "C,loss_x,loss_y,max_dev_from_vanilla\n";
        for (const auto& r : rc.rows)
            csv += num(r.C) + "," + num(r.loss_x) + "," + num(r.loss_y) + "," + num(r.max_dev_from_vanilla) + "\n";
        a.trajectory_csv = csv;
        a.files["vanilla.csv"] = records_csv(rc.vanilla.records);
        summarize_window(a, rc.vanilla);
        if (rc.vanilla.diverged) {
            a.failed = true;
            a.failure = rc.vanilla.divergence;
        }
    } else {
        throw ConfigError("subcommand", "unknown subcommand '" + sub + "'");
    }
    return a;
}

fs::path runs_root() {
    const char* env = std::getenv("SFLAB_RUNS_DIR");
    return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path run_directory(const std::string& sub, const Config& c) {
    std::string name = c.raw("name");
    if (name.empty()) name = sub;
    check(name.find('/') == std::string::npos && name != "." && name != "..", "name", "must be a plain directory name");
    return runs_root() / (name + "-" + std::to_string(c.seed()));
}

std::string manifest_text(const std::string& sub, const Config& c, const std::string& started, const fs::path& dir) {
    std::string m = "# sflab run manifest\n";
    m += "meta.subcommand = " + sub + "\n";
    m += "meta.version = " + std::string(kVersion) + "\n";
    m += "meta.started = " + started + "\n";
    m += "meta.run_dir = " + dir.string() + "\n";
    m += "meta.trajectory = trajectory.csv\n";
    m += "meta.summary = summary.txt\n";
    m += "meta.checkpoints = checkpoints\n";
    return m + serialize(c);
}

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string l;
    while (std::getline(ss, l)) out.push_back(l);
    return out;
}

}  // namespace

int run_to_directory(const std::string& sub, const Config& c, std::ostream& out, std::ostream& err) {
    const fs::path dir = run_directory(sub, c);
    fs::create_directories(dir / "checkpoints");
    write_file(dir / "manifest.txt", manifest_text(sub, c, utc_now(), dir));

    const Artifacts a = execute(sub, c);
    write_file(dir / "trajectory.csv", a.trajectory_csv);
    for (const auto& [name, text] : a.files) write_file(dir / name, text);
    for (const auto& ck : a.checkpoints)
        save_checkpoint((dir / "checkpoints" / ("step-" + std::to_string(ck.step) + ".ckpt")).string(), ck.state);
    std::string summary;
    for (const auto& [k, v] : a.summary) summary += k + " = " + v + "\n";
    if (a.failed) summary += "failure = " + a.failure + "\n";
    write_file(dir / "summary.txt", summary);

    out << "[" << dir.filename().string() << "] wrote " << (dir / "trajectory.csv").string() << "\n";
    for (const auto& [k, v] : a.summary) out << "[" << dir.filename().string() << "] " << k << " = " << v << "\n";
    if (a.failed) {
        err << "[" << dir.filename().string() << "] experiment failed: " << a.failure << "\n";
        return 1;
    }
    return 0;
}

int replay(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
    std::string manifest;
    try {
        manifest = read_file(run_dir / "manifest.txt");
    } catch (const std::exception& e) {
        err << "replay: " << e.what() << "\n";
        return 2;
    }
    std::string sub, version;
    for (const auto& l : lines(manifest)) {
        const auto eq = l.find('=');
        if (eq == std::string::npos) continue;
        auto key = l.substr(0, eq), val = l.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        val.erase(0, val.find_first_not_of(" \t"));
        if (key == "meta.subcommand") sub = val;
        if (key == "meta.version") version = val;
    }
    if (sub.empty() || sub == "replay") {
        err << "replay: manifest has no runnable meta.subcommand\n";
        return 2;
    }
    if (version != kVersion)
        err << "replay: warning: run was recorded with sflab " << version << ", replaying with " << kVersion
            << "; comparing anyway\n";
    Config c = defaults_for(sub);
    try {
        apply_config_text(c, manifest, (run_dir / "manifest.txt").string());
    } catch (const ConfigError& e) {
        err << "replay: " << e.what() << "\n";
        return 2;
    }
    std::string recorded;
    try {
        recorded = read_file(run_dir / "trajectory.csv");
    } catch (const std::exception& e) {
        err << "replay: " << e.what() << "\n";
        return 1;
    }
    const Artifacts a = execute(sub, c);
    if (a.trajectory_csv == recorded) {
        out << "replay: trajectory.csv identical (" << lines(recorded).size() << " rows)\n";
        return 0;
    }
    const auto L1 = lines(recorded), L2 = lines(a.trajectory_csv);
    std::size_t i = 0;
    while (i < L1.size() && i < L2.size() && L1[i] == L2[i]) ++i;
    err << "replay: trajectory.csv differs at row " << i + 1 << "\n";
    err << "  recorded: " << (i < L1.size() ? L1[i] : "<missing>") << "\n";
    err << "  replayed: " << (i < L2.size() ? L2[i] : "<missing>") << "\n";
    return 1;
}

int main_entry(int argc, char** argv) {
    CLI::App app{"sflab: Schedule-Free optimizer analysis experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("sflab ") + kVersion);

    // a flag may use the full dotted key or, when unique, its last component
    std::map<std::string, int> tails;
    for (const auto& k : config_schema()) ++tails[k.name.substr(k.name.rfind('.') + 1)];

    struct Sub {
        CLI::App* app;
        std::map<std::string, std::string> vals;
        std::map<std::string, CLI::Option*> opts;
        std::string config_path;
        std::string run_dir;
    };
    std::map<std::string, Sub> subs;
    for (const auto& name : subcommands()) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, name == "replay" ? "re-run a recorded run and byte-compare its CSV"
                                                          : "run the " + name + " experiment");
        if (name == "replay") {
            s.app->add_option("run_dir", s.run_dir, "run directory")->required();
            continue;
        }
        s.app->add_option("--config", s.config_path, "key = value config file");
        for (const auto& k : config_schema()) {
            std::string names = "--" + k.name;
            const std::string tail = k.name.substr(k.name.rfind('.') + 1);
            if (tail != k.name && tails[tail] == 1) names += ",--" + tail;
            if (k.name == "optimizer.beta1") names += ",--beta";
            s.opts[k.name] = s.app->add_option(names, s.vals[k.name], k.help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        if (name == "replay") return replay(s.run_dir, std::cout, std::cerr);
        Config c = defaults_for(name);
        try {
            if (!s.config_path.empty()) apply_config_file(c, s.config_path);
            for (const auto& [key, opt] : s.opts)
                if (opt->count() > 0) c.set(key, s.vals[key]);
            validate(name, c);
            run_directory(name, c);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
        try {
            return run_to_directory(name, c, std::cout, std::cerr);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    std::cerr << app.help();
    return 2;
}

}  // namespace sflab::cli

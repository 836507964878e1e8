#include "sflab/centralflow.hpp"

#include <cmath>
#include <cstdio>

#include "sflab/optimizers.hpp"

namespace sflab {

OscillationModel oscillation_model(const Objective& obj, const ParamVector& y) {
    OscillationModel om;
    if (const auto* toy = dynamic_cast<const ToyRiverValley*>(&obj)) {
        auto [S, u] = toy->top_eigen(y);
        om.S = S;
        om.u = std::move(u);
    } else {
        auto e = top_eigenpair(obj, y, nullptr, 1e-12, 100000);
        om.S = e.value;
        om.u = std::move(e.vector);
    }
    return om;
}

namespace {

ParamVector checked_grad_s(const Objective& obj, const ParamVector& y) {
    ParamVector gS = obj.sharpness_gradient(y);
    if (norm(gS) < kGradSTol) throw DegenerateError("sharpness gradient vanishes; sigma^2 is undefined here");
    return gS;
}

void count_clamp(const FlowParams& fp) {
    if (fp.clamp_count) ++*fp.clamp_count;
}

}  // namespace

double sigma2_sfgd_raw(const Objective& obj, const ParamVector& y) {
    const ParamVector gS = checked_grad_s(obj, y);
    const ParamVector gf = obj.gradient(y);
    return -2.0 * dot(gS, gf) / dot(gS, gS);
}

double sigma2_sfgd(const Objective& obj, const ParamVector& y) { return std::max(0.0, sigma2_sfgd_raw(obj, y)); }

double sigma2_sfscalaradam_raw(const Objective& obj, const ParamVector& y, double gamma, double beta1,
                               double beta2) {
    require(gamma > 0, "sigma2_sfscalaradam: gamma must be > 0");
    require(beta1 >= 0 && beta1 < 1, "sigma2_sfscalaradam: beta1 must be in [0, 1)");
    require(beta2 > 0 && beta2 <= 1, "sigma2_sfscalaradam: beta2 must be in (0, 1]");
    const ParamVector gS = checked_grad_s(obj, y);
    const ParamVector gf = obj.gradient(y);
    const double S = oscillation_model(obj, y).S;
    const double k = (1.0 - beta2) / beta2;
    const double u = 1.0 / ((1.0 - beta1) * (1.0 - beta1) * gamma * gamma);
    const double num = -dot(gS, gf) + k * (0.25 * S * S - dot(gf, gf) * u);
    const double den = 0.5 * dot(gS, gS) + k * S * S * u;
    if (den == 0.0) throw DegenerateError("sigma^2 denominator vanishes");
    return num / den;
}

double sigma2_sfscalaradam(const Objective& obj, const ParamVector& y, double gamma, double beta1, double beta2) {
    return std::max(0.0, sigma2_sfscalaradam_raw(obj, y, gamma, beta1, beta2));
}

FlowState flow_rhs_sfgd(const FlowState& s, const Objective& obj, const FlowParams& fp) {
    const double thr = 2.0 / ((1.0 - fp.beta1) * fp.gamma);
    const ParamVector gf = obj.gradient(s.y);
    ParamVector G = gf;
    const OscillationModel om = oscillation_model(obj, s.y);
    if (om.S >= thr * (1.0 - fp.gate)) {
        try {
            const ParamVector gS = checked_grad_s(obj, s.y);
            const double raw = -2.0 * dot(gS, gf) / dot(gS, gS);
            if (raw < 0) count_clamp(fp);
            axpy(0.5 * std::max(0.0, raw), gS, G);
        } catch (const DegenerateError&) {
        }
    }
    const double c = fp.exact_c ? 1.0 / s.t : 0.0;
    const double cn = fp.exact_c ? 1.0 / (s.t + 1.0) : 0.0;
    FlowState d;
    d.y = scaled(G, -fp.gamma * (1.0 - fp.beta1));
    d.m.assign(G.size(), 0.0);
    if (!s.m.empty()) {
        axpy(-fp.gamma * fp.beta1 * cn, s.m, d.y);
        for (std::size_t i = 0; i < G.size(); ++i) d.m[i] = (G[i] - c * s.m[i]) / (1.0 - c);
    }
    return d;
}

FlowState flow_rhs_sfscalaradam(const FlowState& s, const Objective& obj, const FlowParams& fp) {
    if (!(s.nu > 0)) throw ContractError("flow_rhs_sfscalaradam: nu must be > 0");
    const double thr = 2.0 / ((1.0 - fp.beta1) * fp.gamma);
    const double sq = std::sqrt(s.nu);
    const ParamVector gf = obj.gradient(s.y);
    const OscillationModel om = oscillation_model(obj, s.y);
    ParamVector G = gf;
    double s2 = 0.0;
    if (om.S / sq >= thr * (1.0 - fp.gate)) {
        try {
            const double raw = sigma2_sfscalaradam_raw(obj, s.y, fp.gamma, fp.beta1, fp.beta2);
            if (raw < 0) count_clamp(fp);
            s2 = std::max(0.0, raw);
            axpy(0.5 * s2, obj.sharpness_gradient(s.y), G);
        } catch (const DegenerateError&) {
        }
    }
    const double c = fp.exact_c ? 1.0 / s.t : 0.0;
    const double cn = fp.exact_c ? 1.0 / (s.t + 1.0) : 0.0;
    FlowState d;
    d.y = scaled(G, -fp.gamma * (1.0 - fp.beta1) / sq);
    d.m.assign(G.size(), 0.0);
    if (!s.m.empty()) {
        axpy(-fp.gamma * fp.beta1 * cn, s.m, d.y);
        for (std::size_t i = 0; i < G.size(); ++i) d.m[i] = (G[i] / sq - c * s.m[i]) / (1.0 - c);
    }
    d.nu = (1.0 - fp.beta2) / fp.beta2 * (dot(gf, gf) + s2 * om.S * om.S - s.nu);
    return d;
}

namespace {

FlowState advance(const FlowState& s, const FlowState& d, double h) {
    FlowState r = s;
    axpy(h, d.y, r.y);
    if (!r.m.empty()) axpy(h, d.m, r.m);
    r.nu += h * d.nu;
    r.t += h;
    return r;
}

bool finite_state(const FlowState& s) { return all_finite(s.y) && all_finite(s.m) && std::isfinite(s.nu); }

}  // namespace

std::vector<FlowState> integrate_flow(const FlowRhs& rhs, FlowState s0, double t_end, double dt, int record_every) {
    require(dt > 0, "integrate_flow: dt must be > 0");
    require(t_end > s0.t, "integrate_flow: t_end must exceed the start time");
    require(record_every >= 1, "integrate_flow: record_every must be >= 1");
    const long n = std::lround((t_end - s0.t) / dt);
    const double t_start = s0.t;
    std::vector<FlowState> out{s0};
    FlowState s = std::move(s0);
    for (long k = 1; k <= n; ++k) {
        const FlowState k1 = rhs(s);
        const FlowState k2 = rhs(advance(s, k1, dt / 2));
        const FlowState k3 = rhs(advance(s, k2, dt / 2));
        const FlowState k4 = rhs(advance(s, k3, dt));
        FlowState next = s;
        axpy(dt / 6, k1.y, next.y);
        axpy(dt / 3, k2.y, next.y);
        axpy(dt / 3, k3.y, next.y);
        axpy(dt / 6, k4.y, next.y);
        if (!next.m.empty()) {
            axpy(dt / 6, k1.m, next.m);
            axpy(dt / 3, k2.m, next.m);
            axpy(dt / 3, k3.m, next.m);
            axpy(dt / 6, k4.m, next.m);
        }
        next.nu += dt / 6 * (k1.nu + 2 * k2.nu + 2 * k3.nu + k4.nu);
        next.t = t_start + double(k) * dt;
        if (!finite_state(next))
            throw IntegrationError("flow integration produced non-finite values at t=" + std::to_string(next.t), s);
        s = std::move(next);
        if (k % record_every == 0) out.push_back(s);
    }
    return out;
}

FlowComparison flow_vs_discrete(const Objective& obj, const FlowParams& fp, FlowKind kind, const ParamVector& y0,
                                long t0, long steps, int window, int substeps) {
    require(window >= 1, "flow_vs_discrete: window must be >= 1");
    require(steps >= window, "flow_vs_discrete: need at least window steps");
    require(t0 >= 2 || !fp.exact_c, "flow_vs_discrete: exact c(t) needs t0 >= 2");
    require(substeps >= 1, "flow_vs_discrete: substeps must be >= 1");

    Hyperparams hp;
    hp.gamma = fp.gamma;
    hp.beta1 = fp.beta1;
    hp.beta2 = fp.beta2;
    hp.c_rule = CRule::ideal;
    const Schedule sched = Schedule::constant(fp.gamma);

    FlowComparison out;
    SFState s = SFState::start(y0, t0);
    out.discrete.push_back(s.y(hp.beta1));
    for (long k = 0; k < steps; ++k) {
        const ParamVector g = obj.gradient(s.y(hp.beta1));
        s = kind == FlowKind::sfgd ? sf_gd_step(std::move(s), g, hp, sched)
                                   : sf_scalaradam_step(std::move(s), g, hp, sched);
        ParamVector y = s.y(hp.beta1);
        if (!all_finite(y)) throw DivergenceError("discrete run diverged", s.t);
        out.discrete.push_back(std::move(y));
    }

    const ParamVector g0 = obj.gradient(y0);
    FlowState f0;
    f0.y = y0;
    f0.t = double(t0);
    f0.nu = dot(g0, g0);
    f0.m = kind == FlowKind::sfgd ? g0 : scaled(g0, 1.0 / std::sqrt(f0.nu));
    FlowRhs rhs;
    if (kind == FlowKind::sfgd)
        rhs = [&](const FlowState& st) { return flow_rhs_sfgd(st, obj, fp); };
    else
        rhs = [&](const FlowState& st) { return flow_rhs_sfscalaradam(st, obj, fp); };
    const auto states = integrate_flow(rhs, f0, double(t0 + steps), 1.0 / substeps, substeps);
    for (const auto& st : states) out.flow.push_back(st.y);
    for (std::size_t i = 1; i < out.flow.size(); ++i) out.arc_length += dist(out.flow[i], out.flow[i - 1]);

    const std::size_t h = std::size_t(window) / 2, n = out.discrete.size();
    const std::size_t d = y0.size();
    for (std::size_t c = h; c + (window - 1 - h) < n; ++c) {
        ParamVector avg(d, 0.0);
        for (std::size_t j = c - h; j < c - h + std::size_t(window); ++j) axpy(1.0 / window, out.discrete[j], avg);
        out.max_distance = std::max(out.max_distance, dist(avg, out.flow[c]));
        out.averaged.push_back(std::move(avg));
        ++out.compared;
    }
    out.ratio = out.arc_length > 0 ? out.max_distance / out.arc_length : 0.0;
    return out;
}

std::string flow_csv(const std::vector<FlowState>& states, const Objective& obj, const FlowParams& fp,
                     FlowKind kind) {
    std::string out = "t";
    const std::size_t d = states.empty() ? 0 : states.front().y.size();
    for (std::size_t i = 0; i < d; ++i) out += ",y" + std::to_string(i + 1);
    out += ",S,nu,sigma2,precond_sharpness\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out += buf;
    };
    for (const auto& s : states) {
        std::snprintf(buf, sizeof buf, "%.17g", s.t);
        out += buf;
        for (double v : s.y) num(v);
        const double S = oscillation_model(obj, s.y).S;
        double s2 = 0.0;
        try {
            s2 = kind == FlowKind::sfgd ? sigma2_sfgd(obj, s.y)
                                        : sigma2_sfscalaradam(obj, s.y, fp.gamma, fp.beta1, fp.beta2);
        } catch (const DegenerateError&) {
        }
        num(S);
        num(s.nu);
        num(s2);
        num(kind == FlowKind::sfgd ? S : S / std::sqrt(s.nu));
        out += "\n";
    }
    return out;
}

}  // namespace sflab

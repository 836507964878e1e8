#include "sflab/optimizers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

namespace sflab {

void Hyperparams::validate() const {
    require(gamma > 0 && std::isfinite(gamma), "gamma must be > 0");
    require(beta1 >= 0 && beta1 < 1, "beta1 must be in [0, 1)");
    require(beta2 >= 0 && beta2 < 1, "beta2 must be in [0, 1)");
    require(lambda >= 0, "lambda must be >= 0");
    require(epsilon > 0, "epsilon must be > 0");
    require(warmup_steps >= 0, "warmup_steps must be >= 0");
    require(total_steps >= 1, "total_steps must be >= 1");
    require(C >= 0, "C must be > 0 (or 0 for the vanilla rule)");
    require(clip >= 0, "clip must be >= 0");
}

SFState SFState::start(const ParamVector& x1, long t1) {
    require(t1 >= 1, "SFState: step must be >= 1");
    return {x1, x1, ParamVector(x1.size(), 0.0), t1, 0.0};
}

AdamWState AdamWState::start(const ParamVector& w1) {
    return {w1, ParamVector(w1.size(), 0.0), ParamVector(w1.size(), 0.0), 1};
}

double Schedule::lr(long t) const {
    const double tt = double(t);
    const double warm = warmup_steps > 0 ? std::min(1.0, tt / double(warmup_steps)) : 1.0;
    switch (kind) {
        case ScheduleKind::constant:
            return peak;
        case ScheduleKind::warmup_constant:
            return peak * warm;
        case ScheduleKind::warmup_cosine: {
            if (t < warmup_steps) return peak * warm;
            const double span = std::max(1.0, double(total_steps - warmup_steps));
            const double p = std::clamp((tt - double(warmup_steps)) / span, 0.0, 1.0);
            return peak * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * p)));
        }
        case ScheduleKind::linear_decay:
            return peak * warm * std::max(0.0, 1.0 - (tt - 1.0) / double(total_steps));
    }
    return peak;
}

std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::warmup_constant: return "warmup-constant";
        case ScheduleKind::warmup_cosine: return "warmup-cosine";
        case ScheduleKind::linear_decay: return "linear-decay";
    }
    return "constant";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "constant") return ScheduleKind::constant;
    if (s == "warmup-constant") return ScheduleKind::warmup_constant;
    if (s == "warmup-cosine") return ScheduleKind::warmup_cosine;
    if (s == "linear-decay") return ScheduleKind::linear_decay;
    throw ContractError("unknown schedule kind '" + s + "'");
}

SFState sf_step(SFState s, const ParamVector& delta, double gamma_t, double c_next) {
    require(c_next > 0 && c_next <= 1, "sf_step: c_next must be in (0, 1]");
    require_same_size(s.z, delta, "sf_step");
    if (!all_finite(delta)) throw DivergenceError("non-finite update direction", s.t);
    axpy(-gamma_t, delta, s.z);
    for (std::size_t i = 0; i < s.x.size(); ++i) s.x[i] = (1.0 - c_next) * s.x[i] + c_next * s.z[i];
    ++s.t;
    return s;
}

namespace {

double base_c(const SFState& s, const Hyperparams& hp, double gamma_t) {
    if (hp.c_rule == CRule::ideal) return 1.0 / double(s.t + 1);
    if (s.lr_sq_sum <= 0.0) return 1.0;
    return gamma_t * gamma_t / s.lr_sq_sum;
}

}  // namespace

double refined_c(const SFState& s, const Hyperparams& hp, double gamma_t) {
    require(hp.C > 0, "refined_c: C must be > 0");
    const double factor = (1.0 - hp.beta1) * hp.C;
    return std::min(base_c(s, hp, gamma_t) * factor, 1.0);
}

double next_c(const SFState& s, const Hyperparams& hp, double gamma_t) {
    if (hp.C > 0) return refined_c(s, hp, gamma_t);
    return std::min(base_c(s, hp, gamma_t), 1.0);
}

SFState sf_gd_step(SFState s, const ParamVector& grad_at_y, const Hyperparams& hp, const Schedule& sched) {
    const double g_t = sched.lr(s.t);
    s.lr_sq_sum += g_t * g_t;
    const double c = next_c(s, hp, g_t);
    return sf_step(std::move(s), grad_at_y, g_t, c);
}

SFState sf_precond_step(SFState s, const ParamVector& grad_at_y, const Preconditioner& P, const Hyperparams& hp,
                        const Schedule& sched) {
    require_same_size(grad_at_y, P.diag, "sf_precond_step");
    const ParamVector y = s.y(hp.beta1);
    ParamVector delta(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) delta[i] = grad_at_y[i] / P.diag[i] + hp.lambda * y[i];
    const double g_t = sched.lr(s.t);
    s.lr_sq_sum += g_t * g_t;
    const double c = next_c(s, hp, g_t);
    return sf_step(std::move(s), delta, g_t, c);
}

SFState sf_adamw_step(SFState s, const ParamVector& grad_at_y, const Hyperparams& hp, const Schedule& sched) {
    require_same_size(grad_at_y, s.z, "sf_adamw_step");
    require(s.t < (1L << 52), "sf_adamw_step: step counter overflow");
    const ParamVector y = s.y(hp.beta1);
    const double bc = 1.0 - std::pow(hp.beta2, double(s.t));
    ParamVector delta(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double g = grad_at_y[i];
        s.v[i] = hp.beta2 * s.v[i] + (1.0 - hp.beta2) * g * g;
        delta[i] = g / (std::sqrt(s.v[i] / bc) + hp.epsilon) + hp.lambda * y[i];
    }
    const double g_t = sched.lr(s.t);
    s.lr_sq_sum += g_t * g_t;
    const double c = next_c(s, hp, g_t);
    return sf_step(std::move(s), delta, g_t, c);
}

SFState sf_scalaradam_step(SFState s, const ParamVector& grad_at_y, const Hyperparams& hp, const Schedule& sched) {
    require_same_size(grad_at_y, s.z, "sf_scalaradam_step");
    const double gg = dot(grad_at_y, grad_at_y);
    double nu = s.v.empty() ? 0.0 : s.v[0];
    nu = s.lr_sq_sum == 0.0 ? gg : hp.beta2 * nu + (1.0 - hp.beta2) * gg;
    std::fill(s.v.begin(), s.v.end(), nu);
    const ParamVector delta = scaled(grad_at_y, 1.0 / (std::sqrt(nu) + hp.epsilon));
    const double g_t = sched.lr(s.t);
    s.lr_sq_sum += g_t * g_t;
    const double c = next_c(s, hp, g_t);
    return sf_step(std::move(s), delta, g_t, c);
}

void clip_global_norm(ParamVector& g, double max_norm) {
    if (max_norm <= 0) return;
    const double n = norm(g);
    if (n > max_norm) g = scaled(g, max_norm / n);
}

AdamWState adamw_step(AdamWState s, ParamVector grad, const Hyperparams& hp, const Schedule& sched) {
    require_same_size(grad, s.w, "adamw_step");
    if (!all_finite(grad)) throw DivergenceError("non-finite gradient", s.t);
    clip_global_norm(grad, hp.clip);
    const double lr = sched.lr(s.t);
    const double bc1 = 1.0 - std::pow(hp.beta1, double(s.t));
    const double bc2 = 1.0 - std::pow(hp.beta2, double(s.t));
    for (std::size_t i = 0; i < s.w.size(); ++i) {
        const double g = grad[i];
        s.m[i] = hp.beta1 * s.m[i] + (1.0 - hp.beta1) * g;
        s.v[i] = hp.beta2 * s.v[i] + (1.0 - hp.beta2) * g * g;
        const double mh = s.m[i] / bc1, vh = s.v[i] / bc2;
        s.w[i] -= lr * (mh / (std::sqrt(vh) + hp.epsilon) + hp.lambda * s.w[i]);
    }
    ++s.t;
    return s;
}

ProbeResult decay_probe(const ParamVector& checkpoint, const Objective& obj, long probe_steps, double lr_start,
                        const ProbeSettings& ps) {
    require(probe_steps >= 1, "decay_probe: probe_steps must be >= 1");
    require(lr_start > 0, "decay_probe: lr_start must be > 0");
    Hyperparams hp;
    hp.gamma = lr_start;
    hp.beta1 = ps.beta1;
    hp.beta2 = ps.beta2;
    hp.lambda = ps.lambda;
    hp.epsilon = ps.epsilon;
    hp.clip = ps.clip;
    const Schedule sched = Schedule::linear_decay(lr_start, probe_steps);
    AdamWState s = AdamWState::start(checkpoint);
    ParamVector g;
    for (long k = 0; k < probe_steps; ++k) {
        const double f = obj.value_and_gradient(s.w, g);
        if (!std::isfinite(f))
            throw DivergenceError("decay probe diverged at probe step " + std::to_string(k + 1) + " (loss " +
                                      std::to_string(f) + ")",
                                  k + 1);
        s = adamw_step(std::move(s), g, hp, sched);
    }
    const double f = obj.value(s.w);
    if (!std::isfinite(f)) throw DivergenceError("decay probe diverged at the final point", probe_steps);
    return {std::move(s.w), f};
}

void ewa_update(EWATracker& tr, const ParamVector& w) {
    if (!tr.initialized) {
        tr.average = w;
        tr.initialized = true;
        return;
    }
    require_same_size(tr.average, w, "ewa_update");
    for (std::size_t i = 0; i < w.size(); ++i) tr.average[i] = tr.decay * tr.average[i] + (1.0 - tr.decay) * w[i];
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[4] = {'S', 'F', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const SFState& s) {
    const std::size_t d = s.x.size();
    require(s.z.size() == d && s.v.size() == d, "save_checkpoint: x, z, v must share a dimension");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kCkptVersion);
    put<std::uint64_t>(out, d);
    put<std::int64_t>(out, s.t);
    put<double>(out, s.lr_sq_sum);
    for (const ParamVector* blk : {&s.x, &s.z, &s.v})
        for (double v : *blk) put<double>(out, v);
    if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

SFState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const auto version = get<std::uint32_t>(in);
    if (version != kCkptVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const auto d = get<std::uint64_t>(in);
    SFState s;
    s.t = static_cast<long>(get<std::int64_t>(in));
    s.lr_sq_sum = get<double>(in);
    for (ParamVector* blk : {&s.x, &s.z, &s.v}) {
        blk->resize(d);
        for (double& v : *blk) v = get<double>(in);
    }
    return s;
}

}  // namespace sflab

#include "sflab/stability.hpp"

#include <algorithm>
#include <cmath>

namespace sflab {

double sf_threshold(double beta, double gamma, double lambda_wd) {
    require(beta >= 0 && beta < 1, "sf_threshold: beta must be in [0, 1)");
    require(gamma > 0, "sf_threshold: gamma must be > 0");
    return 2.0 / ((1.0 - beta) * gamma) - lambda_wd;
}

RootPair characteristic_roots(double a, double beta, double gamma) {
    require(a >= 0, "characteristic_roots: a must be >= 0");
    const double q = a * gamma * (1.0 - beta);
    const double b = 2.0 - q;
    const std::complex<double> disc = std::sqrt(std::complex<double>(b * b + 4.0 * (q - 1.0), 0.0));
    return {(b + disc) / 2.0, (b - disc) / 2.0};
}

namespace {

Hyperparams theory_hp(const Hyperparams& hp) {
    Hyperparams h = hp;
    h.c_rule = CRule::ideal;
    h.C = 0.0;
    return h;
}

}  // namespace

StabilityVerdict run_quadratic_sf(const Quadratic& obj, const Hyperparams& hp_in, SFVariant variant,
                                  const Preconditioner* P, long max_steps, ParamVector x1) {
    const std::size_t d = obj.dimension();
    if (x1.empty()) x1.assign(d, 1.0);
    require(variant == SFVariant::gd || P, "run_quadratic_sf: SF-PrecondGDW needs a preconditioner");
    const Hyperparams hp = theory_hp(hp_in);
    const Schedule sched = Schedule::constant(hp.gamma);

    StabilityVerdict v;
    if (variant == SFVariant::gd) {
        v.threshold_theoretical = sf_threshold(hp.beta1, hp.gamma);
    } else {
        v.threshold_theoretical = sf_threshold(hp.beta1, hp.gamma, hp.lambda);
    }
    const double limit = kDivergenceFactor * (1.0 + norm(x1));
    SFState s = SFState::start(x1);
    v.max_norm = norm(x1);
    for (long k = 0; k < max_steps; ++k) {
        const ParamVector g = obj.gradient(s.y(hp.beta1));
        s = variant == SFVariant::gd ? sf_gd_step(std::move(s), g, hp, sched)
                                     : sf_precond_step(std::move(s), g, *P, hp, sched);
        v.steps_run = k + 1;
        const double n = std::max(norm(s.x), norm(s.z));
        if (!std::isfinite(n) || n > limit) {
            v.diverged = true;
            v.max_norm = std::isfinite(n) ? n : limit;
            return v;
        }
        v.max_norm = std::max(v.max_norm, n);
    }
    return v;
}

ReparamDeviation reparam_check(const Quadratic& f, const Preconditioner& P, const Hyperparams& hp_in, long steps,
                               ParamVector x1) {
    const std::size_t d = f.dimension();
    require(P.diag.size() == d, "reparam_check: preconditioner dimension mismatch");
    if (x1.empty()) x1.assign(d, 1.0);
    const Hyperparams hp = theory_hp(hp_in);
    const Schedule sched = Schedule::constant(hp.gamma);

    ParamVector r(d), ri(d);
    for (std::size_t i = 0; i < d; ++i) {
        r[i] = std::sqrt(P.diag[i]);
        ri[i] = 1.0 / r[i];
    }
    std::vector<double> Ht(d * d);
    ParamVector gt(d);
    for (std::size_t i = 0; i < d; ++i) {
        gt[i] = ri[i] * f.g()[i];
        for (std::size_t j = 0; j < d; ++j) Ht[i * d + j] = ri[i] * f.H()[i * d + j] * ri[j];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) Ht[i * d + j] = Ht[j * d + i];
    const Quadratic ft(Ht, gt, f.offset());
    const Preconditioner I = Preconditioner::identity(d);

    auto lift = [&](const ParamVector& v) {
        ParamVector o(d);
        for (std::size_t i = 0; i < d; ++i) o[i] = r[i] * v[i];
        return o;
    };

    SFState a = SFState::start(x1), b = SFState::start(lift(x1));
    ReparamDeviation dev;
    for (long k = 0; k < steps; ++k) {
        a = sf_precond_step(std::move(a), f.gradient(a.y(hp.beta1)), P, hp, sched);
        b = sf_precond_step(std::move(b), ft.gradient(b.y(hp.beta1)), I, hp, sched);
        dev.x = std::max(dev.x, dist(b.x, lift(a.x)));
        dev.z = std::max(dev.z, dist(b.z, lift(a.z)));
        dev.y = std::max(dev.y, dist(b.y(hp.beta1), lift(a.y(hp.beta1))));
    }
    return dev;
}

bool grows_late(const Quadratic& obj, const Hyperparams& hp_in, SFVariant variant, const Preconditioner* P,
                long max_steps) {
    require(max_steps >= 2, "grows_late: need at least 2 steps");
    require(variant == SFVariant::gd || P, "grows_late: SF-PrecondGDW needs a preconditioner");
    const Hyperparams hp = theory_hp(hp_in);
    const Schedule sched = Schedule::constant(hp.gamma);
    SFState s = SFState::start(ParamVector(obj.dimension(), 1.0));
    double mid = 0.0;
    try {
        for (long k = 1; k <= max_steps; ++k) {
            const ParamVector g = obj.gradient(s.y(hp.beta1));
            s = variant == SFVariant::gd ? sf_gd_step(std::move(s), g, hp, sched)
                                         : sf_precond_step(std::move(s), g, *P, hp, sched);
            const double n = std::max(norm(s.x), norm(s.z));
            if (!std::isfinite(n)) return true;
            if (k == max_steps / 2) mid = n;
        }
    } catch (const DivergenceError&) {
        return true;
    }
    return std::max(norm(s.x), norm(s.z)) > 10.0 * mid;
}

namespace {

bool probe_diverges(const ThresholdProbe& pr, double s) {
    ParamVector diag = pr.base_diag;
    for (double& v : diag) v *= s;
    const Quadratic q = Quadratic::diagonal(diag);
    Hyperparams hp;
    hp.beta1 = pr.beta;
    hp.gamma = pr.gamma;
    hp.lambda = pr.lambda;
    if (pr.precond.empty()) {
        if (pr.late_growth) return grows_late(q, hp, SFVariant::gd, nullptr, pr.max_steps);
        return run_quadratic_sf(q, hp, SFVariant::gd, nullptr, pr.max_steps).diverged;
    }
    const Preconditioner P(pr.precond);
    if (pr.late_growth) return grows_late(q, hp, SFVariant::precond_gdw, &P, pr.max_steps);
    return run_quadratic_sf(q, hp, SFVariant::precond_gdw, &P, pr.max_steps).diverged;
}

}  // namespace

double empirical_threshold(const ThresholdProbe& pr, double lo, double hi) {
    require(lo > 0 && hi > lo, "empirical_threshold: need 0 < lo < hi");
    double top = 0.0;  // lambda_1(P^{-1} diag(base))
    for (std::size_t i = 0; i < pr.base_diag.size(); ++i) {
        const double p = pr.precond.empty() ? 1.0 : pr.precond.at(i);
        top = std::max(top, pr.base_diag[i] / p);
    }
    require(top > 0, "empirical_threshold: base Hessian has no positive curvature");
    double slo = lo / top, shi = hi / top;
    if (probe_diverges(pr, slo) || !probe_diverges(pr, shi))
        throw std::runtime_error("empirical_threshold: bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 "] does not straddle the divergence boundary");
    const double res = pr.resolution * sf_threshold(pr.beta, pr.gamma, pr.lambda) / top;
    while (shi - slo > res) {
        const double mid = 0.5 * (slo + shi);
        (probe_diverges(pr, mid) ? shi : slo) = mid;
    }
    return shi * top;
}

double measured_growth_factor(double a, double beta, double gamma, long steps) {
    require(steps >= 40, "measured_growth_factor: need at least 40 steps");
    const Quadratic q = Quadratic::diagonal({a});
    Hyperparams hp;
    hp.beta1 = beta;
    hp.gamma = gamma;
    hp.c_rule = CRule::ideal;
    const Schedule sched = Schedule::constant(gamma);
    SFState s = SFState::start({1.0});
    std::vector<double> logs;
    for (long k = 0; k < steps; ++k) {
        s = sf_gd_step(std::move(s), q.gradient(s.y(beta)), hp, sched);
        logs.push_back(std::log(std::abs(s.z[0]) + 1e-300));
    }
    // average log growth over the last quarter
    const std::size_t n = logs.size(), k0 = n - n / 4;
    return std::exp((logs[n - 1] - logs[k0 - 1]) / double(n - k0));
}

}  // namespace sflab

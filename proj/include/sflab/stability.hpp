#pragma once

#include <complex>

#include "sflab/landscape.hpp"
#include "sflab/optimizers.hpp"

namespace sflab {

struct StabilityVerdict {
    bool diverged = false;
    long steps_run = 0;
    double max_norm = 0.0;
    double threshold_theoretical = 0.0;
};

struct RootPair {
    std::complex<double> l1, l2;
    double max_modulus() const { return std::max(std::abs(l1), std::abs(l2)); }
};

inline constexpr double kDivergenceFactor = 1e8;
inline constexpr long kStabilityBudget = 100000;

// 2 / ((1 - beta) gamma) - lambda
double sf_threshold(double beta, double gamma, double lambda_wd = 0.0);

// roots of r^2 = (2 - q) r + (q - 1), q = a gamma (1 - beta)
RootPair characteristic_roots(double a, double beta, double gamma);

enum class SFVariant { gd, precond_gdw };

// the SF recurrence with c_t = 1/t and constant lr; delta = grad (gd) or P^{-1} grad + lambda y (precond_gdw).
// x1 defaults to all ones.
StabilityVerdict run_quadratic_sf(const Quadratic& obj, const Hyperparams& hp, SFVariant variant,
                                  const Preconditioner* P, long max_steps, ParamVector x1 = {});

struct ReparamDeviation {
    double x = 0.0, y = 0.0, z = 0.0;
    double max() const { return std::max({x, y, z}); }
};

// SF-PrecondGD(W) on f vs SF-GD(W) on f(P^{-1/2} w), started at P^{1/2} x1
ReparamDeviation reparam_check(const Quadratic& f, const Preconditioner& P, const Hyperparams& hp, long steps,
                               ParamVector x1 = {});

struct ThresholdProbe {
    double beta = 0.9, gamma = 0.01, lambda = 0.0;
    ParamVector base_diag{1.0};      // H = s * diag(base_diag)
    ParamVector precond;             // empty = plain SF-GD
    double resolution = 0.005;       // fraction of the theoretical threshold
    long max_steps = kStabilityBudget;
    // false: the StabilityVerdict norm rule. true: diverged iff |state| still grows late in the run,
    // which ignores the transient blow-up of the early near-GD phase (c_t close to 1)
    bool late_growth = false;
};

// late-growth classification of one run: non-finite, or final norm > 10x the norm at max_steps/2
bool grows_late(const Quadratic& obj, const Hyperparams& hp, SFVariant variant, const Preconditioner* P,
                long max_steps);

// bisects the scale s of H for the divergence boundary; returned in units of lambda_1(P^{-1} H)
double empirical_threshold(const ThresholdProbe& probe, double lo, double hi);

// late-time per-step growth of |x| for SF-GD on H = [a]
double measured_growth_factor(double a, double beta, double gamma, long steps);

}  // namespace sflab

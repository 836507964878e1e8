#include "sflab/averaging.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "sflab/vec.hpp"

namespace sflab {

std::vector<double> vanilla_c_sequence(std::size_t T) {
    std::vector<double> c(T);
    for (std::size_t t = 1; t <= T; ++t) c[t - 1] = 1.0 / double(t);
    return c;
}

std::vector<double> refined_c_sequence(std::size_t T, double beta, double C) {
    require(C > 0, "refined_c_sequence: C must be > 0");
    std::vector<double> c(T);
    const double k = (1.0 - beta) * C;
    for (std::size_t t = 1; t <= T; ++t) c[t - 1] = std::min(1.0, k / double(t));
    if (T > 0) c[0] = 1.0;  // x_1 = z_1
    return c;
}

namespace {

void check_c(std::size_t T, const std::vector<double>& c) {
    require(T >= 1, "exact_alpha: T must be >= 1");
    require(c.size() >= T, "exact_alpha: c sequence shorter than T");
    require(c[0] == 1.0, "exact_alpha: c_1 must be 1");
    for (std::size_t i = 0; i < T; ++i)
        require(c[i] > 0 && c[i] <= 1, "exact_alpha: c_" + std::to_string(i + 1) + " outside (0, 1]");
}

// log of (1-c)(1-beta) / ((1-c)(1-beta) + c)
double log_ratio(double c, double beta) {
    if (c >= 1.0) return -std::numeric_limits<double>::infinity();
    return -std::log1p(c / ((1.0 - c) * (1.0 - beta)));
}

double lead(double c, double beta) { return c / ((1.0 - c) * (1.0 - beta) + c); }

}  // namespace

WeightProfile exact_alpha(std::size_t T, double beta, const std::vector<double>& c) {
    check_c(T, c);
    require(beta >= 0 && beta < 1, "exact_alpha: beta must be in [0, 1)");
    WeightProfile p;
    p.beta = beta;
    p.alpha.resize(T);
    double acc = 0.0;  // sum_{s>t} log ratio_s
    for (std::size_t i = T; i-- > 0;) {
        p.alpha[i] = lead(c[i], beta) * std::exp(acc);
        acc += log_ratio(c[i], beta);
    }
    return p;
}

WeightProfile approx_alpha_refined(std::size_t T, double C) {
    require(C > 0, "approx_alpha_refined: C must be > 0");
    require(T >= 1, "approx_alpha_refined: T must be >= 1");
    WeightProfile p;
    p.C = C;
    p.alpha.resize(T);
    double sum = 0.0;
    const double dT = double(T);
    for (std::size_t t = 1; t <= T; ++t) {
        p.alpha[t - 1] = (C / dT) * std::pow(double(t) / dT, C - 1.0);
        sum += p.alpha[t - 1];
    }
    for (double& a : p.alpha) a /= sum;
    return p;
}

double weight_divergence(const WeightProfile& p, const WeightProfile& q, std::size_t skip) {
    require(p.T() == q.T(), "weight_divergence: length mismatch");
    double s = 0.0;
    for (std::size_t i = skip; i < p.T(); ++i) s += std::abs(p.alpha[i] - q.alpha[i]);
    return 0.5 * s;
}

WeightProfile ewa_compose(const WeightProfile& p, double beta, const std::vector<double>& c, double decay) {
    const std::size_t T = p.T();
    check_c(T, c);
    require(decay >= 0 && decay < 1, "ewa_compose: decay must be in [0, 1)");
    // EWA weight on x_s: decay^{T-1} for s = 1, (1 - decay) decay^{T-s} otherwise
    auto w = [&](std::size_t s) {
        return s == 1 ? std::pow(decay, double(T - 1)) : (1.0 - decay) * std::pow(decay, double(T - s));
    };
    // B_t = w_t + ratio_{t+1} B_{t+1}; composed_t = lead_t B_t
    WeightProfile out;
    out.beta = beta;
    out.C = p.C;
    out.alpha.resize(T);
    double B = 0.0;
    for (std::size_t s = T; s >= 1; --s) {
        B = s == T ? w(T) : w(s) + std::exp(log_ratio(c[s], beta)) * B;
        out.alpha[s - 1] = lead(c[s - 1], beta) * B;
    }
    return out;
}

WeightProfile uniform_profile(std::size_t T) {
    WeightProfile p;
    p.alpha.assign(T, 1.0 / double(T));
    return p;
}

double mass_first_half(const WeightProfile& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.T() / 2; ++i) s += p.alpha[i];
    return s;
}

std::string weights_csv(const WeightProfile& exact, const WeightProfile& approx) {
    require(exact.T() == approx.T(), "weights_csv: length mismatch");
    std::string out = "t,alpha_exact,alpha_approx\n";
    char buf[96];
    for (std::size_t i = 0; i < exact.T(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i + 1, exact.alpha[i], approx.alpha[i]);
        out += buf;
    }
    return out;
}

}  // namespace sflab

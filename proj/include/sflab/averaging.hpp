#pragma once

#include <string>
#include <vector>

namespace sflab {

struct WeightProfile {
    std::vector<double> alpha;  // alpha[t-1] is the weight on y_t
    double beta = 0.0;
    double C = 0.0;  // 0 = vanilla
    std::size_t T() const { return alpha.size(); }
};

// c_t = 1/t
std::vector<double> vanilla_c_sequence(std::size_t T);
// c_t = min(1, (1 - beta) C / t) with c_1 pinned to 1; C = 1/(1-beta) gives the vanilla sequence
std::vector<double> refined_c_sequence(std::size_t T, double beta, double C);

// alpha_t = c_t / ((1-c_t)(1-beta) + c_t) * prod_{s>t} (1-c_s)(1-beta) / ((1-c_s)(1-beta) + c_s), c[i] = c_{i+1}
WeightProfile exact_alpha(std::size_t T, double beta, const std::vector<double>& c);

// (C/T)(t/T)^{C-1}, renormalized
WeightProfile approx_alpha_refined(std::size_t T, double C);

// 0.5 * sum_{t > skip} |p_t - q_t|
double weight_divergence(const WeightProfile& p, const WeightProfile& q, std::size_t skip = 0);

// first time index is excluded below this in fidelity comparisons
inline constexpr std::size_t kApproxSkip = 9;

// exponential average (decay) applied on top of a profile: the weights an EWA of the x_t sequence puts on y's
WeightProfile ewa_compose(const WeightProfile& p, double beta, const std::vector<double>& c, double decay);

WeightProfile uniform_profile(std::size_t T);

double mass_first_half(const WeightProfile& p);

std::string weights_csv(const WeightProfile& exact, const WeightProfile& approx);

}  // namespace sflab

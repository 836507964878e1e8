#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sflab/landscape.hpp"

namespace sflab {

struct FlowState {
    ParamVector y, m;
    double nu = 0.0;  // ScalarAdam only
    double t = 0.0;
};

struct OscillationModel {
    double sigma2 = 0.0;
    ParamVector u;
    double S = 0.0;
};

struct FlowParams {
    double gamma = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.99;
    bool exact_c = false;  // c(t) = 1/t instead of c ~ 0
    double gate = 1e-3;    // sigma^2 switches on once S (or S/sqrt(nu)) is within this fraction of threshold
    long* clamp_count = nullptr;
};

struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
    FlowState last_good;
    IntegrationError(const std::string& w, FlowState s) : std::runtime_error(w), last_good(std::move(s)) {}
};

inline constexpr double kGradSTol = 1e-10;

// top eigenvalue and eigenvector of H(y)
OscillationModel oscillation_model(const Objective& obj, const ParamVector& y);

// 2 <grad S, -grad f> / |grad S|^2, unclamped
double sigma2_sfgd_raw(const Objective& obj, const ParamVector& y);
double sigma2_sfgd(const Objective& obj, const ParamVector& y);

// beta2 = 1 is accepted here and means the beta2 -> 1 limit
double sigma2_sfscalaradam_raw(const Objective& obj, const ParamVector& y, double gamma, double beta1, double beta2);
double sigma2_sfscalaradam(const Objective& obj, const ParamVector& y, double gamma, double beta1, double beta2);

FlowState flow_rhs_sfgd(const FlowState& s, const Objective& obj, const FlowParams& fp);
FlowState flow_rhs_sfscalaradam(const FlowState& s, const Objective& obj, const FlowParams& fp);

using FlowRhs = std::function<FlowState(const FlowState&)>;

// classical RK4 with fixed dt from s0.t to t_end; keeps every record_every-th state (and the first)
std::vector<FlowState> integrate_flow(const FlowRhs& rhs, FlowState s0, double t_end, double dt,
                                      int record_every = 1);

enum class FlowKind { sfgd, sfscalaradam };

struct FlowComparison {
    double max_distance = 0.0;
    double arc_length = 0.0;  // of the flow
    double ratio = 0.0;       // max_distance / arc_length
    long compared = 0;
    std::vector<ParamVector> discrete, averaged, flow;  // averaged[i] is centered at discrete[i + window/2]
};

// discrete SF-GD / SF-ScalarAdam with c_t = 1/t from step t0 (x = z = y0), against the central flow
// started at time t0 with m = delta(y0) and nu = |grad f(y0)|^2; one step = one unit of flow time
FlowComparison flow_vs_discrete(const Objective& obj, const FlowParams& fp, FlowKind kind, const ParamVector& y0,
                                long t0, long steps, int window, int substeps = 4);

std::string flow_csv(const std::vector<FlowState>& states, const Objective& obj, const FlowParams& fp,
                     FlowKind kind);

}  // namespace sflab

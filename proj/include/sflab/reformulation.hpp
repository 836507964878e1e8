#pragma once

#include <functional>
#include <vector>

#include "sflab/landscape.hpp"
#include "sflab/optimizers.hpp"

namespace sflab {

// momentum form: y and m_t = (x_t - z_{t+1}) / gamma
struct ReformState {
    ParamVector y, m;
    long t = 1;

    static ReformState start(const ParamVector& y1);
};

// m' = (1 - c_t) m + delta;  y' = y - gamma [beta c_next m' + (1 - beta) delta]
ReformState sf_y_step(ReformState s, const ParamVector& delta, double gamma, double beta, double c_t, double c_next);

// (x_t - z_{t+1}) / gamma_t from consecutive SF states
ParamVector momentum_from_sf(const SFState& before, const SFState& after, double gamma_t);

// x_1 = y_1; x_{t+1} = ((1-c)(1-beta) x_t + c y_{t+1}) / ((1-c)(1-beta) + c), c = c_{t+1}.
// c[i] holds c_{i+1}.
ParamVector reconstruct_x(const std::vector<ParamVector>& ys, double beta, const std::vector<double>& c);

// the averaging recurrence one step at a time
struct XReconstructor {
    double beta;
    ParamVector x;
    bool started = false;

    void push(const ParamVector& y, double c);
};

struct EquivalenceReport {
    double max_rel_x = 0.0, max_rel_y = 0.0, max_rel_m = 0.0;
    long worst_step = 0;
    long steps = 0;
};

// Runs the direct (x, z) form and the (m, y) form in lockstep from one delta stream,
// delta_t = direction(y_t) evaluated on the direct form's y. c_t = 1/t.
EquivalenceReport equivalence_harness(const std::function<ParamVector(const ParamVector&)>& direction,
                                      const ParamVector& x1, double gamma, double beta, long steps);

}  // namespace sflab

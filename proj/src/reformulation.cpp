#include "sflab/reformulation.hpp"

#include <algorithm>
#include <cmath>

namespace sflab {

ReformState ReformState::start(const ParamVector& y1) { return {y1, ParamVector(y1.size(), 0.0), 1}; }

ReformState sf_y_step(ReformState s, const ParamVector& delta, double gamma, double beta, double c_t,
                      double c_next) {
    require(c_t > 0 && c_t <= 1 && c_next > 0 && c_next <= 1, "sf_y_step: c must be in (0, 1]");
    require_same_size(s.y, delta, "sf_y_step");
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        s.m[i] = (1.0 - c_t) * s.m[i] + delta[i];
        s.y[i] -= gamma * (beta * c_next * s.m[i] + (1.0 - beta) * delta[i]);
    }
    ++s.t;
    return s;
}

ParamVector momentum_from_sf(const SFState& before, const SFState& after, double gamma_t) {
    require(gamma_t != 0.0, "momentum_from_sf: gamma_t must be non-zero");
    require(after.t == before.t + 1, "momentum_from_sf: states must be consecutive");
    ParamVector m = sub(before.x, after.z);
    return scaled(m, 1.0 / gamma_t);
}

void XReconstructor::push(const ParamVector& y, double c) {
    if (!started) {
        x = y;
        started = true;
        return;
    }
    require(c > 0 && c <= 1, "reconstruct_x: c must be in (0, 1]");
    require_same_size(x, y, "reconstruct_x");
    const double a = (1.0 - c) * (1.0 - beta);
    const double den = a + c;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (a * x[i] + c * y[i]) / den;
}

ParamVector reconstruct_x(const std::vector<ParamVector>& ys, double beta, const std::vector<double>& c) {
    require(!ys.empty(), "reconstruct_x: empty history");
    require(c.size() >= ys.size(), "reconstruct_x: c sequence shorter than history");
    XReconstructor r{beta, {}};
    for (std::size_t i = 0; i < ys.size(); ++i) r.push(ys[i], c[i]);
    return r.x;
}

namespace {

double rel_err(const ParamVector& a, const ParamVector& b) {
    return dist(a, b) / std::max(1.0, norm(b));
}

}  // namespace

EquivalenceReport equivalence_harness(const std::function<ParamVector(const ParamVector&)>& direction,
                                      const ParamVector& x1, double gamma, double beta, long steps) {
    require(steps >= 1, "equivalence_harness: steps must be >= 1");
    SFState sf = SFState::start(x1);
    ReformState rf = ReformState::start(x1);
    XReconstructor rx{beta, {}};
    rx.push(rf.y, 1.0);
    EquivalenceReport rep;
    rep.steps = steps;
    auto note = [&](double e, double& slot, long t) {
        if (e > slot) {
            slot = e;
            rep.worst_step = t;
        }
    };
    for (long t = 1; t <= steps; ++t) {
        const ParamVector y = sf.y(beta);
        const ParamVector delta = direction(y);
        const double c_t = 1.0 / double(t), c_next = 1.0 / double(t + 1);
        SFState next = sf_step(sf, delta, gamma, c_next);
        rf = sf_y_step(std::move(rf), delta, gamma, beta, c_t, c_next);
        note(rel_err(rf.m, momentum_from_sf(sf, next, gamma)), rep.max_rel_m, t);
        sf = std::move(next);
        rx.push(rf.y, c_next);
        note(rel_err(rf.y, sf.y(beta)), rep.max_rel_y, t + 1);
        note(rel_err(rx.x, sf.x), rep.max_rel_x, t + 1);
    }
    return rep;
}

}  // namespace sflab

#include <doctest.h>

#include "sflab/experiments.hpp"

using namespace sflab;

namespace {

RunSpec mlp_spec(const MLPObjective& mlp, double gamma, long warmup, long steps) {
    RunSpec s;
    s.optimizer = OptimizerKind::sf_gd;
    s.hp.gamma = gamma;
    s.hp.beta1 = 0.9;
    s.hp.warmup_steps = warmup;
    s.hp.total_steps = steps;
    s.schedule = Schedule::warmup(gamma, warmup);
    s.x0 = mlp.init(0);
    s.steps = steps;
    s.log_every = 20;
    s.sharpness_every = 20;
    s.sharpness_tol = 1e-4;
    s.window_stats = false;
    s.loss_target = 0.02;
    return s;
}

}  // namespace

TEST_CASE("doubling gamma roughly halves the MLP sharpness plateau") {
    const auto mlp = make_mlp(MLPSetup{}, 0);
    RunSpec a = mlp_spec(*mlp, 2.0, 200, 3000);
    RunSpec b = mlp_spec(*mlp, 4.0, 400, 3000);
    const EosResult ra = run_eos_sweep(*mlp, a);
    const EosResult rb = run_eos_sweep(*mlp, b);
    const double ratio = rb.summary.plateau / ra.summary.plateau;
    MESSAGE("plateau gamma=2: " << ra.summary.plateau << ", gamma=4: " << rb.summary.plateau << ", ratio " << ratio);
    CHECK(ratio >= 0.45);
    CHECK(ratio <= 0.7);
}

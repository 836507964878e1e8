#include <doctest.h>

#include <cmath>

#include "sflab/averaging.hpp"
#include "sflab/reformulation.hpp"

using namespace sflab;

namespace {

double rel(const ParamVector& a, const ParamVector& b) { return dist(a, b) / std::max(1.0, norm(b)); }

}  // namespace

TEST_CASE("sf_y_step trivial cases") {
    ReformState s = ReformState::start({1.0, 2.0});
    const ReformState a = sf_y_step(s, {0.5, -1.0}, 0.1, 0.0, 1.0, 0.5);
    CHECK(a.y[0] == doctest::Approx(0.95));
    CHECK(a.y[1] == doctest::Approx(2.1));
    const ReformState b = sf_y_step(s, {0.0, 0.0}, 0.1, 0.9, 1.0, 0.5);
    CHECK(b.y == s.y);
    CHECK_THROWS_AS(sf_y_step(s, {0.0, 0.0}, 0.1, 0.9, 0.0, 0.5), ContractError);
}

TEST_CASE("both formulations agree on the toy model") {
    const ToyRiverValley toy;
    for (double beta : {0.1, 0.5, 0.9}) {
        const EquivalenceReport r =
            equivalence_harness([&](const ParamVector& y) { return toy.gradient(y); }, {2.0, 2.0}, 0.01, beta, 1000);
        CHECK(r.max_rel_y <= 1e-10);
        CHECK(r.max_rel_x <= 1e-10);
        CHECK(r.max_rel_m <= 1e-12);
    }
}

TEST_CASE("equivalence holds over 10^4 steps on a quadratic") {
    const Quadratic q = Quadratic::diagonal({1.0, 30.0, 0.01});
    const EquivalenceReport r =
        equivalence_harness([&](const ParamVector& y) { return q.gradient(y); }, {1.0, -1.0, 3.0}, 0.05, 0.9, 10000);
    CHECK(r.max_rel_y <= 1e-10);
    CHECK(r.max_rel_x <= 1e-10);
}

TEST_CASE("momentum from SF states") {
    const ToyRiverValley toy;
    const double beta = 0.9, gamma = 0.01;
    SFState s = SFState::start({2.0, 2.0});
    const ParamVector g1 = toy.gradient(s.y(beta));
    SFState n = sf_step(s, g1, gamma, 0.5);
    const ParamVector m1 = momentum_from_sf(s, n, gamma);
    CHECK(rel(m1, g1) <= 1e-13);
    CHECK_THROWS_AS(momentum_from_sf(s, n, 0.0), ContractError);
    CHECK_THROWS_AS(momentum_from_sf(s, s, gamma), ContractError);

    // recursive definition over 500 steps
    s = SFState::start({2.0, 2.0});
    ParamVector m(2, 0.0);
    double worst = 0;
    for (long t = 1; t <= 500; ++t) {
        const ParamVector d = toy.gradient(s.y(beta));
        const double c_t = 1.0 / double(t);
        for (int i = 0; i < 2; ++i) m[i] = (1.0 - c_t) * m[i] + d[i];
        SFState next = sf_step(s, d, gamma, 1.0 / double(t + 1));
        worst = std::max(worst, rel(momentum_from_sf(s, next, gamma), m));
        s = next;
    }
    CHECK(worst <= 1e-12);

    s = SFState::start({1.0});
    for (int t = 1; t < 10; ++t) {
        SFState next = sf_step(s, {0.0}, gamma, 1.0 / double(t + 1));
        CHECK(momentum_from_sf(s, next, gamma)[0] == 0.0);
        s = next;
    }
}

TEST_CASE("reconstruct_x") {
    CHECK(reconstruct_x({{3.0, 4.0}}, 0.9, {1.0}) == ParamVector{3.0, 4.0});
    CHECK_THROWS_AS(reconstruct_x({}, 0.9, {}), ContractError);
    // beta = 0 is the running average
    const std::vector<ParamVector> ys{{1.0}, {2.0}, {6.0}};
    CHECK(reconstruct_x(ys, 0.0, {1.0, 0.5, 1.0 / 3.0})[0] == doctest::Approx(3.0));

    // 500 toy steps against the direct x
    const ToyRiverValley toy;
    const double beta = 0.9;
    SFState s = SFState::start({2.0, 2.0});
    std::vector<ParamVector> hist{s.y(beta)};
    std::vector<double> c{1.0};
    for (long t = 1; t < 500; ++t) {
        s = sf_step(s, toy.gradient(s.y(beta)), 0.01, 1.0 / double(t + 1));
        hist.push_back(s.y(beta));
        c.push_back(1.0 / double(t + 1));
    }
    CHECK(rel(reconstruct_x(hist, beta, c), s.x) <= 1e-10);

    // x_T is the alpha-weighted sum of the y iterates
    const WeightProfile p = exact_alpha(long(hist.size()), beta, c);
    ParamVector sum(2, 0.0);
    for (std::size_t t = 0; t < hist.size(); ++t) axpy(p.alpha[t], hist[t], sum);
    CHECK(rel(sum, s.x) <= 1e-10);
}

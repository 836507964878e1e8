#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "sflab/experiments.hpp"
#include "sflab/landscape.hpp"

using namespace sflab;

namespace {

// central finite-difference gradient, long double accumulation
ParamVector fd_gradient(const Objective& f, const ParamVector& w, double h) {
    ParamVector g(w.size()), p = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double hi = h * (1.0 + std::abs(w[i]));
        p[i] = w[i] + hi;
        const long double up = f.value(p);
        p[i] = w[i] - hi;
        const long double dn = f.value(p);
        p[i] = w[i];
        g[i] = double((up - dn) / (2.0L * hi));
    }
    return g;
}

double rel_err(const ParamVector& a, const ParamVector& b) { return dist(a, b) / std::max(norm(b), 1e-300); }

ParamVector random_point(std::mt19937_64& rng, std::size_t d, double lo, double hi) {
    std::uniform_real_distribution<double> U(lo, hi);
    ParamVector w(d);
    for (double& v : w) v = U(rng);
    return w;
}

Quadratic random_quadratic(std::mt19937_64& rng, std::size_t d) {
    std::normal_distribution<double> N(0, 1);
    std::vector<double> A(d * d), H(d * d, 0.0);
    for (double& v : A) v = N(rng);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) s += A[i * d + k] * A[j * d + k];
            H[i * d + j] = s / double(d);
        }
    ParamVector g(d);
    for (double& v : g) v = N(rng);
    return Quadratic(H, g, 0.5);
}

}  // namespace

TEST_CASE("toy value, gradient and Hessian at (2,2)") {
    ToyRiverValley toy;
    const ParamVector w{2.0, 2.0};
    // closed form: 4.5 + log(1 + e^-2)
    CHECK(toy.value(w) == doctest::Approx(4.5 + std::log1p(std::exp(-2.0))).epsilon(1e-15));
    CHECK(toy.value(w) == doctest::Approx(4.62692801).epsilon(1e-8));
    const ParamVector g = toy.gradient(w);
    const ParamVector fd = fd_gradient(toy, w, 1e-6);
    CHECK(g[0] == doctest::Approx(fd[0]).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(fd[1]).epsilon(1e-8));
    CHECK(g[0] == doctest::Approx(5.880797).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(6.0).epsilon(1e-15));
    const ParamVector hv = toy.hessian_vec(w, {1.0, 0.0});
    CHECK(hv[0] == doctest::Approx(4.104994).epsilon(1e-6));
    CHECK(hv[1] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("toy Hessian agrees with double finite differences") {
    ToyRiverValley toy;
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10; ++k) {
        const ParamVector w = random_point(rng, 2, -3, 3);
        const double h = 1e-5;
        for (int j = 0; j < 2; ++j) {
            ParamVector e{0, 0};
            e[j] = 1;
            ParamVector wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            const ParamVector gp = toy.gradient(wp), gm = toy.gradient(wm);
            const ParamVector hv = toy.hessian_vec(w, e);
            for (int i = 0; i < 2; ++i) CHECK(hv[i] == doctest::Approx((gp[i] - gm[i]) / (2 * h)).epsilon(1e-6));
        }
    }
}

TEST_CASE("toy sharpness gradient matches finite differences of the top eigenvalue") {
    ToyRiverValley toy;
    std::mt19937_64 rng(5);
    for (int k = 0; k < 10; ++k) {
        const ParamVector w = random_point(rng, 2, 0.5, 6);
        const ParamVector gs = toy.sharpness_gradient(w);
        for (int j = 0; j < 2; ++j) {
            const double h = 1e-6;
            ParamVector wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            const double fd = (toy.top_eigen(wp).first - toy.top_eigen(wm).first) / (2 * h);
            CHECK(gs[j] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("quadratic examples") {
    const Quadratic id = Quadratic::diagonal({1.0, 1.0});
    CHECK(id.value({0.0, 0.0}) == 0.0);
    CHECK(id.gradient({3.0, -1.0}) == ParamVector{3.0, -1.0});
    const Quadratic q = Quadratic::diagonal({2.0, 8.0});
    CHECK(q.value({1.0, 1.0}) == 5.0);
    CHECK(q.hessian_vec({7.0, 7.0}, {1.0, 0.0}) == ParamVector{2.0, 0.0});
    CHECK(sharpness(q, {0.3, -0.2}) == doctest::Approx(8.0).epsilon(1e-8));
    CHECK(sharpness(id, {5.0, 5.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(preconditioned_sharpness(q, {0.0, 0.0}, Preconditioner({1.0, 2.0}), 1e-14) == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(preconditioned_sharpness(q, {0.0, 0.0}, Preconditioner({2.0, 8.0}), 1e-14) ==
          doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("quadratic rejects asymmetric H and dimension mismatch") {
    CHECK_THROWS_AS(Quadratic({1.0, 0.5, 0.4, 1.0}, {0.0, 0.0}), ContractError);
    const Quadratic q = Quadratic::diagonal({1.0, 2.0});
    CHECK_THROWS_AS(q.value({1.0}), ContractError);
    CHECK_THROWS_AS(q.gradient({1.0, 2.0, 3.0}), ContractError);
}

TEST_CASE("toy sharpness at (2,2) equals the closed-form 2x2 eigenvalue") {
    ToyRiverValley toy;
    const auto H = toy.hessian({2.0, 2.0});
    const double a = H[0], b = H[1], d = H[3];
    const double lam = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b);
    CHECK(lam == doctest::Approx(11.053).epsilon(1e-4));
    CHECK(sharpness(toy, {2.0, 2.0}, 1e-12) == doctest::Approx(lam).epsilon(1e-9));
}

TEST_CASE("sharpness on random quadratics matches a dense eigensolver") {
    std::mt19937_64 rng(11);
    for (std::size_t d : {3u, 10u, 25u, 50u}) {
        const Quadratic q = random_quadratic(rng, d);
        Eigen::MatrixXd M(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) M(i, j) = q.H()[i * d + j];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        const auto& ev = es.eigenvalues();
        const double top = std::abs(ev(0)) > std::abs(ev(d - 1)) ? ev(0) : ev(d - 1);
        CHECK(sharpness(q, ParamVector(d, 0.0), 1e-14, 200000) == doctest::Approx(top).epsilon(1e-8));
        // P = c I scales the spectrum by 1/c
        const double c = 3.5;
        const double ps = preconditioned_sharpness(q, ParamVector(d, 0.0), Preconditioner(ParamVector(d, c)), 1e-14,
                                                   200000);
        CHECK(ps == doctest::Approx(top / c).epsilon(1e-8));
    }
}

TEST_CASE("power iteration reports non-convergence with the last estimate") {
    // tiny spectral gap, far too few iterations
    const Quadratic q = Quadratic::diagonal({1.0, 0.999});
    try {
        sharpness(q, {0.0, 0.0}, 1e-15, 5);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(std::isfinite(e.last_estimate));
    }
}

TEST_CASE("hessian_vec is linear for the analytic objectives") {
    std::mt19937_64 rng(13);
    ToyRiverValley toy;
    const Quadratic q = random_quadratic(rng, 6);
    for (const Objective* f : {static_cast<const Objective*>(&toy), static_cast<const Objective*>(&q)}) {
        const std::size_t d = f->dimension();
        for (int k = 0; k < 5; ++k) {
            const ParamVector w = random_point(rng, d, -2, 2), u = random_point(rng, d, -1, 1),
                              v = random_point(rng, d, -1, 1);
            const double a = 0.7, b = -1.3;
            ParamVector comb(d);
            for (std::size_t i = 0; i < d; ++i) comb[i] = a * u[i] + b * v[i];
            const ParamVector lhs = f->hessian_vec(w, comb);
            const ParamVector hu = f->hessian_vec(w, u), hv = f->hessian_vec(w, v);
            for (std::size_t i = 0; i < d; ++i)
                CHECK(std::abs(lhs[i] - (a * hu[i] + b * hv[i])) <= 1e-10 * (1 + std::abs(lhs[i])));
        }
    }
}

TEST_CASE("gradients match finite differences at seeded points (toy, quadratic)") {
    std::mt19937_64 rng(17);
    ToyRiverValley toy;
    const Quadratic q = random_quadratic(rng, 8);
    for (int k = 0; k < 10; ++k) {
        const ParamVector wt = random_point(rng, 2, -3, 3);
        CHECK(rel_err(toy.gradient(wt), fd_gradient(toy, wt, 1e-6)) <= 1e-6);
        const ParamVector wq = random_point(rng, 8, -3, 3);
        CHECK(rel_err(q.gradient(wq), fd_gradient(q, wq, 1e-6)) <= 1e-6);
    }
}

TEST_CASE("small MLP gradient matches full-coordinate finite differences") {
    auto data = std::make_shared<Dataset>(Dataset::synthetic(24, 5, 3, 1));
    MLPObjective mlp(data, {7, 6});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ParamVector w = mlp.init(seed);
        CHECK(rel_err(mlp.gradient(w), fd_gradient(mlp, w, 1e-6)) <= 1e-6);
    }
}

TEST_CASE("default MLP gradient matches directional finite differences") {
    auto mlp = make_mlp(MLPSetup{}, 0);
    const ParamVector w = mlp->init(0);
    const ParamVector g = mlp->gradient(w);
    std::mt19937_64 rng(23);
    for (int k = 0; k < 10; ++k) {
        ParamVector v = random_point(rng, w.size(), -1, 1);
        v = scaled(v, 1.0 / norm(v));
        const double h = 1e-5;
        ParamVector wp = w, wm = w;
        axpy(h, v, wp);
        axpy(-h, v, wm);
        const long double fd = ((long double)mlp->value(wp) - mlp->value(wm)) / (2.0L * h);
        CHECK(std::abs(double(fd) - dot(g, v)) <= 1e-6 * norm(g));
    }
}

TEST_CASE("MLP Hessian-vector product is symmetric") {
    auto data = std::make_shared<Dataset>(Dataset::synthetic(64, 8, 4, 2));
    MLPObjective mlp(data, {16, 16});
    const ParamVector w = mlp.init(4);
    std::mt19937_64 rng(29);
    for (int k = 0; k < 5; ++k) {
        const ParamVector u = random_point(rng, w.size(), -1, 1), v = random_point(rng, w.size(), -1, 1);
        const double a = dot(mlp.hessian_vec(w, u), v), b = dot(u, mlp.hessian_vec(w, v));
        CHECK(std::abs(a - b) <= 1e-4 * std::max(std::abs(a), std::abs(b)));
    }
    CHECK(mlp.hessian_vec(w, ParamVector(w.size(), 0.0)) == ParamVector(w.size(), 0.0));
}

TEST_CASE("river distance and river loss") {
    CHECK(river_distance({2.0, 0.5}) == 0.0);
    CHECK(river_distance({2.0, 2.0}) == 3.0);
    CHECK(river_distance({1.0, 1.0}) == 0.0);
    CHECK_THROWS_AS(river_distance({1.0, 1.0, 1.0}), ContractError);
    ToyRiverValley toy;
    double prev = 1e300;
    for (double t = 0.25; t <= 20.0; t += 0.25) {
        const double v = toy.value({t, 1.0 / t});
        CHECK(v == doctest::Approx(std::log1p(std::exp(-t))).epsilon(1e-12));
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("full-batch gradients see identical data; minibatches are seeded") {
    auto data = std::make_shared<Dataset>(Dataset::synthetic(40, 4, 3, 9));
    MLPObjective mlp(data, {5});
    const ParamVector w = mlp.init(1);
    CHECK(mlp.gradient(w) == mlp.gradient(w));
    Dataset d2 = *data;
    d2.batches = {8, 77};
    auto p2 = std::make_shared<Dataset>(d2);
    MLPObjective mb(p2, {5});
    ParamVector g1, g2, g3;
    mb.batch_value_and_gradient(w, 3, g1);
    mb.batch_value_and_gradient(w, 3, g2);
    mb.batch_value_and_gradient(w, 4, g3);
    CHECK(g1 == g2);
    CHECK(g1 != g3);
    // one epoch covers every sample exactly once
    std::vector<int> seen(40, 0);
    for (int k = 0; k < 5; ++k)
        for (auto i : d2.batch_indices(k)) ++seen[i];
    for (int s : seen) CHECK(s == 1);
}

TEST_CASE("synthetic dataset targets are one-hot") {
    const Dataset d = Dataset::synthetic(100, 6, 4, 0);
    for (std::size_t i = 0; i < d.n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d.d_out; ++j) s += d.targets[i * d.d_out + j];
        CHECK(s == 1.0);
    }
}

TEST_CASE("CIFAR-10 reader parses binary records") {
    const std::string path = "cifar_test_batch.bin";
    {
        std::ofstream out(path, std::ios::binary);
        for (int r = 0; r < 3; ++r) {
            out.put(char(r * 3));
            for (int j = 0; j < 3072; ++j) out.put(char((j + r) % 256));
        }
    }
    const Dataset d = Dataset::cifar10({path}, 2);
    CHECK(d.n == 2);
    CHECK(d.d_in == 3072);
    CHECK(d.targets[0] == 1.0);
    CHECK(d.targets[3] == 0.0);
    CHECK(d.targets[10 + 3] == 1.0);
    CHECK(d.inputs[255] == doctest::Approx(1.0));
    CHECK(d.inputs[3072 + 0] == doctest::Approx(1.0 / 255.0));
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out.put(char(1));
    }
    CHECK_THROWS(Dataset::cifar10({path}, 100));
    std::remove(path.c_str());
}

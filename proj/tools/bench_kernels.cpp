// Serial reference vs OpenMP kernels: matmul and a full MLP gradient.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "CLI11.hpp"

#include "sflab/experiments.hpp"
#include "sflab/kernels.hpp"

using namespace sflab;

template <typename F>
double time_ms(F&& f, int reps) {
    f();
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel timings"};
    int reps = 20;
    app.add_option("--reps", reps, "timed repetitions per kernel")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    std::printf("threads %d\n", omp_get_max_threads());

    const std::size_t n = 512, k = 200, m = 200;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> A(n * k), B(k * m), C1(n * m), C2(n * m);
    for (double& v : A) v = U(rng);
    for (double& v : B) v = U(rng);
    const double ts = time_ms([&] { kernels::serial::matmul(A.data(), B.data(), C1.data(), n, k, m); }, reps);
    const double tp = time_ms([&] { kernels::omp::matmul(A.data(), B.data(), C2.data(), n, k, m); }, reps);
    const bool same = std::memcmp(C1.data(), C2.data(), C1.size() * sizeof(double)) == 0;
    std::printf("matmul %zux%zux%zu  serial %.3f ms  openmp %.3f ms  speedup %.2f  bitwise-equal %s\n", n, k, m, ts,
                tp, ts / tp, same ? "yes" : "no");

    MLPSetup setup;
    auto mlp = make_mlp(setup, 0);
    const ParamVector w = mlp->init(0);
    ParamVector g1, g2;
    mlp->set_backend(kernels::Backend::serial);
    const double gs = time_ms([&] { mlp->value_and_gradient(w, g1); }, reps);
    mlp->set_backend(kernels::Backend::openmp);
    const double gp = time_ms([&] { mlp->value_and_gradient(w, g2); }, reps);
    std::printf("mlp gradient (d=%zu)  serial %.3f ms  openmp %.3f ms  speedup %.2f  bitwise-equal %s\n",
                mlp->dimension(), gs, gp, gs / gp, g1 == g2 ? "yes" : "no");
    return same && g1 == g2 ? 0 : 1;
}

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sflab/kernels.hpp"
#include "sflab/vec.hpp"

namespace sflab {

class Objective {
public:
    virtual ~Objective() = default;
    virtual std::size_t dimension() const = 0;
    virtual double value(const ParamVector& w) const = 0;
    virtual ParamVector gradient(const ParamVector& w) const = 0;
    virtual ParamVector hessian_vec(const ParamVector& w, const ParamVector& v) const = 0;

    virtual double value_and_gradient(const ParamVector& w, ParamVector& g) const {
        g = gradient(w);
        return value(w);
    }

    // gradient of the top Hessian eigenvalue; central differences of sharpness unless overridden
    virtual ParamVector sharpness_gradient(const ParamVector& w) const;

protected:
    void check(const ParamVector& w) const;
};

class ToyRiverValley final : public Objective {
public:
    std::size_t dimension() const override { return 2; }
    double value(const ParamVector& w) const override;
    ParamVector gradient(const ParamVector& w) const override;
    ParamVector hessian_vec(const ParamVector& w, const ParamVector& v) const override;
    ParamVector sharpness_gradient(const ParamVector& w) const override;

    // row-major 2x2
    std::array<double, 4> hessian(const ParamVector& w) const;
    // top eigenvalue and unit eigenvector of the 2x2 Hessian
    std::pair<double, ParamVector> top_eigen(const ParamVector& w) const;
};

class Quadratic final : public Objective {
public:
    // H is d*d row-major
    Quadratic(std::vector<double> H, ParamVector g, double c = 0.0);
    static Quadratic diagonal(const ParamVector& diag, double c = 0.0);

    std::size_t dimension() const override { return g_.size(); }
    double value(const ParamVector& w) const override;
    ParamVector gradient(const ParamVector& w) const override;
    ParamVector hessian_vec(const ParamVector& w, const ParamVector& v) const override;
    ParamVector sharpness_gradient(const ParamVector& w) const override;

    const std::vector<double>& H() const { return H_; }
    const ParamVector& g() const { return g_; }
    double offset() const { return c_; }

private:
    std::vector<double> H_;
    ParamVector g_;
    double c_;
};

struct BatchSchedule {
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
};

struct Dataset {
    std::size_t n = 0, d_in = 0, d_out = 0;
    std::vector<double> inputs;   // n x d_in
    std::vector<double> targets;  // n x d_out
    BatchSchedule batches;

    // Gaussian inputs, labels from a random tanh teacher, one-hot targets
    static Dataset synthetic(std::size_t n, std::size_t d_in, std::size_t d_out, std::uint64_t seed);
    // CIFAR-10 binary batches; reads at most max_samples records in file order
    static Dataset cifar10(const std::vector<std::string>& paths, std::size_t max_samples);

    // sample indices of minibatch k under the seeded per-epoch shuffle
    std::vector<std::size_t> batch_indices(std::uint64_t k) const;
};

class MLPObjective final : public Objective {
public:
    MLPObjective(std::shared_ptr<const Dataset> data, std::vector<std::size_t> hidden = {200, 200},
                 kernels::Backend backend = kernels::Backend::openmp);

    std::size_t dimension() const override { return dim_; }
    double value(const ParamVector& w) const override;
    ParamVector gradient(const ParamVector& w) const override;
    double value_and_gradient(const ParamVector& w, ParamVector& g) const override;
    ParamVector hessian_vec(const ParamVector& w, const ParamVector& v) const override;

    // loss and gradient on minibatch k of the dataset's batch schedule
    double batch_value_and_gradient(const ParamVector& w, std::uint64_t k, ParamVector& g) const;

    // fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases
    ParamVector init(std::uint64_t seed) const;

    const std::vector<std::size_t>& widths() const { return widths_; }
    void set_backend(kernels::Backend b) { backend_ = b; }

private:
    double run(const ParamVector& w, const std::vector<std::size_t>* rows, ParamVector* g) const;

    std::shared_ptr<const Dataset> data_;
    std::vector<std::size_t> widths_;
    std::vector<std::size_t> offsets_;  // start of W_l; b_l follows
    std::size_t dim_ = 0;
    kernels::Backend backend_;
};

struct Preconditioner {
    ParamVector diag;

    explicit Preconditioner(ParamVector d);
    static Preconditioner identity(std::size_t n) { return Preconditioner(ParamVector(n, 1.0)); }
    // sqrt(v / (1 - beta2^t)) + eps
    static Preconditioner adaptive(const ParamVector& v, long t, double beta2, double eps);
};

struct ConvergenceError : std::runtime_error {
    double last_estimate;
    ConvergenceError(const std::string& what, double est) : std::runtime_error(what), last_estimate(est) {}
};

struct EigenResult {
    double value = 0.0;
    ParamVector vector;
    int iterations = 0;
};

inline constexpr double kPowerTol = 1e-6;
inline constexpr int kPowerMaxIters = 10000;

// power iteration on v -> P^{-1/2} H P^{-1/2} v (P = null means identity).
// warm, if non-empty, is the start vector and receives the final iterate.
EigenResult top_eigenpair(const Objective& obj, const ParamVector& w, const Preconditioner* P, double tol,
                          int max_iters, ParamVector* warm = nullptr);

double sharpness(const Objective& obj, const ParamVector& w, double tol = kPowerTol, int max_iters = kPowerMaxIters,
                 ParamVector* warm = nullptr);

double preconditioned_sharpness(const Objective& obj, const ParamVector& w, const Preconditioner& P,
                                double tol = kPowerTol, int max_iters = kPowerMaxIters, ParamVector* warm = nullptr);

double river_distance(const ParamVector& w);

double logistic(double x);

}  // namespace sflab

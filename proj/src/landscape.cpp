#include "sflab/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace sflab {

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

// log(1 + exp(x)) without overflow
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

void Objective::check(const ParamVector& w) const {
    if (w.size() != dimension())
        throw ContractError("objective expects dimension " + std::to_string(dimension()) + ", got " +
                            std::to_string(w.size()));
}

ParamVector Objective::sharpness_gradient(const ParamVector& w) const {
    check(w);
    ParamVector g(w.size()), p = w, warm;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double h = 1e-5 * (1.0 + std::abs(w[i]));
        p[i] = w[i] + h;
        const double up = top_eigenpair(*this, p, nullptr, 1e-12, 100000, &warm).value;
        p[i] = w[i] - h;
        const double dn = top_eigenpair(*this, p, nullptr, 1e-12, 100000, &warm).value;
        p[i] = w[i];
        g[i] = (up - dn) / (2 * h);
    }
    return g;
}

// ---- toy ----

double ToyRiverValley::value(const ParamVector& w) const {
    check(w);
    const double r = w[0] * w[1] - 1.0;
    return 0.5 * r * r + softplus(-w[0]);
}

ParamVector ToyRiverValley::gradient(const ParamVector& w) const {
    check(w);
    const double r = w[0] * w[1] - 1.0;
    const double s = logistic(-w[0]);
    return {r * w[1] - s, r * w[0]};
}

std::array<double, 4> ToyRiverValley::hessian(const ParamVector& w) const {
    check(w);
    const double s = logistic(-w[0]);
    const double off = 2 * w[0] * w[1] - 1.0;
    return {w[1] * w[1] + s * (1 - s), off, off, w[0] * w[0]};
}

ParamVector ToyRiverValley::hessian_vec(const ParamVector& w, const ParamVector& v) const {
    require_same_size(w, v, "hessian_vec");
    const auto H = hessian(w);
    return {H[0] * v[0] + H[1] * v[1], H[2] * v[0] + H[3] * v[1]};
}

std::pair<double, ParamVector> ToyRiverValley::top_eigen(const ParamVector& w) const {
    const auto H = hessian(w);
    const double a = H[0], b = H[1], d = H[3];
    const double half = 0.5 * (a - d);
    const double lam = 0.5 * (a + d) + std::hypot(half, b);
    ParamVector u1{b, lam - a}, u2{lam - d, b};
    ParamVector u = norm(u1) >= norm(u2) ? u1 : u2;
    const double n = norm(u);
    if (n == 0.0) return {lam, {1.0, 0.0}};
    return {lam, scaled(u, 1.0 / n)};
}

ParamVector ToyRiverValley::sharpness_gradient(const ParamVector& w) const {
    const auto [lam, u] = top_eigen(w);
    const double s = logistic(-w[0]);
    const double q = s * (1 - s);
    // dS/dw_i = u^T (dH/dw_i) u
    const double da1 = -(1 - 2 * s) * q, db1 = 2 * w[1], dd1 = 2 * w[0];
    const double da2 = 2 * w[1], db2 = 2 * w[0], dd2 = 0.0;
    const double uu = u[0] * u[0], uv = 2 * u[0] * u[1], vv = u[1] * u[1];
    return {uu * da1 + uv * db1 + vv * dd1, uu * da2 + uv * db2 + vv * dd2};
}

// ---- quadratic ----

Quadratic::Quadratic(std::vector<double> H, ParamVector g, double c) : H_(std::move(H)), g_(std::move(g)), c_(c) {
    const std::size_t d = g_.size();
    require(d > 0, "Quadratic: empty dimension");
    require(H_.size() == d * d, "Quadratic: H must be d*d");
    double scale = 0.0, asym = 0.0;
    for (double h : H_) scale = std::max(scale, std::abs(h));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) asym = std::max(asym, std::abs(H_[i * d + j] - H_[j * d + i]));
    require(asym <= 1e-12 * std::max(scale, 1e-300), "Quadratic: H is not symmetric");
}

Quadratic Quadratic::diagonal(const ParamVector& diag, double c) {
    const std::size_t d = diag.size();
    std::vector<double> H(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) H[i * d + i] = diag[i];
    return Quadratic(std::move(H), ParamVector(d, 0.0), c);
}

double Quadratic::value(const ParamVector& w) const {
    check(w);
    const ParamVector Hw = hessian_vec(w, w);
    return 0.5 * dot(w, Hw) + dot(g_, w) + c_;
}

ParamVector Quadratic::gradient(const ParamVector& w) const {
    ParamVector r = hessian_vec(w, w);
    axpy(1.0, g_, r);
    return r;
}

ParamVector Quadratic::hessian_vec(const ParamVector& w, const ParamVector& v) const {
    check(w);
    check(v);
    const std::size_t d = g_.size();
    ParamVector r(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += H_[i * d + j] * v[j];
        r[i] = s;
    }
    return r;
}

ParamVector Quadratic::sharpness_gradient(const ParamVector& w) const {
    check(w);
    return ParamVector(w.size(), 0.0);
}

// ---- data ----

Dataset Dataset::synthetic(std::size_t n, std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    require(n > 0 && d_in > 0 && d_out > 0, "Dataset::synthetic: sizes must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Dataset D;
    D.n = n;
    D.d_in = d_in;
    D.d_out = d_out;
    D.inputs.resize(n * d_in);
    for (double& x : D.inputs) x = N(rng);

    const std::size_t h = 64;
    std::vector<double> W1(d_in * h), W2(h * d_out);
    for (double& x : W1) x = N(rng) / std::sqrt(double(d_in));
    for (double& x : W2) x = N(rng) / std::sqrt(double(h));
    D.targets.assign(n * d_out, 0.0);
    std::vector<double> hid(h), out(d_out);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < h; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < d_in; ++p) s += D.inputs[i * d_in + p] * W1[p * h + j];
            hid[j] = std::tanh(s);
        }
        for (std::size_t k = 0; k < d_out; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < h; ++j) s += hid[j] * W2[j * d_out + k];
            out[k] = s;
        }
        const auto label = std::max_element(out.begin(), out.end()) - out.begin();
        D.targets[i * d_out + label] = 1.0;
    }
    return D;
}

Dataset Dataset::cifar10(const std::vector<std::string>& paths, std::size_t max_samples) {
    constexpr std::size_t rec = 3073, pix = 3072;
    Dataset D;
    D.d_in = pix;
    D.d_out = 10;
    std::vector<unsigned char> buf(rec);
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open CIFAR-10 file " + path);
        while (D.n < max_samples && in.read(reinterpret_cast<char*>(buf.data()), rec)) {
            if (buf[0] > 9) throw std::runtime_error("bad CIFAR-10 label in " + path);
            for (std::size_t j = 0; j < pix; ++j) D.inputs.push_back(buf[1 + j] / 255.0);
            for (std::size_t k = 0; k < 10; ++k) D.targets.push_back(k == buf[0] ? 1.0 : 0.0);
            ++D.n;
        }
        if (in.gcount() != 0 && in.gcount() != std::streamsize(rec))
            throw std::runtime_error("truncated CIFAR-10 record in " + path);
        if (D.n >= max_samples) break;
    }
    if (D.n == 0) throw std::runtime_error("no CIFAR-10 records read");
    return D;
}

std::vector<std::size_t> Dataset::batch_indices(std::uint64_t k) const {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (batches.batch_size == 0 || batches.batch_size >= n) return idx;
    const std::uint64_t per_epoch = n / batches.batch_size;
    const std::uint64_t epoch = k / per_epoch, slot = k % per_epoch;
    std::mt19937_64 rng(batches.seed + 0x9E3779B97F4A7C15ULL * (epoch + 1));
    std::shuffle(idx.begin(), idx.end(), rng);
    return {idx.begin() + slot * batches.batch_size, idx.begin() + (slot + 1) * batches.batch_size};
}

// ---- mlp ----

MLPObjective::MLPObjective(std::shared_ptr<const Dataset> data, std::vector<std::size_t> hidden,
                           kernels::Backend backend)
    : data_(std::move(data)), backend_(backend) {
    require(data_ && data_->n > 0, "MLPObjective: empty dataset");
    widths_.push_back(data_->d_in);
    for (auto h : hidden) {
        require(h > 0, "MLPObjective: zero hidden width");
        widths_.push_back(h);
    }
    widths_.push_back(data_->d_out);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        offsets_.push_back(dim_);
        dim_ += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }
}

ParamVector MLPObjective::init(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    ParamVector w(dim_);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const double a = 1.0 / std::sqrt(double(widths_[l]));
        std::uniform_real_distribution<double> U(-a, a);
        const std::size_t cnt = widths_[l] * widths_[l + 1] + widths_[l + 1];
        for (std::size_t i = 0; i < cnt; ++i) w[offsets_[l] + i] = U(rng);
    }
    return w;
}

double MLPObjective::run(const ParamVector& w, const std::vector<std::size_t>* rows, ParamVector* g) const {
    check(w);
    const Dataset& D = *data_;
    const std::size_t L = widths_.size() - 1;
    const std::size_t n = rows ? rows->size() : D.n;

    std::vector<std::vector<double>> A(L + 1);
    if (rows) {
        A[0].resize(n * D.d_in);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(D.inputs.begin() + (*rows)[i] * D.d_in, D.d_in, A[0].begin() + i * D.d_in);
    } else {
        A[0] = D.inputs;
    }
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t k = widths_[l], m = widths_[l + 1];
        const double* W = w.data() + offsets_[l];
        A[l + 1].resize(n * m);
        kernels::matmul(A[l].data(), W, A[l + 1].data(), n, k, m, backend_);
        kernels::bias_act(A[l + 1].data(), W + k * m, n, m, l + 1 < L, backend_);
    }

    const std::size_t dout = D.d_out;
    std::vector<double> dZ(n * dout);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = rows ? (*rows)[i] : i;
        for (std::size_t j = 0; j < dout; ++j) {
            const double r = A[L][i * dout + j] - D.targets[src * dout + j];
            loss += r * r;
            dZ[i * dout + j] = r / double(n);
        }
    }
    loss /= 2.0 * double(n);
    if (!g) return loss;

    g->assign(dim_, 0.0);
    std::vector<double> At, Wt, dA;
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t k = widths_[l], m = widths_[l + 1];
        double* gW = g->data() + offsets_[l];
        At.resize(k * n);
        kernels::transpose(A[l].data(), At.data(), n, k, backend_);
        kernels::matmul(At.data(), dZ.data(), gW, k, n, m, backend_);
        double* gb = gW + k * m;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gb[j] += dZ[i * m + j];
        if (l == 0) break;
        Wt.resize(m * k);
        kernels::transpose(w.data() + offsets_[l], Wt.data(), k, m, backend_);
        dA.resize(n * k);
        kernels::matmul(dZ.data(), Wt.data(), dA.data(), n, m, k, backend_);
        const std::vector<double>& H = A[l];
        for (std::size_t i = 0; i < n * k; ++i) dA[i] *= 1.0 - H[i] * H[i];
        dZ.swap(dA);
    }
    return loss;
}

double MLPObjective::value(const ParamVector& w) const { return run(w, nullptr, nullptr); }

ParamVector MLPObjective::gradient(const ParamVector& w) const {
    ParamVector g;
    run(w, nullptr, &g);
    return g;
}

double MLPObjective::value_and_gradient(const ParamVector& w, ParamVector& g) const { return run(w, nullptr, &g); }

double MLPObjective::batch_value_and_gradient(const ParamVector& w, std::uint64_t k, ParamVector& g) const {
    if (data_->batches.batch_size == 0) return run(w, nullptr, &g);
    const auto rows = data_->batch_indices(k);
    return run(w, &rows, &g);
}

ParamVector MLPObjective::hessian_vec(const ParamVector& w, const ParamVector& v) const {
    require_same_size(w, v, "hessian_vec");
    const double nv = norm(v);
    if (nv == 0.0) return ParamVector(v.size(), 0.0);
    const double h = 1e-4 * (1.0 + norm(w)) / (nv + 1e-12);
    ParamVector wp = w, wm = w;
    axpy(h, v, wp);
    axpy(-h, v, wm);
    ParamVector gp = gradient(wp);
    const ParamVector gm = gradient(wm);
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] = (gp[i] - gm[i]) / (2 * h);
    return gp;
}

// ---- spectra ----

Preconditioner::Preconditioner(ParamVector d) : diag(std::move(d)) {
    for (double p : diag) require(p > 0.0 && std::isfinite(p), "Preconditioner: entries must be positive");
}

Preconditioner Preconditioner::adaptive(const ParamVector& v, long t, double beta2, double eps) {
    require(t >= 1, "Preconditioner::adaptive: step must be >= 1");
    const double bc = 1.0 - std::pow(beta2, double(t));
    ParamVector d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = std::sqrt(v[i] / bc) + eps;
    return Preconditioner(std::move(d));
}

EigenResult top_eigenpair(const Objective& obj, const ParamVector& w, const Preconditioner* P, double tol,
                          int max_iters, ParamVector* warm) {
    require(tol > 0, "power iteration: tol must be positive");
    const std::size_t d = obj.dimension();
    ParamVector s;
    if (P) {
        require(P->diag.size() == d, "power iteration: preconditioner dimension mismatch");
        s.resize(d);
        for (std::size_t i = 0; i < d; ++i) s[i] = 1.0 / std::sqrt(P->diag[i]);
    }
    ParamVector v;
    if (warm && warm->size() == d && norm(*warm) > 0) {
        v = *warm;
    } else {
        std::mt19937_64 rng(0x5F1AB);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        v.resize(d);
        for (double& x : v) x = U(rng);
    }
    v = scaled(v, 1.0 / norm(v));

    auto apply = [&](const ParamVector& x) {
        if (!P) return obj.hessian_vec(w, x);
        ParamVector t(d);
        for (std::size_t i = 0; i < d; ++i) t[i] = s[i] * x[i];
        t = obj.hessian_vec(w, t);
        for (std::size_t i = 0; i < d; ++i) t[i] *= s[i];
        return t;
    };

    double rq = 0.0, prev = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        ParamVector hv = apply(v);
        rq = dot(v, hv);
        const double nh = norm(hv);
        if (!std::isfinite(nh)) throw ConvergenceError("power iteration produced non-finite values", prev);
        if (nh == 0.0) {
            if (warm) *warm = v;
            return {0.0, v, it};
        }
        v = scaled(hv, 1.0 / nh);
        if (it > 1 && std::abs(rq - prev) < tol * std::abs(rq)) {
            if (warm) *warm = v;
            return {rq, v, it};
        }
        prev = rq;
    }
    throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iters) + " iterations", rq);
}

double sharpness(const Objective& obj, const ParamVector& w, double tol, int max_iters, ParamVector* warm) {
    return top_eigenpair(obj, w, nullptr, tol, max_iters, warm).value;
}

double preconditioned_sharpness(const Objective& obj, const ParamVector& w, const Preconditioner& P, double tol,
                                int max_iters, ParamVector* warm) {
    return top_eigenpair(obj, w, &P, tol, max_iters, warm).value;
}

double river_distance(const ParamVector& w) {
    require(w.size() == 2, "river_distance: toy points are 2-dimensional");
    return std::abs(w[0] * w[1] - 1.0);
}

}  // namespace sflab

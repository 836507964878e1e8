#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sflab {

using ParamVector = std::vector<double>;

struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ContractError(what);
}

inline void require_same_size(const ParamVector& a, const ParamVector& b, const char* where) {
    if (a.size() != b.size())
        throw ContractError(std::string(where) + ": dimension mismatch (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    require_same_size(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
    require_same_size(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline ParamVector scaled(const ParamVector& a, double s) {
    ParamVector r(a);
    for (double& v : r) v *= s;
    return r;
}

// (1-t) a + t b
inline ParamVector lerp(const ParamVector& a, const ParamVector& b, double t) {
    require_same_size(a, b, "lerp");
    ParamVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = (1.0 - t) * a[i] + t * b[i];
    return r;
}

inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
    require_same_size(a, b, "sub");
    ParamVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline double dist(const ParamVector& a, const ParamVector& b) { return norm(sub(a, b)); }

inline bool all_finite(const ParamVector& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace sflab

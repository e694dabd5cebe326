#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace pathint {

// Shipped models are low dimensional; fixed capacity keeps the hot loops heap-free.
inline constexpr int kMaxDim = 6;
inline constexpr int kMaxState = kMaxDim * (kMaxDim + 2);  // (x, v, frame columns)

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxState, 1>;

/// Christoffel symbols Gamma^k_{ij} at a point, stored flat.
struct Christoffel {
    int n = 0;
    std::array<double, kMaxDim * kMaxDim * kMaxDim> v{};

    void resize(int dim) {
        n = dim;
        v.fill(0.0);
    }
    double& at(int k, int i, int j) { return v[(k * n + i) * n + j]; }
    double at(int k, int i, int j) const { return v[(k * n + i) * n + j]; }
};

/// Riemann tensor components R^l_{ijk} at a point.
struct RiemannTensor {
    int n = 0;
    std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> v{};

    void resize(int dim) {
        n = dim;
        v.fill(0.0);
    }
    double& at(int l, int i, int j, int k) { return v[((l * n + i) * n + j) * n + k]; }
    double at(int l, int i, int j, int k) const { return v[((l * n + i) * n + j) * n + k]; }
};

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.allFinite();
}

}  // namespace pathint

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "covsteer/config.hpp"
#include "covsteer/model.hpp"

#ifndef COVSTEER_EXAMPLES_DIR
#define COVSTEER_EXAMPLES_DIR "examples"
#endif

namespace testing {

using covsteer::Matrix;
using covsteer::SteeringProblem;
using covsteer::Vector;

inline std::string example_path(const std::string& name) {
    return std::string(COVSTEER_EXAMPLES_DIR) + "/" + name;
}

inline SteeringProblem double_integrator() {
    return covsteer::symmetrized(covsteer::load_config(example_path("double_integrator.json")));
}

struct Gen {
    std::mt19937_64 eng;
    explicit Gen(std::uint64_t seed) : eng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
    Matrix matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
        Matrix m(r, c);
        for (Eigen::Index j = 0; j < c; ++j) {
            for (Eigen::Index i = 0; i < r; ++i) {
                m(i, j) = scale * uniform(-1.0, 1.0);
            }
        }
        return m;
    }
    Vector vector(Eigen::Index n, double scale = 1.0) { return matrix(n, 1, scale).col(0); }
    Matrix spd(Eigen::Index n, double floor = 0.1) {
        const Matrix a = matrix(n, n);
        return a * a.transpose() + floor * Matrix::Identity(n, n);
    }
    Matrix psd(Eigen::Index n, Eigen::Index rank) {
        const Matrix a = matrix(n, rank);
        return a * a.transpose();
    }
};

/// Time-varying random instance with well-conditioned D and a loose terminal bound.
inline SteeringProblem random_problem(Gen& g, Eigen::Index nx, Eigen::Index nu, Eigen::Index ny, int N) {
    SteeringProblem p;
    p.horizon = N;
    const Eigen::Index nw = nx;
    for (int k = 0; k < N; ++k) {
        p.A.push_back(Matrix::Identity(nx, nx) + g.matrix(nx, nx, 0.3));
        p.B.push_back(g.matrix(nx, nu));
        p.G.push_back(g.matrix(nx, nw, 0.2));
        p.Q.push_back(g.psd(nx, nx));
        p.R.push_back(g.spd(nu));
    }
    for (int k = 0; k <= N; ++k) {
        p.C.push_back(g.matrix(ny, nx));
        p.D.push_back(Matrix::Identity(ny, ny) * g.uniform(0.1, 0.5) + g.matrix(ny, ny, 0.05));
    }
    p.prior_mean = g.vector(nx);
    p.prior_estimate_cov = g.psd(nx, nx) * 0.1;
    p.prior_error_cov = g.psd(nx, nx) * 0.1;
    p.target_mean = g.vector(nx);
    p.target_cov_bound = Matrix::Identity(nx, nx) * 1e3;
    p.total_risk = 0.01;
    return p;
}

/// Straightforward textbook filter used as an oracle: short-form update with
/// an explicit inverse, written independently of the library.
struct OracleSchedule {
    std::vector<Matrix> L, post, prior, innov;
};

inline OracleSchedule oracle_schedule(const SteeringProblem& p) {
    OracleSchedule o;
    Matrix P = p.prior_error_cov;
    for (int k = 0; k <= p.horizon; ++k) {
        const Matrix& C = p.C[static_cast<std::size_t>(k)];
        const Matrix& D = p.D[static_cast<std::size_t>(k)];
        const Matrix Sy = C * P * C.transpose() + D * D.transpose();
        const Matrix L = P * C.transpose() * Sy.inverse();
        const Eigen::Index n = P.rows();
        const Matrix Pk = (Matrix::Identity(n, n) - L * C) * P;
        o.prior.push_back(P);
        o.innov.push_back(Sy);
        o.L.push_back(L);
        o.post.push_back(Pk);
        if (k < p.horizon) {
            const Matrix& A = p.A[static_cast<std::size_t>(k)];
            const Matrix& G = p.G[static_cast<std::size_t>(k)];
            P = A * Pk * A.transpose() + G * G.transpose();
        }
    }
    return o;
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Random block lower-triangular matrix with block (k, i) nonzero for i ≤ k.
inline Matrix random_block_lower(Gen& g, int N, Eigen::Index nu, Eigen::Index nx, double scale) {
    Matrix K = Matrix::Zero(N * nu, (N + 1) * nx);
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i <= k; ++i) {
            K.block(k * nu, i * nx, nu, nx) = g.matrix(nu, nx, scale);
        }
    }
    return K;
}

}  // namespace testing

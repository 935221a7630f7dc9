// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "cdft/error.hpp"

namespace cdft {

template <typename Scalar>
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;  // unit columns
  Eigen::VectorXd residuals;
  int iterations = 0;
  std::string method;
};

struct KrylovOptions {
  int basis_size = 64;
  int keep = 6;  // extra Ritz vectors retained on restart beyond the k wanted
  int max_iterations = 50000;
  std::uint64_t seed = 0x2545f4914f6cdd1dULL;
};

namespace detail {

template <typename Scalar>
Scalar random_scalar(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  if constexpr (Eigen::NumTraits<Scalar>::IsComplex)
    return Scalar(n(rng), n(rng));
  else
    return n(rng);
}

}  // namespace detail

/// Lowest k eigenpairs of a dense Hermitian matrix.
template <typename Derived>
EigenPairs<typename Derived::Scalar> lowest_eigenpairs_dense(const Eigen::MatrixBase<Derived>& h, int k) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix herm = (h + h.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
  if (es.info() != Eigen::Success) throw Error("manybody", "no_convergence", "dense eigensolver failed");
  const Eigen::Index kk = std::min<Eigen::Index>(k, herm.rows());
  EigenPairs<Scalar> out;
  out.values = es.eigenvalues().head(kk);
  out.vectors = es.eigenvectors().leftCols(kk);
  out.residuals = ((herm * out.vectors) - out.vectors * out.values.asDiagonal()).colwise().norm().transpose();
  out.iterations = 1;
  out.method = "dense";
  return out;
}

struct IdentityPreconditioner {
  template <typename Vector>
  Vector operator()(const Vector& r, double) const {
    return r;
  }
};

/// Lowest k eigenpairs of a Hermitian operator given only its action,
/// `apply(x, y)` setting y = H x. Thick-restart Rayleigh-Ritz with full
/// reorthogonalization, expanding by `precondition(residual, ritz_value)`;
/// with the identity this is restarted Lanczos. Converged when every wanted
/// residual norm is at most `tol`.
template <typename Scalar, typename Apply, typename Precondition = IdentityPreconditioner>
EigenPairs<Scalar> lowest_eigenpairs_krylov(Apply&& apply, Eigen::Index n, int k, double tol,
                                            const KrylovOptions& opts = {},
                                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* start = nullptr,
                                            Precondition&& precondition = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (n <= 0 || k <= 0) throw Error("manybody", "bad_parameters", "empty eigenproblem");
  k = static_cast<int>(std::min<Eigen::Index>(k, n));
  const Eigen::Index m = std::min<Eigen::Index>(std::max(opts.basis_size, 2 * k + opts.keep + 2), n);
  std::mt19937_64 rng(opts.seed);

  Matrix v(n, m), av(n, m), t = Matrix::Zero(m, m);
  Eigen::Index cols = 0;
  Vector w(n);

  auto random_vector = [&] {
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = detail::random_scalar<Scalar>(rng);
    return r;
  };
  auto add = [&](Vector x) {
    for (int attempt = 0; attempt < 3; ++attempt) {
      const double before = x.norm();
      for (int pass = 0; pass < 2; ++pass) x -= v.leftCols(cols) * (v.leftCols(cols).adjoint() * x);
      const double after = x.norm();
      if (after > 1e-10 * before && after > 0.0) {
        x /= after;
        break;
      }
      x = random_vector();
    }
    v.col(cols) = x;
    apply(v.col(cols).eval(), w);
    av.col(cols) = w;
    t.col(cols).head(cols + 1) = v.leftCols(cols + 1).adjoint() * w;
    t.row(cols).head(cols) = t.col(cols).head(cols).adjoint();
    ++cols;
  };

  if (start && start->size() == n && start->norm() > 0.0)
    add(*start);
  else
    add(random_vector());

  EigenPairs<Scalar> out;
  out.method = "krylov";
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    Matrix tc = t.topLeftCorner(cols, cols);
    tc = (tc + tc.adjoint()).eval() / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(tc);
    const Eigen::Index kk = std::min<Eigen::Index>(k, cols);
    const Matrix y = es.eigenvectors().leftCols(kk);
    const Matrix x = v.leftCols(cols) * y;
    const Matrix r = av.leftCols(cols) * y - x * es.eigenvalues().head(kk).asDiagonal();
    const Eigen::VectorXd rn = r.colwise().norm().transpose();
    Eigen::Index first_open = -1;
    for (Eigen::Index j = 0; j < kk; ++j)
      if (rn[j] > tol) {
        first_open = j;
        break;
      }
    if (first_open < 0 && (kk == k || cols == n)) {
      out.values = es.eigenvalues().head(kk);
      out.vectors = x;
      out.residuals = rn;
      out.iterations = iter;
      return out;
    }
    if (cols == n) {
      // Full space spanned: the Rayleigh-Ritz pairs are exact up to rounding.
      out.values = es.eigenvalues().head(kk);
      out.vectors = x;
      out.residuals = rn;
      out.iterations = iter;
      return out;
    }
    if (first_open < 0) first_open = kk - 1;
    if (cols == m) {
      const Eigen::Index q = std::min<Eigen::Index>(cols - 1, k + opts.keep);
      const Matrix yq = es.eigenvectors().leftCols(q);
      v.leftCols(q) = (v.leftCols(cols) * yq).eval();
      av.leftCols(q) = (av.leftCols(cols) * yq).eval();
      t.setZero();
      t.topLeftCorner(q, q) = es.eigenvalues().head(q).template cast<Scalar>().asDiagonal();
      cols = q;
    }
    add(precondition(Vector(r.col(first_open)), es.eigenvalues()[first_open]));
  }
  throw Error("manybody", "no_convergence",
              "Krylov eigensolver did not converge in " + std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace cdft

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace cdft {

struct LbfgsOptions {
  int memory = 12;
  int max_iterations = 1000;
  double gradient_tol = 1e-9;
  double armijo = 1e-4;
  int max_backtracks = 50;
  // stop when the value changes by less than this (relative) for `stall_window` iterations
  double stall_tol = 1e-15;
  int stall_window = 10;
};

struct LbfgsResult {
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

template <typename Matrix>
double real_inner(const Matrix& a, const Matrix& b) {
  return std::real((a.array().conjugate() * b.array()).sum());
}

template <typename Matrix>
struct LbfgsMemory {
  std::deque<Matrix> s, y;
  std::deque<double> rho;

  void clear() {
    s.clear();
    y.clear();
    rho.clear();
  }

  void push(Matrix si, Matrix yi, int memory) {
    const double sy = real_inner(si, yi);
    if (!(sy > 1e-300)) return;
    s.push_back(std::move(si));
    y.push_back(std::move(yi));
    rho.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > memory) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  // -H g by the two-loop recursion.
  Matrix direction(const Matrix& g) const {
    Matrix q = g;
    const std::size_t k = s.size();
    std::vector<double> alpha(k);
    for (std::size_t i = k; i-- > 0;) {
      alpha[i] = rho[i] * real_inner(s[i], q);
      q -= alpha[i] * y[i];
    }
    if (k > 0) q *= real_inner(s[k - 1], y[k - 1]) / real_inner(y[k - 1], y[k - 1]);
    for (std::size_t i = 0; i < k; ++i) {
      const double beta = rho[i] * real_inner(y[i], q);
      q += (alpha[i] - beta) * s[i];
    }
    return -q;
  }
};

}  // namespace detail

/// Minimizes fn(x, grad) -> value over real vectors by L-BFGS with
/// Armijo backtracking. `x` is updated in place.
template <typename Fn>
LbfgsResult minimize_lbfgs(Fn&& fn, Eigen::VectorXd& x, const LbfgsOptions& opts = {}) {
  using Vector = Eigen::VectorXd;
  detail::LbfgsMemory<Vector> mem;
  Vector g(x.size()), g_new(x.size());
  LbfgsResult res;
  double f = fn(x, g);
  res.evaluations = 1;
  int stall = 0;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    res.gradient_norm = g.norm();
    if (res.gradient_norm <= opts.gradient_tol) {
      res.converged = true;
      break;
    }
    Vector d = mem.direction(g);
    double slope = d.dot(g);
    if (!(slope < 0.0)) {
      mem.clear();
      d = -g;
      slope = -g.squaredNorm();
    }
    double t = mem.s.empty() ? std::min(1.0, 1.0 / res.gradient_norm) : 1.0;
    Vector x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int b = 0; b < opts.max_backtracks; ++b) {
      x_new = x + t * d;
      f_new = fn(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= f + opts.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (mem.s.empty()) break;
      mem.clear();
      continue;
    }
    mem.push(x_new - x, g_new - g, opts.memory);
    const bool tiny = std::abs(f_new - f) <= opts.stall_tol * std::max(1.0, std::abs(f));
    stall = tiny ? stall + 1 : 0;
    x = std::move(x_new);
    g = g_new;
    f = f_new;
    if (stall >= opts.stall_window) {
      ++res.iterations;
      break;
    }
  }
  res.value = f;
  res.gradient_norm = g.norm();
  return res;
}

/// Polar retraction: the orthonormal factor of y.
inline Eigen::MatrixXcd orthonormal_factor(const Eigen::MatrixXcd& y) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(y.adjoint() * y);
  return y * (es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
              es.eigenvectors().adjoint());
}

/// Minimizes fn(X, G) -> value over complex matrices with orthonormal
/// columns, for objectives invariant under X -> XU with U unitary (a
/// Grassmann manifold; a sphere when X has one column). G is the Euclidean
/// gradient in the real sense, df = Re tr(G^H dX). Riemannian L-BFGS with
/// projection transport and polar retraction.
template <typename Fn>
LbfgsResult minimize_grassmann(Fn&& fn, Eigen::MatrixXcd& x, const LbfgsOptions& opts = {}) {
  using Matrix = Eigen::MatrixXcd;
  auto project = [](const Matrix& base, const Matrix& v) -> Matrix { return v - base * (base.adjoint() * v); };
  detail::LbfgsMemory<Matrix> mem;
  x = orthonormal_factor(x);
  Matrix g, g_new;
  LbfgsResult res;
  double f = fn(x, g);
  res.evaluations = 1;
  Matrix xi = project(x, g);
  int stall = 0;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    res.gradient_norm = xi.norm();
    if (res.gradient_norm <= opts.gradient_tol) {
      res.converged = true;
      break;
    }
    Matrix d = project(x, mem.direction(xi));
    double slope = detail::real_inner(d, xi);
    if (!(slope < 0.0)) {
      mem.clear();
      d = -xi;
      slope = -xi.squaredNorm();
    }
    double t = mem.s.empty() ? std::min(1.0, 0.1 / res.gradient_norm) : 1.0;
    Matrix x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int b = 0; b < opts.max_backtracks; ++b) {
      x_new = orthonormal_factor(x + t * d);
      f_new = fn(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= f + opts.armijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (mem.s.empty()) break;
      mem.clear();
      continue;
    }
    const Matrix xi_new = project(x_new, g_new);
    for (auto& s : mem.s) s = project(x_new, s);
    for (auto& y : mem.y) y = project(x_new, y);
    for (std::size_t i = 0; i < mem.s.size(); ++i) {
      const double sy = detail::real_inner(mem.s[i], mem.y[i]);
      mem.rho[i] = sy > 1e-300 ? 1.0 / sy : 0.0;
    }
    const Matrix s = project(x_new, t * d);
    mem.push(s, xi_new - project(x_new, xi), opts.memory);
    const bool tiny = std::abs(f_new - f) <= opts.stall_tol * std::max(1.0, std::abs(f));
    stall = tiny ? stall + 1 : 0;
    x = std::move(x_new);
    xi = xi_new;
    f = f_new;
    if (stall >= opts.stall_window) {
      ++res.iterations;
      break;
    }
  }
  res.value = f;
  res.gradient_norm = xi.norm();
  return res;
}

}  // namespace cdft

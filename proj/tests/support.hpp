// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded random inputs shared by the unit tests and the acceptance runner.

#pragma once

#include <cmath>
#include <random>

#include "cdft/manybody.hpp"

namespace cdft::testing {

inline VectorXc random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VectorXc x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = cplx(g(rng), g(rng));
  return x;
}

inline WaveFunction random_wavefunction(const Grid& grid, int n, std::mt19937_64& rng) {
  const ParticleSpace space(grid, n);
  return WaveFunction(grid, n, random_vector(space.full_size(), rng));
}

/// Smooth random potential: a few random low-frequency cosines.
inline ScalarField random_smooth(const Grid& grid, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(grid);
  for (int term = 0; term < 3; ++term) {
    Point3 k{0, 0, 0};
    for (int l = 0; l < grid.dim(); ++l) k[static_cast<std::size_t>(l)] = (term + 1) * u(rng) * 3.14159 / grid.length(l);
    const double c = amplitude * u(rng), phase = 3.0 * u(rng);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const Point3 x = grid.coordinates(i);
      f[i] += c * std::cos(k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + phase);
    }
  }
  return f;
}

inline RealVectorField random_smooth_vector(const Grid& grid, std::mt19937_64& rng, double amplitude) {
  RealVectorField a(grid);
  for (int l = 0; l < grid.dim(); ++l) a.component(l) = random_smooth(grid, rng, amplitude).values();
  return a;
}

inline ScalarField random_bounded(const Grid& grid, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  ScalarField f(grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i) f[i] = u(rng);
  return f;
}

inline RealVectorField random_bounded_vector(const Grid& grid, std::mt19937_64& rng, double amplitude) {
  RealVectorField a(grid);
  for (int l = 0; l < grid.dim(); ++l) a.component(l) = random_bounded(grid, rng, amplitude).values();
  return a;
}

/// N random orthonormal orbitals as an M x N matrix (physical normalization).
inline MatrixXc random_orbitals(const Grid& grid, int n, std::mt19937_64& rng) {
  MatrixXc f(grid.size(), n);
  for (int k = 0; k < n; ++k) f.col(k) = random_vector(grid.size(), rng);
  Eigen::HouseholderQR<MatrixXc> qr(f);
  return MatrixXc(qr.householderQ() * MatrixXc::Identity(grid.size(), n)) / std::sqrt(grid.cell_volume());
}

/// N orthonormal orbitals built from smooth random real and imaginary parts.
inline MatrixXc random_smooth_orbitals(const Grid& grid, int n, std::mt19937_64& rng) {
  MatrixXc f(grid.size(), n);
  for (int k = 0; k < n; ++k) {
    const ScalarField re = random_smooth(grid, rng, 1.0), im = random_smooth(grid, rng, 1.0);
    for (Eigen::Index i = 0; i < grid.size(); ++i) f(i, k) = cplx(1.0 + re[i], im[i]);
  }
  Eigen::HouseholderQR<MatrixXc> qr(f);
  return MatrixXc(qr.householderQ() * MatrixXc::Identity(grid.size(), n)) / std::sqrt(grid.cell_volume());
}

}  // namespace cdft::testing

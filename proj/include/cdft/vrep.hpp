// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cdft/manybody.hpp"

namespace cdft {

struct VrepOptions {
  double floor = 1e-12;
  double norm_tol = 1e-8;
  double overlap_tol = 1e-6;
  double eigen_tol = 1e-10;
};

/// Inversion of a one-particle density. phi0 = Lap sqrt(rho) and
/// v = phi0 / sqrt(rho) + e, so that (-Lap + v) sqrt(rho) = e sqrt(rho).
struct VrepReport {
  ScalarField phi0;
  double e = 0.0;
  ScalarField v;
  double ratio_bound = 0.0;  // max phi0 / sqrt(rho)
  double lap_l2 = 0.0;
  double inv_loc_integrable = 0.0;  // sum 1/rho h^d over the box
  bool positivity_ok = false;
  double eigen_residual = 0.0;
  bool ground_state_confirmed = false;
  double overlap = 0.0;
  bool verdict = false;
};

VrepReport invert_potential(const ScalarField& rho, double e, const VrepOptions& opts = {});

/// Inversion with e chosen so that min v = 0, followed by a ground-state
/// check of -Lap + v. The verdict holds iff rho is positive on the grid and
/// sqrt(rho) is confirmed as the ground state.
VrepReport vrep_check(const ScalarField& rho, const VrepOptions& opts = {});

/// rho(x) = (a + b |x_1|^(eps + 1/2))^2 * transverse(x) for |x_1| <= cutoff,
/// continued by a C^1 Gaussian tail, normalized on the grid.
struct CounterexampleSpec {
  double a = -1.0;
  double b = -1.0;
  double eps = 0.25;
  /// Regular factor in the remaining coordinates (ignored in 1D).
  std::function<double(const Point3&)> transverse;
  /// Radius of the singular region; <= 0 means a quarter of the half-width along axis 0.
  double cutoff = 0.0;
};

/// Unnormalized profile along axis 0 on a box of half-width `half_width` centred at 0.
double englisch_profile(const CounterexampleSpec& spec, double x, double half_width);
ScalarField englisch_density(const CounterexampleSpec& spec, const Grid& grid);

struct RefinementRow {
  double h = 0.0;
  double lap_l2_sq = 0.0;
  double coupling = 0.0;  // sum v rho h^d with e = 0
  double slope_estimate = 0.0;  // log2 growth of lap_l2_sq per halving of h; NaN on the first row
};

struct RefinementTable {
  std::vector<RefinementRow> rows;
  bool lap_growing = false;  // lap_l2_sq strictly increasing
  bool coupling_decreasing = false;  // coupling strictly decreasing
};

/// Dirichlet boxes [-half_width, half_width]^d with an odd point count per
/// axis, so that x = 0 is a grid point at every h.
Grid centred_grid(int dim, double half_width, double h);

RefinementTable refinement_scan(const std::function<ScalarField(const Grid&)>& density, int dim, double half_width,
                                const std::vector<double>& h_sequence);
RefinementTable refinement_scan(const CounterexampleSpec& spec, int dim, double half_width,
                                const std::vector<double>& h_sequence);

}  // namespace cdft

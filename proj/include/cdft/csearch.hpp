// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cdft/manybody.hpp"

namespace cdft {

struct DensityDiagnostics {
  double min_rho = 0.0;
  double total = 0.0;
  double h1_of_sqrt_rho = 0.0;
  double jp_l1 = 0.0;
  double kinetic_bound = 0.0;  // sum |j|^2 / rho h^d
  double curl_of_velocity = 0.0;  // max |curl(j/rho)| where rho > floor; 0 in one dimension
  bool kinetic_bound_warning = false;
};

/// Density rho and paramagnetic current j^p, checked for N-representability.
struct DensityPair {
  ScalarField rho;
  RealVectorField jp;
  int n_particles = 0;
  DensityDiagnostics diagnostics;
};

struct YnOptions {
  double floor = 1e-12;
  double kinetic_warn = 1e8;
};

/// Accepts iff rho >= 0 and integrates to N within 1e-8; throws
/// negative_density / wrong_normalization otherwise.
DensityPair yn_check(const ScalarField& rho, const RealVectorField& jp, int n_particles, const YnOptions& opts = {});
DensityPair density_pair(const WaveFunction& psi);
DensityPair density_pair(const Determinant& det);

/// Phase theta with grad theta = j/rho in least squares (minimum norm).
/// On periodic grids theta = 0 at the first grid point, the mean velocity is
/// integrated explicitly and its circulation must be a multiple of 2 pi.
ScalarField phase_from_current(const DensityPair& pair, double tol = 1e-6, double floor = 1e-12);

/// N = 1 value <sqrt rho, -Lap sqrt rho> + sum |j|^2 / rho h^d.
double n1_closed_form(const DensityPair& pair, double curl_tol = 1e-6, double floor = 1e-12);

enum class Objective { h0, kinetic };
enum class SearchSpace { wavefunctions, determinants };
std::string to_string(Objective o);
std::string to_string(SearchSpace s);

struct CsearchProblem {
  DensityPair target;
  Objective objective = Objective::kinetic;
  SearchSpace space = SearchSpace::wavefunctions;
  bool ignore_current = false;
  std::vector<double> penalty_schedule{1e1, 1e2, 1e3, 1e4};
  bool multiplier_update = true;
  double inner_tol = 1e-9;
  double constraint_tol = 1e-6;
  std::uint64_t seed = 0;
  int max_restarts = 8;
  double eta = 0.1;  // interaction softening for the h0 objective
  double curl_tol = 1e-6;
  Budget budget{};
  int max_inner_iterations = 3000;
  int max_multiplier_rounds = 30;  // extra updates at the largest weight
  int max_dual_iterations = 3000;
  /// Skip seeded random restarts once the dual bound closes the gap.
  bool stop_when_certified = true;
  /// Feasible points to start from; they also compete as candidates.
  std::vector<WaveFunction> warm_wavefunctions{};
  std::vector<Determinant> warm_determinants{};
};

struct ConstraintResidual {
  double rho_l1 = 0.0;
  double jp_l1 = 0.0;
};

struct Certificate {
  double lower_bound = 0.0;
  std::string source;
};

struct CsearchResult {
  double value = 0.0;
  std::variant<WaveFunction, Determinant> minimizer;
  ConstraintResidual constraint_residual;
  bool converged = false;
  int restarts_used = 0;
  std::optional<Certificate> certificate;
  /// Residual of the accepted iterate after each penalty stage, for the winning start.
  std::vector<ConstraintResidual> stage_residuals;
  std::string start_kind;  // warm, dual or random
  int start_index = 0;
};

/// Minimizes <psi, O psi> over the chosen space subject to rho_psi = rho and
/// (unless ignore_current) j_psi = j, by an augmented Lagrangian with
/// Riemannian L-BFGS inner solves. Starts: warm starts, the Lagrangian-dual
/// ground state, then seeded random points. Throws infeasible_constraints
/// when no start reaches constraint_tol.
CsearchResult csearch_minimize(const CsearchProblem& problem);

/// Wavefunction view of a search result (the determinant's amplitude for determinants).
const WaveFunction& minimizer_wavefunction(const CsearchResult& r);

}  // namespace cdft

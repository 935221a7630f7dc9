// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdft/csearch.hpp"

namespace cdft {

enum class XcKind { zero, cancel_hartree, constrained_oracle };
std::string to_string(XcKind k);
XcKind xc_kind_from_string(const std::string& name);

/// Exchange-correlation model. zero and cancel_hartree are closed test
/// models; constrained_oracle evaluates the exact terms by constrained search.
struct XcModel {
  XcKind kind = XcKind::zero;
  std::optional<Budget> oracle_budget{};
  std::uint64_t seed = 0;
  int max_restarts = 8;
  double constraint_tol = 1e-6;
  int max_dual_iterations = 500;
};

/// The six terms of the determinant energy functional and their sum.
struct GEvaluation {
  double kinetic_det = 0.0;
  double delta_t = 0.0;
  double current_coupling = 0.0;  // 2 sum j . A h^d
  double density_coupling = 0.0;  // sum rho (v + |A|^2) h^d
  double exc_w = 0.0;
  double hartree = 0.0;
  double total = 0.0;
};

/// (1/2) sum_xy rho(x) rho(y) W(x - y) h^{2d}, self terms included.
double hartree_energy(const ScalarField& rho, double eta);

struct DeltaT {
  double delta_t = 0.0;
  double exc_w = 0.0;
  double hartree = 0.0;
  WaveFunction psi_m;
  Determinant phi_m;
  std::optional<CsearchResult> psi_search;  // empty for N = 1
  std::optional<CsearchResult> phi_search;
};

/// Kinetic correlation and the interaction remainder at the density pair of
/// phi: psi_m minimizes <H0> over wavefunctions, phi_m minimizes <K> over
/// determinants, both pinned to (rho_phi, j_phi). phi itself is a warm start
/// of both searches. For N = 1 the lattice fiber of a pair is phi up to a
/// phase, so psi_m = phi_m = phi and no search is run.
DeltaT delta_t_and_excw(const Determinant& phi, double eta, const XcModel& xc = {});

GEvaluation g_energy(const Potentials& p, const Determinant& phi, const XcModel& xc);

struct GMinimum {
  Determinant phi_m;
  GEvaluation evaluation;
  DensityPair pair;
  double e0 = 0.0;  // exact ground energy when the oracle is available, NaN otherwise
  double rho_l1 = 0.0;  // distance to the exact ground pair (NaN without oracle)
  double jp_l1 = 0.0;
  std::string certificate;  // "oracle" or "upper bound only"
};

/// Minimizes the determinant energy functional for N particles in p.
GMinimum minimize_g(const Potentials& p, int n_particles, const XcModel& xc, double curl_tol = 1e-6);

struct ScfResult {
  Determinant orbitals;
  double energy = 0.0;
  int iterations = 0;
  double residual = 0.0;  // max orbital-equation residual
  MatrixXc lagrange_matrix{};  // F^H H[rho] F, Hermitian
  bool converged = false;
  std::vector<double> energy_history{};  // accepted iterates
};

/// Orbital functional sum <f_k, h f_k> + Hartree (full double sum) + E_xc
/// of the given orbitals (M x N, physical normalization).
double scf_energy(const Potentials& p, const MatrixXc& orbitals, XcKind kind);

ScfResult ks_scf(const Potentials& p, int n_particles, const XcModel& xc, double tol = 1e-10, int max_iter = 200,
                 double mixing = 0.3);

}  // namespace cdft

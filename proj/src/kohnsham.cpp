// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/kohnsham.hpp"

#include <cmath>
#include <limits>

#include "cdft/parallel.hpp"

namespace cdft {

namespace {

const char* kModule = "kohnsham";

double l1_distance(const ScalarField& a, const ScalarField& b) {
  return (a.values() - b.values()).cwiseAbs().sum() * a.grid().cell_volume();
}

double l1_distance(const RealVectorField& a, const RealVectorField& b) {
  return (a.values() - b.values()).rowwise().norm().sum() * a.grid().cell_volume();
}

double interaction_expectation(const WaveFunction& psi, double eta) {
  const Eigen::VectorXd w = interaction_diagonal(psi.grid(), psi.n_particles(), eta);
  const double dv = std::pow(psi.grid().cell_volume(), psi.n_particles());
  return (w.array() * psi.amplitudes().array().abs2()).sum() * dv;
}

struct Couplings {
  double current = 0.0;
  double density = 0.0;
};

Couplings couplings(const Potentials& p, const ScalarField& rho, const RealVectorField& jp) {
  const double dv = p.grid().cell_volume();
  Couplings c;
  c.current = 2.0 * (jp.values().array() * p.a.values().array()).sum() * dv;
  c.density = (rho.values().array() * (p.v.values() + p.a.values().rowwise().squaredNorm()).array()).sum() * dv;
  return c;
}

CsearchProblem search(const DensityPair& pair, Objective o, SearchSpace s, double eta, const XcModel& xc) {
  CsearchProblem prob{pair};
  prob.objective = o;
  prob.space = s;
  prob.eta = eta;
  prob.seed = xc.seed;
  prob.max_restarts = xc.max_restarts;
  prob.constraint_tol = xc.constraint_tol;
  prob.max_dual_iterations = xc.max_dual_iterations;
  if (xc.oracle_budget) prob.budget = *xc.oracle_budget;
  return prob;
}

}  // namespace

std::string to_string(XcKind k) {
  switch (k) {
    case XcKind::zero: return "zero";
    case XcKind::cancel_hartree: return "cancel_hartree";
    case XcKind::constrained_oracle: return "constrained_oracle";
  }
  return "unknown";
}

XcKind xc_kind_from_string(const std::string& name) {
  for (auto k : {XcKind::zero, XcKind::cancel_hartree, XcKind::constrained_oracle})
    if (to_string(k) == name) return k;
  throw Error(kModule, "bad_parameters", "unknown xc model '" + name + "'");
}

double hartree_energy(const ScalarField& rho, double eta) {
  if (rho.values().minCoeff() < 0.0) throw Error(kModule, "negative_density", "density has negative entries");
  const double dv = rho.grid().cell_volume();
  const Eigen::MatrixXd w = pair_kernel(rho.grid(), eta);
  return 0.5 * rho.values().dot(w * rho.values()) * dv * dv;
}

DeltaT delta_t_and_excw(const Determinant& phi, double eta, const XcModel& xc) {
  const DensityPair pair = density_pair(phi);
  const double hartree = hartree_energy(pair.rho, eta);
  if (phi.n_particles() == 1) return {0.0, -hartree, hartree, phi.wavefunction(), phi, std::nullopt, std::nullopt};
  CsearchProblem det = search(pair, Objective::kinetic, SearchSpace::determinants, eta, xc);
  det.warm_determinants.push_back(phi);
  CsearchProblem wf = search(pair, Objective::h0, SearchSpace::wavefunctions, eta, xc);
  wf.warm_determinants.push_back(phi);
  std::optional<CsearchResult> psi_r, phi_r;
  parallel_for(2, [&](int i) {
    if (i == 0)
      psi_r = csearch_minimize(wf);
    else
      phi_r = csearch_minimize(det);
  });
  const WaveFunction& psi_m = std::get<WaveFunction>(psi_r->minimizer);
  const Determinant& phi_m = std::get<Determinant>(phi_r->minimizer);
  const double w = interaction_expectation(psi_m, eta);
  const double k_psi = psi_r->value - w;
  return {k_psi - phi_r->value, w - hartree, hartree, psi_m, phi_m, *psi_r, *phi_r};
}

GEvaluation g_energy(const Potentials& p, const Determinant& phi, const XcModel& xc) {
  require_same_grid(p.grid(), phi.grid(), kModule);
  const DensityPairFields f = density_pair_of(phi);
  GEvaluation g;
  g.kinetic_det = phi.kinetic();
  const Couplings c = couplings(p, f.rho, f.jp);
  g.current_coupling = c.current;
  g.density_coupling = c.density;
  switch (xc.kind) {
    case XcKind::zero:
      g.hartree = hartree_energy(f.rho, p.eta);
      break;
    case XcKind::cancel_hartree:
      g.hartree = hartree_energy(f.rho, p.eta);
      g.exc_w = -g.hartree;
      break;
    case XcKind::constrained_oracle: {
      const DeltaT d = delta_t_and_excw(phi, p.eta, xc);
      g.delta_t = d.delta_t;
      g.exc_w = d.exc_w;
      g.hartree = d.hartree;
      break;
    }
  }
  g.total = g.kinetic_det + g.delta_t + g.current_coupling + g.density_coupling + g.exc_w + g.hartree;
  return g;
}

GMinimum minimize_g(const Potentials& p, int n, const XcModel& xc, double curl_tol) {
  const Grid& grid = p.grid();
  if (xc.kind != XcKind::constrained_oracle) {
    const ScfResult scf = ks_scf(p, n, xc);
    if (!scf.converged) throw Error(kModule, "no_convergence", "orbital iteration did not converge");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {scf.orbitals, g_energy(p, scf.orbitals, xc), density_pair(scf.orbitals), nan, nan, nan,
            "upper bound only"};
  }
  const SpectrumResult gs = ground_state(p, n, HamiltonianKind::full, 1e-10,
                                         xc.oracle_budget ? *xc.oracle_budget : Budget{});
  require_nondegenerate(gs, kModule);
  const DensityPair pair0 = density_pair(gs.ground_state);
  if (n < 4 && grid.dim() >= 2 && pair0.diagnostics.curl_of_velocity > curl_tol)
    throw Error(kModule, "curl_condition_violated",
                "ground pair has max |curl(j/rho)| = " + format_number(pair0.diagnostics.curl_of_velocity));

  // The minimizing determinant reproduces the ground pair; it is the
  // kinetic minimizer over determinants at that pair. For one particle every
  // state with that pair has the same coupling energy, so the ground orbital
  // is that minimizer.
  std::optional<Determinant> phi;
  if (n == 1) {
    phi = determinant_from_matrix(grid, MatrixXc(gs.ground_state.amplitudes()));
  } else {
    CsearchProblem det = search(pair0, Objective::kinetic, SearchSpace::determinants, p.eta, xc);
    det.max_dual_iterations = CsearchProblem{pair0}.max_dual_iterations;
    phi = std::get<Determinant>(csearch_minimize(det).minimizer);
  }
  GMinimum out{*phi, g_energy(p, *phi, xc), density_pair(*phi), gs.e0, 0.0, 0.0, "oracle"};
  out.rho_l1 = l1_distance(out.pair.rho, pair0.rho);
  out.jp_l1 = l1_distance(out.pair.jp, pair0.jp);
  return out;
}

double scf_energy(const Potentials& p, const MatrixXc& f, XcKind kind) {
  if (kind == XcKind::constrained_oracle)
    throw Error(kModule, "bad_parameters", "the orbital functional takes the zero or cancel_hartree model");
  const Grid& g = p.grid();
  const double dv = g.cell_volume();
  const SparseComplex h = one_body_operator(p.v, p.a);
  double e = (f.adjoint() * (h * f)).trace().real() * dv;
  if (kind == XcKind::zero) e += hartree_energy(ScalarField(g, f.rowwise().squaredNorm()), p.eta);
  return e;
}

ScfResult ks_scf(const Potentials& p, int n, const XcModel& xc, double tol, int max_iter, double mixing) {
  if (xc.kind == XcKind::constrained_oracle)
    throw Error(kModule, "bad_parameters", "self-consistent iteration takes the zero or cancel_hartree model");
  if (!(mixing > 0.0 && mixing <= 1.0)) throw Error(kModule, "bad_parameters", "mixing must lie in (0, 1]");
  const Grid& g = p.grid();
  const Eigen::Index m = g.size();
  if (n < 1 || n > m) throw Error(kModule, "bad_parameters", "particle number must lie in [1, M]");
  const double dv = g.cell_volume();
  const MatrixXc base = MatrixXc(one_body_operator(p.v, p.a));
  const Eigen::MatrixXd w = xc.kind == XcKind::zero ? pair_kernel(g, p.eta) : Eigen::MatrixXd();

  auto hamiltonian = [&](const Eigen::VectorXd& rho) {
    MatrixXc h = base;
    // cancel_hartree: v_xc = -v_H exactly
    if (xc.kind == XcKind::zero) h.diagonal() += ((w * rho) * dv).cast<cplx>();
    return h;
  };
  struct Step {
    MatrixXc f;  // physical orbitals
    Eigen::VectorXd rho;
    double energy;
  };
  auto occupy = [&](const Eigen::VectorXd& rho_in) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(hamiltonian(rho_in));
    const Eigen::VectorXd& eps = es.eigenvalues();
    if (n < m && eps[n] - eps[n - 1] < 100.0 * tol)
      throw Error(kModule, "aufbau_ambiguity",
                  "gap between orbitals " + std::to_string(n) + " and " + std::to_string(n + 1) + " is " +
                      format_number(eps[n] - eps[n - 1]));
    Step s;
    s.f = es.eigenvectors().leftCols(n) / std::sqrt(dv);
    s.rho = s.f.rowwise().squaredNorm();
    s.energy = scf_energy(p, s.f, xc.kind);
    return s;
  };
  auto residual = [&](const Step& s, MatrixXc& lagrange) {
    const MatrixXc h = hamiltonian(s.rho);
    const MatrixXc hf = h * s.f;
    lagrange = s.f.adjoint() * hf * dv;
    return ((hf - s.f * lagrange).colwise().norm() * std::sqrt(dv)).maxCoeff();
  };

  ScfResult out{determinant_from_matrix(g, MatrixXc::Identity(m, n) / std::sqrt(dv))};
  Eigen::VectorXd rho_in = occupy(Eigen::VectorXd::Zero(m)).rho;
  Step accepted = occupy(rho_in);
  Eigen::VectorXd accepted_in = rho_in;
  out.energy_history.push_back(accepted.energy);
  double alpha = mixing;
  MatrixXc lagrange;
  double res = residual(accepted, lagrange);
  int it = 1;
  for (; it < max_iter && res > tol; ++it) {
    rho_in = (1.0 - alpha) * accepted_in + alpha * accepted.rho;
    Step next = occupy(rho_in);
    if (next.energy > accepted.energy + 1e-14 * std::max(1.0, std::abs(accepted.energy))) {
      alpha *= 0.5;
      if (alpha < 1e-8) break;
      continue;
    }
    accepted = std::move(next);
    accepted_in = rho_in;
    out.energy_history.push_back(accepted.energy);
    res = residual(accepted, lagrange);
  }
  out.orbitals = determinant_from_matrix(g, accepted.f);
  out.energy = accepted.energy;
  out.iterations = it;
  out.residual = res;
  out.lagrange_matrix = lagrange;
  out.converged = res <= tol;
  return out;
}

}  // namespace cdft

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <random>

#include "cdft/csearch.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdft;
using namespace cdft::testing;

namespace {

ScalarField gaussian_density(const Grid& g, double width) {
  ScalarField rho = ScalarField::from_function(g, [&](const Point3& x) {
    double r2 = 0.0;
    for (int l = 0; l < g.dim(); ++l) r2 += x[static_cast<std::size_t>(l)] * x[static_cast<std::size_t>(l)];
    return std::exp(-r2 / (width * width));
  });
  rho.values() /= integrate(rho);
  return rho;
}

// psi = sqrt(rho) exp(i theta) for a smooth random theta.
WaveFunction phased_orbital(const Grid& g, std::mt19937_64& rng, double width) {
  const ScalarField rho = gaussian_density(g, width);
  const ScalarField theta = random_smooth(g, rng, 1.5);
  VectorXc amps(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) amps[i] = std::polar(std::sqrt(rho[i]), theta[i]);
  return WaveFunction(g, 1, amps);
}

CsearchProblem problem(const DensityPair& pair, Objective o, SearchSpace s) {
  CsearchProblem p{pair};
  p.objective = o;
  p.space = s;
  return p;
}

double stencil_kinetic(const WaveFunction& psi) {
  const Grid& g = psi.grid();
  const Hamiltonian k(g, psi.n_particles(), (-laplacian_matrix(g)).cast<cplx>(), std::nullopt);
  return expectation(k, psi, psi).real();
}

}  // namespace

TEST_CASE("yn_check") {
  const Grid g = Grid::dirichlet({-5.0}, {5.0}, {99});
  const ScalarField rho = gaussian_density(g, 1.0);
  const DensityPair pair = yn_check(rho, RealVectorField(g), 1);
  CHECK(pair.diagnostics.kinetic_bound == 0.0);
  CHECK(pair.diagnostics.total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pair.diagnostics.min_rho > 0.0);

  ScalarField bad = rho;
  bad[10] = -1e-9;
  CHECK_THROWS_WITH_AS(yn_check(bad, RealVectorField(g), 1), doctest::Contains("negative"), Error);
  CHECK_THROWS_WITH_AS(yn_check(rho, RealVectorField(g), 2), doctest::Contains("integrates"), Error);

  std::mt19937_64 rng(3);
  const Grid g2 = Grid::dirichlet({0.0, 0.0}, {1.0, 1.0}, {4, 4});
  for (int n : {1, 2}) {
    const WaveFunction psi = random_wavefunction(g2, n, rng);
    const DensityPair p = density_pair(psi);
    CHECK(std::isfinite(p.diagnostics.curl_of_velocity));
    CHECK(p.diagnostics.kinetic_bound <= stencil_kinetic(psi) + 10.0 * g2.spacing(0) * g2.spacing(0));
  }
}

TEST_CASE("phase_from_current") {
  SUBCASE("zero current") {
    const Grid g = Grid::dirichlet({-3.0, -3.0}, {3.0, 3.0}, {10, 10});
    const DensityPair pair = yn_check(gaussian_density(g, 1.5), RealVectorField(g), 1);
    CHECK(max_abs(phase_from_current(pair)) < 1e-12);
  }
  SUBCASE("winding on a ring") {
    const Grid g = Grid::periodic({0.0}, {2.0 * std::numbers::pi}, {32});
    ScalarField rho(g);
    rho.values().setConstant(1.0 / (2.0 * std::numbers::pi));
    RealVectorField jp(g);
    jp.component(0) = 2.0 * rho.values();
    const ScalarField theta = phase_from_current(yn_check(rho, jp, 1));
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(theta[i] == doctest::Approx(2.0 * g.coordinate(i, 0)));

    jp.component(0) = 1.5 * rho.values();
    CHECK_THROWS_WITH_AS(phase_from_current(yn_check(rho, jp, 1)), doctest::Contains("1.5"), Error);
  }
  SUBCASE("gradient of a smooth phase") {
    std::mt19937_64 rng(5);
    const Grid g = Grid::dirichlet({-2.0, -2.0}, {2.0, 2.0}, {12, 12});
    const ScalarField rho = gaussian_density(g, 1.5);
    const ScalarField theta = random_smooth(g, rng, 1.0);
    const RealVectorField grad = gradient(theta);
    RealVectorField jp(g);
    for (int l = 0; l < 2; ++l) jp.component(l) = rho.values().cwiseProduct(grad.component(l));
    const DensityPair pair = yn_check(rho, jp, 1);
    CHECK(pair.diagnostics.curl_of_velocity < 1e-10);
    const RealVectorField back = gradient(phase_from_current(pair));
    CHECK((back.values() - grad.values()).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("rotation is rejected") {
    const Grid g = Grid::dirichlet({-2.0, -2.0}, {2.0, 2.0}, {9, 9});
    const ScalarField rho = gaussian_density(g, 1.5);
    RealVectorField jp(g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      jp.values()(i, 0) = -rho[i] * g.coordinate(i, 1);
      jp.values()(i, 1) = rho[i] * g.coordinate(i, 0);
    }
    const DensityPair pair = yn_check(rho, jp, 1);
    CHECK(pair.diagnostics.curl_of_velocity >= 2.0 - 1e-12);
    CHECK_THROWS_WITH_AS(phase_from_current(pair), doctest::Contains("curl"), Error);
  }
}

TEST_CASE("n1_closed_form") {
  // sqrt(rho) = pi^(-1/4) exp(-x^2/2): continuum value 1/2, stencil symbol
  // k^2 - h^2 k^4 / 12 with <k^4> = 3/4.
  for (double h : {0.02, 0.01}) {
    const Grid g = Grid::with_spacing({-8.0}, {8.0}, h, Boundary::dirichlet);
    const ScalarField rho = gaussian_density(g, 1.0);
    const double value = n1_closed_form(yn_check(rho, RealVectorField(g), 1));
    CHECK(std::abs(value - (0.5 - h * h / 16.0)) < 1e-6);
  }
  SUBCASE("current increment") {
    std::mt19937_64 rng(8);
    const Grid g = Grid::dirichlet({-3.0, -3.0}, {3.0, 3.0}, {14, 14});
    const ScalarField rho = gaussian_density(g, 1.2);
    const RealVectorField grad = gradient(random_smooth(g, rng, 1.0));
    RealVectorField jp(g);
    double increment = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      jp.values().row(i) = rho[i] * grad.values().row(i);
      increment += rho[i] * grad.values().row(i).squaredNorm() * g.cell_volume();
    }
    const double base = n1_closed_form(yn_check(rho, RealVectorField(g), 1));
    const double with_current = n1_closed_form(yn_check(rho, jp, 1));
    CHECK(with_current - base == doctest::Approx(increment).epsilon(1e-12));
  }
  SUBCASE("constant density on a ring") {
    const Grid g = Grid::periodic({0.0}, {4.0}, {20});
    ScalarField rho(g);
    rho.values().setConstant(0.25);
    CHECK(std::abs(n1_closed_form(yn_check(rho, RealVectorField(g), 1))) < 1e-14);
  }
}

TEST_CASE("single particle search matches the closed form") {
  std::mt19937_64 rng(11);
  const Grid g = Grid::dirichlet({-4.0}, {4.0}, {40});
  const WaveFunction psi = phased_orbital(g, rng, 1.3);
  const DensityPair pair = density_pair(psi);
  const double closed = n1_closed_form(pair);
  const double h = g.spacing(0);
  for (auto o : {Objective::kinetic, Objective::h0})
    for (auto s : {SearchSpace::wavefunctions, SearchSpace::determinants}) {
      CAPTURE(to_string(o));
      CAPTURE(to_string(s));
      const CsearchResult r = csearch_minimize(problem(pair, o, s));
      CHECK(r.converged);
      CHECK(r.value == doctest::Approx(stencil_kinetic(psi)).epsilon(1e-7));
      CHECK(std::abs(r.value - closed) <= std::max(1e-6, 10 * h * h));
      CHECK(r.constraint_residual.rho_l1 <= 1e-6);
      CHECK(r.constraint_residual.jp_l1 <= 1e-6);
      REQUIRE(r.certificate);
      // the bound is exact for N = 1 up to the residual of the primal point
      CHECK(std::abs(r.value - r.certificate->lower_bound) <= 1e-6);
    }
}

TEST_CASE("ground pair exactness and ordering") {
  std::mt19937_64 rng(7);
  const Grid g = Grid::dirichlet({-3.0}, {3.0}, {16});
  const Potentials p(random_smooth(g, rng, 1.0), random_smooth_vector(g, rng, 0.5), 0.1);
  const SpectrumResult gs = ground_state(p, 2, HamiltonianKind::full, 1e-10);
  REQUIRE_FALSE(gs.degenerate);
  const DensityPair pair = density_pair(gs.ground_state);

  CsearchProblem pq = problem(pair, Objective::h0, SearchSpace::wavefunctions);
  pq.eta = p.eta;
  const CsearchResult q = csearch_minimize(pq);
  CHECK(q.value == doctest::Approx(energy(p, gs.ground_state).h0_part).epsilon(1e-5));
  CHECK(std::abs(minimizer_wavefunction(q).overlap(gs.ground_state)) >= 1.0 - 1e-4);

  const CsearchResult qk = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::wavefunctions));
  const CsearchResult td = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::determinants));
  CHECK(q.value >= qk.value - 1e-8);
  CHECK(td.value >= qk.value - 1e-8);
  CHECK(std::holds_alternative<Determinant>(td.minimizer));
  const DensityPair back = density_pair(std::get<Determinant>(td.minimizer));
  CHECK((back.rho.values() - pair.rho.values()).cwiseAbs().sum() * g.cell_volume() <= 1e-6);
}

TEST_CASE("noninteracting ground pairs collapse T_det onto Q'") {
  std::mt19937_64 rng(13);
  const Grid g = Grid::dirichlet({-3.0}, {3.0}, {14});
  const Potentials p(random_smooth(g, rng, 1.0), random_smooth_vector(g, rng, 0.5), 0.1);
  const SpectrumResult gs = ground_state(p, 2, HamiltonianKind::noninteracting, 1e-10);
  REQUIRE_FALSE(gs.degenerate);
  const DensityPair pair = density_pair(gs.ground_state);
  const CsearchResult qk = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::wavefunctions));
  const CsearchResult td = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::determinants));
  CHECK(td.value == doctest::Approx(qk.value).epsilon(1e-5));
  CHECK(td.value == doctest::Approx(stencil_kinetic(gs.ground_state)).epsilon(1e-5));
}

TEST_CASE("variational bound") {
  std::mt19937_64 rng(17);
  const Grid g = Grid::dirichlet({-2.0}, {2.0}, {8});
  const double eta = 0.2;
  for (int trial = 0; trial < 3; ++trial) {
    const DensityPair pair = density_pair(random_wavefunction(g, 2, rng));
    CsearchProblem pq = problem(pair, Objective::h0, SearchSpace::wavefunctions);
    pq.eta = eta;
    const CsearchResult q = csearch_minimize(pq);
    for (int k = 0; k < 3; ++k) {
      const Potentials p(random_smooth(g, rng, 2.0), random_smooth_vector(g, rng, 1.0), eta);
      const double e0 = ground_state(p, 2, HamiltonianKind::full, 1e-10).e0;
      double coupling = 0.0;
      for (Eigen::Index i = 0; i < g.size(); ++i)
        coupling += (2.0 * pair.jp.values().row(i).dot(p.a.values().row(i)) +
                     pair.rho[i] * (p.v[i] + p.a.values().row(i).squaredNorm())) *
                    g.cell_volume();
      CHECK(q.value + coupling >= e0 - 1e-5);
    }
  }
}

TEST_CASE("restarts are deterministic and feasibility is monotone") {
  std::mt19937_64 rng(19);
  const Grid g = Grid::dirichlet({-2.0, -2.0}, {2.0, 2.0}, {4, 4});
  const DensityPair pair = density_pair(random_wavefunction(g, 2, rng));
  CsearchProblem p = problem(pair, Objective::kinetic, SearchSpace::determinants);
  p.ignore_current = true;
  p.stop_when_certified = false;
  p.max_restarts = 3;
  p.seed = 42;
  const CsearchResult a = csearch_minimize(p);
  const CsearchResult b = csearch_minimize(p);
  CHECK(a.value == b.value);
  CHECK(a.start_kind == b.start_kind);
  CHECK(a.start_index == b.start_index);
  CHECK(minimizer_wavefunction(a).amplitudes() == minimizer_wavefunction(b).amplitudes());
  CHECK(a.restarts_used == 4);
  for (bool update : {true, false}) {
    // pure penalties stall at a residual of order |lambda| / mu
    p.multiplier_update = update;
    p.constraint_tol = update ? 1e-6 : 1e-3;
    const CsearchResult r = csearch_minimize(p);
    for (std::size_t s = 1; s < r.stage_residuals.size(); ++s)
      CHECK(r.stage_residuals[s].rho_l1 + r.stage_residuals[s].jp_l1 <=
            r.stage_residuals[s - 1].rho_l1 + r.stage_residuals[s - 1].jp_l1);
  }
}

TEST_CASE("unreachable pairs") {
  const Grid g = Grid::dirichlet({-2.0, -2.0}, {2.0, 2.0}, {6, 6});
  const ScalarField rho = gaussian_density(g, 1.5);
  RealVectorField jp(g);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    jp.values()(i, 0) = -0.5 * rho[i] * g.coordinate(i, 1);
    jp.values()(i, 1) = 0.5 * rho[i] * g.coordinate(i, 0);
  }
  const DensityPair pair = yn_check(rho, jp, 1);
  CHECK_THROWS_WITH_AS(csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::determinants)),
                       doctest::Contains("curl"), Error);
  CsearchProblem p = problem(pair, Objective::kinetic, SearchSpace::wavefunctions);
  p.max_restarts = 1;
  p.max_dual_iterations = 300;
  p.max_inner_iterations = 300;
  p.max_multiplier_rounds = 3;
  CHECK_THROWS_WITH_AS(csearch_minimize(p), doctest::Contains("constraint tolerance"), Error);

  CsearchProblem bad = problem(yn_check(rho, RealVectorField(g), 1), Objective::kinetic, SearchSpace::wavefunctions);
  bad.penalty_schedule = {10.0, 10.0};
  CHECK_THROWS_WITH_AS(csearch_minimize(bad), doctest::Contains("increasing"), Error);
}

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "cdft/cli.hpp"
#include "cdft/csearch.hpp"
#include "cdft/field_io.hpp"
#include "cdft/kohnsham.hpp"
#include "cdft/vrep.hpp"
#include "support.hpp"

using namespace cdft;
using namespace cdft::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

bool criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("threw ") + e.what()};
  }
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = o.pass && t < budget_s;
  std::printf("%s %2d %-34s %8.1f s (limit %.0f s)  %s\n", pass ? "PASS" : "FAIL", id, name, t, budget_s,
              o.detail.c_str());
  std::fflush(stdout);
  return pass;
}

double l1(const ScalarField& a, const ScalarField& b) {
  return (a.values() - b.values()).cwiseAbs().sum() * a.grid().cell_volume();
}

ScalarField gaussian_density(const Grid& g, double width, const Point3& c = {0, 0, 0}) {
  ScalarField rho = ScalarField::from_function(g, [&](const Point3& x) {
    double r2 = 0.0;
    for (int l = 0; l < g.dim(); ++l) {
      const auto k = static_cast<std::size_t>(l);
      r2 += (x[k] - c[k]) * (x[k] - c[k]);
    }
    return std::exp(-r2 / (width * width));
  });
  rho.values() /= integrate(rho);
  return rho;
}

double coupling(const DensityPair& pair, const Potentials& p) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < pair.rho.grid().size(); ++i)
    c += 2.0 * pair.jp.values().row(i).dot(p.a.values().row(i)) +
         pair.rho[i] * (p.v[i] + p.a.values().row(i).squaredNorm());
  return c * pair.rho.grid().cell_volume();
}

CsearchProblem problem(const DensityPair& pair, Objective o, SearchSpace s, double eta = 0.1) {
  CsearchProblem p{pair};
  p.objective = o;
  p.space = s;
  p.eta = eta;
  return p;
}

Outcome energy_decomposition() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int dim = 1 + k % 2, n = 1 + (k / 2) % 2;
    const Boundary b = (k / 4) % 2 ? Boundary::periodic : Boundary::dirichlet;
    const Grid g = dim == 1 ? (b == Boundary::periodic ? Grid::periodic({0.0}, {4.0}, {10}) : Grid::dirichlet({-2.0}, {2.0}, {10}))
                            : (b == Boundary::periodic ? Grid::periodic({0.0, 0.0}, {3.0, 3.0}, {4, 4})
                                                       : Grid::dirichlet({-1.5, -1.5}, {1.5, 1.5}, {4, 4}));
    const Potentials p(random_bounded(g, rng, 2.0), random_bounded_vector(g, rng, 1.0), 0.3);
    const EnergyParts e = energy(p, random_wavefunction(g, n, rng));
    worst = std::max(worst, std::abs(e.total - (e.h0_part + e.current_coupling + e.density_coupling)) / std::abs(e.total));
  }
  return {worst <= 1e-12, "max relative defect " + fmt("%.2e", worst)};
}

Outcome harmonic_oracle() {
  const Grid g = Grid::with_spacing({-8.0}, {8.0}, 0.05, Boundary::dirichlet);
  const Potentials p(ScalarField::from_function(g, [](const Point3& x) { return x[0] * x[0]; }), RealVectorField(g), 0.5);
  const double e1 = ground_state(p, 1, HamiltonianKind::full, 1e-10).e0;
  const double e2 = ground_state(p, 2, HamiltonianKind::noninteracting, 1e-8).e0;
  return {std::abs(e1 - 1.0) <= 2e-3 && std::abs(e2 - 4.0) <= 5e-3,
          "N=1 e0 " + fmt("%.6f", e1) + ", N=2 e0 " + fmt("%.6f", e2)};
}

Outcome gaussian_inversion() {
  const Grid g = centred_grid(1, 8.0, 0.02);
  const ScalarField rho = gaussian_density(g, 1.0);
  VrepOptions opts;
  opts.floor = 1e-40;
  const VrepReport r = invert_potential(rho, 1.0, opts);
  const double peak = rho.values().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(i, 0);
    if (rho[i] >= 1e-6 * peak) worst = std::max(worst, std::abs(r.v[i] - x * x));
  }
  const VrepReport check = vrep_check(rho, opts);
  return {worst <= 5e-3 && r.eigen_residual <= 1e-10 && check.ground_state_confirmed,
          "max |v - x^2| " + fmt("%.2e", worst) + ", eigen residual " + fmt("%.1e", r.eigen_residual) +
              ", confirmed " + (check.ground_state_confirmed ? "yes" : "no")};
}

Outcome englisch_scan() {
  const std::vector<double> hs{0.04, 0.02, 0.01, 0.005, 0.0025};
  bool ok = true;
  std::string detail;
  for (double eps : {0.25, 0.45}) {
    CounterexampleSpec spec;
    spec.eps = eps;
    const RefinementTable t = refinement_scan(spec, 1, 4.0, hs);
    double worst = 0.0;
    for (std::size_t k = 1; k < t.rows.size(); ++k)
      worst = std::max(worst, std::abs(t.rows[k].slope_estimate - (2.0 - 2.0 * eps)));
    ok = ok && t.lap_growing && t.coupling_decreasing && worst <= 0.3;
    detail += "eps " + fmt("%.2f", eps) + ": max slope error " + fmt("%.3f", worst) + "; ";
  }
  const RefinementTable control =
      refinement_scan([](const Grid& g) { return gaussian_density(g, 1.0); }, 1, 8.0, hs);
  const double last = control.rows.back().slope_estimate;
  ok = ok && std::abs(last) < 0.01;
  return {ok, detail + "control slope " + fmt("%.1e", last)};
}

Outcome n1_oracle() {
  std::mt19937_64 rng(5);
  std::vector<DensityPair> pairs;
  std::vector<double> spacing;
  for (int k = 0; k < 6; ++k) {
    const Grid g = Grid::dirichlet({-4.0}, {4.0}, {36 + 4 * k});
    const ScalarField rho = gaussian_density(g, 1.0 + 0.1 * k, {0.3 * (k - 3), 0, 0});
    const ScalarField theta = random_smooth(g, rng, 1.5);
    VectorXc amps(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) amps[i] = std::polar(std::sqrt(rho[i]), theta[i]);
    pairs.push_back(density_pair(WaveFunction(g, 1, amps)));
    spacing.push_back(g.spacing(0));
  }
  for (int k = 0; k < 4; ++k) {
    const Grid g = Grid::dirichlet({-3.0, -3.0}, {3.0, 3.0}, {7 + k % 2, 7});
    const ScalarField rho = gaussian_density(g, 1.2 + 0.1 * k, {0.2 * k, -0.1 * k, 0});
    pairs.push_back(yn_check(rho, RealVectorField(g), 1));
    spacing.push_back(std::max(g.spacing(0), g.spacing(1)));
  }
  double worst = 0.0;
  bool ok = true;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double closed = n1_closed_form(pairs[k]);
    const double tol = std::max(1e-6, 10.0 * spacing[k] * spacing[k]);
    for (auto o : {Objective::kinetic, Objective::h0})
      for (auto s : {SearchSpace::wavefunctions, SearchSpace::determinants}) {
        const double err = std::abs(csearch_minimize(problem(pairs[k], o, s)).value - closed);
        ok = ok && err <= tol;
        worst = std::max(worst, err / tol);
      }
  }
  return {ok, "10 pairs x 4 modes, worst error / tolerance " + fmt("%.2e", worst)};
}

struct GroundInstance {
  Potentials p;
  SpectrumResult gs;
  DensityPair pair;
};

std::vector<GroundInstance> ground_instances() {
  std::vector<GroundInstance> out;
  const Grid g = Grid::dirichlet({-3.0}, {3.0}, {16});
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    std::mt19937_64 rng(seed);
    Potentials p(random_smooth(g, rng, 1.0), random_smooth_vector(g, rng, 0.5), 0.3);
    SpectrumResult gs = ground_state(p, 2, HamiltonianKind::full, 1e-10);
    DensityPair pair = density_pair(gs.ground_state);
    out.push_back({std::move(p), std::move(gs), std::move(pair)});
  }
  return out;
}

Outcome ground_pair_exactness(const std::vector<GroundInstance>& instances, std::vector<double>& q_values) {
  bool ok = true;
  double worst_value = 0.0, worst_overlap = 1.0;
  for (const auto& inst : instances) {
    if (inst.gs.degenerate) return {false, "degenerate instance"};
    const CsearchResult q = csearch_minimize(problem(inst.pair, Objective::h0, SearchSpace::wavefunctions, inst.p.eta));
    const double exact = energy(inst.p, inst.gs.ground_state).h0_part;
    const double overlap = std::abs(minimizer_wavefunction(q).overlap(inst.gs.ground_state));
    worst_value = std::max(worst_value, std::abs(q.value - exact));
    worst_overlap = std::min(worst_overlap, overlap);
    ok = ok && std::abs(q.value - exact) <= 1e-5 && overlap >= 1.0 - 1e-4;
    q_values.push_back(q.value);
  }
  return {ok, "max |Q - <H0>| " + fmt("%.2e", worst_value) + ", min overlap " + fmt("%.8f", worst_overlap)};
}

Outcome ordering_and_bounds(const std::vector<GroundInstance>& instances, const std::vector<double>& q_values) {
  bool ok = true;
  double worst_order = std::numeric_limits<double>::infinity(), worst_bound = std::numeric_limits<double>::infinity();
  int targets = 0;
  // interacting ground pairs: Q from the exactness run
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const DensityPair& pair = instances[k].pair;
    const double qk = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::wavefunctions)).value;
    const double td = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::determinants)).value;
    worst_order = std::min({worst_order, q_values[k] - qk, td - qk});
    ++targets;
  }
  // determinant pairs
  std::mt19937_64 rng(7);
  const Grid g = Grid::dirichlet({-2.0}, {2.0}, {8});
  for (int k = 0; k < 5; ++k) {
    const DensityPair pair = density_pair(determinant_from_matrix(g, random_smooth_orbitals(g, 2, rng)));
    const double q = csearch_minimize(problem(pair, Objective::h0, SearchSpace::wavefunctions, 0.2)).value;
    const double qk = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::wavefunctions)).value;
    const double td = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::determinants)).value;
    worst_order = std::min({worst_order, q - qk, td - qk});
    ++targets;
  }
  // variational bound over 4 wavefunction pairs x 5 potentials
  const double eta = 0.2;
  for (int k = 0; k < 4; ++k) {
    const DensityPair pair = density_pair(random_wavefunction(g, 2, rng));
    const double q = csearch_minimize(problem(pair, Objective::h0, SearchSpace::wavefunctions, eta)).value;
    const double qk = csearch_minimize(problem(pair, Objective::kinetic, SearchSpace::wavefunctions)).value;
    worst_order = std::min(worst_order, q - qk);
    ++targets;
    for (int j = 0; j < 5; ++j) {
      const Potentials p(random_smooth(g, rng, 2.0), random_smooth_vector(g, rng, 1.0), eta);
      const double e0 = ground_state(p, 2, HamiltonianKind::full, 1e-10).e0;
      worst_bound = std::min(worst_bound, q + coupling(pair, p) - e0);
    }
  }
  ok = worst_order >= -1e-8 && worst_bound >= -1e-5;
  return {ok, std::to_string(targets) + " targets, min(Q - Q', T_det - Q') " + fmt("%.2e", worst_order) +
                  ", 20 combos, min(Q + couplings - e0) " + fmt("%.2e", worst_bound)};
}

struct OracleInstance {
  std::string name;
  Potentials p;
  int n;
  int restarts;
};

Outcome theorem4() {
  std::vector<OracleInstance> instances;
  {
    std::mt19937_64 rng(21);
    const Grid g = Grid::dirichlet({-4.0}, {4.0}, {40});
    ScalarField v = ScalarField::from_function(g, [](const Point3& x) { return 0.5 * x[0] * x[0]; });
    v.values() += random_smooth(g, rng, 0.5).values();
    instances.push_back({"N=1 1D", Potentials(v, random_smooth_vector(g, rng, 0.5), 0.5), 1, 8});
  }
  {
    std::mt19937_64 rng(22);
    const Grid g = Grid::dirichlet({-3.0}, {3.0}, {12});
    instances.push_back(
        {"N=2 1D", Potentials(random_smooth(g, rng, 1.5), random_smooth_vector(g, rng, 0.5), 0.5), 2, 8});
  }
  {
    const Grid g = Grid::periodic({0.0, 0.0}, {6.0, 2.0}, {6, 6});
    RealVectorField a(g);
    a.component(0).setConstant(0.3);
    const ScalarField v = ScalarField::from_function(g, [](const Point3& x) {
      return std::cos(std::numbers::pi * x[0] / 3.0) + 0.5 * std::sin(2.0 * std::numbers::pi * x[0] / 3.0);
    });
    instances.push_back({"N=2 2D 6x6", Potentials(v, a, 0.5), 2, 2});
  }

  bool ok = true;
  std::string detail;
  for (const auto& inst : instances) {
    XcModel xc;
    xc.kind = XcKind::constrained_oracle;
    xc.max_restarts = inst.restarts;
    const GMinimum m = minimize_g(inst.p, inst.n, xc);
    std::mt19937_64 rng(31);
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20; ++k) {
      const Determinant phi = determinant_from_matrix(inst.p.grid(), random_smooth_orbitals(inst.p.grid(), inst.n, rng));
      worst = std::min(worst, g_energy(inst.p, phi, xc).total - m.e0);
    }
    const double gap = std::abs(m.evaluation.total - m.e0);
    const bool pass = worst >= -1e-5 && gap <= 1e-4 && m.rho_l1 <= 1e-3 && m.jp_l1 <= 1e-3;
    ok = ok && pass;
    detail += inst.name + ": min(G - e0) " + fmt("%.2e", worst) + ", |G(phi_m) - e0| " + fmt("%.1e", gap) +
              ", L1 " + fmt("%.1e", m.rho_l1) + "/" + fmt("%.1e", m.jp_l1) + "; ";
  }
  return {ok, detail};
}

Outcome scf_closure() {
  std::mt19937_64 rng(41);
  bool ok = true;
  double worst_energy = 0.0, worst_rise = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 5; ++k) {
    const Grid g = k < 3 ? Grid::dirichlet({-4.0}, {4.0}, {40}) : Grid::dirichlet({-2.5, -2.5}, {2.5, 2.5}, {8, 8});
    const Potentials p(random_smooth(g, rng, 1.0), random_smooth_vector(g, rng, 0.5), 0.5);
    const int n = 2 + k % 2;
    const ScfResult cancel = ks_scf(p, n, XcModel{XcKind::cancel_hartree});
    const double e0 = ground_state(p, n, HamiltonianKind::noninteracting, 1e-11).e0;
    worst_energy = std::max(worst_energy, std::abs(cancel.energy - e0));
    const ScfResult hartree = ks_scf(p, n, XcModel{XcKind::zero}, 1e-9, 500);
    for (std::size_t j = 1; j < hartree.energy_history.size(); ++j)
      worst_rise = std::max(worst_rise, hartree.energy_history[j] - hartree.energy_history[j - 1]);
    ok = ok && cancel.converged && hartree.converged;
  }
  ok = ok && worst_energy <= 1e-8 && worst_rise <= 1e-12;
  return {ok, "max |E_scf - e0| " + fmt("%.2e", worst_energy) + ", max energy step " + fmt("%.2e", worst_rise)};
}

Outcome infrastructure() {
  const fs::path dir = fs::temp_directory_path() / ("cdft_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(51);
  const Grid g = Grid::dirichlet({-1.0, 0.0}, {1.0, 2.0}, {5, 4});
  const ScalarField s = random_bounded(g, rng, 1e3);
  const RealVectorField u = random_bounded_vector(g, rng, 1e-7);
  ComplexField c(g, random_vector(g.size(), rng));
  io::save_field(s, (dir / "s.csv").string());
  io::save_field(u, (dir / "u.csv").string());
  io::save_field(c, (dir / "c.csv").string());
  const bool round_trip = io::load_scalar_field((dir / "s.csv").string(), g).values() == s.values() &&
                          io::load_vector_field((dir / "u.csv").string(), g).values() == u.values() &&
                          io::load_complex_field((dir / "c.csv").string(), g).values() == c.values();

  const cli::json config = {
      {"command", "g-eval"},
      {"grid", {{"lower", {-2.0}}, {"upper", {2.0}}, {"points", {7}}}},
      {"potentials", {{"v", {{"family", "random"}}}, {"a", {{"family", "random"}, {"amplitude", 0.4}}}}},
      {"particles", 2},
      {"eta", 0.4},
      {"seed", 9},
      {"max_restarts", 2}};
  cli::RunOptions o1, o2;
  o1.output_dir = (dir / "run1").string();
  o2.output_dir = (dir / "run2").string();
  const auto r1 = cli::run(config, o1), r2 = cli::run(config, o2);
  const bool reproducible = r1.exit_code == 0 && r1.manifest["scalars"].dump() == r2.manifest["scalars"].dump();

  const Grid ring = Grid::periodic({0.0}, {8.0}, {8});
  int rejected = 0;
  try {
    require_nondegenerate(ground_state(Potentials::zero(ring, 0.5), 2, HamiltonianKind::full, 1e-10), "manybody");
  } catch (const Error& e) {
    rejected += e.code() == "degenerate_ground_state";
  }
  try {
    XcModel xc;
    xc.kind = XcKind::constrained_oracle;
    minimize_g(Potentials::zero(ring, 0.5), 2, xc);
  } catch (const Error& e) {
    rejected += e.code() == "degenerate_ground_state";
  }
  cli::RunOptions o3;
  o3.output_dir = (dir / "run3").string();
  const auto r3 = cli::run({{"command", "solve"},
                            {"grid", {{"boundary", "periodic"}, {"lower", {0.0}}, {"upper", {8.0}}, {"points", {8}}}},
                            {"particles", 2},
                            {"eta", 0.5}},
                           o3);
  rejected += r3.exit_code == 3 && r3.manifest["error"]["code"] == "degenerate_ground_state";
  fs::remove_all(dir);
  return {round_trip && reproducible && rejected == 3,
          std::string("round trip ") + (round_trip ? "bitwise" : "differs") + ", manifest scalars " +
              (reproducible ? "identical" : "differ") + ", degenerate rejections " + std::to_string(rejected) + "/3"};
}

}  // namespace

int main() {
  int failed = 0;
  failed += !criterion(1, "energy decomposition", 10, energy_decomposition);
  failed += !criterion(2, "harmonic oracle", 30, harmonic_oracle);
  failed += !criterion(3, "Gaussian inversion", 10, gaussian_inversion);
  failed += !criterion(4, "counterexample refinement", 30, englisch_scan);
  failed += !criterion(5, "one-particle constrained search", 300, n1_oracle);

  std::vector<GroundInstance> instances;
  std::vector<double> q_values;
  failed += !criterion(6, "ground-pair exactness", 600, [&] {
    instances = ground_instances();
    return ground_pair_exactness(instances, q_values);
  });
  failed += !criterion(7, "ordering and variational bound", 600, [&] {
    if (q_values.size() != instances.size()) return Outcome{false, "needs the criterion 6 instances"};
    return ordering_and_bounds(instances, q_values);
  });
  failed += !criterion(8, "determinant functional minimum", 1800, theorem4);
  failed += !criterion(9, "SCF closure", 300, scf_closure);
  failed += !criterion(10, "infrastructure", 60, infrastructure);
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}

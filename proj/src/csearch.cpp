// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/csearch.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/IterativeLinearSolvers>

#include "cdft/optimize.hpp"
#include "cdft/parallel.hpp"

namespace cdft {

namespace {

const char* kModule = "csearch";

using RowMajorC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double vector_l1(const Eigen::MatrixXd& r, double dv) { return r.rowwise().norm().sum() * dv; }

RealVectorField velocity(const DensityPair& pair, double floor) {
  RealVectorField w(pair.rho.grid());
  for (Eigen::Index i = 0; i < w.grid().size(); ++i)
    if (pair.rho[i] > floor) w.values().row(i) = pair.jp.values().row(i) / pair.rho[i];
  return w;
}

}  // namespace

std::string to_string(Objective o) { return o == Objective::h0 ? "h0" : "kinetic"; }
std::string to_string(SearchSpace s) { return s == SearchSpace::wavefunctions ? "wavefunctions" : "determinants"; }

DensityPair yn_check(const ScalarField& rho, const RealVectorField& jp, int n_particles, const YnOptions& opts) {
  const Grid& g = rho.grid();
  require_same_grid(g, jp.grid(), kModule);
  if (n_particles < 1) throw Error(kModule, "bad_parameters", "particle number must be at least 1");
  DensityPair pair{rho, jp, n_particles, {}};
  auto& d = pair.diagnostics;
  d.min_rho = rho.values().minCoeff();
  if (d.min_rho < 0.0)
    throw Error(kModule, "negative_density", "density has negative entries (min " + format_number(d.min_rho) + ")");
  d.total = integrate(rho);
  if (std::abs(d.total - n_particles) > 1e-8)
    throw Error(kModule, "wrong_normalization",
                "density integrates to " + format_number(d.total) + ", expected " + std::to_string(n_particles));
  const double dv = g.cell_volume();
  d.h1_of_sqrt_rho = norms(ScalarField(g, rho.values().cwiseSqrt())).h1;
  d.jp_l1 = vector_l1(jp.values(), dv);
  double kb = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (rho[i] > opts.floor) kb += jp.values().row(i).squaredNorm() / rho[i];
  d.kinetic_bound = kb * dv;
  d.kinetic_bound_warning = d.kinetic_bound > opts.kinetic_warn;
  if (g.dim() >= 2) {
    const Curl c = curl(velocity(pair, opts.floor));
    double worst = 0.0;
    std::visit(
        [&](const auto& f) {
          for (Eigen::Index i = 0; i < g.size(); ++i)
            if (rho[i] > opts.floor) worst = std::max(worst, f.values().row(i).cwiseAbs().maxCoeff());
        },
        c);
    d.curl_of_velocity = worst;
  }
  return pair;
}

DensityPair density_pair(const WaveFunction& psi) {
  const auto f = density_pair_of(psi);
  return yn_check(f.rho, f.jp, psi.n_particles());
}

DensityPair density_pair(const Determinant& det) {
  const auto f = density_pair_of(det);
  return yn_check(f.rho, f.jp, det.n_particles());
}

ScalarField phase_from_current(const DensityPair& pair, double tol, double floor) {
  const Grid& g = pair.rho.grid();
  if (pair.rho.values().minCoeff() <= floor)
    throw Error(kModule, "density_vanishes", "phase reconstruction needs rho above the floor everywhere");
  if (pair.diagnostics.curl_of_velocity > tol)
    throw Error(kModule, "not_curl_free",
                "max |curl(j/rho)| = " + format_number(pair.diagnostics.curl_of_velocity));
  RealVectorField w = velocity(pair, floor);
  ScalarField theta(g);
  if (g.boundary() == Boundary::periodic) {
    for (int l = 0; l < g.dim(); ++l) {
      const double mean = w.component(l).mean();
      const double circulation = mean * g.length(l);
      const double winding = circulation / (2.0 * std::numbers::pi);
      if (std::abs(winding - std::round(winding)) > 1e-6)
        throw Error(kModule, "incompatible_circulation",
                    "circulation along axis " + std::to_string(l) + " is " + format_number(winding) +
                        " x 2 pi, not an integer winding");
      w.component(l).array() -= mean;
      for (Eigen::Index i = 0; i < g.size(); ++i) theta[i] += mean * (g.coordinate(i, l) - g.origin(l));
    }
  }
  const Eigen::Index m = g.size();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b(m * g.dim());
  for (int l = 0; l < g.dim(); ++l) {
    const SparseReal d = difference_matrix(g, l);
    for (int k = 0; k < d.outerSize(); ++k)
      for (SparseReal::InnerIterator it(d, k); it; ++it) trip.emplace_back(l * m + it.row(), it.col(), it.value());
    b.segment(l * m, m) = w.component(l);
  }
  SparseReal a(m * g.dim(), m);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::LeastSquaresConjugateGradient<SparseReal> lscg;
  lscg.setTolerance(1e-14);
  lscg.setMaxIterations(20 * m);
  lscg.compute(a);
  const Eigen::VectorXd x = lscg.solve(b);
  const double residual = std::sqrt((a * x - b).squaredNorm() * g.cell_volume());
  if (g.dim() >= 2 && residual > tol)
    throw Error(kModule, "not_curl_free", "velocity is not a lattice gradient (residual " + format_number(residual) + ")");
  theta.values() += x;
  // zero padding makes constants visible to D on Dirichlet grids
  if (g.boundary() == Boundary::periodic) theta.values().array() -= theta[0];
  return theta;
}

double n1_closed_form(const DensityPair& pair, double curl_tol, double floor) {
  if (pair.n_particles != 1) throw Error(kModule, "bad_parameters", "closed form needs N = 1");
  if (pair.diagnostics.curl_of_velocity > curl_tol)
    throw Error(kModule, "not_curl_free",
                "max |curl(j/rho)| = " + format_number(pair.diagnostics.curl_of_velocity));
  const Grid& g = pair.rho.grid();
  const Eigen::VectorXd s = pair.rho.values().cwiseSqrt();
  double value = -s.dot(laplacian_matrix(g) * s) * g.cell_volume();
  double current = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double j2 = pair.jp.values().row(i).squaredNorm();
    if (j2 == 0.0) continue;
    if (pair.rho[i] <= floor) throw Error(kModule, "density_vanishes", "current where the density vanishes");
    current += j2 / pair.rho[i];
  }
  return value + current * g.cell_volume();
}

namespace {

struct Residuals {
  Eigen::VectorXd rho;
  Eigen::MatrixXd jp;
};

// Problem data and the Euclidean-metric representation shared by every start.
// Wavefunction points are unit sector vectors (one column); determinant
// points are M x N orthonormal orbital blocks scaled by sqrt(h^d).
class Model {
 public:
  explicit Model(const CsearchProblem& p)
      : problem_(p),
        grid_(p.target.rho.grid()),
        n_(p.target.n_particles),
        dv_(grid_.cell_volume()),
        wavefunctions_(p.space == SearchSpace::wavefunctions),
        interacting_(p.objective == Objective::h0 && n_ > 1),
        use_current_(!p.ignore_current),
        kinetic_((-laplacian_matrix(grid_)).cast<cplx>()) {
    for (int l = 0; l < grid_.dim(); ++l) diff_.push_back(difference_matrix(grid_, l).cast<cplx>());
    if (wavefunctions_ || interacting_) space_.emplace(grid_, n_, p.budget);
    if (interacting_) {
      interaction_ = interaction_diagonal(grid_, n_, p.eta, p.budget);
      if (!wavefunctions_) kernel_ = pair_kernel(grid_, p.eta);
    }
    rho_t_ = p.target.rho.values();
    jp_t_ = p.target.jp.values();
    if (!use_current_) jp_t_.setZero();
  }

  const Grid& grid() const { return grid_; }
  int n() const { return n_; }
  double dv() const { return dv_; }
  bool wavefunctions() const { return wavefunctions_; }
  bool interacting() const { return interacting_; }
  bool use_current() const { return use_current_; }
  const ParticleSpace& space() const { return *space_; }
  const Eigen::VectorXd& interaction() const { return interaction_; }
  const SparseComplex& kinetic() const { return kinetic_; }
  const CsearchProblem& problem() const { return problem_; }
  Eigen::Index variables() const { return use_current_ ? grid_.size() * (1 + grid_.dim()) : grid_.size(); }

  // Density and current of a tensor (M x rest, particle 1 first) with weight w.
  void tensor_densities(const VectorXc& psi, double w, Eigen::VectorXd& rho, Eigen::MatrixXd& jp) const {
    const Eigen::Index m = grid_.size();
    Eigen::Map<const RowMajorC> x(psi.data(), m, psi.size() / m);
    rho = w * x.rowwise().squaredNorm();
    jp.resize(m, grid_.dim());
    for (int l = 0; l < grid_.dim(); ++l) {
      const RowMajorC dx = diff_[static_cast<std::size_t>(l)] * x;
      jp.col(l) = w * (x.conjugate().array() * dx.array()).imag().rowwise().sum().matrix();
    }
  }

  void orbital_densities(const MatrixXc& f, double w, Eigen::VectorXd& rho, Eigen::MatrixXd& jp) const {
    rho = w * f.rowwise().squaredNorm();
    jp.resize(grid_.size(), grid_.dim());
    for (int l = 0; l < grid_.dim(); ++l) {
      const MatrixXc df = diff_[static_cast<std::size_t>(l)] * f;
      jp.col(l) = w * (f.conjugate().array() * df.array()).imag().rowwise().sum().matrix();
    }
  }

  void densities(const MatrixXc& x, const VectorXc* full, Eigen::VectorXd& rho, Eigen::MatrixXd& jp) const {
    if (wavefunctions_)
      tensor_densities(*full, n_ / dv_, rho, jp);
    else
      orbital_densities(x, 1.0 / dv_, rho, jp);
  }

  Residuals residuals(const Eigen::VectorXd& rho, const Eigen::MatrixXd& jp) const {
    Residuals r{rho - rho_t_, jp - jp_t_};
    if (!use_current_) r.jp.setZero();
    return r;
  }

  ConstraintResidual measure(const MatrixXc& x) const {
    VectorXc full;
    if (wavefunctions_) full = space_->expand(x.col(0));
    Eigen::VectorXd rho;
    Eigen::MatrixXd jp;
    densities(x, &full, rho, jp);
    const Residuals r = residuals(rho, jp);
    return {r.rho.cwiseAbs().sum() * dv_, vector_l1(r.jp, dv_)};
  }

  bool feasible(const ConstraintResidual& r) const {
    return r.rho_l1 <= problem_.constraint_tol && (!use_current_ || r.jp_l1 <= problem_.constraint_tol);
  }

  // <psi, O psi>; when grad is given, also the real-sense gradient 2 O x.
  double objective(const MatrixXc& x, const VectorXc* full, MatrixXc* grad) const {
    if (wavefunctions_) {
      VectorXc o;
      apply_one_body(kinetic_, n_, *full, o);
      if (interacting_) o += (interaction_.cast<cplx>().array() * full->array()).matrix();
      if (grad) *grad = 2.0 * space_->gather(o);
      return full->dot(o).real();
    }
    MatrixXc o = kinetic_ * x;
    if (interacting_) {
      const Eigen::VectorXd rho_e = x.rowwise().squaredNorm();
      const MatrixXc gamma = x * x.adjoint();
      const Eigen::VectorXd hartree = kernel_ * rho_e;
      const MatrixXc exchange = kernel_.cast<cplx>().cwiseProduct(gamma);
      o += hartree.cast<cplx>().asDiagonal() * x - exchange * x;
    }
    if (grad) *grad = 2.0 * o;
    // the interaction appears with weight 1/2 in the value
    double value = (x.adjoint() * (kinetic_ * x)).trace().real();
    if (interacting_) {
      const Eigen::VectorXd rho_e = x.rowwise().squaredNorm();
      const MatrixXc gamma = x * x.adjoint();
      value += 0.5 * (rho_e.dot(kernel_ * rho_e) - kernel_.cwiseProduct(gamma.cwiseAbs2()).sum());
    }
    return value;
  }

  SparseComplex potential(const Eigen::VectorXd& u, const Eigen::MatrixXd& a) const {
    SparseComplex p(grid_.size(), grid_.size());
    p.setIdentity();
    p = p * u.cast<cplx>().asDiagonal();
    if (use_current_) p += current_operator(RealVectorField(grid_, a));
    return p;
  }

  MatrixXc apply_potential(const SparseComplex& p, const MatrixXc& x, const VectorXc* full) const {
    if (wavefunctions_) {
      VectorXc out;
      apply_one_body(p, n_, *full, out);
      return space_->gather(out);
    }
    return p * x;
  }

  // Augmented Lagrangian value and gradient.
  double lagrangian(const MatrixXc& x, MatrixXc& grad, const Eigen::VectorXd& lam_rho, const Eigen::MatrixXd& lam_j,
                    double mu) const {
    VectorXc full;
    if (wavefunctions_) full = space_->expand(x.col(0));
    MatrixXc g;
    const double o = objective(x, &full, &g);
    Eigen::VectorXd rho;
    Eigen::MatrixXd jp;
    densities(x, &full, rho, jp);
    const Residuals r = residuals(rho, jp);
    double value = o + dv_ * (lam_rho.dot(r.rho) + 0.5 * mu * r.rho.squaredNorm());
    Eigen::MatrixXd a_eff = Eigen::MatrixXd::Zero(grid_.size(), grid_.dim());
    if (use_current_) {
      value += dv_ * ((lam_j.array() * r.jp.array()).sum() + 0.5 * mu * r.jp.squaredNorm());
      a_eff = lam_j + mu * r.jp;
    }
    const Eigen::VectorXd u_eff = lam_rho + mu * r.rho;
    grad = g + 2.0 * apply_potential(potential(u_eff, a_eff), x, &full);
    return value;
  }

  // Euclidean point from a wavefunction or determinant.
  MatrixXc point(const WaveFunction& psi) const { return psi.sector(*space_); }
  MatrixXc point(const Determinant& det) const {
    if (wavefunctions_) return point(det.wavefunction());
    return det.matrix() * std::sqrt(dv_);
  }

  MatrixXc random_point(std::mt19937_64& rng) const {
    std::normal_distribution<double> g;
    const Eigen::Index rows = wavefunctions_ ? space_->sector_size() : grid_.size();
    const Eigen::Index cols = wavefunctions_ ? 1 : n_;
    MatrixXc x(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) x(r, c) = cplx(g(rng), g(rng));
    return orthonormal_factor(x);
  }

  std::variant<WaveFunction, Determinant> minimizer(const MatrixXc& x) const {
    if (wavefunctions_) return WaveFunction::from_sector(*space_, x.col(0));
    return determinant_from_matrix(grid_, x / std::sqrt(dv_), problem_.budget);
  }

  const Eigen::VectorXd& rho_target() const { return rho_t_; }
  const Eigen::MatrixXd& jp_target() const { return jp_t_; }

 private:
  const CsearchProblem& problem_;
  Grid grid_;
  int n_;
  double dv_;
  bool wavefunctions_;
  bool interacting_;
  bool use_current_;
  SparseComplex kinetic_;
  std::vector<SparseComplex> diff_;
  std::optional<ParticleSpace> space_;
  Eigen::VectorXd interaction_;
  Eigen::MatrixXd kernel_;
  Eigen::VectorXd rho_t_;
  Eigen::MatrixXd jp_t_;
};

struct DualOutcome {
  double lower_bound = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd lam_rho;
  Eigen::MatrixXd lam_j;
  MatrixXc start;
  std::string source;
};

// Maximizes the concave dual g(u, a) = e0(O + u + C_a) - <u, rho> - <a, j>.
// Its value is a lower bound for the constrained minimum, and its ground
// state and multipliers seed the primal search. For the h0 objective over
// determinants the kinetic dual is used (a weaker but valid bound).
DualOutcome solve_dual(const Model& model) {
  const Grid& g = model.grid();
  const Eigen::Index m = g.size();
  const int d = g.dim();
  const int n = model.n();
  const double dv = model.dv();
  const bool many_body = model.interacting() && model.wavefunctions();
  const CsearchProblem& p = model.problem();

  VectorXc warm;
  MatrixXc best_state;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z;

  auto split = [&](const Eigen::VectorXd& z, Eigen::VectorXd& u, Eigen::MatrixXd& a) {
    u = z.head(m);
    a = Eigen::MatrixXd::Zero(m, d);
    if (model.use_current()) a = Eigen::Map<const Eigen::MatrixXd>(z.data() + m, m, d);
  };

  auto neg_dual = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    Eigen::VectorXd u;
    Eigen::MatrixXd a;
    split(z, u, a);
    const SparseComplex hop = model.kinetic() + model.potential(u, a);
    double e0 = 0.0;
    Eigen::VectorXd rho;
    Eigen::MatrixXd jp;
    MatrixXc state;
    if (!many_body) {
      Eigen::SelfAdjointEigenSolver<MatrixXc> es{MatrixXc(hop)};
      e0 = es.eigenvalues().head(n).sum();
      state = es.eigenvectors().leftCols(n);
      model.orbital_densities(state, 1.0 / dv, rho, jp);
    } else {
      const ParticleSpace& space = model.space();
      auto op = [&](const VectorXc& c, VectorXc& out) {
        const VectorXc psi = space.expand(c);
        VectorXc y;
        apply_one_body(hop, n, psi, y);
        y += (model.interaction().cast<cplx>().array() * psi.array()).matrix();
        out = space.gather(y);
      };
      EigenPairs<cplx> pairs;
      const VectorXc* start = warm.size() ? &warm : nullptr;
      if (space.sector_size() <= p.budget.dense_threshold)
        pairs = sector_eigenpairs(op, space.sector_size(), 1, 1e-11, p.budget, start);
      else
        pairs = sector_eigenpairs(op, space.sector_size(), 1, 1e-11, p.budget, start, KrylovOptions{},
                                  OneBodyPreconditioner(hop, space));
      e0 = pairs.values[0];
      warm = pairs.vectors.col(0);
      state = warm;
      model.tensor_densities(space.expand(warm), n / dv, rho, jp);
    }
    const double value =
        e0 - dv * (u.dot(model.rho_target()) + (a.array() * model.jp_target().array()).sum());
    grad.resize(z.size());
    grad.head(m) = -dv * (rho - model.rho_target());
    if (model.use_current())
      Eigen::Map<Eigen::MatrixXd>(grad.data() + m, m, d) = -dv * (jp - model.jp_target());
    if (value > best) {
      best = value;
      best_state = state;
      best_z = z;
    }
    return -value;
  };

  Eigen::VectorXd z = Eigen::VectorXd::Zero(model.variables());
  LbfgsOptions opts;
  opts.max_iterations = p.max_dual_iterations;
  opts.gradient_tol = 1e-3 * p.constraint_tol * dv;
  opts.memory = 20;
  opts.stall_tol = 1e-12;
  opts.stall_window = 20;
  minimize_lbfgs(neg_dual, z, opts);

  DualOutcome out;
  out.lower_bound = best;
  split(best_z, out.lam_rho, out.lam_j);
  out.source = many_body ? "lagrangian dual (interacting sector)" : "lagrangian dual (one-body aufbau)";
  if (model.interacting() && !model.wavefunctions()) out.source = "lagrangian dual of the kinetic functional";
  if (model.wavefunctions()) {
    if (many_body) {
      out.start = best_state;
    } else {
      // aufbau determinant expressed in the sector
      const Determinant det = determinant_from_matrix(g, best_state / std::sqrt(dv), p.budget);
      out.start = model.point(det.wavefunction());
    }
  } else {
    out.start = best_state;
  }
  return out;
}

struct StartOutcome {
  MatrixXc x;
  double value = std::numeric_limits<double>::infinity();
  ConstraintResidual residual;
  bool converged = false;
  std::vector<ConstraintResidual> stages;
};

double total(const ConstraintResidual& r) { return r.rho_l1 + r.jp_l1; }

StartOutcome run_augmented_lagrangian(const Model& model, MatrixXc x, Eigen::VectorXd lam_rho,
                                      Eigen::MatrixXd lam_j) {
  const CsearchProblem& p = model.problem();
  LbfgsOptions opts;
  opts.gradient_tol = p.inner_tol;
  opts.max_iterations = p.max_inner_iterations;
  opts.memory = 16;

  x = orthonormal_factor(x);
  StartOutcome out;
  ConstraintResidual accepted = model.measure(x);

  auto stage = [&](double mu) {
    MatrixXc trial = x;
    auto fn = [&](const MatrixXc& y, MatrixXc& grad) { return model.lagrangian(y, grad, lam_rho, lam_j, mu); };
    minimize_grassmann(fn, trial, opts);
    const ConstraintResidual r = model.measure(trial);
    if (!(total(r) <= total(accepted))) return false;
    x = trial;
    accepted = r;
    if (p.multiplier_update) {
      VectorXc full;
      if (model.wavefunctions()) full = model.space().expand(x.col(0));
      Eigen::VectorXd rho;
      Eigen::MatrixXd jp;
      model.densities(x, &full, rho, jp);
      const Residuals res = model.residuals(rho, jp);
      lam_rho += mu * res.rho;
      if (model.use_current()) lam_j += mu * res.jp;
    }
    return true;
  };

  for (double mu : p.penalty_schedule) {
    stage(mu);
    out.stages.push_back(accepted);
  }
  if (p.multiplier_update && !p.penalty_schedule.empty()) {
    // polish well below the tolerance: the value error scales with |lambda| * residual
    const double target = 1e-3 * p.constraint_tol;
    for (int round = 0; round < p.max_multiplier_rounds && total(accepted) > target; ++round) {
      if (!stage(p.penalty_schedule.back())) break;
    }
  }
  VectorXc full;
  if (model.wavefunctions()) full = model.space().expand(x.col(0));
  out.value = model.objective(x, &full, nullptr);
  out.residual = accepted;
  out.converged = model.feasible(accepted);
  out.x = std::move(x);
  return out;
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate(const CsearchProblem& p) {
  if (p.penalty_schedule.empty()) throw Error(kModule, "bad_parameters", "penalty schedule is empty");
  for (std::size_t i = 0; i < p.penalty_schedule.size(); ++i) {
    if (!(p.penalty_schedule[i] > 0.0)) throw Error(kModule, "bad_parameters", "penalty weights must be positive");
    if (i > 0 && !(p.penalty_schedule[i] > p.penalty_schedule[i - 1]))
      throw Error(kModule, "bad_parameters", "penalty weights must be strictly increasing");
  }
  if (!(p.inner_tol > 0.0) || !(p.constraint_tol > 0.0))
    throw Error(kModule, "bad_parameters", "tolerances must be positive");
  if (p.max_restarts < 0) throw Error(kModule, "bad_parameters", "max_restarts must be non-negative");
  if (p.objective == Objective::h0 && p.target.n_particles > 1 && !(p.eta >= 0.0))
    throw Error(kModule, "bad_parameters", "eta must be non-negative");
}

}  // namespace

CsearchResult csearch_minimize(const CsearchProblem& problem) {
  validate(problem);
  const DensityPair& t = problem.target;
  yn_check(t.rho, t.jp, t.n_particles);
  const Grid& grid = t.rho.grid();
  const int n = t.n_particles;
  if (problem.space == SearchSpace::determinants && n < 4 && grid.dim() >= 2 && !problem.ignore_current &&
      problem.warm_determinants.empty() && t.diagnostics.curl_of_velocity > problem.curl_tol)
    throw Error(kModule, "not_curl_free",
                "determinant search with N < 4 needs curl(j/rho) = 0; max |curl| = " +
                    format_number(t.diagnostics.curl_of_velocity));

  const Model model(problem);

  std::vector<MatrixXc> warm;
  for (const auto& w : problem.warm_wavefunctions) {
    if (w.n_particles() != n || w.grid() != grid)
      throw Error(kModule, "bad_parameters", "warm start does not match the target grid or particle number");
    if (model.wavefunctions()) warm.push_back(model.point(w));
  }
  for (const auto& det : problem.warm_determinants) {
    if (det.n_particles() != n || det.grid() != grid)
      throw Error(kModule, "bad_parameters", "warm start does not match the target grid or particle number");
    warm.push_back(model.point(det));
  }

  const DualOutcome dual = solve_dual(model);

  struct Candidate {
    StartOutcome outcome;
    std::string kind;
    int index = 0;
  };
  std::vector<Candidate> candidates;

  // Warm starts compete as they are, and after polishing.
  for (std::size_t i = 0; i < warm.size(); ++i) {
    StartOutcome as_is;
    as_is.x = orthonormal_factor(warm[i]);
    as_is.residual = model.measure(as_is.x);
    as_is.converged = model.feasible(as_is.residual);
    VectorXc full;
    if (model.wavefunctions()) full = model.space().expand(as_is.x.col(0));
    as_is.value = model.objective(as_is.x, &full, nullptr);
    as_is.stages.assign(problem.penalty_schedule.size(), as_is.residual);
    candidates.push_back({as_is, "warm", static_cast<int>(i)});
  }
  std::vector<StartOutcome> polished(warm.size() + 1);
  parallel_for(static_cast<int>(warm.size()) + 1, [&](int i) {
    const MatrixXc& x0 = i < static_cast<int>(warm.size()) ? warm[static_cast<std::size_t>(i)] : dual.start;
    polished[static_cast<std::size_t>(i)] = run_augmented_lagrangian(model, x0, dual.lam_rho, dual.lam_j);
  });
  for (std::size_t i = 0; i < warm.size(); ++i) candidates.push_back({polished[i], "warm", static_cast<int>(i)});
  candidates.push_back({polished.back(), "dual", 0});

  auto best_converged = [&]() -> const Candidate* {
    const Candidate* best = nullptr;
    for (const auto& c : candidates)
      if (c.outcome.converged && (!best || c.outcome.value < best->outcome.value)) best = &c;
    return best;
  };
  auto certified = [&](const Candidate* c) {
    return c && c->outcome.value - dual.lower_bound <= 1e-8 * std::max(1.0, std::abs(c->outcome.value));
  };

  int restarts_used = static_cast<int>(warm.size()) + 1;
  if (!(problem.stop_when_certified && certified(best_converged()))) {
    std::vector<StartOutcome> random(static_cast<std::size_t>(problem.max_restarts));
    parallel_for(problem.max_restarts, [&](int r) {
      std::mt19937_64 rng(splitmix(problem.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(r)));
      random[static_cast<std::size_t>(r)] =
          run_augmented_lagrangian(model, model.random_point(rng), dual.lam_rho, dual.lam_j);
    });
    for (int r = 0; r < problem.max_restarts; ++r)
      candidates.push_back({random[static_cast<std::size_t>(r)], "random", r});
    restarts_used += problem.max_restarts;
  }

  const Candidate* best = best_converged();
  if (!best) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) closest = std::min(closest, total(c.outcome.residual));
    throw Error(kModule, "infeasible_constraints",
                "no start reached the constraint tolerance " + format_number(problem.constraint_tol) +
                    " (smallest residual " + format_number(closest) + ")");
  }
  CsearchResult result{best->outcome.value,
                       model.minimizer(best->outcome.x),
                       best->outcome.residual,
                       true,
                       restarts_used,
                       Certificate{dual.lower_bound, dual.source},
                       best->outcome.stages,
                       best->kind,
                       best->index};
  return result;
}

const WaveFunction& minimizer_wavefunction(const CsearchResult& r) {
  if (const auto* w = std::get_if<WaveFunction>(&r.minimizer)) return *w;
  return std::get<Determinant>(r.minimizer).wavefunction();
}

}  // namespace cdft

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/manybody.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cdft {

namespace {

const char* kModule = "manybody";

Eigen::Index checked_power(Eigen::Index m, int n, Eigen::Index limit) {
  Eigen::Index p = 1;
  for (int k = 0; k < n; ++k) {
    if (p > limit / m)
      throw Error(kModule, "budget_exceeded",
                  "grid^N has more than " + std::to_string(limit) + " entries (M=" + std::to_string(m) +
                      ", N=" + std::to_string(n) + ")");
    p *= m;
  }
  return p;
}

int permutation_sign(const std::vector<int>& perm) {
  int inversions = 0;
  for (std::size_t a = 0; a < perm.size(); ++a)
    for (std::size_t b = a + 1; b < perm.size(); ++b)
      if (perm[a] > perm[b]) ++inversions;
  return inversions % 2 == 0 ? 1 : -1;
}

double pair_distance_sq(const Grid& g, Eigen::Index i, Eigen::Index j) {
  double r2 = 0.0;
  for (int l = 0; l < g.dim(); ++l) {
    const double d = g.displacement(i, j, l);
    r2 += d * d;
  }
  return r2;
}

using RowMajorC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

// ParticleSpace

ParticleSpace::ParticleSpace(Grid grid, int n_particles, const Budget& budget)
    : grid_(std::move(grid)), n_(n_particles) {
  if (n_ < 1) throw Error(kModule, "bad_parameters", "particle number must be at least 1");
  const Eigen::Index m = grid_.size();
  if (n_ > m) throw Error(kModule, "bad_parameters", "more particles than grid points");
  full_size_ = checked_power(m, n_, budget.max_full_dimension);
  volume_element_ = std::pow(grid_.cell_volume(), n_);
  double fact = 1.0;
  for (int k = 2; k <= n_; ++k) fact *= k;
  sqrt_factorial_ = std::sqrt(fact);

  sector_of_.assign(static_cast<std::size_t>(full_size_), -1);
  sign_of_.assign(static_cast<std::size_t>(full_size_), 0);

  std::vector<int> t(static_cast<std::size_t>(n_));
  std::iota(t.begin(), t.end(), 0);
  std::vector<int> order(static_cast<std::size_t>(n_));
  std::vector<int> sites(static_cast<std::size_t>(n_));
  while (true) {
    const auto s = static_cast<std::int32_t>(tuples_.size());
    tuples_.push_back(t);
    sorted_full_.push_back(full_index(t));
    std::iota(order.begin(), order.end(), 0);
    do {
      for (std::size_t k = 0; k < order.size(); ++k) sites[k] = t[static_cast<std::size_t>(order[k])];
      const auto f = static_cast<std::size_t>(full_index(sites));
      sector_of_[f] = s;
      sign_of_[f] = static_cast<std::int8_t>(permutation_sign(order));
    } while (std::next_permutation(order.begin(), order.end()));
    // next combination in lexicographic order
    int k = n_ - 1;
    while (k >= 0 && t[static_cast<std::size_t>(k)] == m - n_ + k) --k;
    if (k < 0) break;
    ++t[static_cast<std::size_t>(k)];
    for (int q = k + 1; q < n_; ++q) t[static_cast<std::size_t>(q)] = t[static_cast<std::size_t>(q - 1)] + 1;
  }
}

Eigen::Index ParticleSpace::full_index(const std::vector<int>& sites) const {
  Eigen::Index idx = 0;
  for (int s : sites) idx = idx * grid_.size() + s;
  return idx;
}

VectorXc ParticleSpace::expand(const VectorXc& c) const {
  VectorXc psi(full_size_);
  const double w = 1.0 / sqrt_factorial_;
  for (Eigen::Index f = 0; f < full_size_; ++f) {
    const auto s = sector_of_[static_cast<std::size_t>(f)];
    psi[f] = s < 0 ? cplx(0.0) : c[s] * (w * sign_of_[static_cast<std::size_t>(f)]);
  }
  return psi;
}

VectorXc ParticleSpace::gather(const VectorXc& psi) const {
  VectorXc c(sector_size());
  for (Eigen::Index s = 0; s < sector_size(); ++s) c[s] = psi[sorted_full_[static_cast<std::size_t>(s)]] * sqrt_factorial_;
  return c;
}

VectorXc ParticleSpace::antisymmetrize(const VectorXc& psi) const {
  VectorXc c = VectorXc::Zero(sector_size());
  for (Eigen::Index f = 0; f < full_size_; ++f) {
    const auto s = sector_of_[static_cast<std::size_t>(f)];
    if (s >= 0) c[s] += psi[f] * static_cast<double>(sign_of_[static_cast<std::size_t>(f)]);
  }
  return expand(c / sqrt_factorial_);
}

// WaveFunction

WaveFunction::WaveFunction(Grid grid, int n_particles, VectorXc amplitudes)
    : grid_(std::move(grid)), n_(n_particles), amps_(std::move(amplitudes)) {
  const ParticleSpace space(grid_, n_);
  if (amps_.size() != space.full_size())
    throw Error(kModule, "shape_mismatch", "amplitude count differs from M^N");
  if (n_ > 1) amps_ = space.antisymmetrize(amps_);
  const double nrm = amps_.norm();
  if (!(nrm > 0.0)) throw Error(kModule, "bad_parameters", "wavefunction has zero norm");
  amps_ /= nrm * std::sqrt(space.volume_element());
}

WaveFunction WaveFunction::from_sector(const ParticleSpace& space, const VectorXc& c) {
  return WaveFunction(space.grid(), space.n_particles(), space.expand(c));
}

cplx WaveFunction::amplitude(const std::vector<int>& sites) const {
  Eigen::Index idx = 0;
  for (int s : sites) idx = idx * grid_.size() + s;
  return amps_[idx];
}

VectorXc WaveFunction::sector(const ParticleSpace& space) const {
  VectorXc c = space.gather(amps_);
  return c / c.norm();
}

double WaveFunction::norm_squared() const {
  return amps_.squaredNorm() * std::pow(grid_.cell_volume(), n_);
}

cplx WaveFunction::overlap(const WaveFunction& other) const {
  require_same_grid(grid_, other.grid_, kModule);
  return amps_.dot(other.amps_) * std::pow(grid_.cell_volume(), n_);
}

// Determinant

MatrixXc Determinant::matrix() const {
  MatrixXc f(grid().size(), n_particles());
  for (int k = 0; k < n_particles(); ++k) f.col(k) = orbitals_[static_cast<std::size_t>(k)].values();
  return f;
}

double Determinant::kinetic() const {
  const SparseReal lap = laplacian_matrix(grid());
  double t = 0.0;
  for (const auto& f : orbitals_) t += -(f.values().dot(lap * f.values())).real() * grid().cell_volume();
  return t;
}

Determinant determinant_from_matrix(const Grid& grid, const MatrixXc& orbitals, const Budget& budget) {
  const Eigen::Index n = orbitals.cols();
  if (n < 1) throw Error(kModule, "bad_parameters", "a determinant needs at least one orbital");
  if (orbitals.rows() != grid.size()) throw Error(kModule, "shape_mismatch", "orbital length differs from grid size");
  const double dv = grid.cell_volume();
  const MatrixXc gram = orbitals.adjoint() * orbitals * dv;
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(gram);
  const double smallest = es.eigenvalues().minCoeff();
  if (!(smallest > 1e-10))
    throw Error(kModule, "not_orthonormalizable", "orbital Gram matrix is singular (linearly dependent orbitals)");
  const double defect = (gram - MatrixXc::Identity(n, n)).cwiseAbs().maxCoeff();
  if (defect > 1e-6)
    throw Error(kModule, "not_orthonormalizable",
                "orbitals are " + std::to_string(defect) + " away from orthonormal (limit 1e-6)");
  const MatrixXc inv_sqrt =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
  const MatrixXc f = orbitals * inv_sqrt;

  Determinant det;
  for (Eigen::Index k = 0; k < n; ++k) det.orbitals_.emplace_back(grid, f.col(k));
  const ParticleSpace space(grid, static_cast<int>(n), budget);
  VectorXc c(space.sector_size());
  MatrixXc sub(n, n);
  for (Eigen::Index s = 0; s < space.sector_size(); ++s) {
    const auto& t = space.tuple(s);
    for (Eigen::Index r = 0; r < n; ++r) sub.row(r) = f.row(t[static_cast<std::size_t>(r)]);
    c[s] = sub.determinant();
  }
  det.amplitude_cache_ = WaveFunction::from_sector(space, c);
  return det;
}

Determinant build_determinant(const std::vector<ComplexField>& orbitals, const Budget& budget) {
  if (orbitals.empty()) throw Error(kModule, "bad_parameters", "a determinant needs at least one orbital");
  const Grid& g = orbitals.front().grid();
  MatrixXc f(g.size(), static_cast<Eigen::Index>(orbitals.size()));
  for (std::size_t k = 0; k < orbitals.size(); ++k) {
    require_same_grid(g, orbitals[k].grid(), kModule);
    f.col(static_cast<Eigen::Index>(k)) = orbitals[k].values();
  }
  return determinant_from_matrix(g, f, budget);
}

// Potentials and operators

Potentials::Potentials(ScalarField v_, RealVectorField a_, double eta_)
    : v(std::move(v_)), a(std::move(a_)), eta(eta_) {
  require_same_grid(v.grid(), a.grid(), kModule);
  if (!(eta >= 0.0)) throw Error(kModule, "bad_parameters", "softening eta must be non-negative");
}

Potentials Potentials::zero(const Grid& grid, double eta) {
  return Potentials(ScalarField(grid), RealVectorField(grid), eta);
}

std::optional<Curl> Potentials::b() const {
  if (grid().dim() == 1) return std::nullopt;
  return curl(a);
}

double soft_coulomb(double r2, double eta) {
  // Coincident points only meet vanishing antisymmetric amplitudes when eta = 0.
  if (r2 == 0.0 && eta == 0.0) return 0.0;
  return 1.0 / std::sqrt(r2 + eta * eta);
}

Eigen::MatrixXd pair_kernel(const Grid& grid, double eta) {
  const Eigen::Index m = grid.size();
  Eigen::MatrixXd w(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) w(i, j) = w(j, i) = soft_coulomb(pair_distance_sq(grid, i, j), eta);
  return w;
}

std::string to_string(HamiltonianKind k) {
  switch (k) {
    case HamiltonianKind::full: return "full";
    case HamiltonianKind::noninteracting: return "noninteracting";
    case HamiltonianKind::h0: return "h0";
    case HamiltonianKind::kinetic: return "kinetic";
  }
  return "unknown";
}

SparseComplex current_operator(const RealVectorField& a) {
  const Grid& g = a.grid();
  SparseComplex c(g.size(), g.size());
  for (int l = 0; l < g.dim(); ++l) {
    const SparseReal d = difference_matrix(g, l);
    const SparseReal da = d * a.component(l).asDiagonal();
    const SparseReal ad = a.component(l).asDiagonal() * d;
    c += (da + ad).cast<cplx>() * cplx(0.0, -0.5);
  }
  return c;
}

SparseComplex one_body_operator(const ScalarField& v, const RealVectorField& a) {
  const Grid& g = v.grid();
  require_same_grid(g, a.grid(), kModule);
  const Eigen::VectorXd u = v.values() + a.values().rowwise().squaredNorm();
  SparseComplex h = (-laplacian_matrix(g)).cast<cplx>();
  SparseComplex diag(g.size(), g.size());
  diag.setIdentity();
  diag = diag * u.cast<cplx>().asDiagonal();
  h += diag;
  if (a.values().cwiseAbs().maxCoeff() > 0.0) h += current_operator(a) * cplx(2.0);
  h.makeCompressed();
  return h;
}

void apply_one_body(const SparseComplex& h, int n_particles, const VectorXc& in, VectorXc& out) {
  const Eigen::Index m = h.rows();
  out.setZero(in.size());
  Eigen::Index outer = 1;
  Eigen::Index inner = in.size() / m;
  for (int k = 0; k < n_particles; ++k) {
    if (inner == 1) {
      Eigen::Map<const RowMajorC> x(in.data(), outer, m);
      Eigen::Map<RowMajorC> y(out.data(), outer, m);
      y += x * h.transpose();
    } else {
      for (Eigen::Index o = 0; o < outer; ++o) {
        Eigen::Map<const RowMajorC> x(in.data() + o * m * inner, m, inner);
        Eigen::Map<RowMajorC> y(out.data() + o * m * inner, m, inner);
        y += h * x;
      }
    }
    outer *= m;
    inner /= m;
  }
}

Eigen::VectorXd interaction_diagonal(const Grid& grid, int n_particles, double eta, const Budget& budget) {
  const Eigen::Index m = grid.size();
  const Eigen::Index full = checked_power(m, n_particles, budget.max_full_dimension);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(full);
  if (n_particles < 2) return w;
  const Eigen::MatrixXd k = pair_kernel(grid, eta);
  std::vector<Eigen::Index> sites(static_cast<std::size_t>(n_particles));
  for (Eigen::Index f = 0; f < full; ++f) {
    Eigen::Index rest = f;
    for (int p = n_particles - 1; p >= 0; --p) {
      sites[static_cast<std::size_t>(p)] = rest % m;
      rest /= m;
    }
    double s = 0.0;
    for (std::size_t a = 0; a < sites.size(); ++a)
      for (std::size_t b = a + 1; b < sites.size(); ++b) s += k(sites[a], sites[b]);
    w[f] = s;
  }
  return w;
}

Hamiltonian::Hamiltonian(const Grid& grid, int n_particles, SparseComplex one_body, std::optional<double> eta,
                         const Budget& budget)
    : grid_(grid), n_(n_particles), one_body_(std::move(one_body)) {
  if (n_ < 1) throw Error(kModule, "bad_parameters", "particle number must be at least 1");
  full_size_ = checked_power(grid_.size(), n_, budget.max_full_dimension);
  if (eta && n_ > 1) interaction_ = cdft::interaction_diagonal(grid_, n_, *eta, budget);
}

namespace {

SparseComplex kind_one_body(const Potentials& p, HamiltonianKind kind) {
  if (kind == HamiltonianKind::full || kind == HamiltonianKind::noninteracting) return one_body_operator(p.v, p.a);
  return (-laplacian_matrix(p.grid())).cast<cplx>();
}

std::optional<double> kind_eta(const Potentials& p, HamiltonianKind kind) {
  if (kind == HamiltonianKind::full || kind == HamiltonianKind::h0) return p.eta;
  return std::nullopt;
}

}  // namespace

Hamiltonian::Hamiltonian(const Potentials& p, int n_particles, HamiltonianKind kind, const Budget& budget)
    : Hamiltonian(p.grid(), n_particles, kind_one_body(p, kind), kind_eta(p, kind), budget) {}

void Hamiltonian::apply(const VectorXc& in, VectorXc& out) const {
  if (in.size() != full_size_) throw Error(kModule, "shape_mismatch", "tensor size differs from M^N");
  apply_one_body(one_body_, n_, in, out);
  if (interacting()) out += (interaction_.cast<cplx>().array() * in.array()).matrix();
}

ComplexField apply_hamiltonian_one(const Potentials& p, const ComplexField& f, HamiltonianKind kind) {
  require_same_grid(p.grid(), f.grid(), kModule);
  return ComplexField(f.grid(), kind_one_body(p, kind) * f.values());
}

VectorXc apply_hamiltonian(const Potentials& p, const WaveFunction& psi, HamiltonianKind kind) {
  require_same_grid(p.grid(), psi.grid(), kModule);
  return Hamiltonian(p, psi.n_particles(), kind).apply(psi.amplitudes());
}

cplx expectation(const Hamiltonian& h, const WaveFunction& phi, const WaveFunction& psi) {
  require_same_grid(h.grid(), psi.grid(), kModule);
  require_same_grid(phi.grid(), psi.grid(), kModule);
  return phi.amplitudes().dot(h.apply(psi.amplitudes())) * std::pow(psi.grid().cell_volume(), psi.n_particles());
}

EnergyParts energy(const Potentials& p, const WaveFunction& psi) {
  require_same_grid(p.grid(), psi.grid(), kModule);
  const int n = psi.n_particles();
  EnergyParts e;
  e.total = expectation(Hamiltonian(p, n, HamiltonianKind::full), psi, psi).real();
  e.h0_part = expectation(Hamiltonian(p, n, HamiltonianKind::h0), psi, psi).real();
  const auto pair = density_pair_of(psi);
  const double dv = p.grid().cell_volume();
  e.current_coupling = 2.0 * pair.jp.values().cwiseProduct(p.a.values()).sum() * dv;
  const Eigen::VectorXd u = p.v.values() + p.a.values().rowwise().squaredNorm();
  e.density_coupling = pair.rho.values().dot(u) * dv;
  return e;
}

DensityPairFields density_pair_of(const WaveFunction& psi) {
  const Grid& g = psi.grid();
  const Eigen::Index m = g.size();
  const int n = psi.n_particles();
  const Eigen::Index rest = psi.amplitudes().size() / m;
  const double w = n * std::pow(g.cell_volume(), n - 1);
  Eigen::Map<const RowMajorC> x(psi.amplitudes().data(), m, rest);
  DensityPairFields out{ScalarField(g, w * x.rowwise().squaredNorm()), RealVectorField(g)};
  for (int l = 0; l < g.dim(); ++l) {
    const RowMajorC dx = difference_matrix(g, l).cast<cplx>() * x;
    out.jp.component(l) = w * (x.conjugate().array() * dx.array()).imag().rowwise().sum().matrix();
  }
  return out;
}

DensityPairFields orbital_density_pair(const Grid& grid, const MatrixXc& f) {
  DensityPairFields out{ScalarField(grid, f.rowwise().squaredNorm()), RealVectorField(grid)};
  for (int l = 0; l < grid.dim(); ++l) {
    const MatrixXc df = difference_matrix(grid, l).cast<cplx>() * f;
    out.jp.component(l) = (f.conjugate().array() * df.array()).imag().rowwise().sum().matrix();
  }
  return out;
}

DensityPairFields density_pair_of(const Determinant& det) { return orbital_density_pair(det.grid(), det.matrix()); }

void apply_sector(const Hamiltonian& h, const ParticleSpace& space, const VectorXc& c, VectorXc& out) {
  out = space.gather(h.apply(space.expand(c)));
}

namespace {

// Fixes the global phase so the largest-magnitude entry is real positive.
VectorXc fix_phase(VectorXc c) {
  Eigen::Index imax = 0;
  c.cwiseAbs().maxCoeff(&imax);
  if (std::abs(c[imax]) > 0.0) c *= std::conj(c[imax]) / std::abs(c[imax]);
  return c;
}

}  // namespace

void transform_slots(const MatrixXc& u, int n_particles, VectorXc& psi) {
  const Eigen::Index m = u.rows();
  Eigen::Index outer = 1;
  Eigen::Index inner = psi.size() / m;
  RowMajorC tmp;
  for (int k = 0; k < n_particles; ++k) {
    if (inner == 1) {
      Eigen::Map<RowMajorC> x(psi.data(), outer, m);
      tmp.noalias() = x * u.transpose();
      x = tmp;
    } else {
      for (Eigen::Index o = 0; o < outer; ++o) {
        Eigen::Map<RowMajorC> x(psi.data() + o * m * inner, m, inner);
        tmp.noalias() = u * x;
        x = tmp;
      }
    }
    outer *= m;
    inner /= m;
  }
}

OneBodyPreconditioner::OneBodyPreconditioner(const SparseComplex& h, const ParticleSpace& space) : space_(&space) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> es{MatrixXc(h)};
  u_ = es.eigenvectors();
  const Eigen::VectorXd& eps = es.eigenvalues();
  const int n = space.n_particles();
  const double sigma = eps.head(n).sum() - 1.0;
  const Eigen::Index m = eps.size();
  inverse_denominator_.resize(space.full_size());
  for (Eigen::Index f = 0; f < space.full_size(); ++f) {
    Eigen::Index rest = f;
    double d = -sigma;
    for (int k = 0; k < n; ++k) {
      d += eps[rest % m];
      rest /= m;
    }
    inverse_denominator_[f] = 1.0 / d;
  }
}

VectorXc OneBodyPreconditioner::operator()(const VectorXc& r, double) const {
  VectorXc psi = space_->expand(r);
  transform_slots(u_.adjoint(), space_->n_particles(), psi);
  psi = (psi.array() * inverse_denominator_.array()).matrix();
  transform_slots(u_, space_->n_particles(), psi);
  return space_->gather(psi);
}

SpectrumResult ground_state(const Hamiltonian& h, double tol, const Budget& budget, const VectorXc* start) {
  if (!(tol > 0.0)) throw Error(kModule, "bad_parameters", "solver tolerance must be positive");
  const ParticleSpace space(h.grid(), h.n_particles(), budget);
  auto op = [&](const VectorXc& c, VectorXc& out) { apply_sector(h, space, c, out); };
  EigenPairs<cplx> pairs;
  if (space.sector_size() <= budget.dense_threshold) {
    pairs = sector_eigenpairs(op, space.sector_size(), 2, tol, budget, start);
  } else {
    const OneBodyPreconditioner pre(h.one_body(), space);
    pairs = sector_eigenpairs(op, space.sector_size(), 2, tol, budget, start, KrylovOptions{}, pre);
  }
  SpectrumResult r{pairs.values[0],
                   pairs.values.size() > 1 ? pairs.values[1] : std::numeric_limits<double>::infinity(),
                   0.0,
                   false,
                   WaveFunction::from_sector(space, fix_phase(pairs.vectors.col(0))),
                   {pairs.method, pairs.iterations, tol, pairs.residuals[0]}};
  r.gap = r.e1 - r.e0;
  r.degenerate = r.gap < 100.0 * tol;
  return r;
}

SpectrumResult ground_state(const Potentials& p, int n_particles, HamiltonianKind kind, double tol,
                            const Budget& budget) {
  if (kind != HamiltonianKind::full && kind != HamiltonianKind::noninteracting)
    throw Error(kModule, "bad_parameters", "ground_state takes kind full or noninteracting");
  return ground_state(Hamiltonian(p, n_particles, kind, budget), tol, budget);
}

void require_nondegenerate(const SpectrumResult& s, const char* module) {
  if (s.degenerate)
    throw Error(module, "degenerate_ground_state",
                "ground state is degenerate or nearly so (gap " + std::to_string(s.gap) + ")");
}

}  // namespace cdft

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdft/eigensolver.hpp"
#include "cdft/lattice.hpp"

namespace cdft {

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

/// Size limits for many-body work.
struct Budget {
  Eigen::Index max_full_dimension = Eigen::Index{1} << 23;  // M^N
  Eigen::Index dense_threshold = 400;                       // sector size solved densely
};

/// Antisymmetric N-particle sector over a grid: sorted index tuples
/// i_1 < ... < i_N, plus maps between the sector and the full M^N tensor
/// (particle 1 is the slowest index).
class ParticleSpace {
 public:
  ParticleSpace(Grid grid, int n_particles, const Budget& budget = {});

  const Grid& grid() const noexcept { return grid_; }
  int n_particles() const noexcept { return n_; }
  Eigen::Index full_size() const noexcept { return full_size_; }
  Eigen::Index sector_size() const noexcept { return static_cast<Eigen::Index>(tuples_.size()); }
  /// Cell volume of the N-particle grid, h^{dN}.
  double volume_element() const noexcept { return volume_element_; }

  const std::vector<int>& tuple(Eigen::Index s) const { return tuples_[static_cast<std::size_t>(s)]; }
  Eigen::Index full_index(const std::vector<int>& sites) const;

  /// Sector coefficients c -> full tensor with psi(sigma I) = sgn(sigma) c_I / sqrt(N!).
  VectorXc expand(const VectorXc& c) const;
  /// Adjoint of expand restricted to antisymmetric tensors: c_I = sqrt(N!) psi(I).
  VectorXc gather(const VectorXc& psi) const;
  /// Orthogonal projection onto the antisymmetric subspace.
  VectorXc antisymmetrize(const VectorXc& psi) const;

 private:
  Grid grid_;
  int n_;
  Eigen::Index full_size_;
  double volume_element_;
  double sqrt_factorial_;
  std::vector<std::vector<int>> tuples_;
  std::vector<Eigen::Index> sorted_full_;          // full index of each sorted tuple
  std::vector<std::int32_t> sector_of_;            // full -> sector, -1 when an index repeats
  std::vector<std::int8_t> sign_of_;               // full -> permutation sign
};

/// Antisymmetric N-particle amplitudes on grid^N, normalized so that
/// sum |psi|^2 h^{dN} = 1. Stored as the full tensor.
class WaveFunction {
 public:
  /// Takes amplitudes (any normalization), antisymmetrizes and normalizes.
  WaveFunction(Grid grid, int n_particles, VectorXc amplitudes);
  /// From normalized sector coefficients in the Euclidean metric.
  static WaveFunction from_sector(const ParticleSpace& space, const VectorXc& c);

  const Grid& grid() const noexcept { return grid_; }
  int n_particles() const noexcept { return n_; }
  const VectorXc& amplitudes() const noexcept { return amps_; }
  cplx amplitude(const std::vector<int>& sites) const;
  /// Sector coefficients with unit Euclidean norm.
  VectorXc sector(const ParticleSpace& space) const;
  double norm_squared() const;
  cplx overlap(const WaveFunction& other) const;

 private:
  Grid grid_;
  int n_;
  VectorXc amps_;
};

/// Slater determinant of N orthonormal orbitals.
class Determinant {
 public:
  const std::vector<ComplexField>& orbitals() const noexcept { return orbitals_; }
  int n_particles() const noexcept { return static_cast<int>(orbitals_.size()); }
  const Grid& grid() const { return orbitals_.front().grid(); }
  /// Orbital coefficients as an M x N matrix (physical normalization).
  MatrixXc matrix() const;
  const WaveFunction& wavefunction() const { return *amplitude_cache_; }
  /// Sum of the one-particle stencil kinetic energies.
  double kinetic() const;

 private:
  friend Determinant build_determinant(const std::vector<ComplexField>&, const Budget&);
  friend Determinant determinant_from_matrix(const Grid&, const MatrixXc&, const Budget&);
  std::vector<ComplexField> orbitals_;
  std::optional<WaveFunction> amplitude_cache_;
};

/// Symmetric (Loewdin) orthonormalization when the orbitals are within 1e-6
/// of orthonormal; throws not_orthonormalizable otherwise or when the Gram
/// matrix is singular.
Determinant build_determinant(const std::vector<ComplexField>& orbitals, const Budget& budget = {});
Determinant determinant_from_matrix(const Grid& grid, const MatrixXc& orbitals, const Budget& budget = {});

/// Scalar potential v, vector potential A and the interaction softening eta.
struct Potentials {
  ScalarField v;
  RealVectorField a;
  double eta;

  Potentials(ScalarField v, RealVectorField a, double eta);
  static Potentials zero(const Grid& grid, double eta);
  static double default_eta(const Grid& grid) { return 0.5 * grid.spacing(0); }
  const Grid& grid() const { return v.grid(); }
  /// B = curl A; empty in one dimension.
  std::optional<Curl> b() const;
};

/// Softened Coulomb kernel 1/sqrt(r^2 + eta^2).
double soft_coulomb(double r2, double eta);
/// Pair-kernel matrix W(x_i - x_j) over grid points.
Eigen::MatrixXd pair_kernel(const Grid& grid, double eta);

enum class HamiltonianKind { full, noninteracting, h0, kinetic };
std::string to_string(HamiltonianKind k);

/// The one-body magnetic Schroedinger operator -Laplacian + v + |A|^2 - i (D A + A D).
SparseComplex one_body_operator(const ScalarField& v, const RealVectorField& a);
/// Paramagnetic coupling operator -(i/2) sum_l (D_l a_l + a_l D_l); its
/// expectation in f is sum a . j_f h^d.
SparseComplex current_operator(const RealVectorField& a);

/// Matrix-free N-particle Hamiltonian acting on full tensors.
class Hamiltonian {
 public:
  Hamiltonian(const Potentials& p, int n_particles, HamiltonianKind kind, const Budget& budget = {});
  /// General form: one-body operator per particle plus optional pair interaction.
  Hamiltonian(const Grid& grid, int n_particles, SparseComplex one_body, std::optional<double> eta,
              const Budget& budget = {});

  const Grid& grid() const noexcept { return grid_; }
  int n_particles() const noexcept { return n_; }
  const SparseComplex& one_body() const noexcept { return one_body_; }
  bool interacting() const noexcept { return interaction_.size() > 0; }
  /// Interaction energy on each full-tensor entry (empty if non-interacting).
  const Eigen::VectorXd& interaction_diagonal() const noexcept { return interaction_; }

  void apply(const VectorXc& in, VectorXc& out) const;
  VectorXc apply(const VectorXc& in) const {
    VectorXc out;
    apply(in, out);
    return out;
  }

 private:
  Grid grid_;
  int n_;
  Eigen::Index full_size_;
  SparseComplex one_body_;
  Eigen::VectorXd interaction_;
};

/// Applies a one-body operator to every particle slot of a full tensor.
void apply_one_body(const SparseComplex& h, int n_particles, const VectorXc& in, VectorXc& out);

/// Pointwise-summed interaction energy diagonal sum_{k<l} W(x_k - x_l).
Eigen::VectorXd interaction_diagonal(const Grid& grid, int n_particles, double eta, const Budget& budget = {});

/// H psi for the chosen kind; shares psi's normalization.
ComplexField apply_hamiltonian_one(const Potentials& p, const ComplexField& f, HamiltonianKind kind);
VectorXc apply_hamiltonian(const Potentials& p, const WaveFunction& psi, HamiltonianKind kind);

/// <phi, H psi> with the h^{dN} measure.
cplx expectation(const Hamiltonian& h, const WaveFunction& phi, const WaveFunction& psi);

struct EnergyParts {
  double total = 0.0;
  double h0_part = 0.0;
  double current_coupling = 0.0;
  double density_coupling = 0.0;
};

EnergyParts energy(const Potentials& p, const WaveFunction& psi);

struct DensityPairFields {
  ScalarField rho;
  RealVectorField jp;
};

/// One-body density and paramagnetic current of a wavefunction.
DensityPairFields density_pair_of(const WaveFunction& psi);
/// Same for a determinant, evaluated from its orbitals.
DensityPairFields density_pair_of(const Determinant& det);
/// Density and current of orbitals given as an M x N coefficient matrix.
DensityPairFields orbital_density_pair(const Grid& grid, const MatrixXc& orbitals);

struct SolverInfo {
  std::string kind;
  int iterations = 0;
  double tol = 0.0;
  double residual = 0.0;
};

struct SpectrumResult {
  double e0 = 0.0;
  double e1 = 0.0;
  double gap = 0.0;
  bool degenerate = false;
  WaveFunction ground_state;
  SolverInfo solver;
};

/// (sum_k h_k - sigma)^{-1} on the antisymmetric sector, applied in the
/// one-body eigenbasis, with sigma one unit below the lowest
/// non-interacting level. Preconditions sector eigensolves.
class OneBodyPreconditioner {
 public:
  OneBodyPreconditioner(const SparseComplex& h, const ParticleSpace& space);
  VectorXc operator()(const VectorXc& r, double theta) const;

 private:
  const ParticleSpace* space_;
  MatrixXc u_;
  Eigen::VectorXd inverse_denominator_;
};

/// Replaces every particle slot of a full tensor by `u` acting on it.
void transform_slots(const MatrixXc& u, int n_particles, VectorXc& psi);

/// Lowest k eigenpairs of a sector operator given by `apply` (sector in, sector out).
template <typename Apply, typename Precondition = IdentityPreconditioner>
EigenPairs<cplx> sector_eigenpairs(Apply&& apply, Eigen::Index dim, int k, double tol, const Budget& budget,
                                   const VectorXc* start = nullptr, const KrylovOptions& opts = {},
                                   Precondition&& precondition = {}) {
  if (dim <= budget.dense_threshold) {
    MatrixXc h(dim, dim);
    VectorXc e = VectorXc::Zero(dim), out;
    for (Eigen::Index s = 0; s < dim; ++s) {
      e[s] = 1.0;
      apply(e, out);
      h.col(s) = out;
      e[s] = 0.0;
    }
    return lowest_eigenpairs_dense(h, k);
  }
  return lowest_eigenpairs_krylov<cplx>(apply, dim, k, tol, opts, start, precondition);
}

/// Sector-restricted operator application through the full tensor.
void apply_sector(const Hamiltonian& h, const ParticleSpace& space, const VectorXc& c, VectorXc& out);

SpectrumResult ground_state(const Potentials& p, int n_particles, HamiltonianKind kind, double tol,
                            const Budget& budget = {});
SpectrumResult ground_state(const Hamiltonian& h, double tol, const Budget& budget = {},
                            const VectorXc* start = nullptr);

/// Throws degenerate_ground_state for flagged results.
void require_nondegenerate(const SpectrumResult& s, const char* module);

}  // namespace cdft

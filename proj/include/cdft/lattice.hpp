// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cdft/error.hpp"

namespace cdft {

using cplx = std::complex<double>;
using SparseReal = Eigen::SparseMatrix<double>;
using SparseComplex = Eigen::SparseMatrix<cplx>;

enum class Boundary { dirichlet, periodic };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& name);

using Index3 = std::array<int, 3>;
using Point3 = std::array<double, 3>;

/// Uniform rectangular lattice in 1, 2 or 3 dimensions.
///
/// Point i along axis l sits at origin[l] + i * spacing[l]. For Dirichlet
/// grids the field is taken to vanish at the (virtual) points -1 and
/// shape[l]; for periodic grids indices wrap.
class Grid {
 public:
  Grid(int dim, Index3 shape, Point3 spacing, Boundary boundary, Point3 origin = {0.0, 0.0, 0.0});

  /// Dirichlet box [lower, upper] with `points` interior points per axis; the
  /// box faces are the zero-extension sites.
  static Grid dirichlet(const std::vector<double>& lower, const std::vector<double>& upper,
                        const std::vector<int>& points);
  /// Periodic box [lower, upper) with `points` sites per axis.
  static Grid periodic(const std::vector<double>& lower, const std::vector<double>& upper,
                       const std::vector<int>& points);
  /// Box with the point count chosen so the spacing is as close to `h` as possible.
  static Grid with_spacing(const std::vector<double>& lower, const std::vector<double>& upper, double h,
                           Boundary boundary);

  int dim() const noexcept { return dim_; }
  Eigen::Index size() const noexcept { return size_; }
  int shape(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
  double origin(int axis) const { return origin_[static_cast<std::size_t>(axis)]; }
  const Index3& shape() const noexcept { return shape_; }
  const Point3& spacing() const noexcept { return spacing_; }
  const Point3& origin() const noexcept { return origin_; }
  Boundary boundary() const noexcept { return boundary_; }
  double cell_volume() const noexcept { return cell_volume_; }
  /// Periodic length M*h, or Dirichlet length (M+1)*h.
  double length(int axis) const;

  Index3 multi_index(Eigen::Index linear) const;
  Eigen::Index linear_index(const Index3& multi) const;
  /// Neighbour of `linear` shifted by `step` along `axis`; -1 if it falls
  /// outside a Dirichlet box.
  Eigen::Index neighbor(Eigen::Index linear, int axis, int step) const;
  double coordinate(Eigen::Index linear, int axis) const;
  Point3 coordinates(Eigen::Index linear) const;
  /// Displacement x_i - x_j along `axis`, minimum image on periodic grids.
  double displacement(Eigen::Index i, Eigen::Index j, int axis) const;

  bool operator==(const Grid& other) const;
  bool operator!=(const Grid& other) const { return !(*this == other); }

 private:
  int dim_;
  Index3 shape_;
  Point3 spacing_;
  Point3 origin_;
  Boundary boundary_;
  Eigen::Index size_;
  double cell_volume_;
};

void require_same_grid(const Grid& a, const Grid& b, const char* module);

/// Scalar or complex values, one per grid point.
template <typename Scalar>
class Field {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit Field(Grid grid) : grid_(std::move(grid)), values_(Vector::Zero(grid_.size())) {}
  Field(Grid grid, Vector values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw Error("lattice", "shape_mismatch", "field value count differs from grid size");
  }

  template <typename Fn>
  static Field from_function(const Grid& grid, Fn&& fn) {
    Field f(grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) f.values_[i] = fn(grid.coordinates(i));
    return f;
  }

  const Grid& grid() const noexcept { return grid_; }
  Vector& values() noexcept { return values_; }
  const Vector& values() const noexcept { return values_; }
  Scalar& operator[](Eigen::Index i) { return values_[i]; }
  const Scalar& operator[](Eigen::Index i) const { return values_[i]; }

 private:
  Grid grid_;
  Vector values_;
};

/// d components per grid point, stored as an M x d matrix.
template <typename Scalar>
class VectorField {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit VectorField(Grid grid)
      : grid_(std::move(grid)), values_(Matrix::Zero(grid_.size(), grid_.dim())) {}
  VectorField(Grid grid, Matrix values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.rows() != grid_.size() || values_.cols() != grid_.dim())
      throw Error("lattice", "shape_mismatch", "vector field must be M x d");
  }

  template <typename Fn>
  static VectorField from_function(const Grid& grid, Fn&& fn) {
    VectorField f(grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const auto value = fn(grid.coordinates(i));
      for (int l = 0; l < grid.dim(); ++l) f.values_(i, l) = value[static_cast<std::size_t>(l)];
    }
    return f;
  }

  const Grid& grid() const noexcept { return grid_; }
  Matrix& values() noexcept { return values_; }
  const Matrix& values() const noexcept { return values_; }
  auto component(int axis) { return values_.col(axis); }
  auto component(int axis) const { return values_.col(axis); }
  int components() const noexcept { return static_cast<int>(values_.cols()); }

 private:
  Grid grid_;
  Matrix values_;
};

using ScalarField = Field<double>;
using ComplexField = Field<cplx>;
using RealVectorField = VectorField<double>;
using ComplexVectorField = VectorField<cplx>;

/// Central difference (f(x+h) - f(x-h)) / 2h along `axis`, zero-extended or
/// wrapped per the grid boundary. Antisymmetric as a matrix.
SparseReal difference_matrix(const Grid& grid, int axis);
/// Standard (2d+1)-point Laplacian stencil.
SparseReal laplacian_matrix(const Grid& grid);

template <typename Scalar>
VectorField<Scalar> gradient(const Field<Scalar>& f) {
  const Grid& g = f.grid();
  VectorField<Scalar> out(g);
  for (int l = 0; l < g.dim(); ++l) out.component(l) = difference_matrix(g, l) * f.values();
  return out;
}

template <typename Scalar>
Field<Scalar> laplacian(const Field<Scalar>& f) {
  return Field<Scalar>(f.grid(), laplacian_matrix(f.grid()) * f.values());
}

template <typename Scalar>
Field<Scalar> divergence(const VectorField<Scalar>& u) {
  const Grid& g = u.grid();
  Field<Scalar> out(g);
  for (int l = 0; l < g.dim(); ++l) out.values() += difference_matrix(g, l) * u.component(l);
  return out;
}

/// ScalarField for d = 2, VectorField for d = 3; throws dimension_unsupported for d = 1.
using Curl = std::variant<ScalarField, RealVectorField>;
Curl curl(const RealVectorField& u);
double max_abs(const Curl& c);

double integrate(const ScalarField& f);

template <typename Scalar>
Scalar inner(const Field<Scalar>& f, const Field<Scalar>& g) {
  require_same_grid(f.grid(), g.grid(), "lattice");
  // Eigen's dot conjugates the left operand.
  return f.values().dot(g.values()) * f.grid().cell_volume();
}

struct Norms {
  double l1 = 0.0;
  double l2 = 0.0;
  double h1 = 0.0;
};

template <typename Scalar>
Norms norms(const Field<Scalar>& f) {
  const double dv = f.grid().cell_volume();
  Norms n;
  n.l1 = f.values().cwiseAbs().sum() * dv;
  const double l2sq = f.values().squaredNorm() * dv;
  const auto grad = gradient(f);
  const double grad_sq = grad.values().squaredNorm() * dv;
  n.l2 = std::sqrt(l2sq);
  n.h1 = std::sqrt(l2sq + grad_sq);
  return n;
}

/// Pointwise |u|^2 of a real vector field.
ScalarField squared_magnitude(const RealVectorField& u);

}  // namespace cdft

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/lattice.hpp"

#include <cmath>
#include <limits>

namespace cdft {

std::string to_string(Boundary b) { return b == Boundary::dirichlet ? "dirichlet" : "periodic"; }

Boundary boundary_from_string(const std::string& name) {
  if (name == "dirichlet") return Boundary::dirichlet;
  if (name == "periodic") return Boundary::periodic;
  throw Error("lattice", "bad_parameters", "unknown boundary '" + name + "'");
}

Grid::Grid(int dim, Index3 shape, Point3 spacing, Boundary boundary, Point3 origin)
    : dim_(dim), shape_(shape), spacing_(spacing), origin_(origin), boundary_(boundary) {
  if (dim < 1 || dim > 3) throw Error("lattice", "bad_parameters", "grid dimension must be 1, 2 or 3");
  size_ = 1;
  cell_volume_ = 1.0;
  for (int l = 0; l < 3; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    if (l >= dim) {
      shape_[ul] = 1;
      spacing_[ul] = 1.0;
      origin_[ul] = 0.0;
      continue;
    }
    if (shape_[ul] < 3) throw Error("lattice", "bad_parameters", "every axis needs at least 3 points");
    if (!(spacing_[ul] > 0.0)) throw Error("lattice", "bad_parameters", "spacings must be positive");
    if (size_ > std::numeric_limits<Eigen::Index>::max() / shape_[ul])
      throw Error("lattice", "bad_parameters", "grid too large");
    size_ *= shape_[ul];
    cell_volume_ *= spacing_[ul];
  }
}

namespace {

void check_box(const std::vector<double>& lower, const std::vector<double>& upper, std::size_t n) {
  if (lower.empty() || lower.size() > 3 || lower.size() != upper.size() || (n != 0 && n != lower.size()))
    throw Error("lattice", "bad_parameters", "box bounds must have matching dimension 1..3");
  for (std::size_t l = 0; l < lower.size(); ++l)
    if (!(upper[l] > lower[l])) throw Error("lattice", "bad_parameters", "box upper must exceed lower");
}

}  // namespace

Grid Grid::dirichlet(const std::vector<double>& lower, const std::vector<double>& upper,
                     const std::vector<int>& points) {
  check_box(lower, upper, points.size());
  Index3 shape{1, 1, 1};
  Point3 h{1, 1, 1}, o{0, 0, 0};
  for (std::size_t l = 0; l < lower.size(); ++l) {
    shape[l] = points[l];
    h[l] = (upper[l] - lower[l]) / (points[l] + 1);
    o[l] = lower[l] + h[l];
  }
  return Grid(static_cast<int>(lower.size()), shape, h, Boundary::dirichlet, o);
}

Grid Grid::periodic(const std::vector<double>& lower, const std::vector<double>& upper,
                    const std::vector<int>& points) {
  check_box(lower, upper, points.size());
  Index3 shape{1, 1, 1};
  Point3 h{1, 1, 1}, o{0, 0, 0};
  for (std::size_t l = 0; l < lower.size(); ++l) {
    shape[l] = points[l];
    h[l] = (upper[l] - lower[l]) / points[l];
    o[l] = lower[l];
  }
  return Grid(static_cast<int>(lower.size()), shape, h, Boundary::periodic, o);
}

Grid Grid::with_spacing(const std::vector<double>& lower, const std::vector<double>& upper, double h,
                        Boundary boundary) {
  check_box(lower, upper, 0);
  if (!(h > 0.0)) throw Error("lattice", "bad_parameters", "spacing must be positive");
  std::vector<int> points(lower.size());
  for (std::size_t l = 0; l < lower.size(); ++l) {
    const int cells = static_cast<int>(std::lround((upper[l] - lower[l]) / h));
    points[l] = boundary == Boundary::dirichlet ? cells - 1 : cells;
  }
  return boundary == Boundary::dirichlet ? dirichlet(lower, upper, points) : periodic(lower, upper, points);
}

double Grid::length(int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  return boundary_ == Boundary::periodic ? shape_[a] * spacing_[a] : (shape_[a] + 1) * spacing_[a];
}

Index3 Grid::multi_index(Eigen::Index linear) const {
  Index3 m{0, 0, 0};
  for (int l = dim_ - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    m[ul] = static_cast<int>(linear % shape_[ul]);
    linear /= shape_[ul];
  }
  return m;
}

Eigen::Index Grid::linear_index(const Index3& multi) const {
  Eigen::Index idx = 0;
  for (int l = 0; l < dim_; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    idx = idx * shape_[ul] + multi[ul];
  }
  return idx;
}

Eigen::Index Grid::neighbor(Eigen::Index linear, int axis, int step) const {
  Index3 m = multi_index(linear);
  const auto a = static_cast<std::size_t>(axis);
  int j = m[a] + step;
  if (j < 0 || j >= shape_[a]) {
    if (boundary_ == Boundary::dirichlet) return -1;
    j = ((j % shape_[a]) + shape_[a]) % shape_[a];
  }
  m[a] = j;
  return linear_index(m);
}

double Grid::coordinate(Eigen::Index linear, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  return origin_[a] + multi_index(linear)[a] * spacing_[a];
}

Point3 Grid::coordinates(Eigen::Index linear) const {
  const Index3 m = multi_index(linear);
  Point3 x{0, 0, 0};
  for (std::size_t l = 0; l < static_cast<std::size_t>(dim_); ++l) x[l] = origin_[l] + m[l] * spacing_[l];
  return x;
}

double Grid::displacement(Eigen::Index i, Eigen::Index j, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  double d = (multi_index(i)[a] - multi_index(j)[a]) * spacing_[a];
  if (boundary_ == Boundary::periodic) {
    const double len = shape_[a] * spacing_[a];
    d -= len * std::round(d / len);
  }
  return d;
}

bool Grid::operator==(const Grid& other) const {
  return dim_ == other.dim_ && shape_ == other.shape_ && spacing_ == other.spacing_ &&
         origin_ == other.origin_ && boundary_ == other.boundary_;
}

void require_same_grid(const Grid& a, const Grid& b, const char* module) {
  if (a != b) throw Error(module, "grid_mismatch", "fields live on different grids");
}

SparseReal difference_matrix(const Grid& grid, int axis) {
  const Eigen::Index m = grid.size();
  const double w = 0.5 / grid.spacing(axis);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(2 * m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index up = grid.neighbor(i, axis, +1);
    const Eigen::Index dn = grid.neighbor(i, axis, -1);
    if (up >= 0) t.emplace_back(i, up, w);
    if (dn >= 0) t.emplace_back(i, dn, -w);
  }
  SparseReal d(m, m);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SparseReal laplacian_matrix(const Grid& grid) {
  const Eigen::Index m = grid.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>((2 * grid.dim() + 1) * m));
  for (Eigen::Index i = 0; i < m; ++i) {
    double diag = 0.0;
    for (int l = 0; l < grid.dim(); ++l) {
      const double w = 1.0 / (grid.spacing(l) * grid.spacing(l));
      diag -= 2.0 * w;
      const Eigen::Index up = grid.neighbor(i, l, +1);
      const Eigen::Index dn = grid.neighbor(i, l, -1);
      if (up >= 0) t.emplace_back(i, up, w);
      if (dn >= 0) t.emplace_back(i, dn, w);
    }
    t.emplace_back(i, i, diag);
  }
  SparseReal lap(m, m);
  lap.setFromTriplets(t.begin(), t.end());  // duplicates (3-point periodic rings) are summed
  return lap;
}

Curl curl(const RealVectorField& u) {
  const Grid& g = u.grid();
  if (g.dim() == 1)
    throw Error("lattice", "dimension_unsupported", "curl is undefined in one dimension");
  if (g.dim() == 2) {
    ScalarField c(g);
    c.values() = difference_matrix(g, 0) * u.component(1) - difference_matrix(g, 1) * u.component(0);
    return c;
  }
  const SparseReal d0 = difference_matrix(g, 0), d1 = difference_matrix(g, 1), d2 = difference_matrix(g, 2);
  RealVectorField c(g);
  c.component(0) = d1 * u.component(2) - d2 * u.component(1);
  c.component(1) = d2 * u.component(0) - d0 * u.component(2);
  c.component(2) = d0 * u.component(1) - d1 * u.component(0);
  return c;
}

double max_abs(const Curl& c) {
  return std::visit([](const auto& f) { return f.values().cwiseAbs().maxCoeff(); }, c);
}

double integrate(const ScalarField& f) { return f.values().sum() * f.grid().cell_volume(); }

ScalarField squared_magnitude(const RealVectorField& u) {
  return ScalarField(u.grid(), u.values().rowwise().squaredNorm());
}

}  // namespace cdft

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "cdft/field_io.hpp"
#include "cdft/lattice.hpp"
#include "doctest.h"

using namespace cdft;

namespace {

ComplexField random_complex(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ComplexField f(g);
  for (Eigen::Index i = 0; i < g.size(); ++i) f[i] = cplx(n(rng), n(rng));
  return f;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cdft_lattice_" + name)).string();
}

}  // namespace

TEST_CASE("gradient of the identity is one away from the boundary") {
  const Grid g = Grid::dirichlet({0.0}, {2.0}, {19});
  CHECK(g.spacing(0) == doctest::Approx(0.1));
  const auto f = ScalarField::from_function(g, [](const Point3& x) { return x[0]; });
  const auto d = gradient(f);
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) CHECK(d.values()(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant field has zero gradient inside a Dirichlet box") {
  const Grid g = Grid::dirichlet({0.0}, {1.0}, {9});
  ScalarField f(g, Eigen::VectorXd::Constant(g.size(), 3.0));
  const auto d = gradient(f);
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) CHECK(d.values()(i, 0) == 0.0);
  CHECK(d.values()(0, 0) != 0.0);
}

TEST_CASE("plane waves diagonalize the periodic stencils") {
  const int m = 32;
  const Grid g = Grid::periodic({0.0}, {2.0 * std::numbers::pi}, {m});
  const double h = g.spacing(0);
  for (int n : {1, 3, 7}) {
    const double k = n;
    const auto f = ComplexField::from_function(g, [k](const Point3& x) { return std::exp(cplx(0, k * x[0])); });
    const auto d = gradient(f);
    const auto l = laplacian(f);
    const cplx grad_symbol(0.0, std::sin(k * h) / h);
    const double lap_symbol = -(2.0 - 2.0 * std::cos(k * h)) / (h * h);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      CHECK(std::abs(d.values()(i, 0) - grad_symbol * f[i]) < 1e-12);
      CHECK(std::abs(l[i] - lap_symbol * f[i]) < 1e-10);
    }
  }
}

TEST_CASE("laplacian stencil is exact on quadratics") {
  const Grid g = Grid::dirichlet({-1.0}, {1.0}, {39});
  const auto f = ScalarField::from_function(g, [](const Point3& x) { return x[0] * x[0]; });
  const auto l = laplacian(f);
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) CHECK(l[i] == doctest::Approx(2.0).epsilon(1e-9));
  const Grid p = Grid::periodic({0.0}, {1.0}, {10});
  const auto c = laplacian(ScalarField(p, Eigen::VectorXd::Constant(10, 2.5)));
  CHECK(c.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("curl") {
  SUBCASE("rotation field has curl two") {
    const Grid g = Grid::dirichlet({-1.0, -1.0}, {1.0, 1.0}, {11, 13});
    const auto u = RealVectorField::from_function(g, [](const Point3& x) { return Point3{-x[1], x[0], 0.0}; });
    const auto c = std::get<ScalarField>(curl(u));
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const Index3 m = g.multi_index(i);
      if (m[0] == 0 || m[1] == 0 || m[0] == g.shape(0) - 1 || m[1] == g.shape(1) - 1) continue;
      CHECK(c[i] == doctest::Approx(2.0).epsilon(1e-12));
    }
  }
  SUBCASE("curl of a gradient vanishes on periodic grids") {
    std::mt19937_64 rng(7);
    const Grid g2 = Grid::periodic({0.0, 0.0}, {1.0, 2.0}, {8, 9});
    ScalarField f2(g2, random_complex(g2, rng).values().real());
    CHECK(max_abs(curl(gradient(f2))) < 1e-12 * f2.values().cwiseAbs().maxCoeff() / g2.cell_volume());
    const Grid g3 = Grid::periodic({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {5, 6, 7});
    ScalarField f3(g3, random_complex(g3, rng).values().real());
    const auto c3 = curl(gradient(f3));
    REQUIRE(std::holds_alternative<RealVectorField>(c3));
    CHECK(max_abs(c3) < 1e-10);
  }
  SUBCASE("one dimension is rejected") {
    const Grid g = Grid::periodic({0.0}, {1.0}, {8});
    try {
      curl(RealVectorField(g));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == "dimension_unsupported");
    }
  }
}

TEST_CASE("summation by parts holds for both boundaries") {
  std::mt19937_64 rng(11);
  for (Boundary b : {Boundary::dirichlet, Boundary::periodic}) {
    const Grid g = b == Boundary::dirichlet ? Grid::dirichlet({0.0, -1.0}, {1.0, 1.0}, {7, 6})
                                            : Grid::periodic({0.0, -1.0}, {1.0, 1.0}, {7, 6});
    const auto f = random_complex(g, rng);
    const auto u = random_complex(g, rng);
    for (int l = 0; l < g.dim(); ++l) {
      const SparseReal d = difference_matrix(g, l);
      const ComplexField du(g, d * u.values());
      const ComplexField df(g, d * f.values());
      CHECK(std::abs(inner(f, du) + inner(df, u)) < 1e-12 * (1.0 + std::abs(inner(f, du))));
    }
  }
}

TEST_CASE("quadrature") {
  const Grid g = Grid::periodic({0.0}, {1.0}, {10});
  CHECK(integrate(ScalarField(g, Eigen::VectorXd::Ones(10))) == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937_64 rng(3);
  const Grid g2 = Grid::dirichlet({0.0, 0.0}, {1.0, 1.0}, {6, 5});
  const auto f = random_complex(g2, rng);
  const cplx ff = inner(f, f);
  CHECK(std::abs(ff.imag()) == 0.0);
  CHECK(ff.real() == doctest::Approx(std::pow(norms(f).l2, 2)).epsilon(1e-14));

  const ScalarField a(g2, f.values().real());
  const ScalarField b(g2, f.values().real().array().abs().matrix() + Eigen::VectorXd::Constant(g2.size(), 0.1));
  CHECK(integrate(a) <= integrate(b));
  const ScalarField ab(g2, 2.0 * a.values() - 3.0 * b.values());
  CHECK(integrate(ab) == doctest::Approx(2.0 * integrate(a) - 3.0 * integrate(b)).epsilon(1e-13));

  const Grid other = Grid::dirichlet({0.0, 0.0}, {1.0, 1.0}, {6, 6});
  CHECK_THROWS_AS(inner(f, ComplexField(other)), Error);
}

TEST_CASE("Gaussian square-root density h1 norm") {
  // sqrt(rho) = pi^{-1/4} exp(-x^2/2): ||f||^2 = 1, ||f'||^2 = 1/2. Central
  // differences shift ||Df||^2 by -h^2/3 * ||f''||^2 = -h^2/4 at leading order.
  for (double h : {0.02, 0.01}) {
    const Grid g = Grid::with_spacing({-8.0}, {8.0}, h, Boundary::dirichlet);
    const auto f = ScalarField::from_function(
        g, [](const Point3& x) { return std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x[0] * x[0]); });
    const Norms n = norms(f);
    CHECK(n.l2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(n.h1 * n.h1 - (1.5 - h * h / 4.0)) < 1e-6);
  }
}

TEST_CASE("field CSV round trip") {
  std::mt19937_64 rng(5);
  const Grid g = Grid::dirichlet({-1.0, 0.0}, {1.0, 2.0}, {4, 5});
  const auto c = random_complex(g, rng);
  const ScalarField s(g, c.values().real() * 1e-7);
  RealVectorField u(g);
  u.component(0) = c.values().real();
  u.component(1) = c.values().imag() * 3.3e5;

  const auto ps = temp_path("s.csv"), pc = temp_path("c.csv"), pu = temp_path("u.csv");
  io::save_field(s, ps);
  io::save_field(c, pc);
  io::save_field(u, pu);
  CHECK(io::load_scalar_field(ps, g).values() == s.values());
  CHECK(io::load_complex_field(pc, g).values() == c.values());
  CHECK(io::load_vector_field(pu, g).values() == u.values());

  const Grid smaller = Grid::dirichlet({-1.0, 0.0}, {1.0, 2.0}, {4, 4});
  try {
    io::load_scalar_field(ps, smaller);
    FAIL("expected shape_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == "shape_mismatch");
  }

  {
    std::ofstream bad(pc);
    bad << "i0,i1,re,im\n0,0,1.0,2.0\n0,1,1.0\n";
  }
  try {
    io::load_complex_field(pc, g);
    FAIL("expected parse_error");
  } catch (const Error& e) {
    CHECK(e.code() == "parse_error");
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  std::filesystem::remove(ps);
  std::filesystem::remove(pc);
  std::filesystem::remove(pu);
}

// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/vrep.hpp"

#include <cmath>
#include <limits>

#include "cdft/parallel.hpp"

namespace cdft {

namespace {

const char* kModule = "vrep";

}  // namespace

VrepReport invert_potential(const ScalarField& rho, double e, const VrepOptions& opts) {
  const Grid& g = rho.grid();
  const double total = integrate(rho);
  if (std::abs(total - 1.0) > opts.norm_tol)
    throw Error(kModule, "not_normalized", "density integrates to " + format_number(total));
  const double min_rho = rho.values().minCoeff();
  if (!(min_rho > opts.floor))
    throw Error(kModule, "density_vanishes",
                "min rho = " + format_number(min_rho) + " is not above the floor " + format_number(opts.floor));
  const ScalarField root(g, rho.values().cwiseSqrt());
  VrepReport r{laplacian(root), e, ScalarField(g)};
  r.v.values() = r.phi0.values().cwiseQuotient(root.values()).array() + e;
  r.ratio_bound = (r.v.values().array() - e).maxCoeff();
  r.lap_l2 = norms(r.phi0).l2;
  r.inv_loc_integrable = rho.values().cwiseInverse().sum() * g.cell_volume();
  r.positivity_ok = true;
  const Eigen::VectorXd res =
      -(laplacian_matrix(g) * root.values()) + r.v.values().cwiseProduct(root.values()) - e * root.values();
  r.eigen_residual = std::sqrt(res.squaredNorm() * g.cell_volume());
  return r;
}

VrepReport vrep_check(const ScalarField& rho, const VrepOptions& opts) {
  const Grid& g = rho.grid();
  VrepReport r = invert_potential(rho, 0.0, opts);
  const double e = -r.v.values().minCoeff();
  r.v.values().array() += e;
  r.e = e;
  const Potentials p(r.v, RealVectorField(g), 0.0);
  const SpectrumResult s = ground_state(p, 1, HamiltonianKind::noninteracting, opts.eigen_tol);
  require_nondegenerate(s, kModule);
  const WaveFunction root(g, 1, rho.values().cwiseSqrt().cast<cplx>());
  r.overlap = std::abs(s.ground_state.overlap(root));
  r.ground_state_confirmed = r.overlap >= 1.0 - opts.overlap_tol;
  r.verdict = r.positivity_ok && std::isfinite(r.lap_l2) && std::isfinite(r.ratio_bound) &&
              std::isfinite(r.inv_loc_integrable) && r.ground_state_confirmed;
  return r;
}

double englisch_profile(const CounterexampleSpec& spec, double x, double half_width) {
  const double p = spec.eps + 0.5;
  const double cut = spec.cutoff > 0.0 ? spec.cutoff : 0.25 * half_width;
  auto core = [&](double t) { return std::pow(spec.a + spec.b * std::pow(t, p), 2); };
  const double t = std::abs(x);
  if (t <= cut) return core(t);
  // C^1 continuation f(R) exp(alpha s - beta s^2), s = |x| - R, reaching
  // exp(-30) relative size at the box face.
  const double f = core(cut);
  const double df = 2.0 * (spec.a + spec.b * std::pow(cut, p)) * spec.b * p * std::pow(cut, p - 1.0);
  const double alpha = df / f;
  const double span = half_width - cut;
  const double beta = (alpha * span + 30.0) / (span * span);
  const double s = t - cut;
  return f * std::exp(alpha * s - beta * s * s);
}

ScalarField englisch_density(const CounterexampleSpec& spec, const Grid& grid) {
  if (!(spec.eps > 0.0 && spec.eps < 0.5))
    throw Error(kModule, "bad_epsilon", "eps = " + format_number(spec.eps) + " is outside (0, 1/2)");
  if (spec.a == 0.0 || spec.b == 0.0 || (spec.a > 0.0) != (spec.b > 0.0))
    throw Error(kModule, "bad_parameters", "a and b must be nonzero with the same sign");
  const double lo = grid.origin(0) - (grid.boundary() == Boundary::dirichlet ? grid.spacing(0) : 0.0);
  const double half_width = std::max(std::abs(lo), std::abs(lo + grid.length(0)));
  ScalarField rho(grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Point3 x = grid.coordinates(i);
    double value = englisch_profile(spec, x[0], half_width);
    if (grid.dim() > 1) {
      if (spec.transverse) {
        value *= spec.transverse(x);
      } else {
        double r2 = 0.0;
        for (int l = 1; l < grid.dim(); ++l) r2 += x[static_cast<std::size_t>(l)] * x[static_cast<std::size_t>(l)];
        value *= std::exp(-r2);
      }
    }
    rho[i] = value;
  }
  const double total = integrate(rho);
  if (!(total > 0.0)) throw Error(kModule, "bad_parameters", "density has zero mass on the grid");
  rho.values() /= total;
  return rho;
}

Grid centred_grid(int dim, double half_width, double h) {
  int m = static_cast<int>(std::lround(2.0 * half_width / h)) - 1;
  if (m % 2 == 0) ++m;
  return Grid::dirichlet(std::vector<double>(static_cast<std::size_t>(dim), -half_width),
                         std::vector<double>(static_cast<std::size_t>(dim), half_width),
                         std::vector<int>(static_cast<std::size_t>(dim), m));
}

RefinementTable refinement_scan(const std::function<ScalarField(const Grid&)>& density, int dim, double half_width,
                                const std::vector<double>& h_sequence) {
  if (h_sequence.size() < 4) throw Error(kModule, "bad_parameters", "refinement scan needs at least 4 spacings");
  for (std::size_t i = 1; i < h_sequence.size(); ++i)
    if (!(h_sequence[i] < h_sequence[i - 1]))
      throw Error(kModule, "bad_parameters", "spacings must be strictly decreasing");
  RefinementTable t;
  t.rows.resize(h_sequence.size());
  parallel_for(static_cast<int>(h_sequence.size()), [&](int k) {
    const Grid g = centred_grid(dim, half_width, h_sequence[static_cast<std::size_t>(k)]);
    const ScalarField rho = density(g);
    const Eigen::VectorXd root = rho.values().cwiseSqrt();
    const Eigen::VectorXd lap = laplacian_matrix(g) * root;
    RefinementRow& row = t.rows[static_cast<std::size_t>(k)];
    row.h = g.spacing(0);
    row.lap_l2_sq = lap.squaredNorm() * g.cell_volume();
    // v rho = (Lap sqrt rho) sqrt rho
    row.coupling = lap.dot(root) * g.cell_volume();
  });
  t.lap_growing = t.coupling_decreasing = true;
  t.rows[0].slope_estimate = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    const auto& prev = t.rows[k - 1];
    auto& row = t.rows[k];
    row.slope_estimate = std::log2(row.lap_l2_sq / prev.lap_l2_sq) / std::log2(prev.h / row.h);
    t.lap_growing = t.lap_growing && row.lap_l2_sq > prev.lap_l2_sq;
    t.coupling_decreasing = t.coupling_decreasing && row.coupling < prev.coupling;
  }
  return t;
}

RefinementTable refinement_scan(const CounterexampleSpec& spec, int dim, double half_width,
                                const std::vector<double>& h_sequence) {
  return refinement_scan([&](const Grid& g) { return englisch_density(spec, g); }, dim, half_width, h_sequence);
}

}  // namespace cdft

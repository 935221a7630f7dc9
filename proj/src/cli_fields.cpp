// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <random>

#include "cdft/cli.hpp"
#include "cdft/field_io.hpp"
#include "cdft/vrep.hpp"

namespace cdft::cli {

namespace {

const char* kModule = "cli";

[[noreturn]] void bad(const std::string& family, const std::string& what) {
  throw Error(kModule, "bad_parameters", family + ": " + what);
}

void check_keys(const json& spec, const std::string& family, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : spec.items()) {
    if (key == "family") continue;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad(family, "unknown parameter '" + key + "'");
  }
}

double number(const json& spec, const std::string& family, const char* key, double fallback) {
  if (!spec.contains(key)) return fallback;
  const json& v = spec.at(key);
  if (!v.is_number()) bad(family, std::string(key) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(family, std::string(key) + " must be finite");
  return x;
}

Point3 point(const json& spec, const std::string& family, const char* key, const Grid& g) {
  Point3 p{0.0, 0.0, 0.0};
  if (!spec.contains(key)) return p;
  const json& v = spec.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != g.dim()) bad(family, std::string(key) + " needs one entry per axis");
  for (int l = 0; l < g.dim(); ++l) {
    if (!v[static_cast<std::size_t>(l)].is_number()) bad(family, std::string(key) + " must be numeric");
    p[static_cast<std::size_t>(l)] = v[static_cast<std::size_t>(l)].get<double>();
  }
  return p;
}

double distance_sq(const Point3& x, const Point3& c, int dim) {
  double r2 = 0.0;
  for (int l = 0; l < dim; ++l) r2 += (x[static_cast<std::size_t>(l)] - c[static_cast<std::size_t>(l)]) *
                                      (x[static_cast<std::size_t>(l)] - c[static_cast<std::size_t>(l)]);
  return r2;
}

std::string resolve(const json& spec, const std::string& family, const std::string& base_dir) {
  if (!spec.contains("path") || !spec.at("path").is_string()) bad(family, "path must be a string");
  std::filesystem::path p = spec.at("path").get<std::string>();
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  if (!std::filesystem::exists(p)) throw Error(kModule, "io_error", "no such file: " + p.string());
  return p.string();
}

// Low-order Fourier sum per axis, scaled so that max |f| = amplitude.
Eigen::VectorXd smooth_random(const Grid& g, std::mt19937_64& rng, double amplitude, int modes) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(g.size());
  for (int l = 0; l < g.dim(); ++l) {
    for (int m = 1; m <= modes; ++m) {
      const double a = normal(rng) / m, b = normal(rng) / m;
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double u = 2.0 * M_PI * m * (g.coordinate(i, l) - g.origin(l)) / g.length(l);
        f[i] += a * std::cos(u) + b * std::sin(u);
      }
    }
  }
  const double peak = f.cwiseAbs().maxCoeff();
  return peak > 0.0 ? Eigen::VectorXd(f * (amplitude / peak)) : f;
}

std::mt19937_64 stream(std::uint64_t seed, const std::string& kind, const json& spec) {
  const std::uint64_t tag = std::hash<std::string>{}(kind + spec.dump());
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return std::mt19937_64(seq);
}

std::string family_of(const json& spec) {
  if (!spec.is_object() || !spec.contains("family") || !spec.at("family").is_string())
    throw Error(kModule, "bad_parameters", "field spec needs a string 'family'");
  return spec.at("family").get<std::string>();
}

ScalarField normalized(ScalarField f, double particles, const std::string& family) {
  const double total = f.values().sum() * f.grid().cell_volume();
  if (!(total > 0.0)) bad(family, "density integrates to zero on this grid");
  f.values() *= particles / total;
  return f;
}

}  // namespace

ScalarField generate_field(const json& spec, const Grid& g, std::uint64_t seed, const std::string& base_dir) {
  const std::string family = family_of(spec);
  if (family == "zero") {
    check_keys(spec, family, {});
    return ScalarField(g);
  }
  if (family == "constant") {
    check_keys(spec, family, {"value"});
    ScalarField f(g);
    f.values().setConstant(number(spec, family, "value", 0.0));
    return f;
  }
  if (family == "harmonic") {
    check_keys(spec, family, {"omega", "center"});
    const double omega = number(spec, family, "omega", 1.0);
    if (omega <= 0.0) bad(family, "omega must be positive");
    const Point3 c = point(spec, family, "center", g);
    return ScalarField::from_function(g, [&](const Point3& x) { return omega * omega * distance_sq(x, c, g.dim()); });
  }
  if (family == "gaussian_well") {
    check_keys(spec, family, {"depth", "width", "center"});
    const double depth = number(spec, family, "depth", 1.0), width = number(spec, family, "width", 1.0);
    if (depth <= 0.0 || width <= 0.0) bad(family, "depth and width must be positive");
    const Point3 c = point(spec, family, "center", g);
    return ScalarField::from_function(
        g, [&](const Point3& x) { return -depth * std::exp(-distance_sq(x, c, g.dim()) / (2.0 * width * width)); });
  }
  if (family == "cosine") {
    check_keys(spec, family, {"amplitude", "wavevector", "phase"});
    const double amp = number(spec, family, "amplitude", 1.0), phase = number(spec, family, "phase", 0.0);
    if (!spec.contains("wavevector")) bad(family, "wavevector is required");
    const Point3 k = point(spec, family, "wavevector", g);
    return ScalarField::from_function(g, [&](const Point3& x) {
      return amp * std::cos(k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + phase);
    });
  }
  if (family == "random") {
    check_keys(spec, family, {"amplitude", "modes"});
    const double amp = number(spec, family, "amplitude", 1.0);
    const double modes = number(spec, family, "modes", 3.0);
    if (amp < 0.0 || modes < 1.0 || modes != std::floor(modes)) bad(family, "need amplitude >= 0 and integer modes >= 1");
    auto rng = stream(seed, "scalar", spec);
    return ScalarField(g, smooth_random(g, rng, amp, static_cast<int>(modes)));
  }
  if (family == "gaussian") {
    check_keys(spec, family, {"sigma", "center", "particles"});
    const double sigma = number(spec, family, "sigma", 1.0), n = number(spec, family, "particles", 1.0);
    if (sigma <= 0.0 || n <= 0.0) bad(family, "sigma and particles must be positive");
    const Point3 c = point(spec, family, "center", g);
    return normalized(ScalarField::from_function(
                          g, [&](const Point3& x) { return std::exp(-distance_sq(x, c, g.dim()) / (sigma * sigma)); }),
                      n, family);
  }
  if (family == "englisch") {
    check_keys(spec, family, {"a", "b", "eps", "cutoff", "particles"});
    CounterexampleSpec ce;
    ce.a = number(spec, family, "a", ce.a);
    ce.b = number(spec, family, "b", ce.b);
    ce.eps = number(spec, family, "eps", ce.eps);
    ce.cutoff = number(spec, family, "cutoff", ce.cutoff);
    const double n = number(spec, family, "particles", 1.0);
    if (n <= 0.0) bad(family, "particles must be positive");
    ScalarField f = englisch_density(ce, g);
    f.values() *= n;
    return f;
  }
  if (family == "csv") {
    check_keys(spec, family, {"path"});
    return io::load_scalar_field(resolve(spec, family, base_dir), g);
  }
  throw Error(kModule, "unknown_family", "unknown scalar field family '" + family + "'");
}

RealVectorField generate_vector_field(const json& spec, const Grid& g, std::uint64_t seed,
                                      const std::string& base_dir) {
  const std::string family = family_of(spec);
  if (family == "zero") {
    check_keys(spec, family, {});
    return RealVectorField(g);
  }
  if (family == "constant_a") {
    check_keys(spec, family, {"value"});
    if (!spec.contains("value")) bad(family, "value is required");
    const Point3 a = point(spec, family, "value", g);
    return RealVectorField::from_function(g, [&](const Point3&) { return a; });
  }
  if (family == "linear_a") {
    check_keys(spec, family, {"b"});
    const double b = number(spec, family, "b", 1.0);
    // 1D: A = b x; otherwise the symmetric gauge of a uniform field b along axis 2.
    if (g.dim() == 1) return RealVectorField::from_function(g, [&](const Point3& x) { return Point3{b * x[0], 0.0, 0.0}; });
    return RealVectorField::from_function(
        g, [&](const Point3& x) { return Point3{-0.5 * b * x[1], 0.5 * b * x[0], 0.0}; });
  }
  if (family == "random") {
    check_keys(spec, family, {"amplitude", "modes"});
    const double amp = number(spec, family, "amplitude", 1.0);
    const double modes = number(spec, family, "modes", 3.0);
    if (amp < 0.0 || modes < 1.0 || modes != std::floor(modes)) bad(family, "need amplitude >= 0 and integer modes >= 1");
    auto rng = stream(seed, "vector", spec);
    RealVectorField a(g);
    for (int l = 0; l < g.dim(); ++l) a.component(l) = smooth_random(g, rng, amp, static_cast<int>(modes));
    return a;
  }
  if (family == "csv") {
    check_keys(spec, family, {"path"});
    return io::load_vector_field(resolve(spec, family, base_dir), g);
  }
  throw Error(kModule, "unknown_family", "unknown vector field family '" + family + "'");
}

}  // namespace cdft::cli

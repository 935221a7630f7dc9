// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/cli.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "CLI11.hpp"
#include "cdft/csearch.hpp"
#include "cdft/field_io.hpp"
#include "cdft/kohnsham.hpp"
#include "cdft/vrep.hpp"

#ifndef CDFT_VERSION
#define CDFT_VERSION "0.0.0"
#endif

namespace cdft::cli {

namespace fs = std::filesystem;

namespace {

const char* kModule = "cli";

const std::vector<std::pair<Command, const char*>> kCommands{
    {Command::solve, "solve"},
    {Command::densities, "densities"},
    {Command::decomp_check, "decomp-check"},
    {Command::invert_v, "invert-v"},
    {Command::vrep_check, "vrep-check"},
    {Command::counterexample_scan, "counterexample-scan"},
    {Command::yn_check, "yn-check"},
    {Command::csearch, "csearch"},
    {Command::ks_scf, "ks-scf"},
    {Command::minimize_g, "minimize-g"},
    {Command::g_eval, "g-eval"},
};

[[noreturn]] void invalid(const std::string& code, const std::string& message) { throw Error(kModule, code, message); }

// Error names that describe bad input rather than a numerical outcome.
bool is_input_error(const std::string& code) {
  static const std::set<std::string> codes{"bad_config",     "unknown_key",   "missing_field", "unknown_command",
                                           "unknown_family", "bad_parameters", "bad_epsilon",  "shape_mismatch",
                                           "parse_error",    "io_error",       "output_dir_not_clean"};
  return codes.count(code) > 0;
}

// ---------------------------------------------------------------- config access

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) invalid("bad_config", where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) invalid("unknown_key", "unknown key '" + key + "' in " + where);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) invalid("missing_field", where + " requires '" + key + "'");
  return obj.at(key);
}

double get_number(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) invalid("bad_config", "'" + key + "' must be a finite number");
  return v.get<double>();
}

double get_positive(const json& obj, const std::string& key, double fallback) {
  const double x = get_number(obj, key, fallback);
  if (!(x > 0.0)) invalid("bad_config", "'" + key + "' must be positive");
  return x;
}

int get_int(const json& obj, const std::string& key, int fallback, int lo) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < lo || v.get<long long>() > 1000000000)
    invalid("bad_config", "'" + key + "' must be an integer >= " + std::to_string(lo));
  return v.get<int>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) invalid("bad_config", "'" + key + "' must be a boolean");
  return obj.at(key).get<bool>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) invalid("bad_config", "'" + key + "' must be a string");
  return obj.at(key).get<std::string>();
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  fs::path p = path;
  if (p.is_relative()) p = fs::path(base_dir) / p;
  if (!fs::exists(p)) invalid("io_error", "no such file: " + p.string());
  return p.string();
}

// ---------------------------------------------------------------- outputs

json to_json(const ConstraintResidual& r) { return {{"rho_l1", r.rho_l1}, {"jp_l1", r.jp_l1}}; }

json to_json(const DensityDiagnostics& d) {
  return {{"min_rho", d.min_rho},
          {"total", d.total},
          {"h1_of_sqrt_rho", d.h1_of_sqrt_rho},
          {"jp_l1", d.jp_l1},
          {"kinetic_bound", d.kinetic_bound},
          {"curl_of_velocity", d.curl_of_velocity},
          {"kinetic_bound_warning", d.kinetic_bound_warning}};
}

json to_json(const GEvaluation& e) {
  return {{"kinetic_det", e.kinetic_det},       {"delta_t", e.delta_t},
          {"current_coupling", e.current_coupling}, {"density_coupling", e.density_coupling},
          {"exc_w", e.exc_w},                   {"hartree", e.hartree},
          {"total", e.total}};
}

json to_json(const CsearchResult& r) {
  json stages = json::array();
  for (const auto& s : r.stage_residuals) stages.push_back(to_json(s));
  json cert = nullptr;
  if (r.certificate) cert = {{"lower_bound", r.certificate->lower_bound}, {"source", r.certificate->source}};
  return {{"value", r.value},
          {"constraint_residual", to_json(r.constraint_residual)},
          {"converged", r.converged},
          {"restarts_used", r.restarts_used},
          {"certificate", cert},
          {"stage_residuals", stages},
          {"start_kind", r.start_kind},
          {"start_index", r.start_index}};
}

json to_json(const VrepReport& r) {
  return {{"e", r.e},
          {"ratio_bound", r.ratio_bound},
          {"lap_l2", r.lap_l2},
          {"inv_loc_integrable", r.inv_loc_integrable},
          {"positivity_ok", r.positivity_ok},
          {"eigen_residual", r.eigen_residual},
          {"ground_state_confirmed", r.ground_state_confirmed},
          {"overlap", r.overlap},
          {"verdict", r.verdict}};
}

// Files are buffered and only written once the command has succeeded.
class Outputs {
 public:
  json scalars = json::object();

  void add(const std::string& name, std::function<void(const std::string&)> writer) {
    files_.emplace_back(name, std::move(writer));
  }
  void document(const std::string& name, json doc) {
    add(name, [doc = std::move(doc)](const std::string& path) {
      std::ofstream out(path);
      out << doc.dump(2) << '\n';
      if (!out) invalid("io_error", "failed writing " + path);
    });
  }
  void field(const std::string& name, ScalarField f) {
    add(name, [f = std::move(f)](const std::string& path) { io::save_field(f, path); });
  }
  void field(const std::string& name, RealVectorField f) {
    add(name, [f = std::move(f)](const std::string& path) { io::save_field(f, path); });
  }
  void field(const std::string& name, ComplexField f) {
    add(name, [f = std::move(f)](const std::string& path) { io::save_field(f, path); });
  }
  void wavefunction(const std::string& name, WaveFunction psi) {
    add(name, [psi = std::move(psi)](const std::string& path) { io::save_wavefunction(psi, path); });
  }
  void orbitals(const Determinant& det) {
    for (int k = 0; k < det.n_particles(); ++k)
      field("orbital_" + std::to_string(k) + ".csv", det.orbitals()[static_cast<std::size_t>(k)]);
  }
  void pair(const ScalarField& rho, const RealVectorField& jp) {
    field("rho.csv", rho);
    field("jp.csv", jp);
  }

  std::vector<std::string> flush(const fs::path& dir) const {
    std::vector<std::string> names;
    for (const auto& [name, writer] : files_) {
      writer((dir / name).string());
      names.push_back(name);
    }
    return names;
  }

 private:
  std::vector<std::pair<std::string, std::function<void(const std::string&)>>> files_;
};

// ---------------------------------------------------------------- preparation

struct Tolerances {
  double eigen = 1e-10;
  double constraint = 1e-6;
  double inner = 1e-9;
  double curl = 1e-6;
  double scf = 1e-10;
  double floor = 1e-12;

  json to_json() const {
    return {{"eigen", eigen}, {"constraint", constraint}, {"inner", inner},
            {"curl", curl},   {"scf", scf},               {"floor", floor}};
  }
};

Tolerances read_tolerances(const json& config) {
  Tolerances t;
  if (!config.contains("tolerances")) return t;
  const json& j = config.at("tolerances");
  check_keys(j, "tolerances", {"eigen", "constraint", "inner", "curl", "scf", "floor"});
  t.eigen = get_positive(j, "eigen", t.eigen);
  t.constraint = get_positive(j, "constraint", t.constraint);
  t.inner = get_positive(j, "inner", t.inner);
  t.curl = get_positive(j, "curl", t.curl);
  t.scf = get_positive(j, "scf", t.scf);
  t.floor = get_positive(j, "floor", t.floor);
  return t;
}

struct Context {
  const json& config;
  Command command;
  std::uint64_t seed = 0;
  std::string base_dir;
  Tolerances tol;
  std::optional<Grid> grid;
  json metadata = json::object();

  const Grid& require_grid() {
    if (!grid) grid = grid_from_json(require(config, "grid", to_string(command)));
    return *grid;
  }
  int particles(int lo = 1) {
    require(config, "particles", to_string(command));
    return get_int(config, "particles", 1, lo);
  }
  double eta() { return get_positive(config, "eta", Potentials::default_eta(require_grid())); }
  ScalarField scalar(const json& spec) { return generate_field(spec, require_grid(), seed, base_dir); }
  RealVectorField vector(const json& spec) { return generate_vector_field(spec, require_grid(), seed, base_dir); }
  Potentials potentials() {
    const Grid& g = require_grid();
    ScalarField v(g);
    RealVectorField a(g);
    if (config.contains("potentials")) {
      const json& p = config.at("potentials");
      check_keys(p, "potentials", {"v", "a"});
      if (p.contains("v")) v = scalar(p.at("v"));
      if (p.contains("a")) a = vector(p.at("a"));
    }
    return Potentials(std::move(v), std::move(a), eta());
  }
  XcModel xc(XcKind fallback) {
    XcModel m;
    m.kind = config.contains("xc") ? xc_kind_from_string(get_string(config, "xc", "")) : fallback;
    m.seed = seed;
    m.constraint_tol = tol.constraint;
    m.max_restarts = get_int(config, "max_restarts", m.max_restarts, 0);
    metadata["xc"] = to_string(m.kind);
    return m;
  }
};

using Compute = std::function<void(Outputs&)>;

const std::set<std::string> kCommon{"command", "grid", "potentials", "particles", "eta", "seed", "tolerances", "output_dir"};

std::set<std::string> with_common(std::initializer_list<const char*> extra) {
  std::set<std::string> s = kCommon;
  s.insert(extra.begin(), extra.end());
  return s;
}

WaveFunction random_wavefunction(const Grid& g, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::Index size = 1;
  for (int k = 0; k < n; ++k) size *= g.size();
  VectorXc amps(size);
  for (Eigen::Index i = 0; i < size; ++i) amps[i] = cplx(normal(rng), normal(rng));
  return WaveFunction(g, n, std::move(amps));
}

Determinant random_determinant(const Grid& g, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXc f(g.size(), n);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = cplx(normal(rng), normal(rng));
  const MatrixXc q = Eigen::HouseholderQR<MatrixXc>(f).householderQ() * MatrixXc::Identity(g.size(), n);
  return determinant_from_matrix(g, q / std::sqrt(g.cell_volume()));
}

Determinant load_determinant(Context& ctx, const json& paths, int n) {
  if (!paths.is_array() || static_cast<int>(paths.size()) != n)
    invalid("bad_config", "orbitals must list one csv path per particle");
  std::vector<ComplexField> orbitals;
  for (const json& p : paths) {
    if (!p.is_string()) invalid("bad_config", "orbital paths must be strings");
    orbitals.push_back(io::load_complex_field(resolve_path(p.get<std::string>(), ctx.base_dir), ctx.require_grid()));
  }
  return build_determinant(orbitals);
}

WaveFunction ground_wavefunction(const Potentials& p, int n, double tol) {
  const SpectrumResult s = ground_state(p, n, HamiltonianKind::full, tol);
  require_nondegenerate(s, "manybody");
  return s.ground_state;
}

Compute prepare_solve(Context& ctx) {
  check_keys(ctx.config, "solve", with_common({"kind", "require_nondegenerate"}));
  const std::string kind_name = get_string(ctx.config, "kind", "full");
  if (kind_name != "full" && kind_name != "noninteracting") invalid("bad_config", "kind must be full or noninteracting");
  const HamiltonianKind kind = kind_name == "full" ? HamiltonianKind::full : HamiltonianKind::noninteracting;
  const bool strict = get_bool(ctx.config, "require_nondegenerate", true);
  const int n = ctx.particles();
  Potentials p = ctx.potentials();
  return [=, tol = ctx.tol.eigen](Outputs& out) {
    const SpectrumResult s = ground_state(p, n, kind, tol);
    if (strict) require_nondegenerate(s, "manybody");
    out.document("spectrum.json",
                 {{"e0", s.e0},
                  {"gap", s.gap},
                  {"degenerate", s.degenerate},
                  {"solver", {{"kind", s.solver.kind}, {"iterations", s.solver.iterations}, {"tol", s.solver.tol}}}});
    out.wavefunction("ground_state.csv", s.ground_state);
    const DensityPairFields d = density_pair_of(s.ground_state);
    out.pair(d.rho, d.jp);
    out.scalars = {{"e0", s.e0}, {"gap", s.gap}, {"degenerate", s.degenerate}};
  };
}

Compute prepare_densities(Context& ctx) {
  check_keys(ctx.config, "densities", with_common({"wavefunction", "orbitals"}));
  const int n = ctx.particles();
  const Grid& g = ctx.require_grid();
  if (ctx.config.contains("wavefunction") == ctx.config.contains("orbitals"))
    invalid("bad_config", "densities needs exactly one of 'wavefunction' or 'orbitals'");
  std::optional<WaveFunction> psi;
  std::optional<Determinant> det;
  if (ctx.config.contains("wavefunction"))
    psi = io::load_wavefunction(resolve_path(get_string(ctx.config, "wavefunction", ""), ctx.base_dir), g, n);
  else
    det = load_determinant(ctx, ctx.config.at("orbitals"), n);
  return [=](Outputs& out) {
    const DensityPair pair = psi ? density_pair(*psi) : density_pair(*det);
    out.pair(pair.rho, pair.jp);
    out.document("diagnostics.json", to_json(pair.diagnostics));
    out.scalars = to_json(pair.diagnostics);
  };
}

Compute prepare_decomp_check(Context& ctx) {
  check_keys(ctx.config, "decomp-check", with_common({"wavefunction"}));
  const int n = ctx.particles();
  const Grid& g = ctx.require_grid();
  Potentials p = ctx.potentials();
  const std::string source = get_string(ctx.config, "wavefunction", "random");
  const WaveFunction psi = source == "random" ? random_wavefunction(g, n, ctx.seed)
                                              : io::load_wavefunction(resolve_path(source, ctx.base_dir), g, n);
  return [=](Outputs& out) {
    const EnergyParts e = energy(p, psi);
    const double sum = e.h0_part + e.current_coupling + e.density_coupling;
    const double defect = std::abs(e.total - sum) / std::max(std::abs(e.total), 1e-300);
    out.scalars = {{"total", e.total},
                   {"h0_part", e.h0_part},
                   {"current_coupling", e.current_coupling},
                   {"density_coupling", e.density_coupling},
                   {"relative_defect", defect}};
    out.document("decomposition.json", out.scalars);
  };
}

VrepOptions vrep_options(const Context& ctx) {
  VrepOptions o;
  o.floor = ctx.tol.floor;
  o.eigen_tol = ctx.tol.eigen;
  return o;
}

Compute prepare_invert_v(Context& ctx) {
  check_keys(ctx.config, "invert-v", with_common({"density", "e"}));
  ScalarField rho = ctx.scalar(require(ctx.config, "density", "invert-v"));
  const double e = get_number(ctx.config, "e", 0.0);
  const VrepOptions opts = vrep_options(ctx);
  return [=](Outputs& out) {
    const VrepReport r = invert_potential(rho, e, opts);
    out.field("v.csv", r.v);
    out.field("phi0.csv", r.phi0);
    out.document("report.json", to_json(r));
    out.scalars = to_json(r);
  };
}

Compute prepare_vrep_check(Context& ctx) {
  check_keys(ctx.config, "vrep-check", with_common({"density"}));
  ScalarField rho = ctx.scalar(require(ctx.config, "density", "vrep-check"));
  const VrepOptions opts = vrep_options(ctx);
  return [=](Outputs& out) {
    const VrepReport r = vrep_check(rho, opts);
    out.field("v.csv", r.v);
    out.document("report.json", to_json(r));
    out.scalars = to_json(r);
  };
}

Compute prepare_counterexample_scan(Context& ctx) {
  check_keys(ctx.config, "counterexample-scan",
             {"command", "seed", "output_dir", "tolerances", "counterexample", "dim", "half_width", "h_sequence"});
  CounterexampleSpec spec;
  if (ctx.config.contains("counterexample")) {
    const json& c = ctx.config.at("counterexample");
    check_keys(c, "counterexample", {"a", "b", "eps", "cutoff"});
    spec.a = get_number(c, "a", spec.a);
    spec.b = get_number(c, "b", spec.b);
    spec.eps = get_number(c, "eps", spec.eps);
    spec.cutoff = get_number(c, "cutoff", spec.cutoff);
  }
  if (!(spec.eps > 0.0 && spec.eps < 0.5)) invalid("bad_parameters", "eps must lie in (0, 1/2)");
  const int dim = get_int(ctx.config, "dim", 1, 1);
  if (dim > 3) invalid("bad_config", "dim must be 1, 2 or 3");
  const double half_width = get_positive(ctx.config, "half_width", 2.0);
  const json& hs = require(ctx.config, "h_sequence", "counterexample-scan");
  if (!hs.is_array() || hs.size() < 4) invalid("bad_config", "h_sequence needs at least 4 spacings");
  std::vector<double> h;
  for (const json& x : hs) {
    if (!x.is_number() || !(x.get<double>() > 0.0)) invalid("bad_config", "h_sequence entries must be positive");
    h.push_back(x.get<double>());
  }
  for (std::size_t k = 1; k < h.size(); ++k)
    if (!(h[k] < h[k - 1])) invalid("bad_config", "h_sequence must be strictly decreasing");
  ctx.metadata["grid"] = {{"dim", dim}, {"half_width", half_width}, {"h_sequence", h}};
  return [=](Outputs& out) {
    const RefinementTable t = refinement_scan(spec, dim, half_width, h);
    json slopes = json::array();
    for (const auto& row : t.rows) slopes.push_back(row.slope_estimate);
    out.add("scan.csv", [t](const std::string& path) {
      std::ofstream f(path);
      f << "h,lap_l2_sq,coupling,slope_estimate\n";
      for (const auto& r : t.rows)
        f << io::format_double(r.h) << ',' << io::format_double(r.lap_l2_sq) << ',' << io::format_double(r.coupling)
          << ',' << io::format_double(r.slope_estimate) << '\n';
      if (!f) invalid("io_error", "failed writing " + path);
    });
    out.scalars = {{"lap_growing", t.lap_growing},
                   {"coupling_decreasing", t.coupling_decreasing},
                   {"slopes", slopes},
                   {"expected_slope", 2.0 - 2.0 * spec.eps}};
  };
}

Compute prepare_yn_check(Context& ctx) {
  check_keys(ctx.config, "yn-check", with_common({"density", "current", "phase"}));
  const int n = ctx.particles();
  ScalarField rho = ctx.scalar(require(ctx.config, "density", "yn-check"));
  RealVectorField jp = ctx.config.contains("current") ? ctx.vector(ctx.config.at("current")) : RealVectorField(*ctx.grid);
  const bool phase = get_bool(ctx.config, "phase", false);
  const YnOptions opts{ctx.tol.floor, YnOptions{}.kinetic_warn};
  const double curl_tol = ctx.tol.curl;
  return [=](Outputs& out) {
    const DensityPair pair = yn_check(rho, jp, n, opts);
    out.document("diagnostics.json", to_json(pair.diagnostics));
    out.scalars = to_json(pair.diagnostics);
    if (phase) out.field("theta.csv", phase_from_current(pair, curl_tol, opts.floor));
  };
}

Compute prepare_csearch(Context& ctx) {
  check_keys(ctx.config, "csearch",
             with_common({"target", "objective", "space", "ignore_current", "penalty_schedule", "multiplier_update",
                          "max_restarts", "max_inner_iterations"}));
  const int n = ctx.particles();
  const Grid& g = ctx.require_grid();
  const json& target = require(ctx.config, "target", "csearch");
  const std::string from = get_string(target, "from", "");
  std::function<DensityPair()> make_target;
  if (from == "ground_state") {
    check_keys(target, "target", {"from"});
    Potentials p = ctx.potentials();
    make_target = [p, n, tol = ctx.tol.eigen] { return density_pair(ground_wavefunction(p, n, tol)); };
  } else if (from == "wavefunction") {
    check_keys(target, "target", {"from", "path"});
    require(target, "path", "target");
    const WaveFunction psi = io::load_wavefunction(resolve_path(get_string(target, "path", ""), ctx.base_dir), g, n);
    make_target = [psi] { return density_pair(psi); };
  } else if (from == "fields") {
    check_keys(target, "target", {"from", "density", "current"});
    ScalarField rho = ctx.scalar(require(target, "density", "target"));
    RealVectorField jp = target.contains("current") ? ctx.vector(target.at("current")) : RealVectorField(g);
    make_target = [rho, jp, n, floor = ctx.tol.floor] { return yn_check(rho, jp, n, {floor, YnOptions{}.kinetic_warn}); };
  } else {
    invalid("bad_config", "target.from must be ground_state, wavefunction or fields");
  }

  const std::string objective = get_string(ctx.config, "objective", "kinetic");
  const std::string space = get_string(ctx.config, "space", "wavefunctions");
  if (objective != "kinetic" && objective != "h0") invalid("bad_config", "objective must be kinetic or h0");
  if (space != "wavefunctions" && space != "determinants")
    invalid("bad_config", "space must be wavefunctions or determinants");
  std::vector<double> schedule{1e1, 1e2, 1e3, 1e4};
  if (ctx.config.contains("penalty_schedule")) {
    const json& s = ctx.config.at("penalty_schedule");
    if (!s.is_array() || s.empty()) invalid("bad_parameters", "penalty_schedule must be a non-empty array");
    schedule.clear();
    for (const json& x : s) {
      if (!x.is_number()) invalid("bad_parameters", "penalty_schedule entries must be numbers");
      schedule.push_back(x.get<double>());
    }
  }
  const bool ignore_current = get_bool(ctx.config, "ignore_current", false);
  const bool multiplier_update = get_bool(ctx.config, "multiplier_update", true);
  const int max_restarts = get_int(ctx.config, "max_restarts", 8, 0);
  const int max_inner = get_int(ctx.config, "max_inner_iterations", 3000, 1);
  const double eta = get_positive(ctx.config, "eta", Potentials::default_eta(g));
  const Tolerances tol = ctx.tol;
  const std::uint64_t seed = ctx.seed;
  return [=](Outputs& out) {
    CsearchProblem q{make_target()};
    q.objective = objective == "h0" ? Objective::h0 : Objective::kinetic;
    q.space = space == "determinants" ? SearchSpace::determinants : SearchSpace::wavefunctions;
    q.ignore_current = ignore_current;
    q.penalty_schedule = schedule;
    q.multiplier_update = multiplier_update;
    q.inner_tol = tol.inner;
    q.constraint_tol = tol.constraint;
    q.curl_tol = tol.curl;
    q.seed = seed;
    q.max_restarts = max_restarts;
    q.max_inner_iterations = max_inner;
    q.eta = eta;
    const CsearchResult r = csearch_minimize(q);
    out.document("result.json", to_json(r));
    if (const auto* psi = std::get_if<WaveFunction>(&r.minimizer))
      out.wavefunction("minimizer.csv", *psi);
    else
      out.orbitals(std::get<Determinant>(r.minimizer));
    out.scalars = {{"value", r.value},
                   {"constraint_residual", to_json(r.constraint_residual)},
                   {"converged", r.converged},
                   {"lower_bound", r.certificate ? json(r.certificate->lower_bound) : json(nullptr)}};
  };
}

Compute prepare_ks_scf(Context& ctx) {
  check_keys(ctx.config, "ks-scf", with_common({"xc", "max_iter", "mixing"}));
  const int n = ctx.particles();
  Potentials p = ctx.potentials();
  const XcModel xc = ctx.xc(XcKind::zero);
  if (xc.kind == XcKind::constrained_oracle)
    invalid("bad_parameters", "ks-scf takes xc zero or cancel_hartree; use minimize-g for the oracle");
  const int max_iter = get_int(ctx.config, "max_iter", 200, 1);
  const double mixing = get_number(ctx.config, "mixing", 0.3);
  if (!(mixing > 0.0 && mixing <= 1.0)) invalid("bad_parameters", "mixing must lie in (0, 1]");
  return [=, tol = ctx.tol.scf](Outputs& out) {
    const ScfResult r = ks_scf(p, n, xc, tol, max_iter, mixing);
    const Eigen::VectorXd levels = Eigen::SelfAdjointEigenSolver<MatrixXc>(r.lagrange_matrix).eigenvalues();
    out.scalars = {{"energy", r.energy},
                   {"iterations", r.iterations},
                   {"residual", r.residual},
                   {"converged", r.converged}};
    json doc = out.scalars;
    doc["energy_history"] = r.energy_history;
    doc["orbital_energies"] = std::vector<double>(levels.data(), levels.data() + levels.size());
    out.document("scf.json", doc);
    out.orbitals(r.orbitals);
    const DensityPair pair = density_pair(r.orbitals);
    out.pair(pair.rho, pair.jp);
  };
}

Compute prepare_minimize_g(Context& ctx) {
  check_keys(ctx.config, "minimize-g", with_common({"xc", "max_restarts"}));
  const int n = ctx.particles();
  Potentials p = ctx.potentials();
  const XcModel xc = ctx.xc(XcKind::constrained_oracle);
  ctx.metadata["minimizer_dependent"] = xc.kind == XcKind::constrained_oracle && n > 1;
  return [=, curl = ctx.tol.curl](Outputs& out) {
    const GMinimum m = minimize_g(p, n, xc, curl);
    out.scalars = {{"total", m.evaluation.total}, {"e0", m.e0},           {"rho_l1", m.rho_l1},
                   {"jp_l1", m.jp_l1},            {"certificate", m.certificate}};
    json doc = out.scalars;
    doc["evaluation"] = to_json(m.evaluation);
    out.document("result.json", doc);
    out.orbitals(m.phi_m);
    out.pair(m.pair.rho, m.pair.jp);
  };
}

Compute prepare_g_eval(Context& ctx) {
  check_keys(ctx.config, "g-eval", with_common({"xc", "max_restarts", "determinant"}));
  const int n = ctx.particles();
  const Grid& g = ctx.require_grid();
  Potentials p = ctx.potentials();
  const XcModel xc = ctx.xc(XcKind::constrained_oracle);
  ctx.metadata["minimizer_dependent"] = xc.kind == XcKind::constrained_oracle && n > 1;
  const json det_spec = ctx.config.contains("determinant") ? ctx.config.at("determinant") : json{{"from", "random"}};
  const std::string from = get_string(det_spec, "from", "");
  std::function<Determinant()> make;
  if (from == "random") {
    check_keys(det_spec, "determinant", {"from"});
    make = [g, n, seed = ctx.seed] { return random_determinant(g, n, seed); };
  } else if (from == "orbitals") {
    check_keys(det_spec, "determinant", {"from", "paths"});
    const Determinant det = load_determinant(ctx, require(det_spec, "paths", "determinant"), n);
    make = [det] { return det; };
  } else if (from == "noninteracting_ground") {
    check_keys(det_spec, "determinant", {"from"});
    make = [p, n, tol = ctx.tol.scf] { return ks_scf(p, n, XcModel{XcKind::cancel_hartree}, tol).orbitals; };
  } else {
    invalid("bad_config", "determinant.from must be random, orbitals or noninteracting_ground");
  }
  return [=](Outputs& out) {
    const GEvaluation e = g_energy(p, make(), xc);
    out.scalars = to_json(e);
    out.document("gevaluation.json", out.scalars);
  };
}

Compute prepare(Context& ctx) {
  switch (ctx.command) {
    case Command::solve: return prepare_solve(ctx);
    case Command::densities: return prepare_densities(ctx);
    case Command::decomp_check: return prepare_decomp_check(ctx);
    case Command::invert_v: return prepare_invert_v(ctx);
    case Command::vrep_check: return prepare_vrep_check(ctx);
    case Command::counterexample_scan: return prepare_counterexample_scan(ctx);
    case Command::yn_check: return prepare_yn_check(ctx);
    case Command::csearch: return prepare_csearch(ctx);
    case Command::ks_scf: return prepare_ks_scf(ctx);
    case Command::minimize_g: return prepare_minimize_g(ctx);
    case Command::g_eval: return prepare_g_eval(ctx);
  }
  invalid("unknown_command", "unhandled command");
}

// ---------------------------------------------------------------- output directory

// The directory may only hold a previous run (its manifest and artifacts),
// which is removed so the new manifest lists everything present.
void prepare_output_dir(const fs::path& dir) {
  if (!fs::exists(dir)) {
    fs::create_directories(dir);
    return;
  }
  if (!fs::is_directory(dir)) invalid("output_dir_not_clean", dir.string() + " is not a directory");
  std::set<std::string> owned;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    owned.insert("manifest.json");
    try {
      std::ifstream in(manifest);
      const json old = json::parse(in);
      for (const auto& name : old.at("artifacts")) owned.insert(name.get<std::string>());
    } catch (const json::exception&) {
      invalid("output_dir_not_clean", manifest.string() + " is not a readable manifest");
    }
  }
  for (const auto& entry : fs::directory_iterator(dir))
    if (!owned.count(entry.path().filename().string()))
      invalid("output_dir_not_clean", dir.string() + " contains " + entry.path().filename().string() +
                                          ", which no previous manifest lists");
  fs::remove(manifest);
  for (const auto& name : owned) fs::remove(dir / name);
}

void write_manifest(const fs::path& dir, const json& manifest) {
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << manifest.dump(2) << '\n';
    if (!out) invalid("io_error", "failed writing " + tmp.string());
  }
  fs::rename(tmp, dir / "manifest.json");
}

json versions() {
  return {{"cdft", CDFT_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

json error_json(const Error& e) { return {{"module", e.module()}, {"code", e.code()}, {"message", e.what()}}; }

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cmd, name] : kCommands)
    if (cmd == c) return name;
  return "unknown";
}

Command command_from_string(const std::string& name) {
  for (const auto& [cmd, n] : kCommands)
    if (name == n) return cmd;
  invalid("unknown_command", "unknown command '" + name + "'");
}

Grid grid_from_json(const json& spec) {
  check_keys(spec, "grid", {"boundary", "lower", "upper", "points", "spacing"});
  const Boundary b = boundary_from_string(get_string(spec, "boundary", "dirichlet"));
  auto vec = [&](const char* key) {
    const json& v = require(spec, key, "grid");
    if (!v.is_array() || v.empty() || v.size() > 3) invalid("bad_config", std::string("grid.") + key + " needs 1 to 3 entries");
    std::vector<double> out;
    for (const json& x : v) {
      if (!x.is_number()) invalid("bad_config", std::string("grid.") + key + " must be numeric");
      out.push_back(x.get<double>());
    }
    return out;
  };
  const std::vector<double> lower = vec("lower"), upper = vec("upper");
  if (lower.size() != upper.size()) invalid("bad_config", "grid.lower and grid.upper differ in length");
  for (std::size_t l = 0; l < lower.size(); ++l)
    if (!(upper[l] > lower[l])) invalid("bad_config", "grid.upper must exceed grid.lower");
  if (spec.contains("points") == spec.contains("spacing"))
    invalid("bad_config", "grid needs exactly one of 'points' or 'spacing'");
  if (spec.contains("spacing")) return Grid::with_spacing(lower, upper, get_positive(spec, "spacing", 1.0), b);
  const json& pts = spec.at("points");
  if (!pts.is_array() || pts.size() != lower.size()) invalid("bad_config", "grid.points needs one entry per axis");
  std::vector<int> points;
  for (const json& x : pts) {
    if (!x.is_number_integer() || x.get<long long>() < 1 || x.get<long long>() > 100000)
      invalid("bad_config", "grid.points entries must be positive integers");
    points.push_back(x.get<int>());
  }
  return b == Boundary::periodic ? Grid::periodic(lower, upper, points) : Grid::dirichlet(lower, upper, points);
}

json grid_to_json(const Grid& g) {
  json shape = json::array(), spacing = json::array(), origin = json::array();
  for (int l = 0; l < g.dim(); ++l) {
    shape.push_back(g.shape(l));
    spacing.push_back(g.spacing(l));
    origin.push_back(g.origin(l));
  }
  return {{"boundary", to_string(g.boundary())}, {"shape", shape}, {"spacing", spacing}, {"origin", origin}};
}

RunOutcome run(json config, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  json& manifest = outcome.manifest;
  manifest = {{"versions", versions()}, {"artifacts", json::array()}, {"scalars", json::object()}};

  std::optional<fs::path> dir;
  if (opts.output_dir)
    dir = *opts.output_dir;
  else if (config.is_object() && config.contains("output_dir") && config.at("output_dir").is_string())
    dir = fs::path(opts.base_dir) / config.at("output_dir").get<std::string>();
  else
    dir = "cdft_out";
  if (opts.seed && config.is_object()) config["seed"] = *opts.seed;
  if (opts.output_dir && config.is_object()) config["output_dir"] = *opts.output_dir;
  manifest["config"] = config;

  auto finish = [&](int code, const std::optional<Error>& error, bool write) {
    outcome.exit_code = code;
    manifest["exit_code"] = code;
    manifest["status"] = code == 0 ? "ok" : "error";
    manifest["error"] = error ? error_json(*error) : json(nullptr);
    manifest["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!write) return outcome;
    try {
      write_manifest(*dir, manifest);
      outcome.manifest_path = (*dir / "manifest.json").string();
    } catch (const std::exception& e) {
      std::cerr << "cdft: cannot write manifest: " << e.what() << '\n';
    }
    return outcome;
  };

  Compute compute;
  std::optional<Context> ctx;
  try {
    if (!config.is_object()) invalid("bad_config", "config must be a JSON object");
    require(config, "command", "config");
    const Command command = command_from_string(get_string(config, "command", ""));
    manifest["command"] = to_string(command);
    ctx.emplace(Context{config, command, 0, opts.base_dir, {}, std::nullopt, json::object()});
    if (config.contains("seed")) {
      const json& seed = config.at("seed");
      if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0)) invalid("bad_config", "seed must be a non-negative integer");
      ctx->seed = config.at("seed").get<std::uint64_t>();
    }
    ctx->tol = read_tolerances(config);
    if (config.contains("output_dir") && !config.at("output_dir").is_string())
      invalid("bad_config", "output_dir must be a string");
    compute = prepare(*ctx);
    if (ctx->grid) ctx->metadata["grid"] = grid_to_json(*ctx->grid);
    if (config.contains("eta") || ctx->grid) ctx->metadata["eta"] = ctx->grid ? json(ctx->eta()) : json(nullptr);
    ctx->metadata["seed"] = ctx->seed;
    ctx->metadata["tolerances"] = ctx->tol.to_json();
    if (!ctx->metadata.contains("xc")) ctx->metadata["xc"] = nullptr;
    manifest["metadata"] = ctx->metadata;
  } catch (const Error& e) {
    try {
      prepare_output_dir(*dir);
    } catch (const std::exception&) {
      return finish(2, e, false);
    }
    return finish(2, e, true);
  }

  try {
    prepare_output_dir(*dir);
  } catch (const Error& e) {
    return finish(2, e, false);
  } catch (const fs::filesystem_error& e) {
    return finish(2, Error(kModule, "io_error", e.what()), false);
  }

  Outputs out;
  try {
    compute(out);
  } catch (const Error& e) {
    return finish(is_input_error(e.code()) ? 2 : 3, e, true);
  } catch (const std::exception& e) {
    return finish(3, Error(kModule, "internal_error", e.what()), true);
  }
  try {
    manifest["artifacts"] = out.flush(*dir);
  } catch (const std::exception& e) {
    return finish(3, Error(kModule, "io_error", e.what()), true);
  }
  manifest["scalars"] = out.scalars;
  return finish(0, std::nullopt, true);
}

int main(int argc, char** argv) {
  CLI::App app{"Lattice current-density functional laboratory"};
  std::string command, config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> names;
  for (const auto& [cmd, name] : kCommands) names.emplace_back(name);
  app.add_option("command", command, "Command to run")->required()->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--output-dir", output_dir, "Directory for artifacts and manifest.json");
  app.add_option("--seed", seed, "Overrides the config seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  json config;
  RunOptions opts;
  opts.output_dir = output_dir;
  opts.seed = seed;
  opts.base_dir = fs::path(config_path).parent_path().string();
  if (opts.base_dir.empty()) opts.base_dir = ".";
  try {
    std::ifstream in(config_path);
    if (!in) invalid("io_error", "cannot open " + config_path);
    try {
      config = json::parse(in);
    } catch (const json::parse_error& e) {
      invalid("parse_error", config_path + ": " + e.what());
    }
    if (config.is_object() && config.contains("command") && config.at("command") != command)
      invalid("bad_config", "config command '" + config.at("command").dump() + "' differs from '" + command + "'");
  } catch (const Error& e) {
    std::cerr << "cdft: " << e.what() << '\n';
    return 2;
  }
  if (config.is_object() && !config.contains("command")) config["command"] = command;

  const RunOutcome r = run(config, opts);
  if (r.exit_code == 0) {
    std::cout << r.manifest.at("scalars").dump(2) << '\n';
  } else {
    std::cerr << "cdft: " << r.manifest.at("error").at("message").get<std::string>() << '\n';
  }
  if (!r.manifest_path.empty()) std::cout << "manifest: " << r.manifest_path << '\n';
  return r.exit_code;
}

}  // namespace cdft::cli

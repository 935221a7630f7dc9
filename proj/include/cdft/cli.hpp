// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cdft/lattice.hpp"
#include "json.hpp"

namespace cdft::cli {

using json = nlohmann::json;

enum class Command {
  solve,
  densities,
  decomp_check,
  invert_v,
  vrep_check,
  counterexample_scan,
  yn_check,
  csearch,
  ks_scf,
  minimize_g,
  g_eval
};

std::string to_string(Command c);
/// Throws cli::unknown_command.
Command command_from_string(const std::string& name);

/// {"boundary": "dirichlet" | "periodic", "lower": [...], "upper": [...],
///  "points": [...]} or "spacing": h in place of "points".
Grid grid_from_json(const json& spec);
json grid_to_json(const Grid& grid);

/// Field from {"family": name, ...parameters}. Scalar families: zero,
/// constant, harmonic, gaussian_well, cosine, random, gaussian (density),
/// englisch (density), csv. Vector families: zero, constant_a, linear_a,
/// random, csv. Relative csv paths resolve against `base_dir`; random
/// families draw from `seed`. Throws unknown_family / bad_parameters.
ScalarField generate_field(const json& spec, const Grid& grid, std::uint64_t seed = 0,
                           const std::string& base_dir = ".");
RealVectorField generate_vector_field(const json& spec, const Grid& grid, std::uint64_t seed = 0,
                                      const std::string& base_dir = ".");

struct RunOptions {
  std::optional<std::string> output_dir;  // overrides config.output_dir
  std::optional<std::uint64_t> seed;      // overrides config.seed
  std::string base_dir = ".";             // for relative paths inside the config
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 2 invalid input, 3 numerical failure
  json manifest;
  std::string manifest_path;  // empty when no manifest could be written
};

/// Validates the whole config, runs the command, writes the artifacts and
/// then manifest.json (atomically, as the completion marker).
RunOutcome run(json config, const RunOptions& opts = {});

/// `<command> --config <path> [--output-dir <path>] [--seed <int>]`.
int main(int argc, char** argv);

}  // namespace cdft::cli

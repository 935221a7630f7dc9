// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cdft/manybody.hpp"

namespace cdft::io {

// CSV field format: header row, then one row per grid point in row-major
// multi-index order: integer index columns followed by value columns
// (real, or re/im pairs). Values use 17 significant digits so save/load is
// bitwise exact.

void save_field(const ScalarField& f, const std::string& path);
void save_field(const ComplexField& f, const std::string& path);
void save_field(const RealVectorField& f, const std::string& path);

ScalarField load_scalar_field(const std::string& path, const Grid& grid);
ComplexField load_complex_field(const std::string& path, const Grid& grid);
RealVectorField load_vector_field(const std::string& path, const Grid& grid);

/// Full tensor, N*d index columns (particle-major) then re, im. Loading
/// antisymmetrizes and normalizes, so a round trip agrees to rounding.
void save_wavefunction(const WaveFunction& psi, const std::string& path);
WaveFunction load_wavefunction(const std::string& path, const Grid& grid, int n_particles);

/// Raw table access shared with the many-body wavefunction format.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<long long>> indices;
  std::vector<std::vector<double>> values;
};

void write_table(const std::string& path, const Table& table);
/// Reads a table with `index_columns` leading integer columns and
/// `value_columns` real columns. Throws cli::parse_error with the line number.
Table read_table(const std::string& path, int index_columns, int value_columns);

std::string format_double(double x);

}  // namespace cdft::io

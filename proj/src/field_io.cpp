// Copyright 2026 The cdft-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdft/field_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cdft::io {

namespace {

const char* kModule = "cli";

std::vector<std::string> index_header(int dim) {
  std::vector<std::string> h;
  for (int l = 0; l < dim; ++l) h.push_back("i" + std::to_string(l));
  return h;
}

std::vector<long long> index_row(const Grid& g, Eigen::Index i) {
  const Index3 m = g.multi_index(i);
  return std::vector<long long>(m.begin(), m.begin() + g.dim());
}

void check_indices(const Table& t, const Grid& g, const std::string& path) {
  if (static_cast<Eigen::Index>(t.indices.size()) != g.size())
    throw Error(kModule, "shape_mismatch",
                path + ": expected " + std::to_string(g.size()) + " rows, found " + std::to_string(t.indices.size()));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (t.indices[static_cast<std::size_t>(i)] != index_row(g, i))
      throw Error(kModule, "shape_mismatch", path + ": row " + std::to_string(i + 2) + " has an unexpected index");
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_table(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw Error(kModule, "io_error", "cannot open " + path + " for writing");
  for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
  out << '\n';
  for (std::size_t r = 0; r < table.indices.size(); ++r) {
    bool first = true;
    for (long long v : table.indices[r]) {
      out << (first ? "" : ",") << v;
      first = false;
    }
    for (double v : table.values[r]) {
      out << (first ? "" : ",") << format_double(v);
      first = false;
    }
    out << '\n';
  }
  if (!out) throw Error(kModule, "io_error", "failed writing " + path);
}

Table read_table(const std::string& path, int index_columns, int value_columns) {
  std::ifstream in(path);
  if (!in) throw Error(kModule, "io_error", "cannot open " + path);
  Table t;
  std::string line;
  long long line_no = 0;
  const std::size_t width = static_cast<std::size_t>(index_columns + value_columns);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      for (const auto& c : split(line)) t.header.push_back(trim(c));
      if (t.header.size() != width)
        throw Error(kModule, "parse_error", path + ":1: expected " + std::to_string(width) + " header columns");
      continue;
    }
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != width)
      throw Error(kModule, "parse_error",
                  path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns, found " +
                      std::to_string(cells.size()));
    std::vector<long long> idx(static_cast<std::size_t>(index_columns));
    std::vector<double> val(static_cast<std::size_t>(value_columns));
    for (std::size_t c = 0; c < width; ++c) {
      const std::string cell = trim(cells[c]);
      const char* b = cell.data();
      const char* e = cell.data() + cell.size();
      std::from_chars_result r{};
      if (c < static_cast<std::size_t>(index_columns))
        r = std::from_chars(b, e, idx[c]);
      else
        r = std::from_chars(b, e, val[c - static_cast<std::size_t>(index_columns)]);
      if (cell.empty() || r.ec != std::errc() || r.ptr != e)
        throw Error(kModule, "parse_error",
                    path + ":" + std::to_string(line_no) + ": malformed value '" + cell + "' in column " +
                        std::to_string(c + 1));
    }
    t.indices.push_back(std::move(idx));
    t.values.push_back(std::move(val));
  }
  if (line_no == 0) throw Error(kModule, "parse_error", path + ":1: empty file");
  return t;
}

void save_field(const ScalarField& f, const std::string& path) {
  const Grid& g = f.grid();
  Table t;
  t.header = index_header(g.dim());
  t.header.push_back("value");
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    t.indices.push_back(index_row(g, i));
    t.values.push_back({f[i]});
  }
  write_table(path, t);
}

void save_field(const ComplexField& f, const std::string& path) {
  const Grid& g = f.grid();
  Table t;
  t.header = index_header(g.dim());
  t.header.insert(t.header.end(), {"re", "im"});
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    t.indices.push_back(index_row(g, i));
    t.values.push_back({f[i].real(), f[i].imag()});
  }
  write_table(path, t);
}

void save_field(const RealVectorField& f, const std::string& path) {
  const Grid& g = f.grid();
  Table t;
  t.header = index_header(g.dim());
  for (int l = 0; l < g.dim(); ++l) t.header.push_back("v" + std::to_string(l));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    t.indices.push_back(index_row(g, i));
    std::vector<double> row(static_cast<std::size_t>(g.dim()));
    for (int l = 0; l < g.dim(); ++l) row[static_cast<std::size_t>(l)] = f.values()(i, l);
    t.values.push_back(std::move(row));
  }
  write_table(path, t);
}

ScalarField load_scalar_field(const std::string& path, const Grid& grid) {
  const Table t = read_table(path, grid.dim(), 1);
  check_indices(t, grid, path);
  ScalarField f(grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i) f[i] = t.values[static_cast<std::size_t>(i)][0];
  return f;
}

ComplexField load_complex_field(const std::string& path, const Grid& grid) {
  const Table t = read_table(path, grid.dim(), 2);
  check_indices(t, grid, path);
  ComplexField f(grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto& row = t.values[static_cast<std::size_t>(i)];
    f[i] = cplx(row[0], row[1]);
  }
  return f;
}

RealVectorField load_vector_field(const std::string& path, const Grid& grid) {
  const Table t = read_table(path, grid.dim(), grid.dim());
  check_indices(t, grid, path);
  RealVectorField f(grid);
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    for (int l = 0; l < grid.dim(); ++l) f.values()(i, l) = t.values[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
  return f;
}

void save_wavefunction(const WaveFunction& psi, const std::string& path) {
  const Grid& g = psi.grid();
  const int n = psi.n_particles();
  Table t;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < g.dim(); ++l) t.header.push_back("p" + std::to_string(k) + "_i" + std::to_string(l));
  t.header.insert(t.header.end(), {"re", "im"});
  const VectorXc& amps = psi.amplitudes();
  std::vector<Eigen::Index> sites(static_cast<std::size_t>(n), 0);
  for (Eigen::Index r = 0; r < amps.size(); ++r) {
    std::vector<long long> idx;
    for (Eigen::Index s : sites) {
      const auto row = index_row(g, s);
      idx.insert(idx.end(), row.begin(), row.end());
    }
    t.indices.push_back(std::move(idx));
    t.values.push_back({amps[r].real(), amps[r].imag()});
    for (int k = n - 1; k >= 0; --k) {
      if (++sites[static_cast<std::size_t>(k)] < g.size()) break;
      sites[static_cast<std::size_t>(k)] = 0;
    }
  }
  write_table(path, t);
}

WaveFunction load_wavefunction(const std::string& path, const Grid& grid, int n_particles) {
  const Table t = read_table(path, n_particles * grid.dim(), 2);
  Eigen::Index rows = 1;
  for (int k = 0; k < n_particles; ++k) rows *= grid.size();
  if (static_cast<Eigen::Index>(t.indices.size()) != rows)
    throw Error(kModule, "shape_mismatch",
                path + ": expected " + std::to_string(rows) + " rows, found " + std::to_string(t.indices.size()));
  VectorXc amps(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& idx = t.indices[static_cast<std::size_t>(r)];
    Eigen::Index linear = 0;
    for (int k = 0; k < n_particles; ++k) {
      Index3 m{0, 0, 0};
      for (int l = 0; l < grid.dim(); ++l) {
        const long long v = idx[static_cast<std::size_t>(k * grid.dim() + l)];
        if (v < 0 || v >= grid.shape(l))
          throw Error(kModule, "shape_mismatch", path + ": row " + std::to_string(r + 2) + " index out of range");
        m[static_cast<std::size_t>(l)] = static_cast<int>(v);
      }
      linear = linear * grid.size() + grid.linear_index(m);
    }
    if (linear != r)
      throw Error(kModule, "shape_mismatch", path + ": row " + std::to_string(r + 2) + " has an unexpected index");
    const auto& val = t.values[static_cast<std::size_t>(r)];
    amps[r] = cplx(val[0], val[1]);
  }
  return WaveFunction(grid, n_particles, std::move(amps));
}

}  // namespace cdft::io

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cnsbm/common.hpp"

namespace cnsbm {

// Genomic identity of one matrix column, parsed from `chrom:start-end`.
struct BinMeta {
  std::string bin_id;
  std::string chromosome;
  long long start = 0;
  long long end = 0;
};

inline BinMeta parse_bin_id(const std::string& id) {
  const auto colon = id.find(':');
  const auto dash = id.find('-', colon == std::string::npos ? 0 : colon);
  if (colon == std::string::npos || dash == std::string::npos || dash < colon)
    throw ParseError("malformed bin identifier '" + id + "': expected chrom:start-end");
  BinMeta meta;
  meta.bin_id = id;
  meta.chromosome = id.substr(0, colon);
  try {
    meta.start = std::stoll(id.substr(colon + 1, dash - colon - 1));
    meta.end = std::stoll(id.substr(dash + 1));
  } catch (const std::exception&) {
    throw ParseError("malformed bin identifier '" + id + "': non-numeric coordinates");
  }
  if (meta.start >= meta.end)
    throw ParseError("malformed bin identifier '" + id + "': start must precede end");
  return meta;
}

// N x M matrix of category codes with an observation mask. Immutable by
// convention once built; every transformation returns a new matrix.
struct CategoricalMatrix {
  int n_rows = 0;
  int n_cols = 0;
  int n_cat = 0;
  std::vector<int> codes;           // row-major, n_rows * n_cols
  std::vector<std::uint8_t> mask;   // 1 = observed
  std::vector<std::string> row_ids;
  std::vector<BinMeta> col_meta;    // may be empty

  int code(int i, int j) const { return codes[static_cast<std::size_t>(i) * n_cols + j]; }
  bool observed(int i, int j) const { return mask[static_cast<std::size_t>(i) * n_cols + j] != 0; }
  void set(int i, int j, int c, bool obs) {
    const std::size_t idx = static_cast<std::size_t>(i) * n_cols + j;
    codes[idx] = c;
    mask[idx] = obs ? 1 : 0;
  }
  std::size_t cells() const { return static_cast<std::size_t>(n_rows) * n_cols; }
  std::size_t observed_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }

  void validate() const {
    if (n_cat < 2) throw DomainError("CategoricalMatrix: n_cat must be >= 2");
    if (codes.size() != cells() || mask.size() != cells())
      throw ShapeError("CategoricalMatrix: codes/mask shape mismatch");
    for (std::size_t idx = 0; idx < cells(); ++idx)
      if (mask[idx] && (codes[idx] < 0 || codes[idx] >= n_cat))
        throw DomainError("CategoricalMatrix: observed code out of range");
  }
};

enum class WeightMode { ObservedOnly, InversePropensity };

struct WeightMatrix {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<double> weights;  // row-major, zero wherever unobserved
  WeightMode mode = WeightMode::ObservedOnly;

  double at(int i, int j) const { return weights[static_cast<std::size_t>(i) * n_cols + j]; }

  // w_ij = b_ij: observed cells count once, missing cells not at all
  static WeightMatrix observed(const CategoricalMatrix& m) {
    WeightMatrix w;
    w.n_rows = m.n_rows;
    w.n_cols = m.n_cols;
    w.mode = WeightMode::ObservedOnly;
    w.weights.resize(m.cells());
    for (std::size_t idx = 0; idx < m.cells(); ++idx) w.weights[idx] = m.mask[idx] ? 1.0 : 0.0;
    return w;
  }
};

struct HoldoutCell {
  int row = 0;
  int col = 0;
  int true_code = 0;
};

struct HoldoutSplit {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<std::uint8_t> train_mask;
  std::vector<HoldoutCell> heldout;
};

enum class FileFormat { Csv, Tsv };

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Reads a delimited matrix: header row of `chrom:start-end` bin ids, first
// column of row ids, cells are non-negative integers or NA/empty. Raw values
// are kept uncapped; apply encode_copy_numbers to fix the alphabet.
inline CategoricalMatrix load_matrix(const std::string& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file: " + path);
  const char sep = format == FileFormat::Csv ? ',' : '\t';

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  auto header = detail::split_line(line, sep);
  if (header.size() < 2) throw ParseError(path + ":1: header must contain at least one bin column");

  CategoricalMatrix m;
  m.n_cols = static_cast<int>(header.size()) - 1;
  m.col_meta.reserve(m.n_cols);
  for (int j = 0; j < m.n_cols; ++j) {
    try {
      m.col_meta.push_back(parse_bin_id(detail::trim(header[j + 1])));
    } catch (const ParseError& e) {
      throw ParseError(path + ":1: column " + std::to_string(j + 2) + ": " + e.what());
    }
  }

  int max_code = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_line(line, sep);
    if (static_cast<int>(fields.size()) != m.n_cols + 1)
      throw ShapeError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(m.n_cols + 1) + " fields, got " +
                       std::to_string(fields.size()));
    m.row_ids.push_back(detail::trim(fields[0]));
    for (int j = 0; j < m.n_cols; ++j) {
      const std::string cell = detail::trim(fields[j + 1]);
      if (cell.empty() || cell == "NA") {
        m.codes.push_back(0);
        m.mask.push_back(0);
        continue;
      }
      long long v;
      try {
        std::size_t pos = 0;
        v = std::stoll(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": column " +
                         std::to_string(j + 2) + ": cannot parse value '" + cell + "'");
      }
      if (v < 0)
        throw DomainError(path + ":" + std::to_string(line_no) + ": column " +
                          std::to_string(j + 2) + ": negative copy number " + std::to_string(v));
      max_code = std::max(max_code, static_cast<int>(v));
      m.codes.push_back(static_cast<int>(v));
      m.mask.push_back(1);
    }
  }
  m.n_rows = static_cast<int>(m.row_ids.size());
  if (m.n_rows == 0) throw ParseError(path + ": no data rows");
  m.n_cat = std::max(max_code + 1, 2);
  return m;
}

// code = min(raw, cap); amplified values collapse into the final category
inline CategoricalMatrix encode_copy_numbers(const CategoricalMatrix& raw, int cap) {
  if (cap < 1) throw DomainError("encode_copy_numbers: cap must be >= 1");
  CategoricalMatrix out = raw;
  out.n_cat = cap + 1;
  for (std::size_t idx = 0; idx < out.cells(); ++idx) {
    if (out.mask[idx] && out.codes[idx] < 0)
      throw DomainError("encode_copy_numbers: negative raw value");
    out.codes[idx] = std::min(out.codes[idx], cap);
  }
  return out;
}

// Fill missing cells with i.i.d. draws from the empirical marginal of
// observed codes (matrix-wide by default, per-column optionally).
inline CategoricalMatrix impute_marginal(const CategoricalMatrix& m, std::uint64_t seed,
                                         bool per_column = false) {
  if (m.observed_count() == 0) throw DomainError("impute_marginal: no observed cells");
  CategoricalMatrix out = m;
  Rng rng(seed);

  std::vector<double> global_counts(m.n_cat, 0.0);
  for (std::size_t idx = 0; idx < m.cells(); ++idx)
    if (m.mask[idx]) global_counts[m.codes[idx]] += 1.0;

  std::vector<std::vector<double>> col_counts;
  if (per_column) {
    col_counts.assign(m.n_cols, std::vector<double>(m.n_cat, 0.0));
    for (int i = 0; i < m.n_rows; ++i)
      for (int j = 0; j < m.n_cols; ++j)
        if (m.observed(i, j)) col_counts[j][m.code(i, j)] += 1.0;
  }

  for (int i = 0; i < m.n_rows; ++i) {
    for (int j = 0; j < m.n_cols; ++j) {
      if (m.observed(i, j)) continue;
      const auto& counts = per_column && std::accumulate(col_counts[j].begin(),
                                                         col_counts[j].end(), 0.0) > 0.0
                               ? col_counts[j]
                               : global_counts;
      out.set(i, j, static_cast<int>(rng.categorical(counts)), true);
    }
  }
  return out;
}

// Withholds round(fraction * observed) cells uniformly without replacement.
inline HoldoutSplit make_holdout(const CategoricalMatrix& m, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw DomainError("make_holdout: fraction must lie in (0, 1)");
  std::vector<std::size_t> observed_cells;
  for (std::size_t idx = 0; idx < m.cells(); ++idx)
    if (m.mask[idx]) observed_cells.push_back(idx);
  const std::size_t n_hold =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(observed_cells.size())));
  if (n_hold < 1) throw DomainError("make_holdout: fraction selects no cells");

  Rng rng(seed);
  HoldoutSplit split;
  split.n_rows = m.n_rows;
  split.n_cols = m.n_cols;
  split.train_mask = m.mask;
  // partial Fisher-Yates over the observed cell list
  for (std::size_t t = 0; t < n_hold; ++t) {
    const std::size_t pick = t + rng.uniform_below(observed_cells.size() - t);
    std::swap(observed_cells[t], observed_cells[pick]);
    const std::size_t idx = observed_cells[t];
    split.train_mask[idx] = 0;
    split.heldout.push_back({static_cast<int>(idx / m.n_cols),
                             static_cast<int>(idx % m.n_cols), m.codes[idx]});
  }
  return split;
}

inline CategoricalMatrix apply_train_mask(const CategoricalMatrix& m, const HoldoutSplit& split) {
  if (split.n_rows != m.n_rows || split.n_cols != m.n_cols)
    throw ShapeError("apply_train_mask: shape mismatch");
  CategoricalMatrix out = m;
  out.mask = split.train_mask;
  return out;
}

// Inverse-propensity weights from the row/column observation-frequency
// heuristic: zeta_ij = (row i observed / M) * (col j observed / N).
inline WeightMatrix propensity_frequency(const CategoricalMatrix& m) {
  std::vector<int> row_obs(m.n_rows, 0), col_obs(m.n_cols, 0);
  for (int i = 0; i < m.n_rows; ++i)
    for (int j = 0; j < m.n_cols; ++j)
      if (m.observed(i, j)) {
        ++row_obs[i];
        ++col_obs[j];
      }
  for (int i = 0; i < m.n_rows; ++i)
    if (row_obs[i] == 0)
      throw DomainError("propensity_frequency: row " + std::to_string(i) + " has no observed cells");
  for (int j = 0; j < m.n_cols; ++j)
    if (col_obs[j] == 0)
      throw DomainError("propensity_frequency: column " + std::to_string(j) +
                        " has no observed cells");

  WeightMatrix w;
  w.n_rows = m.n_rows;
  w.n_cols = m.n_cols;
  w.mode = WeightMode::InversePropensity;
  w.weights.assign(m.cells(), 0.0);
  for (int i = 0; i < m.n_rows; ++i) {
    const double row_freq = static_cast<double>(row_obs[i]) / m.n_cols;
    for (int j = 0; j < m.n_cols; ++j) {
      if (!m.observed(i, j)) continue;
      const double zeta = row_freq * (static_cast<double>(col_obs[j]) / m.n_rows);
      w.weights[static_cast<std::size_t>(i) * m.n_cols + j] = 1.0 / zeta;
    }
  }
  return w;
}

}  // namespace cnsbm

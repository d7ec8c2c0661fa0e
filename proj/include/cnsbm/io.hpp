#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cnsbm/cavi.hpp"
#include "cnsbm/matrix.hpp"
#include "cnsbm/simgen.hpp"
#include "cnsbm/state.hpp"

namespace cnsbm {

using json = nlohmann::json;

inline void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ParseError("cannot open output file: " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ParseError("cannot rename temporary file into place: " + path);
}

inline void write_json_atomic(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  return j;
}

inline json to_json(const BinMeta& m) {
  return {{"bin_id", m.bin_id},
          {"chromosome", m.chromosome},
          {"start", m.start},
          {"end", m.end}};
}

inline json matrix_to_json(const CategoricalMatrix& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["n_rows"] = m.n_rows;
  j["n_cols"] = m.n_cols;
  j["n_cat"] = m.n_cat;
  j["row_ids"] = m.row_ids;
  j["codes"] = m.codes;
  j["mask"] = json::array();
  for (auto b : m.mask) j["mask"].push_back(static_cast<int>(b));
  j["col_meta"] = json::array();
  for (const auto& meta : m.col_meta) j["col_meta"].push_back(to_json(meta));
  return j;
}

inline CategoricalMatrix matrix_from_json(const json& j) {
  CategoricalMatrix m;
  m.n_rows = j.at("n_rows").get<int>();
  m.n_cols = j.at("n_cols").get<int>();
  m.n_cat = j.at("n_cat").get<int>();
  m.row_ids = j.at("row_ids").get<std::vector<std::string>>();
  m.codes = j.at("codes").get<std::vector<int>>();
  for (const auto& b : j.at("mask")) m.mask.push_back(b.get<int>() != 0 ? 1 : 0);
  if (j.contains("col_meta")) {
    for (const auto& cm : j["col_meta"]) {
      BinMeta meta;
      meta.bin_id = cm.at("bin_id").get<std::string>();
      meta.chromosome = cm.at("chromosome").get<std::string>();
      meta.start = cm.at("start").get<long long>();
      meta.end = cm.at("end").get<long long>();
      m.col_meta.push_back(meta);
    }
  }
  m.validate();
  return m;
}

inline json state_to_json(const VariationalState& s, const Priors& priors,
                          bool include_phi = true) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["N"] = s.N;
  j["M"] = s.M;
  j["K"] = s.K;
  j["L"] = s.L;
  j["n_cat"] = s.n_cat;
  j["priors"] = {{"alpha_block", priors.alpha_block},
                 {"alpha_row", priors.alpha_row},
                 {"alpha_col", priors.alpha_col}};
  j["gamma_row"] = std::vector<double>(s.gamma_row.data(), s.gamma_row.data() + s.K);
  j["gamma_col"] = std::vector<double>(s.gamma_col.data(), s.gamma_col.data() + s.L);
  j["gamma_block"] = s.gamma_block;
  if (include_phi) {
    j["phi_row"] = std::vector<double>(s.phi_row.data(), s.phi_row.data() + s.phi_row.size());
    j["phi_col"] = std::vector<double>(s.phi_col.data(), s.phi_col.data() + s.phi_col.size());
  }
  return j;
}

inline std::pair<VariationalState, Priors> state_from_json(const json& j) {
  VariationalState s = VariationalState::zeros(j.at("N").get<int>(), j.at("M").get<int>(),
                                               j.at("K").get<int>(), j.at("L").get<int>(),
                                               j.at("n_cat").get<int>());
  const auto gr = j.at("gamma_row").get<std::vector<double>>();
  const auto gc = j.at("gamma_col").get<std::vector<double>>();
  for (int k = 0; k < s.K; ++k) s.gamma_row[k] = gr.at(k);
  for (int l = 0; l < s.L; ++l) s.gamma_col[l] = gc.at(l);
  s.gamma_block = j.at("gamma_block").get<std::vector<double>>();
  if (j.contains("phi_row")) {
    const auto pr = j.at("phi_row").get<std::vector<double>>();
    const auto pc = j.at("phi_col").get<std::vector<double>>();
    std::copy(pr.begin(), pr.end(), s.phi_row.data());
    std::copy(pc.begin(), pc.end(), s.phi_col.data());
  }
  Priors priors;
  if (j.contains("priors")) {
    priors.alpha_block = j["priors"].at("alpha_block").get<double>();
    priors.alpha_row = j["priors"].at("alpha_row").get<double>();
    priors.alpha_col = j["priors"].at("alpha_col").get<double>();
  }
  return {std::move(s), priors};
}

inline json report_to_json(const FitReport& r) {
  return {{"elbo_trace", r.elbo_trace},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"wall_time", r.wall_time},
          {"workspace_bytes", r.workspace_bytes}};
}

inline json truth_to_json(const PlantedTruth& t) {
  return {{"schema_version", kSchemaVersion},
          {"K", t.K},
          {"L", t.L},
          {"n_cat", t.n_cat},
          {"row_labels", t.row_labels},
          {"col_labels", t.col_labels},
          {"block_dist", t.block_dist}};
}

inline PlantedTruth truth_from_json(const json& j) {
  PlantedTruth t;
  t.K = j.at("K").get<int>();
  t.L = j.at("L").get<int>();
  t.n_cat = j.at("n_cat").get<int>();
  t.row_labels = j.at("row_labels").get<std::vector<int>>();
  t.col_labels = j.at("col_labels").get<std::vector<int>>();
  t.block_dist = j.at("block_dist").get<std::vector<double>>();
  return t;
}

// Delimited text mirror of load_matrix: bin-id header, NA for missing.
inline std::string matrix_to_csv(const CategoricalMatrix& m, char sep = ',') {
  std::string out = "id";
  for (int j = 0; j < m.n_cols; ++j) {
    out += sep;
    out += j < static_cast<int>(m.col_meta.size())
               ? m.col_meta[j].bin_id
               : "chrU:" + std::to_string(j) + "-" + std::to_string(j + 1);
  }
  out += '\n';
  for (int i = 0; i < m.n_rows; ++i) {
    out += i < static_cast<int>(m.row_ids.size()) ? m.row_ids[i] : "row_" + std::to_string(i);
    for (int j = 0; j < m.n_cols; ++j) {
      out += sep;
      out += m.observed(i, j) ? std::to_string(m.code(i, j)) : "NA";
    }
    out += '\n';
  }
  return out;
}

}  // namespace cnsbm

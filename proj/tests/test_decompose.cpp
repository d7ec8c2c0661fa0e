#include <catch2/catch_amalgamated.hpp>

#include "cnsbm/decompose.hpp"
#include "cnsbm/simgen.hpp"

using namespace cnsbm;

namespace {

// main structure (4 row groups x 5 col groups) plus a planted residual
// perturbation (+1 where row residual group matches the column class) and
// uniform flip noise
struct PlantedTwoStage {
  CategoricalMatrix data;
  std::vector<int> main_rows;
  std::vector<int> residual_rows;
};

PlantedTwoStage planted_two_stage(int N, int M, double flip_rate, std::uint64_t seed) {
  PlantedTwoStage out;
  auto& m = out.data;
  m.n_rows = N;
  m.n_cols = M;
  m.n_cat = 12;
  m.codes.resize(m.cells());
  m.mask.assign(m.cells(), 1);
  Rng rng(seed);
  for (int i = 0; i < N; ++i) {
    m.row_ids.push_back("cell_" + std::to_string(i));
    out.main_rows.push_back(i * 4 / N);
    out.residual_rows.push_back(i % 3);
  }
  for (int j = 0; j < M; ++j) {
    BinMeta meta;
    meta.chromosome = j < M / 5 ? "chrX" : "chr1";
    meta.start = static_cast<long long>(j) * 500000;
    meta.end = meta.start + 500000;
    meta.bin_id = meta.chromosome + ":" + std::to_string(meta.start) + "-" +
                  std::to_string(meta.end);
    m.col_meta.push_back(meta);
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      const int main_code = (out.main_rows[i] + j * 5 / M) % 4 + 4;
      int code = main_code + (out.residual_rows[i] == j % 3 ? 1 : 0);
      if (rng.uniform() < flip_rate) code = static_cast<int>(rng.uniform_below(12));
      m.codes[static_cast<std::size_t>(i) * M + j] = code;
    }
  }
  return out;
}

VariationalState one_block_state(int N, int M, int n_cat, int emitted) {
  auto s = VariationalState::zeros(N, M, 1, 1, n_cat);
  s.phi_row.setOnes();
  s.phi_col.setOnes();
  s.gamma_row << 1.0 + N;
  s.gamma_col << 1.0 + M;
  s.gamma_block.assign(n_cat, 1.0);
  s.gamma_block[emitted] = 100.0;
  return s;
}

}  // namespace

TEST_CASE("main_matrix of a deterministic one-block model is constant") {
  auto [data, truth] = sample_block_model(5, 7, 1, 1, 4, 0.9, 0);
  const auto s = one_block_state(5, 7, 4, 2);
  const auto main = main_matrix(data, s);
  for (int v : main) REQUIRE(v == 2);
}

TEST_CASE("main_matrix is constant within each cluster-pair block") {
  auto [data, truth] = sample_block_model(30, 40, 3, 4, 6, 0.9, 1);
  const auto w = WeightMatrix::observed(data);
  Priors priors;
  auto init = init_kmeans(data, 3, 4, priors, 0);
  auto [state, report] = fit(data, w, priors, std::move(init), FitConfig{});
  const auto main = main_matrix(data, state);
  const auto hard = map_assignments(state);
  std::vector<int> block_value(12, -1);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 40; ++j) {
      const int b = hard.g[i] * 4 + hard.h[j];
      const int v = main[static_cast<std::size_t>(i) * 40 + j];
      if (block_value[b] < 0) block_value[b] = v;
      REQUIRE(v == block_value[b]);
    }
}

TEST_CASE("residual shifts to a non-negative alphabet") {
  CategoricalMatrix m;
  m.n_rows = 1;
  m.n_cols = 3;
  m.n_cat = 6;
  m.codes = {3, 0, 2};
  m.mask = {1, 1, 1};
  m.row_ids = {"r0"};
  const std::vector<int> main = {2, 2, 2};  // residuals +1, -2, 0
  const auto res = residual(m, main);
  REQUIRE(res.signed_values == std::vector<int>{1, -2, 0});
  REQUIRE(res.offset == 2);
  REQUIRE(res.cat.n_cat == 4);  // max - min + 1
  REQUIRE(res.cat.codes == std::vector<int>{3, 0, 2});
  REQUIRE_THROWS_AS(residual(m, std::vector<int>{2, 2}), ShapeError);
}

TEST_CASE("a perfect fit leaves an all-zero residual with the minimum alphabet") {
  CategoricalMatrix m;
  m.n_rows = 2;
  m.n_cols = 2;
  m.n_cat = 4;
  m.codes = {1, 1, 1, 1};
  m.mask = {1, 1, 1, 1};
  m.row_ids = {"a", "b"};
  const auto res = residual(m, std::vector<int>{1, 1, 1, 1});
  REQUIRE(res.offset == 0);
  REQUIRE(res.cat.n_cat == 2);  // degenerate alphabet floored at 2
  for (int c : res.cat.codes) REQUIRE(c == 0);
}

TEST_CASE("residual keeps missing cells masked") {
  CategoricalMatrix m;
  m.n_rows = 1;
  m.n_cols = 2;
  m.n_cat = 4;
  m.codes = {3, 0};
  m.mask = {1, 0};
  m.row_ids = {"r0"};
  const auto res = residual(m, std::vector<int>{1, 1});
  REQUIRE(res.cat.mask == std::vector<std::uint8_t>{1, 0});
  REQUIRE(res.signed_values[1] == 0);  // undefined residuals stay zeroed
}

TEST_CASE("two_stage satisfies the reconstruction identity and excludes columns") {
  const auto planted = planted_two_stage(60, 75, 0.02, 4);
  StageConfig s1;
  s1.K = 4;
  s1.L = 5;
  s1.init = InitKind::Kmeans;
  s1.fit.max_iters = 60;
  StageConfig s2;
  s2.K = 3;
  s2.L = 3;
  s2.init = InitKind::Kmeans;
  s2.fit.max_iters = 60;
  const auto dec = two_stage(planted.data, s1, s2,
                             [](const BinMeta& b) { return b.chromosome == "chrX"; });

  for (std::size_t idx = 0; idx < planted.data.cells(); ++idx)
    if (planted.data.mask[idx])
      REQUIRE(dec.main_codes[idx] + dec.residual_signed[idx] == planted.data.codes[idx]);

  REQUIRE(dec.excluded_cols.size() == 75 / 5);
  REQUIRE(dec.stage2_cols.size() + dec.excluded_cols.size() == 75u);
  for (int j : dec.stage2_cols) REQUIRE(planted.data.col_meta[j].chromosome != "chrX");
  REQUIRE(dec.stage2.M == static_cast<int>(dec.stage2_cols.size()));
  REQUIRE(dec.residual_cat.codes[0] ==
          dec.residual_signed[0] + dec.residual_offset);
}

TEST_CASE("stage-1 of two_stage equals a direct fit with the same config") {
  const auto planted = planted_two_stage(40, 50, 0.0, 7);
  StageConfig s1;
  s1.K = 4;
  s1.L = 5;
  s1.init = InitKind::Kmeans;
  s1.seed = 3;
  s1.fit.max_iters = 30;
  StageConfig s2;
  s2.K = 2;
  s2.L = 2;
  const auto dec = two_stage(planted.data, s1, s2);
  const auto direct = fit_stage(planted.data, WeightMatrix::observed(planted.data), s1);
  REQUIRE(dec.stage1.phi_row == direct.first.phi_row);
  REQUIRE(dec.stage1.gamma_block == direct.first.gamma_block);
}

TEST_CASE("min_cluster_rows drops small stage-1 clusters before stage 2") {
  const auto planted = planted_two_stage(60, 50, 0.0, 2);
  StageConfig s1;
  s1.K = 4;
  s1.L = 5;
  s1.init = InitKind::Kmeans;
  s1.fit.max_iters = 40;
  StageConfig s2;
  s2.K = 2;
  s2.L = 2;
  const auto dec = two_stage(planted.data, s1, s2, nullptr, 5);
  // every kept row belongs to a cluster of size >= 5
  std::vector<int> sizes(4, 0);
  for (int g : dec.stage1_hard.g) ++sizes[g];
  for (int i : dec.kept_rows) REQUIRE(sizes[dec.stage1_hard.g[i]] >= 5);
  REQUIRE(dec.stage2.N == static_cast<int>(dec.kept_rows.size()));
}

TEST_CASE("stage 2 recovers the planted residual row partition") {
  const auto planted = planted_two_stage(120, 150, 0.03, 0);
  StageConfig s1;
  s1.K = 4;
  s1.L = 5;
  s1.init = InitKind::Kmeans;
  s1.fit.max_iters = 80;
  StageConfig s2;
  s2.K = 3;
  s2.L = 3;
  s2.init = InitKind::Kmeans;
  s2.fit.max_iters = 80;
  const auto dec = two_stage(planted.data, s1, s2);
  REQUIRE(adjusted_rand_index(map_assignments(dec.stage1).g, planted.main_rows) >= 0.9);
  REQUIRE(adjusted_rand_index(dec.stage2_hard.g, planted.residual_rows) >= 0.9);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cnsbm/simgen.hpp"

using namespace cnsbm;

TEST_CASE("sample_block_model is seed-deterministic") {
  const auto [d1, t1] = sample_block_model(30, 40, 3, 4, 6, 0.8, 9);
  const auto [d2, t2] = sample_block_model(30, 40, 3, 4, 6, 0.8, 9);
  REQUIRE(d1.codes == d2.codes);
  REQUIRE(t1.row_labels == t2.row_labels);
  REQUIRE(t1.block_dist == t2.block_dist);
}

TEST_CASE("sample_block_model realizes every cluster and validates inputs") {
  const auto [data, truth] = sample_block_model(10, 12, 4, 5, 3, 0.7, 0);
  std::vector<int> row_seen(4, 0), col_seen(5, 0);
  for (int g : truth.row_labels) ++row_seen[g];
  for (int h : truth.col_labels) ++col_seen[h];
  for (int c : row_seen) REQUIRE(c > 0);
  for (int c : col_seen) REQUIRE(c > 0);
  REQUIRE_NOTHROW(data.validate());
  REQUIRE_THROWS_AS(sample_block_model(3, 10, 4, 2, 3, 0.5, 0), DomainError);
  REQUIRE_THROWS_AS(sample_block_model(10, 10, 2, 2, 1, 0.5, 0), DomainError);
  REQUIRE_THROWS_AS(sample_block_model(10, 10, 2, 2, 3, 0.0, 0), DomainError);
}

TEST_CASE("sharpness 1 makes every block constant") {
  const auto [data, truth] = sample_block_model(20, 20, 2, 2, 5, 1.0, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      const int k = truth.row_labels[i], l = truth.col_labels[j];
      int mode = 0;
      for (int c = 1; c < 5; ++c)
        if (truth.at(k, l, c) > truth.at(k, l, mode)) mode = c;
      REQUIRE(data.code(i, j) == mode);
    }
}

TEST_CASE("empirical block frequencies converge to the planted distribution") {
  // one big block: 2000+ cells per block at these sizes
  const auto [data, truth] = sample_block_model(100, 200, 2, 2, 6, 0.7, 0);
  std::vector<std::vector<double>> counts(4, std::vector<double>(6, 0.0));
  std::vector<double> totals(4, 0.0);
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 200; ++j) {
      const int b = truth.row_labels[i] * 2 + truth.col_labels[j];
      counts[b][data.code(i, j)] += 1.0;
      totals[b] += 1.0;
    }
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) {
      const int b = k * 2 + l;
      if (totals[b] < 2000) continue;
      double tv = 0.0;
      for (int c = 0; c < 6; ++c) tv += std::abs(counts[b][c] / totals[b] - truth.at(k, l, c));
      REQUIRE(tv / 2.0 < 0.05);
    }
}

TEST_CASE("planted truth recomputes the exact data log-likelihood") {
  const auto [data, truth] = sample_block_model(15, 20, 2, 3, 4, 0.8, 7);
  double oracle = 0.0;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 20; ++j)
      oracle += std::log(truth.at(truth.row_labels[i], truth.col_labels[j], data.code(i, j)));
  REQUIRE(truth.loglik(data) == Catch::Approx(oracle).margin(1e-9));
}

TEST_CASE("apply_mcar_mask at rate 0 is the identity") {
  const auto [data, truth] = sample_block_model(10, 10, 2, 2, 3, 0.8, 1);
  const auto masked = apply_mcar_mask(data, 0.0, 5);
  REQUIRE(masked.mask == data.mask);
  REQUIRE(masked.codes == data.codes);
}

TEST_CASE("apply_mcar_mask hits the target rate and keeps hidden codes") {
  auto [data, truth] = sample_block_model(250, 400, 2, 2, 4, 0.8, 2);  // 1e5 cells
  const auto masked = apply_mcar_mask(data, 0.2, 3);
  const double observed_fraction =
      static_cast<double>(masked.observed_count()) / masked.cells();
  REQUIRE(observed_fraction == Catch::Approx(0.8).margin(0.01));
  REQUIRE(masked.codes == data.codes);  // hidden values retained for evaluation
  REQUIRE_THROWS_AS(apply_mcar_mask(data, 1.0, 0), DomainError);
}

TEST_CASE("simulated column metadata carries 500kb bins") {
  const auto [data, truth] = sample_block_model(5, 8, 2, 2, 3, 0.9, 0);
  REQUIRE(data.col_meta.size() == 8);
  REQUIRE(data.col_meta[0].chromosome == "chr1");
  REQUIRE(data.col_meta[3].start == 3 * 500000);
  REQUIRE(data.col_meta[3].end == 4 * 500000);
}

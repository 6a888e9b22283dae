#include <gtest/gtest.h>

#include "test_support.hpp"

namespace hcfw {
namespace {

TEST(SignQuantize, MixedSigns) {
  RealMatrix m(2, 2);
  m << 0.5, -0.2, -3.0, 4.0;
  const auto c = sign_quantize(m);
  CodeData want(2, 2);
  want << 1, -1, -1, 1;
  EXPECT_EQ(c.values, want);
}

TEST(SignQuantize, ZeroMapsToPlusOne) {
  RealMatrix m(1, 1);
  m << 0.0;
  EXPECT_EQ(sign_quantize(m).values(0, 0), 1);
  m << -0.0;
  EXPECT_EQ(sign_quantize(m).values(0, 0), 1);
}

TEST(SignQuantize, AllPositive) {
  const RealMatrix m = RealMatrix::Constant(3, 4, 2.5);
  EXPECT_TRUE((sign_quantize(m).values.array() == 1).all());
}

TEST(SignQuantize, RejectsNonFinite) {
  RealMatrix m = RealMatrix::Zero(2, 2);
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sign_quantize(m), InvalidArgument);
  m(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sign_quantize(m), InvalidArgument);
}

TEST(SignQuantize, IdempotentOnBinaryInput) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = testing::random_codes(1 + trial % 7, 1 + trial % 5, rng);
    EXPECT_EQ(sign_quantize(c.as_real()), c);
  }
}

TEST(CategoryRegistry, AppendOnlyIndices) {
  CategoryRegistry reg;
  reg.register_new({"sky", "tree"}, 1);
  reg.register_new({"water"}, 2);
  reg.register_new({"car", "dog"}, 4);
  EXPECT_EQ(*reg.index_of("sky"), 0);
  EXPECT_EQ(*reg.index_of("tree"), 1);
  EXPECT_EQ(*reg.index_of("water"), 2);
  EXPECT_EQ(*reg.index_of("dog"), 4);
  EXPECT_FALSE(reg.index_of("cat"));
  EXPECT_EQ(reg.old_count(2), 2);
  EXPECT_EQ(reg.new_count(2), 1);
  EXPECT_EQ(reg.old_count(4), 3);
  EXPECT_EQ(reg.new_count(4), 2);
}

TEST(CategoryRegistry, RandomRegistrationSequencesNeverReindex) {
  Rng rng(11);
  CategoryRegistry reg;
  std::vector<std::string> seen;
  for (int round = 1; round <= 30; ++round) {
    std::vector<std::string> batch;
    const auto count = rng.uniform_index(4);
    for (std::uint64_t i = 0; i < count; ++i) batch.push_back("c" + std::to_string(seen.size() + i));
    if (rng.coin() && !seen.empty()) {
      // A batch touching a known name must fail and leave the registry alone.
      auto bad = batch;
      bad.push_back(seen[rng.uniform_index(seen.size())]);
      const auto before = reg;
      EXPECT_THROW(reg.register_new(bad, round), InvalidArgument);
      EXPECT_TRUE(reg == before);
    }
    reg.register_new(batch, round);
    seen.insert(seen.end(), batch.begin(), batch.end());
    for (std::size_t i = 0; i < seen.size(); ++i) {
      ASSERT_EQ(*reg.index_of(seen[i]), static_cast<Index>(i));
    }
  }
}

TEST(CategoryRegistry, RejectsDuplicatesWithinBatchAndBlankNames) {
  CategoryRegistry reg;
  EXPECT_THROW(reg.register_new({"a", "a"}, 1), InvalidArgument);
  EXPECT_THROW(reg.register_new({"  "}, 1), InvalidArgument);
  EXPECT_TRUE(reg.empty());
}

FeatureChunk consistent_chunk() {
  FeatureChunk chunk;
  chunk.modalities.push_back(FeatureMatrix{RealMatrix::Ones(3, 5), 1});
  chunk.modalities.push_back(FeatureMatrix{RealMatrix::Ones(2, 5), 2});
  chunk.labels.values = LabelData::Zero(2, 5);
  chunk.labels.values.row(0).setOnes();
  chunk.new_categories = {"a", "b"};
  return chunk;
}

TEST(ValidateChunk, ConsistentChunkIsClean) {
  EXPECT_TRUE(validate_chunk(consistent_chunk(), CategoryRegistry{}).ok());
}

TEST(ValidateChunk, UnlabeledColumn) {
  auto chunk = consistent_chunk();
  chunk.labels.values(0, 3) = 0;
  const auto report = validate_chunk(chunk, CategoryRegistry{});
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0], "unlabeled instance at column 3");
}

TEST(ValidateChunk, ColumnCountMismatch) {
  auto chunk = consistent_chunk();
  chunk.modalities[1].values = RealMatrix::Ones(2, 4);
  const auto report = validate_chunk(chunk, CategoryRegistry{});
  ASSERT_FALSE(report.ok());
  EXPECT_NE(report.summary().find("column count mismatch"), std::string::npos);
}

TEST(ValidateChunk, LabelRowsAndNonFinite) {
  auto chunk = consistent_chunk();
  CategoryRegistry reg;
  reg.register_new({"old"}, 1);
  chunk.modalities[0].values(1, 1) = std::numeric_limits<double>::infinity();
  const auto report = validate_chunk(chunk, reg);
  EXPECT_NE(report.summary().find("label rows"), std::string::npos);
  EXPECT_NE(report.summary().find("non-finite"), std::string::npos);
}

TEST(LabelMatrix, PaddingAddsZeroRows) {
  LabelMatrix l;
  l.values = LabelData::Ones(2, 3);
  const auto p = l.padded_to(4);
  EXPECT_EQ(p.categories(), 4);
  EXPECT_TRUE((p.values.topRows(2).array() == 1).all());
  EXPECT_TRUE((p.values.bottomRows(2).array() == 0).all());
  EXPECT_THROW(l.padded_to(1), DimensionError);
}

}  // namespace
}  // namespace hcfw

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "dnmd/masking.hpp"
#include "dnmd/rng.hpp"

namespace {

using dnmd::apply_mask;
using dnmd::BlockLayout;
using dnmd::BlockMask;
using dnmd::ElementMask;
using dnmd::exec_scale;
using dnmd::Rng;
using dnmd::sample_block_mask;
using dnmd::sample_element_mask;

BlockLayout three_agent_layout() {
  // Own observation of 4 entries plus messages from agents 1 and 2, 3 each.
  return BlockLayout::make(4, {{1, 3}, {2, 3}});
}

TEST(LayoutTest, BlocksAreContiguousAndCoverVector) {
  const BlockLayout lay = three_agent_layout();
  EXPECT_EQ(lay.own.offset, 0);
  EXPECT_EQ(lay.own.length, 4);
  ASSERT_EQ(lay.num_message_blocks(), 2);
  EXPECT_EQ(lay.messages[0].agent_id, 1);
  EXPECT_EQ(lay.messages[0].offset, 4);
  EXPECT_EQ(lay.messages[1].offset, 7);
  EXPECT_EQ(lay.total_dim, 10);
  EXPECT_EQ(lay.message_dim(), 6);

  EXPECT_THROW(BlockLayout::make(0, {}), std::invalid_argument);
  EXPECT_THROW(BlockLayout::make(3, {{1, 0}}), std::invalid_argument);
}

// Each message block must be *kept* with probability 1-p, independently; the
// own block is never dropped unless include_own.
TEST(MaskTest, BlockKeepFrequency) {
  const BlockLayout lay = three_agent_layout();
  const double p = 0.3;
  const int n = 100000;
  Rng rng(17);
  std::vector<int> kept(2, 0);
  for (int i = 0; i < n; ++i) {
    const BlockMask m = sample_block_mask(lay, p, false, rng);
    ASSERT_EQ(m.own, 1);
    for (int b = 0; b < 2; ++b) kept[static_cast<std::size_t>(b)] += m.keep[static_cast<std::size_t>(b)];
  }
  for (int b = 0; b < 2; ++b)
    EXPECT_NEAR(static_cast<double>(kept[static_cast<std::size_t>(b)]) / n, 1.0 - p, 0.01);
}

TEST(MaskTest, IncludeOwnDropsOwnBlockToo) {
  const BlockLayout lay = three_agent_layout();
  Rng rng(18);
  const int n = 100000;
  int own_kept = 0;
  for (int i = 0; i < n; ++i) own_kept += sample_block_mask(lay, 0.4, true, rng).own;
  EXPECT_NEAR(static_cast<double>(own_kept) / n, 0.6, 0.01);
}

TEST(MaskTest, BlockMasksAreIndependentAcrossBlocks) {
  // With p=0.5 and two message blocks all four patterns occur w.p. 1/4.
  const BlockLayout lay = three_agent_layout();
  Rng rng(19);
  const int n = 100000;
  std::map<std::vector<std::uint8_t>, int> counts;
  for (int i = 0; i < n; ++i) ++counts[sample_block_mask(lay, 0.5, false, rng).keep];
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [pattern, c] : counts)
    EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 0.02);
}

TEST(MaskTest, EdgeRates) {
  const BlockLayout lay = three_agent_layout();
  Rng rng(20);
  const BlockMask all = sample_block_mask(lay, 0.0, false, rng);
  EXPECT_EQ(all.keep, (std::vector<std::uint8_t>{1, 1}));
  const BlockMask none = sample_block_mask(lay, 1.0, false, rng);
  EXPECT_EQ(none.keep, (std::vector<std::uint8_t>{0, 0}));
  EXPECT_THROW(sample_block_mask(lay, -0.1, false, rng), std::invalid_argument);
  EXPECT_THROW(sample_block_mask(lay, 1.1, false, rng), std::invalid_argument);
}

TEST(MaskTest, ApplyBlockMaskZeroesExactlyDroppedBlocks) {
  const BlockLayout lay = three_agent_layout();
  const std::vector<double> x{1, 2, 3, 4, 10, 11, 12, 20, 21, 22};
  BlockMask m;
  m.own = 1;
  m.keep = {0, 1};
  const std::vector<double> y = apply_mask(x, lay, m);
  EXPECT_EQ(y, (std::vector<double>{1, 2, 3, 4, 0, 0, 0, 20, 21, 22}));

  m.own = 0;
  m.keep = {1, 0};
  const std::vector<double> z = apply_mask(x, lay, m);
  EXPECT_EQ(z, (std::vector<double>{0, 0, 0, 0, 10, 11, 12, 0, 0, 0}));

  BlockMask wrong;
  wrong.keep = {1};
  EXPECT_THROW(apply_mask(x, lay, wrong), std::invalid_argument);
  EXPECT_THROW(apply_mask(std::vector<double>{1.0}, lay, m), std::invalid_argument);
}

TEST(MaskTest, ElementMaskDropsPerElement) {
  const BlockLayout lay = three_agent_layout();
  Rng rng(21);
  const int n = 50000;
  std::vector<int> kept(10, 0);
  for (int i = 0; i < n; ++i) {
    const ElementMask m = sample_element_mask(lay, 0.25, false, rng);
    for (int e = 0; e < 10; ++e) kept[static_cast<std::size_t>(e)] += m[static_cast<std::size_t>(e)];
  }
  for (int e = 0; e < 4; ++e) EXPECT_EQ(kept[static_cast<std::size_t>(e)], n);  // own untouched
  for (int e = 4; e < 10; ++e)
    EXPECT_NEAR(static_cast<double>(kept[static_cast<std::size_t>(e)]) / n, 0.75, 0.015);

  // Element masks must differ inside one block (that is the point of the
  // standard-dropout ablation).
  bool intra_block_difference = false;
  for (int i = 0; i < 100 && !intra_block_difference; ++i) {
    const ElementMask m = sample_element_mask(lay, 0.5, false, rng);
    intra_block_difference = (m[4] != m[5]) || (m[5] != m[6]);
  }
  EXPECT_TRUE(intra_block_difference);
}

TEST(MaskTest, ExecScaleScalesMessagesOnly) {
  const BlockLayout lay = three_agent_layout();
  const std::vector<double> x{1, 2, 3, 4, 10, 11, 12, 20, 21, 22};
  const std::vector<double> y = exec_scale(x, lay, 0.2);
  for (int e = 0; e < 4; ++e) EXPECT_EQ(y[static_cast<std::size_t>(e)], x[static_cast<std::size_t>(e)]);
  for (int e = 4; e < 10; ++e)
    EXPECT_NEAR(y[static_cast<std::size_t>(e)], 0.8 * x[static_cast<std::size_t>(e)], 1e-15);

  const std::vector<double> z = exec_scale(x, lay, 0.2, /*include_own=*/true);
  for (int e = 0; e < 4; ++e)
    EXPECT_NEAR(z[static_cast<std::size_t>(e)], 0.8 * x[static_cast<std::size_t>(e)], 1e-15);
}

// The execution-time rule is exactly the expectation of the training-time
// mask: E[apply_mask(x)] = exec_scale(x) element-wise.
TEST(MaskTest, ExecScaleMatchesMaskExpectation) {
  const BlockLayout lay = three_agent_layout();
  const std::vector<double> x{0.5, -1, 2, 0.25, 1.5, -2, 3, -0.5, 1, 4};
  const double p = 0.35;
  const int n = 100000;
  Rng rng(22);
  std::vector<double> mean(10, 0.0);
  for (int i = 0; i < n; ++i) {
    const BlockMask m = sample_block_mask(lay, p, false, rng);
    const std::vector<double> y = apply_mask(x, lay, m);
    for (int e = 0; e < 10; ++e) mean[static_cast<std::size_t>(e)] += y[static_cast<std::size_t>(e)];
  }
  const std::vector<double> expected = exec_scale(x, lay, p);
  for (int e = 0; e < 10; ++e) {
    const std::size_t eu = static_cast<std::size_t>(e);
    mean[eu] /= n;
    const double se = std::fabs(x[eu]) * std::sqrt(p * (1.0 - p) / n);
    EXPECT_NEAR(mean[eu], expected[eu], 3.0 * se + 1e-12) << "element " << e;
  }
}

TEST(MaskTest, AllDistinctBlockPatternsAppear) {
  // Three message blocks, p=0.5: all 2^3 patterns show up quickly.
  const BlockLayout lay = BlockLayout::make(2, {{1, 2}, {2, 2}, {3, 2}});
  Rng rng(23);
  std::map<std::vector<std::uint8_t>, int> seen;
  for (int i = 0; i < 10000; ++i) ++seen[sample_block_mask(lay, 0.5, false, rng).keep];
  EXPECT_EQ(seen.size(), 8u);
}

}  // namespace

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "poal/strategies.hpp"

using namespace poal;

using Idx = std::vector<std::size_t>;

TEST(TopK, Examples) {
  EXPECT_EQ(select_topk(std::vector<double>{3, 1, 2}, 2), (Idx{0, 2}));
  EXPECT_EQ(select_topk(std::vector<double>{1, 1, 1, 1}, 2), (Idx{0, 1}));
  EXPECT_EQ(select_topk(std::vector<double>{0.3, 0.9, 0.1}, 3), (Idx{0, 1, 2}));
  EXPECT_EQ(select_topk(std::vector<double>{5, 1, 5, 5}, 2), (Idx{0, 2}));
}

TEST(WeightedSum, Presets) {
  const ScoreTable t = oracle::table_from({0.4, 0.1, 0.3, 0.2}, {0.0, 1.0, 0.2, 0.9});
  EXPECT_EQ(select_weighted_sum(t, 2, 1.0, 0.0), select_topk(t.u, 2));
  const auto [wu, wm] = weights_from_eta(0.2);
  EXPECT_DOUBLE_EQ(wu, 0.2);
  EXPECT_DOUBLE_EQ(wm, 0.8);
  // 0.2 u + 0.8 m = (0.08, 0.82, 0.22, 0.76)
  EXPECT_EQ(select_weighted_sum(t, 2, wu, wm), (Idx{1, 3}));
}

TEST(WeightedSum, CollinearScoresIgnoreWeights) {
  const std::vector<double> v{0.1, 0.4, 0.2, 0.3};
  const ScoreTable t = oracle::table_from(v, v);
  for (auto [a, b] : {std::pair{1.0, 1.0}, {0.2, 0.8}, {5.0, 0.1}}) EXPECT_EQ(select_weighted_sum(t, 2, a, b), (Idx{1, 3}));
}

TEST(TwoStage, ConstantMIsTopU) {
  const ScoreTable t = oracle::table_from({0.1, 0.4, 0.2, 0.3}, std::vector<double>(4, 0.7));
  EXPECT_EQ(select_two_stage(t, 2), (Idx{1, 3}));
}

TEST(TwoStage, BimodalDrawsFromHighSide) {
  const ScoreTable t = oracle::table_from({0.3, 0.05, 0.3, 0.05, 0.2, 0.1}, {0.1, 0.9, 0.1, 0.95, 0.85, 0.9});
  EXPECT_EQ(select_two_stage(t, 2), (Idx{4, 5}));
}

TEST(TwoStage, FillsFromBelowMeanByM) {
  // mean m = 1.7 / 6; only position 0 survives stage 1, b = 3.
  const ScoreTable t = oracle::table_from({0.1, 0.3, 0.05, 0.05, 0.2, 0.3}, {0.95, 0.1, 0.2, 0.25, 0.15, 0.05});
  EXPECT_EQ(select_two_stage(t, 3), (Idx{0, 2, 3}));
}

TEST(IdealEnt, MaskRules) {
  const ScoreTable t = oracle::table_from({0.4, 0.3, 0.2, 0.1}, {0.5, 0.5, 0.5, 0.5});
  const bool none[] = {false, false, false, false};
  EXPECT_EQ(select_ideal_ent(t, none, 2), select_topk(t.u, 2));
  const bool top_ood[] = {true, false, false, false};
  EXPECT_EQ(select_ideal_ent(t, top_ood, 2), (Idx{1, 2}));
  const bool mostly_ood[] = {true, false, true, true};
  EXPECT_EQ(select_ideal_ent(t, mostly_ood, 2), (Idx{0, 1}));
  EXPECT_THROW(select_ideal_ent(t, std::span<const bool>(none, 3), 2), UsageError);
}

TEST(Poal, ConstantMEqualsTopB) {
  const std::vector<double> u{0.05, 0.2, 0.1, 0.15, 0.02, 0.18, 0.08, 0.12, 0.03, 0.07};
  const ScoreTable t = oracle::table_from(u, std::vector<double>(10, 0.2));
  std::mt19937_64 rng(8);
  EXPECT_EQ(select_poal(t, 3, {}, rng), select_topk(u, 3));
}

TEST(Poal, LargePoolIsPreselected) {
  std::mt19937_64 gen(3);
  const ScoreTable t = oracle::random_table(5000, gen);
  const auto kept = pre_select(t, 60);
  EXPECT_GE(kept.size(), 60u);
  ParetoConfig cfg;
  cfg.mc.max_iter = 3000;
  std::mt19937_64 rng(1);
  const auto picked = select_poal(t, 10, cfg, rng);
  ASSERT_EQ(picked.size(), 10u);
  for (std::size_t p : picked) EXPECT_TRUE(std::binary_search(kept.begin(), kept.end(), p));
}

TEST(Poal, SmallPoolSkipsPreselection) {
  std::mt19937_64 gen(4);
  const ScoreTable t = oracle::random_table(30, gen);
  ParetoConfig cfg;
  cfg.mc.max_iter = 2000;
  std::mt19937_64 a(6), b(6);
  EXPECT_EQ(select_poal(t, 4, cfg, a), mc_poal(t, 4, cfg.mc, b).chosen.indices);
}

TEST(ParseStrategy, Names) {
  EXPECT_EQ(parse_strategy("poal").kind, StrategyKind::Poal);
  EXPECT_EQ(parse_strategy("rand").acquisition(), Acquisition::Random);
  EXPECT_EQ(parse_strategy("maha").acquisition(), Acquisition::Mahalanobis);
  EXPECT_EQ(parse_strategy("margin").acquisition(), Acquisition::Margin);
  EXPECT_TRUE(parse_strategy("ideal-ent").needs_ground_truth());
  const Strategy w = parse_strategy("weighted:0.2:0.8");
  EXPECT_EQ(w.kind, StrategyKind::Weighted);
  EXPECT_DOUBLE_EQ(w.w_u, 0.2);
  EXPECT_DOUBLE_EQ(w.w_m, 0.8);
  EXPECT_THROW(parse_strategy("weighted:0.2"), ConfigError);
  EXPECT_THROW(parse_strategy("weighted:a:b"), ConfigError);
  EXPECT_THROW(parse_strategy("greedy"), ConfigError);
}

TEST(SelectBatch, DispatchAndClamp) {
  const ScoreTable t = oracle::table_from({0.4, 0.3, 0.2, 0.1}, {0.0, 1.0, 0.5, 0.5});
  SelectionContext ctx;
  EXPECT_EQ(select_batch(parse_strategy("ent"), t, 10, ctx).size(), 4u);
  EXPECT_EQ(select_batch(parse_strategy("ent"), t, 2, ctx), (Idx{0, 1}));
  EXPECT_EQ(select_batch(parse_strategy("weighted:0:1"), t, 1, ctx), (Idx{1}));
  EXPECT_THROW(select_batch(parse_strategy("poal"), t, 2, ctx), UsageError);
  EXPECT_THROW(select_batch(parse_strategy("ideal-ent"), t, 2, ctx), UsageError);
}

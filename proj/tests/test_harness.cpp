#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "poal/harness.hpp"

using namespace poal;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  SyntheticSpec spec;
  spec.n_id_per_class = 60;
  spec.n_ood = 30;
  spec.seed = 5;
  cfg.dataset.synthetic = spec;
  cfg.n_init = 6;
  cfg.n_test = 40;
  cfg.budget = 20;
  cfg.batch_size = 10;
  cfg.pareto.mc.max_iter = 3000;
  return cfg;
}

RoundRecord rec(std::size_t budget, double acc) {
  RoundRecord r;
  r.budget_spent = budget;
  r.test_accuracy = acc;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST(Aubc, ClosedForms) {
  const std::vector<RoundRecord> flat{rec(0, 0.6), rec(10, 0.6), rec(25, 0.6)};
  EXPECT_DOUBLE_EQ(aubc(flat), 0.6);
  const std::vector<RoundRecord> line{rec(0, 0.0), rec(5, 0.25), rec(20, 1.0)};
  EXPECT_DOUBLE_EQ(aubc(line), 0.5);
  const std::vector<RoundRecord> trap{rec(0, 0.5), rec(10, 0.7), rec(20, 0.9)};
  EXPECT_NEAR(aubc(trap), 0.7, 1e-15);
  EXPECT_THROW(aubc(std::vector<RoundRecord>{rec(0, 0.5)}), UsageError);
}

TEST(MeanSd, SampleDeviation) {
  const std::vector<double> one{0.4};
  EXPECT_EQ(mean_sd(one), std::make_pair(0.4, 0.0));
  const std::vector<double> v{1.0, 2.0, 3.0};
  const auto [mean, sd] = mean_sd(v);
  EXPECT_DOUBLE_EQ(mean, 2.0);
  EXPECT_DOUBLE_EQ(sd, 1.0);
}

TEST(RunTrial, BudgetArithmetic) {
  const ExperimentConfig cfg = small_config();
  const PreparedData data = prepare_data(cfg);
  const auto records = run_trial(data, cfg, parse_strategy("ent"), 0);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].budget_spent, 0u);
  EXPECT_EQ(records[0].labeled_count, 6u);
  EXPECT_EQ(records[1].budget_spent, 10u);
  EXPECT_EQ(records[2].budget_spent, 20u);
  for (const auto& r : records) EXPECT_EQ(r.labeled_count + r.cumulative_ood_selected, 6 + r.budget_spent);
}

TEST(RunTrial, LastBatchTruncatedToBudget) {
  ExperimentConfig cfg = small_config();
  cfg.budget = 25;
  const PreparedData data = prepare_data(cfg);
  const auto records = run_trial(data, cfg, parse_strategy("rand"), 0);
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records.back().budget_spent, 25u);
}

TEST(RunTrial, IdealEntNeverQueriesOod) {
  ExperimentConfig cfg = small_config();
  cfg.budget = 40;
  const PreparedData data = prepare_data(cfg);
  for (const auto& r : run_trial(data, cfg, parse_strategy("ideal-ent"), 1)) EXPECT_EQ(r.cumulative_ood_selected, 0u);
}

TEST(RunTrial, DeterministicPerSeed) {
  const ExperimentConfig cfg = small_config();
  const PreparedData data = prepare_data(cfg);
  for (const char* name : {"poal", "rand", "twostage", "maha"}) {
    const auto a = run_trial(data, cfg, parse_strategy(name), 2);
    const auto b = run_trial(data, cfg, parse_strategy(name), 2);
    EXPECT_EQ(a, b) << name;
  }
}

TEST(RunTrial, TiedScorerRuns) {
  ExperimentConfig cfg = small_config();
  cfg.id_scorer = "tied";
  const PreparedData data = prepare_data(cfg);
  EXPECT_EQ(run_trial(data, cfg, parse_strategy("poal"), 0).size(), 3u);
}

TEST(TrialSplit, DisjointAndCapped) {
  ExperimentConfig cfg = small_config();
  cfg.per_class_cap = 15;
  const PreparedData data = prepare_data(cfg);
  const TrialSplit split = make_trial_split(data, cfg, 9);
  EXPECT_EQ(split.test.size(), 40u);
  std::vector<std::size_t> both;
  std::set_intersection(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(),
                        std::back_inserter(both));
  EXPECT_TRUE(both.empty());
  std::map<int, std::size_t> per_group;
  for (std::size_t r : split.train) ++per_group[data.group[r]];
  for (const auto& [g, n] : per_group) EXPECT_LE(n, 15u);
  for (std::size_t r : split.test) EXPECT_FALSE(data.ds.is_ood(r));
}

TEST(RunExperiment, SingleTrialSdZero) {
  ExperimentConfig cfg = small_config();
  cfg.strategy = {"ent"};
  const auto s = run_experiment(cfg);
  ASSERT_EQ(s.strategies.size(), 1u);
  EXPECT_EQ(s.strategies[0].aubc_sd, 0.0);
  EXPECT_DOUBLE_EQ(s.strategies[0].aubc_mean, s.strategies[0].aubc_per_trial[0]);
}

TEST(RunExperiment, RandomTrialsVary) {
  ExperimentConfig cfg = small_config();
  cfg.strategy = {"rand"};
  cfg.trials = 3;
  cfg.budget = 30;
  const auto s = run_experiment(cfg);
  EXPECT_GT(s.strategies[0].aubc_sd, 0.0);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  ExperimentConfig cfg = small_config();
  cfg.strategy = {"rand", "poal"};
  cfg.trials = 2;
  const auto a = run_experiment(cfg);
  cfg.threads = 3;
  const auto b = run_experiment(cfg);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.strategies[i].records, b.strategies[i].records);
}

TEST(Report, CsvRoundTripExact) {
  ExperimentConfig cfg = small_config();
  cfg.strategy = {"poal"};
  const auto s = run_experiment(cfg);
  std::stringstream csv;
  write_rounds_csv(csv, s.strategies[0].records);
  const auto back = read_rounds_csv(csv);
  EXPECT_EQ(back, s.strategies[0].records);
  EXPECT_NEAR(aubc(back), s.strategies[0].aubc_per_trial[0], 1e-12);
}

TEST(Report, WritesDeterministicFiles) {
  ExperimentConfig cfg = small_config();
  cfg.strategy = {"weighted:0.2:0.8"};
  const auto dir = std::filesystem::temp_directory_path() / "poal_report_test";
  std::filesystem::remove_all(dir);
  write_report(run_experiment(cfg), dir / "a");
  write_report(run_experiment(cfg), dir / "b");
  for (const char* f : {"rounds_weighted_0.2_0.8.csv", "summary.json", "manifest.json"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(summary.at("strategies").at(0).at("strategy"), "weighted:0.2:0.8");
  std::filesystem::remove_all(dir);
}

TEST(Report, EmptyRecordsWriteNothing) {
  ExperimentSummary s;
  s.strategies.push_back(StrategySummary{});
  const auto dir = std::filesystem::temp_directory_path() / "poal_report_empty";
  std::filesystem::remove_all(dir);
  EXPECT_THROW(write_report(s, dir), UsageError);
  EXPECT_FALSE(std::filesystem::exists(dir));
}

TEST(Report, MalformedCsvRejected) {
  std::stringstream bad_header("trial,round\n");
  EXPECT_THROW(read_rounds_csv(bad_header), ParseError);
  std::stringstream bad_row(std::string(kRoundsHeader) + "\n0,0,0,5,0,abc\n");
  EXPECT_THROW(read_rounds_csv(bad_row), ParseError);
}

TEST(Config, ParsesAndRejectsUnknownKeys) {
  const auto j = nlohmann::json::parse(R"({
    "dataset": {"synthetic": {"n_id_per_class": 50, "n_ood": 10}},
    "strategy": ["poal", "ent"], "budget": 30, "pareto": {"max_iter": 500}, "id_classes": [0, 1]
  })");
  const ExperimentConfig cfg = config_from_json(j);
  EXPECT_EQ(cfg.strategy, (std::vector<std::string>{"poal", "ent"}));
  EXPECT_EQ(cfg.pareto.mc.max_iter, 500u);
  EXPECT_EQ(cfg.id_classes, (std::vector<std::string>{"0", "1"}));
  EXPECT_EQ(config_from_json(to_json(cfg)).strategy, cfg.strategy);

  auto bad = j;
  bad["budgte"] = 3;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["pareto"]["pinv"] = 3;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["strategy"] = "nope";
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad.erase("dataset");
  EXPECT_THROW(config_from_json(bad), ConfigError);
}

TEST(PrepareData, LibsvmFileWithIdAndOodClasses) {
  const auto path = std::filesystem::temp_directory_path() / "poal_prepare.libsvm";
  {
    std::ofstream out(path);
    for (int rep = 0; rep < 3; ++rep)
      for (int c = 1; c <= 5; ++c) out << c << " 1:" << c << " 2:" << rep << "\n";
  }
  ExperimentConfig cfg;
  cfg.dataset.path = path.string();
  cfg.id_classes = {"1", "2"};
  cfg.ood_classes = {"5"};
  const PreparedData data = prepare_data(cfg);
  EXPECT_EQ(data.ds.rows(), 9u);
  EXPECT_EQ(data.ds.count_ood(), 3u);
  EXPECT_EQ(data.ds.k_classes, 2);
  cfg.ood_classes = {"9"};
  EXPECT_THROW(prepare_data(cfg), ConfigError);
  std::filesystem::remove(path);
}

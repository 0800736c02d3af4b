#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "poal/acquisition.hpp"
#include "poal/config.hpp"
#include "poal/data.hpp"
#include "poal/error.hpp"
#include "poal/idscore.hpp"
#include "poal/learner.hpp"
#include "poal/strategies.hpp"
#include "poal/text.hpp"

namespace poal {

inline constexpr const char* kCodeVersion = "poal 0.1.0";

inline constexpr const char* kAubcRule =
    "trapezoidal area of test_accuracy over budget_spent, including the round-0 point, divided by the budget span";
inline constexpr const char* kSdRule = "sample standard deviation across trials (n-1 denominator); 0 for a single trial";

struct RoundRecord {
  std::size_t trial = 0;
  std::size_t round = 0;
  std::size_t budget_spent = 0;
  std::size_t labeled_count = 0;
  std::size_t cumulative_ood_selected = 0;
  double test_accuracy = 0.0;
  double wall_seconds = 0.0; // not serialized

  // Wall time is excluded so records compare equal across identical runs.
  friend bool operator==(const RoundRecord& a, const RoundRecord& b) {
    return a.trial == b.trial && a.round == b.round && a.budget_spent == b.budget_spent &&
           a.labeled_count == b.labeled_count && a.cumulative_ood_selected == b.cumulative_ood_selected &&
           a.test_accuracy == b.test_accuracy;
  }
};

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

// The ID/OOD dataset plus, per row, the original label group (used for the
// per-class training cap).
struct PreparedData {
  Dataset ds;
  std::vector<int> group;
};

inline Dataset load_dataset(const DatasetSource& src) {
  if (src.synthetic) return gen_synthetic(*src.synthetic);
  std::ifstream in(src.path);
  if (!in) throw ConfigError("cannot open dataset '" + src.path + "'");
  const std::string name = std::filesystem::path(src.path).filename().string();
  if (src.format == "csv") {
    CsvOptions opts;
    opts.has_header = src.csv_has_header;
    if (auto pos = text::parse_int<std::size_t>(src.csv_label_column)) opts.label_column = *pos;
    else opts.label_column = src.csv_label_column;
    return parse_csv(in, opts, name);
  }
  return parse_libsvm(in, name);
}

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  Dataset raw = load_dataset(cfg.dataset);
  PreparedData out;
  if (cfg.id_classes.empty()) {
    out.ds = std::move(raw);
    out.group = out.ds.labels;
    out.ds.validate();
    return out;
  }
  std::vector<int> keep_group(raw.class_names.size(), 1);
  if (!cfg.ood_classes.empty()) {
    std::fill(keep_group.begin(), keep_group.end(), 0);
    std::vector<std::string> wanted = cfg.id_classes;
    wanted.insert(wanted.end(), cfg.ood_classes.begin(), cfg.ood_classes.end());
    for (const auto& w : wanted) {
      const auto it = std::find(raw.class_names.begin(), raw.class_names.end(), detail::canonical_label(w));
      if (it == raw.class_names.end()) throw ConfigError("class '" + w + "' is not an observed label");
      keep_group[static_cast<std::size_t>(it - raw.class_names.begin())] = 1;
    }
  }
  std::vector<Eigen::Index> rows;
  for (std::size_t r = 0; r < raw.rows(); ++r)
    if (raw.labels[r] < 0 || keep_group[static_cast<std::size_t>(raw.labels[r])]) rows.push_back(static_cast<Eigen::Index>(r));
  Dataset filtered;
  filtered.name = raw.name;
  filtered.class_names = raw.class_names;
  filtered.k_classes = raw.k_classes;
  filtered.features = raw.features(rows, Eigen::all);
  for (Eigen::Index r : rows) filtered.labels.push_back(raw.labels[static_cast<std::size_t>(r)]);
  out.group = filtered.labels;
  out.ds = make_ood_split(filtered, cfg.id_classes);
  out.ds.validate();
  return out;
}

struct TrialSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Holds out n_test random ID rows for testing; the rest (capped per original
// label) forms the training pool.
inline TrialSplit make_trial_split(const PreparedData& data, const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> id_rows, ood_rows;
  for (std::size_t r = 0; r < data.ds.rows(); ++r) (data.ds.is_ood(r) ? ood_rows : id_rows).push_back(r);
  if (cfg.n_test + cfg.n_init > id_rows.size())
    throw ConfigError("n_test + n_init exceeds the " + std::to_string(id_rows.size()) + " ID rows");
  std::mt19937_64 rng(seed);
  std::shuffle(id_rows.begin(), id_rows.end(), rng);
  TrialSplit split;
  split.test.assign(id_rows.begin(), id_rows.begin() + static_cast<std::ptrdiff_t>(cfg.n_test));
  std::vector<std::size_t> rest(id_rows.begin() + static_cast<std::ptrdiff_t>(cfg.n_test), id_rows.end());
  std::shuffle(ood_rows.begin(), ood_rows.end(), rng);
  rest.insert(rest.end(), ood_rows.begin(), ood_rows.end());
  if (cfg.per_class_cap > 0) {
    std::map<int, std::size_t> used;
    std::vector<std::size_t> capped;
    for (std::size_t r : rest)
      if (used[data.group[r]]++ < cfg.per_class_cap) capped.push_back(r);
    rest = std::move(capped);
  }
  std::sort(rest.begin(), rest.end());
  std::sort(split.test.begin(), split.test.end());
  split.train = std::move(rest);
  return split;
}

// ---------------------------------------------------------------------------
// Trial loop
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline double accuracy(const ClassifierModel& model, const Dataset& ds, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  const auto pred = predict(model, ds.features(idx, Eigen::all));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) hit += pred[i] == ds.labels[rows[i]] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

inline ClassifierModel fit_on_labeled(const PoolState& pool, const Dataset& ds, const LearnerConfig& cfg) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  labeled_matrix(pool, ds, X, y);
  return fit(X, y, ds.k_classes, cfg);
}

} // namespace detail

// One AL run: round 0 records the initial model, each later round fits the ID
// scorer, scores the pool, queries a batch and refits the learner.
inline std::vector<RoundRecord> run_trial(const PreparedData& data, const ExperimentConfig& cfg,
                                          const Strategy& strategy, std::size_t trial) {
  using clock = std::chrono::steady_clock;
  const Dataset& ds = data.ds;
  const std::uint64_t seed = cfg.base_seed + trial;
  const TrialSplit split = make_trial_split(data, cfg, detail::derive_seed(seed, 1));
  PoolState pool = init_pool(ds, split.train, cfg.n_init, detail::derive_seed(seed, 2));
  std::mt19937_64 rng(detail::derive_seed(seed, 3));
  GmmConfig gmm_cfg = cfg.gmm;
  gmm_cfg.seed = detail::derive_seed(seed, 4);

  {
    std::set<int> seen;
    for (const auto& [idx, y] : pool.labeled()) seen.insert(y);
    if (seen.size() < 2) throw ConfigError("initial labeled set covers fewer than 2 classes");
  }

  std::vector<RoundRecord> records;
  auto start = clock::now();
  ClassifierModel model = detail::fit_on_labeled(pool, ds, cfg.learner);
  std::size_t cumulative_ood = 0;
  auto record = [&](std::size_t round) {
    const auto now = clock::now();
    records.push_back({trial, round, pool.budget_spent(), pool.labeled().size(), cumulative_ood,
                       detail::accuracy(model, ds, split.test), std::chrono::duration<double>(now - start).count()});
    start = now;
  };
  record(0);

  for (std::size_t round = 1; pool.budget_spent() < cfg.budget && !pool.unlabeled().empty(); ++round) {
    IdModel id_model = cfg.id_scorer == "tied" ? IdModel(fit_tied_gaussians(pool, ds))
                                               : IdModel(fit_gmm_per_class(pool, ds, gmm_cfg));
    const ScoreTable table = build_score_table(model, id_model, ds, pool, strategy.acquisition(), rng);
    const std::size_t want = std::min({cfg.batch_size, cfg.budget - pool.budget_spent(), table.size()});

    std::unique_ptr<bool[]> mask;
    SelectionContext ctx{&cfg.pareto, &rng, {}};
    if (strategy.needs_ground_truth()) {
      mask = std::make_unique<bool[]>(table.size());
      for (std::size_t i = 0; i < table.size(); ++i) mask[i] = ds.is_ood(table.unlabeled[i]);
      ctx.oracle_ood_mask = std::span<const bool>(mask.get(), table.size());
    }
    const auto picked = select_batch(strategy, table, want, ctx);
    if (picked.size() != want) throw UsageError("strategy returned the wrong batch size");
    for (std::size_t pos : picked)
      if (pool.query(ds, table.unlabeled[pos]) == kOodLabel) ++cumulative_ood;
    pool.check_invariants(split.train);
    model = detail::fit_on_labeled(pool, ds, cfg.learner);
    record(round);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double aubc(std::span<const RoundRecord> records) {
  if (records.size() < 2) throw UsageError("aubc needs at least 2 records");
  const double span = static_cast<double>(records.back().budget_spent) - static_cast<double>(records.front().budget_spent);
  if (!(span > 0.0)) throw UsageError("aubc needs records with distinct budget_spent values");
  double area = 0.0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const double width = static_cast<double>(records[i].budget_spent) - static_cast<double>(records[i - 1].budget_spent);
    area += 0.5 * width * (records[i].test_accuracy + records[i - 1].test_accuracy);
  }
  return area / span;
}

struct StrategySummary {
  std::string strategy;
  std::vector<RoundRecord> records; // all trials, ordered by trial then round
  std::vector<double> aubc_per_trial;
  double aubc_mean = 0.0;
  double aubc_sd = 0.0;
  std::vector<double> mean_budget;
  std::vector<double> mean_accuracy;
  std::vector<double> mean_cumulative_ood;
};

struct ExperimentSummary {
  ExperimentConfig config;
  std::string dataset_name;
  std::size_t dataset_rows = 0;
  std::size_t dataset_dims = 0;
  std::vector<std::string> class_names;
  std::size_t ood_rows = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<StrategySummary> strategies;
};

inline std::pair<double, double> mean_sd(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / (n - 1.0))};
}

// Groups records by trial, then computes per-trial AUBC and per-round means.
inline void summarize(StrategySummary& s) {
  std::map<std::size_t, std::vector<RoundRecord>> by_trial;
  for (const auto& r : s.records) by_trial[r.trial].push_back(r);
  s.aubc_per_trial.clear();
  std::vector<double> budget, acc, ood;
  std::vector<std::size_t> count;
  for (const auto& [trial, recs] : by_trial) {
    s.aubc_per_trial.push_back(aubc(recs));
    for (const auto& r : recs) {
      if (r.round >= count.size()) {
        budget.resize(r.round + 1, 0.0);
        acc.resize(r.round + 1, 0.0);
        ood.resize(r.round + 1, 0.0);
        count.resize(r.round + 1, 0);
      }
      budget[r.round] += static_cast<double>(r.budget_spent);
      acc[r.round] += r.test_accuracy;
      ood[r.round] += static_cast<double>(r.cumulative_ood_selected);
      ++count[r.round];
    }
  }
  for (std::size_t i = 0; i < count.size(); ++i) {
    budget[i] /= static_cast<double>(count[i]);
    acc[i] /= static_cast<double>(count[i]);
    ood[i] /= static_cast<double>(count[i]);
  }
  s.mean_budget = std::move(budget);
  s.mean_accuracy = std::move(acc);
  s.mean_cumulative_ood = std::move(ood);
  std::tie(s.aubc_mean, s.aubc_sd) = mean_sd(s.aubc_per_trial);
}

// Runs every (strategy, trial) pair with seeds base_seed + trial. Work items
// may run on several threads; results are ordered by trial index.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  ExperimentSummary summary;
  summary.config = cfg;
  summary.dataset_name = data.ds.name;
  summary.dataset_rows = data.ds.rows();
  summary.dataset_dims = data.ds.dims();
  summary.class_names = data.ds.class_names;
  summary.ood_rows = data.ds.count_ood();
  for (std::size_t t = 0; t < cfg.trials; ++t) summary.seeds.push_back(cfg.base_seed + t);

  std::vector<Strategy> strategies;
  for (const auto& name : cfg.strategy) strategies.push_back(parse_strategy(name));
  const std::size_t jobs = strategies.size() * cfg.trials;
  std::vector<std::vector<RoundRecord>> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < jobs;) {
      const std::size_t si = job / cfg.trials;
      const std::size_t trial = job % cfg.trials;
      try {
        results[job] = run_trial(data, cfg, strategies[si], trial);
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.threads, jobs);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t job = 0; job < jobs; ++job) {
    if (!errors[job]) continue;
    const std::size_t trial = job % cfg.trials;
    try {
      std::rethrow_exception(errors[job]);
    } catch (const std::exception& e) {
      throw std::runtime_error("strategy '" + strategies[job / cfg.trials].name + "', trial " + std::to_string(trial) +
                               " (seed " + std::to_string(cfg.base_seed + trial) + ") failed: " + e.what());
    }
  }
  for (std::size_t si = 0; si < strategies.size(); ++si) {
    StrategySummary s;
    s.strategy = strategies[si].name;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      auto& recs = results[si * cfg.trials + t];
      s.records.insert(s.records.end(), recs.begin(), recs.end());
    }
    summarize(s);
    summary.strategies.push_back(std::move(s));
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kRoundsHeader =
    "trial,round,budget_spent,labeled_count,cumulative_ood_selected,test_accuracy";

inline void write_rounds_csv(std::ostream& out, std::span<const RoundRecord> records) {
  out << kRoundsHeader << '\n';
  for (const auto& r : records)
    out << r.trial << ',' << r.round << ',' << r.budget_spent << ',' << r.labeled_count << ','
        << r.cumulative_ood_selected << ',' << text::format_real(r.test_accuracy) << '\n';
}

inline std::vector<RoundRecord> read_rounds_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || text::trim(line) != kRoundsHeader) throw ParseError("unexpected rounds CSV header", 1);
  std::vector<RoundRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != 6) throw ParseError("expected 6 fields", line_no);
    RoundRecord r;
    const auto trial = text::parse_int<std::size_t>(cells[0]);
    const auto round = text::parse_int<std::size_t>(cells[1]);
    const auto budget = text::parse_int<std::size_t>(cells[2]);
    const auto labeled = text::parse_int<std::size_t>(cells[3]);
    const auto ood = text::parse_int<std::size_t>(cells[4]);
    const auto acc = text::parse_real(cells[5]);
    if (!trial || !round || !budget || !labeled || !ood || !acc) throw ParseError("malformed field", line_no);
    r.trial = *trial;
    r.round = *round;
    r.budget_spent = *budget;
    r.labeled_count = *labeled;
    r.cumulative_ood_selected = *ood;
    r.test_accuracy = *acc;
    out.push_back(r);
  }
  return out;
}

// Strategy names may contain ':'; file names keep only [A-Za-z0-9._-].
inline std::string strategy_file_stem(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return out;
}

inline nlohmann::json summary_json(const ExperimentSummary& s) {
  nlohmann::json strategies = nlohmann::json::array();
  for (const auto& st : s.strategies)
    strategies.push_back({{"strategy", st.strategy},
                          {"rounds_csv", "rounds_" + strategy_file_stem(st.strategy) + ".csv"},
                          {"aubc_mean", st.aubc_mean},
                          {"aubc_sd", st.aubc_sd},
                          {"aubc_per_trial", st.aubc_per_trial},
                          {"mean_budget_by_round", st.mean_budget},
                          {"mean_accuracy_by_round", st.mean_accuracy},
                          {"mean_cumulative_ood_by_round", st.mean_cumulative_ood}});
  return {{"code_version", kCodeVersion}, {"config", to_json(s.config)}, {"seeds", s.seeds}, {"strategies", strategies}};
}

inline nlohmann::json manifest_json(const ExperimentSummary& s) {
  return {{"code_version", kCodeVersion},
          {"resolved_config", to_json(s.config)},
          {"aubc_rule", kAubcRule},
          {"sd_rule", kSdRule},
          {"seed_rule", "trial t uses seed base_seed + t"},
          {"dataset",
           {{"name", s.dataset_name},
            {"rows", s.dataset_rows},
            {"dims", s.dataset_dims},
            {"ood_rows", s.ood_rows},
            {"label_mapping", s.class_names}}},
          {"seeds", s.seeds}};
}

namespace detail {
inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
  out.close();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}
} // namespace detail

// Writes rounds_<strategy>.csv per strategy, summary.json and manifest.json.
inline void write_report(const ExperimentSummary& s, const std::filesystem::path& dir) {
  if (s.strategies.empty()) throw UsageError("write_report: nothing to write");
  for (const auto& st : s.strategies)
    if (st.records.empty()) throw UsageError("write_report: strategy '" + st.strategy + "' has no records");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& st : s.strategies) {
    std::ostringstream csv;
    write_rounds_csv(csv, st.records);
    detail::write_file(dir / ("rounds_" + strategy_file_stem(st.strategy) + ".csv"), csv.str());
  }
  detail::write_file(dir / "summary.json", summary_json(s).dump(2) + "\n");
  detail::write_file(dir / "manifest.json", manifest_json(s).dump(2) + "\n");
}

} // namespace poal

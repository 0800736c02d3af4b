#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "poal/data.hpp"
#include "poal/error.hpp"
#include "poal/idscore.hpp"
#include "poal/learner.hpp"
#include "poal/strategies.hpp"

namespace poal {

struct DatasetSource {
  std::optional<SyntheticSpec> synthetic;
  std::string path;
  std::string format = "libsvm"; // libsvm | csv
  bool csv_has_header = true;
  std::string csv_label_column = "0"; // header name, or a 0-based position when numeric
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::vector<std::string> id_classes;  // empty: every label is ID
  std::vector<std::string> ood_classes; // empty: every non-ID label is OOD; otherwise other labels are dropped
  std::size_t n_init = 20;
  std::size_t n_test = 0;          // ID rows held out for testing
  std::size_t per_class_cap = 0;   // max training rows per original label (0 = no cap)
  std::size_t budget = 500;
  std::size_t batch_size = 10;
  std::vector<std::string> strategy{"poal"};
  LearnerConfig learner;
  std::string id_scorer = "gmm"; // gmm | tied
  GmmConfig gmm;
  ParetoConfig pareto;
  std::size_t trials = 1;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (budget < 1) throw ConfigError("budget must be >= 1");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (strategy.empty()) throw ConfigError("at least one strategy is required");
    for (const auto& s : strategy) parse_strategy(s);
    if (id_scorer != "gmm" && id_scorer != "tied") throw ConfigError("id_scorer must be 'gmm' or 'tied'");
    if (!dataset.synthetic && dataset.path.empty()) throw ConfigError("dataset needs a path or a synthetic spec");
    if (dataset.format != "libsvm" && dataset.format != "csv") throw ConfigError("dataset format must be libsvm or csv");
    if (pareto.mc.max_iter < 1 || pareto.mc.p_inv < 1) throw ConfigError("pareto.max_iter and pareto.p_inv must be >= 1");
    if (pareto.s_m_multiplier < 1) throw ConfigError("pareto.s_m_multiplier must be >= 1");
    if (gmm.c_max < 1) throw ConfigError("gmm.c_max must be >= 1");
  }
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::vector<std::string> read_labels(const json& j, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw ConfigError(where + "." + key + " must be an array");
  for (const auto& v : arr) {
    if (v.is_string()) out.push_back(v.get<std::string>());
    else if (v.is_number()) out.push_back(canonical_label(text::format_real(v.get<double>())));
    else throw ConfigError(where + "." + key + " entries must be strings or numbers");
  }
  return out;
}

inline SyntheticSpec synthetic_from_json(const json& j, const std::string& where) {
  check_keys(j, {"n_id_per_class", "n_ood", "radius", "spread", "ood_offset", "ood_spread", "ood_angle", "seed"}, where);
  SyntheticSpec s;
  read(j, "n_id_per_class", s.n_id_per_class, where);
  read(j, "n_ood", s.n_ood, where);
  read(j, "radius", s.radius, where);
  read(j, "spread", s.spread, where);
  read(j, "ood_offset", s.ood_offset, where);
  read(j, "ood_spread", s.ood_spread, where);
  read(j, "ood_angle", s.ood_angle, where);
  read(j, "seed", s.seed, where);
  s.validate();
  return s;
}

} // namespace detail

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"n_id_per_class", s.n_id_per_class}, {"n_ood", s.n_ood},       {"radius", s.radius},
          {"spread", s.spread},                 {"ood_offset", s.ood_offset}, {"ood_spread", s.ood_spread},
          {"ood_angle", s.ood_angle},           {"seed", s.seed}};
}

inline SyntheticSpec synthetic_from_json(const nlohmann::json& j) { return detail::synthetic_from_json(j, "synthetic"); }

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  detail::check_keys(j,
                     {"dataset", "id_classes", "ood_classes", "n_init", "n_test", "per_class_cap", "budget",
                      "batch_size", "strategy", "learner", "id_scorer", "gmm", "pareto", "trials", "base_seed",
                      "threads"},
                     "config");
  ExperimentConfig c;
  if (!j.contains("dataset")) throw ConfigError("config.dataset is required");
  const auto& ds = j.at("dataset");
  detail::check_keys(ds, {"synthetic", "path", "format", "csv_has_header", "csv_label_column"}, "dataset");
  if (ds.contains("synthetic")) c.dataset.synthetic = detail::synthetic_from_json(ds.at("synthetic"), "dataset.synthetic");
  read(ds, "path", c.dataset.path, "dataset");
  read(ds, "format", c.dataset.format, "dataset");
  read(ds, "csv_has_header", c.dataset.csv_has_header, "dataset");
  if (ds.contains("csv_label_column")) {
    const auto& col = ds.at("csv_label_column");
    c.dataset.csv_label_column = col.is_number_unsigned() ? std::to_string(col.get<std::size_t>()) : col.get<std::string>();
  }

  c.id_classes = detail::read_labels(j, "id_classes", "config");
  c.ood_classes = detail::read_labels(j, "ood_classes", "config");
  read(j, "n_init", c.n_init, "config");
  read(j, "n_test", c.n_test, "config");
  read(j, "per_class_cap", c.per_class_cap, "config");
  read(j, "budget", c.budget, "config");
  read(j, "batch_size", c.batch_size, "config");
  if (j.contains("strategy")) {
    const auto& s = j.at("strategy");
    if (s.is_string()) c.strategy = {s.get<std::string>()};
    else if (s.is_array()) c.strategy = s.get<std::vector<std::string>>();
    else throw ConfigError("config.strategy must be a string or an array of strings");
  }
  if (j.contains("learner")) {
    const auto& l = j.at("learner");
    detail::check_keys(l, {"l2", "max_iter", "tol"}, "learner");
    read(l, "l2", c.learner.l2, "learner");
    read(l, "max_iter", c.learner.max_iter, "learner");
    read(l, "tol", c.learner.tol, "learner");
  }
  read(j, "id_scorer", c.id_scorer, "config");
  if (j.contains("gmm")) {
    const auto& g = j.at("gmm");
    detail::check_keys(g, {"c_max", "max_iter", "tol"}, "gmm");
    read(g, "c_max", c.gmm.c_max, "gmm");
    read(g, "max_iter", c.gmm.max_iter, "gmm");
    read(g, "tol", c.gmm.tol, "gmm");
  }
  if (j.contains("pareto")) {
    const auto& p = j.at("pareto");
    detail::check_keys(p, {"max_iter", "p_inv", "s_w", "early_stop", "preselect_threshold", "s_m_multiplier"}, "pareto");
    read(p, "max_iter", c.pareto.mc.max_iter, "pareto");
    read(p, "p_inv", c.pareto.mc.p_inv, "pareto");
    read(p, "s_w", c.pareto.mc.s_w, "pareto");
    read(p, "early_stop", c.pareto.mc.early_stop, "pareto");
    read(p, "preselect_threshold", c.pareto.preselect_threshold, "pareto");
    read(p, "s_m_multiplier", c.pareto.s_m_multiplier, "pareto");
  }
  read(j, "trials", c.trials, "config");
  read(j, "base_seed", c.base_seed, "config");
  read(j, "threads", c.threads, "config");
  c.validate();
  return c;
}

// Every field, defaults resolved.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json ds = {{"path", c.dataset.path},
                       {"format", c.dataset.format},
                       {"csv_has_header", c.dataset.csv_has_header},
                       {"csv_label_column", c.dataset.csv_label_column}};
  if (c.dataset.synthetic) ds["synthetic"] = to_json(*c.dataset.synthetic);
  return {
      {"dataset", ds},
      {"id_classes", c.id_classes},
      {"ood_classes", c.ood_classes},
      {"n_init", c.n_init},
      {"n_test", c.n_test},
      {"per_class_cap", c.per_class_cap},
      {"budget", c.budget},
      {"batch_size", c.batch_size},
      {"strategy", c.strategy},
      {"learner", {{"l2", c.learner.l2}, {"max_iter", c.learner.max_iter}, {"tol", c.learner.tol}}},
      {"id_scorer", c.id_scorer},
      {"gmm", {{"c_max", c.gmm.c_max}, {"max_iter", c.gmm.max_iter}, {"tol", c.gmm.tol}}},
      {"pareto",
       {{"max_iter", c.pareto.mc.max_iter},
        {"p_inv", c.pareto.mc.p_inv},
        {"s_w", c.pareto.mc.s_w},
        {"early_stop", c.pareto.mc.early_stop},
        {"preselect_threshold", c.pareto.preselect_threshold},
        {"s_m_multiplier", c.pareto.s_m_multiplier}}},
      {"trials", c.trials},
      {"base_seed", c.base_seed},
      {"threads", c.threads},
  };
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

} // namespace poal

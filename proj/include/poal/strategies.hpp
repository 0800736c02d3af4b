#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poal/acquisition.hpp"
#include "poal/error.hpp"
#include "poal/pareto.hpp"
#include "poal/text.hpp"

namespace poal {

// All selectors return sorted positions into the score table.

// Top-b by score; ties go to the smaller position.
inline std::vector<std::size_t> select_topk(std::span<const double> scores, std::size_t b) {
  b = std::min(b, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(),
                    [&](std::size_t a, std::size_t c) { return scores[a] > scores[c] || (scores[a] == scores[c] && a < c); });
  order.resize(b);
  std::sort(order.begin(), order.end());
  return order;
}

struct ParetoConfig {
  McPoalConfig mc;
  std::size_t preselect_threshold = 2000; // pre-select when the pool is larger than this
  std::size_t s_m_multiplier = 6;         // s_m = multiplier * b
};

inline std::vector<std::size_t> select_poal(const ScoreTable& table, std::size_t b, const ParetoConfig& cfg,
                                            std::mt19937_64& rng) {
  if (b > table.size()) throw UsageError("select_poal: b exceeds the unlabeled pool");
  if (table.size() > cfg.preselect_threshold) {
    const auto kept = pre_select(table, cfg.s_m_multiplier * b);
    const ScoreTable reduced = subtable(table, kept);
    const auto res = mc_poal(reduced, b, cfg.mc, rng);
    std::vector<std::size_t> out;
    for (std::size_t p : res.chosen.indices) out.push_back(kept[p]);
    std::sort(out.begin(), out.end());
    return out;
  }
  return mc_poal(table, b, cfg.mc, rng).chosen.indices;
}

// The literal weighted-sum preset: eta -> (eta, 1 - eta).
inline std::pair<double, double> weights_from_eta(double eta) { return {eta, 1.0 - eta}; }

inline std::vector<std::size_t> select_weighted_sum(const ScoreTable& table, std::size_t b, double w_u, double w_m) {
  std::vector<double> score(table.size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] = w_u * table.u[i] + w_m * table.m[i];
  return select_topk(score, b);
}

// Keep m_i >= mean(m), take the top-b by u among those; if fewer than b
// survive, fill with the highest-m rejected samples.
inline std::vector<std::size_t> select_two_stage(const ScoreTable& table, std::size_t b) {
  if (b < 1) throw UsageError("select_two_stage: b must be >= 1");
  const double mean = std::accumulate(table.m.begin(), table.m.end(), 0.0) / static_cast<double>(table.size());
  std::vector<std::size_t> kept, rejected;
  for (std::size_t i = 0; i < table.size(); ++i) (table.m[i] >= mean ? kept : rejected).push_back(i);

  std::vector<double> u_kept;
  for (std::size_t i : kept) u_kept.push_back(table.u[i]);
  std::vector<std::size_t> out;
  for (std::size_t p : select_topk(u_kept, b)) out.push_back(kept[p]);
  if (out.size() < b) {
    std::vector<double> m_rej;
    for (std::size_t i : rejected) m_rej.push_back(table.m[i]);
    for (std::size_t p : select_topk(m_rej, b - out.size())) out.push_back(rejected[p]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Entropy top-b restricted to true-ID samples, with OOD fill-ins by u when
// ID samples run out. `is_ood` is ground truth aligned with the table.
inline std::vector<std::size_t> select_ideal_ent(const ScoreTable& table, std::span<const bool> is_ood,
                                                 std::size_t b) {
  if (is_ood.size() != table.size()) throw UsageError("select_ideal_ent: mask not aligned with table");
  std::vector<std::size_t> id_pos, ood_pos;
  for (std::size_t i = 0; i < table.size(); ++i) (is_ood[i] ? ood_pos : id_pos).push_back(i);
  std::vector<double> u_id, u_ood;
  for (std::size_t i : id_pos) u_id.push_back(table.u[i]);
  for (std::size_t i : ood_pos) u_ood.push_back(table.u[i]);
  std::vector<std::size_t> out;
  for (std::size_t p : select_topk(u_id, b)) out.push_back(id_pos[p]);
  if (out.size() < b)
    for (std::size_t p : select_topk(u_ood, b - out.size())) out.push_back(ood_pos[p]);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Named strategies
// ---------------------------------------------------------------------------

enum class StrategyKind { Poal, Ent, Maha, Margin, Rand, Weighted, TwoStage, IdealEnt };

struct Strategy {
  StrategyKind kind = StrategyKind::Poal;
  double w_u = 1.0;
  double w_m = 0.0;
  std::string name;

  // The acquisition that feeds u.
  Acquisition acquisition() const {
    switch (kind) {
    case StrategyKind::Maha: return Acquisition::Mahalanobis;
    case StrategyKind::Margin: return Acquisition::Margin;
    case StrategyKind::Rand: return Acquisition::Random;
    default: return Acquisition::Entropy;
    }
  }
  bool needs_ground_truth() const { return kind == StrategyKind::IdealEnt; }
};

// `poal`, `ent`, `maha`, `margin`, `rand`, `weighted:<w_u>:<w_m>`, `twostage`, `ideal-ent`.
inline Strategy parse_strategy(const std::string& name) {
  Strategy s;
  s.name = name;
  if (name == "poal") s.kind = StrategyKind::Poal;
  else if (name == "ent") s.kind = StrategyKind::Ent;
  else if (name == "maha") s.kind = StrategyKind::Maha;
  else if (name == "margin") s.kind = StrategyKind::Margin;
  else if (name == "rand") s.kind = StrategyKind::Rand;
  else if (name == "twostage") s.kind = StrategyKind::TwoStage;
  else if (name == "ideal-ent") s.kind = StrategyKind::IdealEnt;
  else if (name.rfind("weighted:", 0) == 0) {
    const auto parts = text::split(name, ':');
    const auto wu = parts.size() == 3 ? text::parse_real(parts[1]) : std::nullopt;
    const auto wm = parts.size() == 3 ? text::parse_real(parts[2]) : std::nullopt;
    if (!wu || !wm) throw ConfigError("malformed weighted strategy '" + name + "', expected weighted:<w_u>:<w_m>");
    s.kind = StrategyKind::Weighted;
    s.w_u = *wu;
    s.w_m = *wm;
  } else {
    throw ConfigError("unknown strategy '" + name + "'");
  }
  return s;
}

struct SelectionContext {
  const ParetoConfig* pareto = nullptr;
  std::mt19937_64* rng = nullptr;
  // Ground-truth OOD flags aligned with the table; only IDEAL-ENT may read it.
  std::span<const bool> oracle_ood_mask;
};

// Selects min(b, |table|) positions.
inline std::vector<std::size_t> select_batch(const Strategy& strategy, const ScoreTable& table, std::size_t b,
                                             const SelectionContext& ctx) {
  b = std::min(b, table.size());
  switch (strategy.kind) {
  case StrategyKind::Poal: {
    if (!ctx.pareto || !ctx.rng) throw UsageError("poal needs a pareto config and an rng");
    return select_poal(table, b, *ctx.pareto, *ctx.rng);
  }
  case StrategyKind::Ent:
  case StrategyKind::Maha:
  case StrategyKind::Margin:
  case StrategyKind::Rand:
    return select_topk(table.u, b);
  case StrategyKind::Weighted:
    return select_weighted_sum(table, b, strategy.w_u, strategy.w_m);
  case StrategyKind::TwoStage:
    return select_two_stage(table, b);
  case StrategyKind::IdealEnt:
    return select_ideal_ent(table, ctx.oracle_ood_mask, b);
  }
  throw UsageError("unhandled strategy");
}

} // namespace poal

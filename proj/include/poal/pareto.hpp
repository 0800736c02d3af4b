#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "poal/acquisition.hpp"
#include "poal/error.hpp"

namespace poal {

// Objective pair of a candidate subset: (sum of u, sum of m). Both maximized.
struct Objectives {
  double o_u = 0.0;
  double o_m = 0.0;

  friend bool operator==(const Objectives&, const Objectives&) = default;
};

// b <= a componentwise.
inline bool weakly_dominates(const Objectives& a, const Objectives& b) {
  return b.o_u <= a.o_u && b.o_m <= a.o_m;
}

// b <= a componentwise with at least one strict inequality.
inline bool strictly_dominates(const Objectives& a, const Objectives& b) {
  return weakly_dominates(a, b) && (b.o_u < a.o_u || b.o_m < a.o_m);
}

enum class Dominance {
  Equal,           // mutual weak dominance
  FirstDominates,  // second is strictly dominated by first
  SecondDominates, // first is strictly dominated by second
  Incomparable,
};

inline Dominance compare(const Objectives& a, const Objectives& b) {
  if (a == b) return Dominance::Equal;
  if (strictly_dominates(a, b)) return Dominance::FirstDominates;
  if (strictly_dominates(b, a)) return Dominance::SecondDominates;
  return Dominance::Incomparable;
}

// Componentwise sums over the selected table positions.
inline Objectives objectives(std::span<const std::size_t> indices, const ScoreTable& table) {
  Objectives o;
  for (std::size_t i : indices) {
    if (i >= table.size()) throw UsageError("subset index " + std::to_string(i) + " outside the score table");
    o.o_u += table.u[i];
    o.o_m += table.m[i];
  }
  return o;
}

// A fixed-size set of table positions with its cached objectives.
struct CandidateSubset {
  std::vector<std::size_t> indices; // strictly increasing
  Objectives obj;

  void validate(std::size_t pool_size, std::size_t b) const {
    if (indices.size() != b) throw UsageError("candidate subset has the wrong size");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= pool_size) throw UsageError("candidate index outside pool");
      if (i > 0 && indices[i] <= indices[i - 1]) throw UsageError("candidate indices not strictly increasing");
    }
  }
};

inline CandidateSubset make_candidate(std::vector<std::size_t> indices, const ScoreTable& table) {
  std::sort(indices.begin(), indices.end());
  CandidateSubset s;
  s.obj = objectives(indices, table);
  s.indices = std::move(indices);
  return s;
}

// Uniform over all C(pool_size, b) subsets (Floyd's sampler); sorted output.
inline std::vector<std::size_t> random_subset(std::size_t pool_size, std::size_t b, std::mt19937_64& rng) {
  if (b > pool_size) throw UsageError("random_subset: b exceeds pool size");
  std::vector<std::size_t> chosen;
  chosen.reserve(b);
  for (std::size_t j = pool_size - b; j < pool_size; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    auto pos = std::lower_bound(chosen.begin(), chosen.end(), t);
    if (pos != chosen.end() && *pos == t) {
      // j is larger than every element drawn so far
      chosen.push_back(j);
    } else {
      chosen.insert(pos, t);
    }
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

struct InsertResult {
  bool accepted = false; // no member strictly dominates the candidate
  bool changed = false;  // membership changed (false for rejected or duplicate candidates)
};

struct ParetoArchive {
  std::vector<CandidateSubset> members;
  std::vector<double> mmd_history;                        // one entry per iteration
  std::vector<std::pair<double, double>> checkpoint_stats; // (mean, mean squared deviation) every p_inv iterations
  std::size_t iterations = 0;
  bool stopped_early = false;

  std::vector<Objectives> features() const {
    std::vector<Objectives> out;
    out.reserve(members.size());
    for (const auto& s : members) out.push_back(s.obj);
    return out;
  }
};

// Rejects `s` if a member strictly dominates it; otherwise removes every
// member that `s` weakly dominates (equal objectives included) and adds `s`.
inline InsertResult archive_insert(ParetoArchive& archive, const CandidateSubset& s) {
  auto& members = archive.members;
  for (const auto& z : members) {
    if (strictly_dominates(z.obj, s.obj)) return {false, false};
    if (z.indices == s.indices) return {true, false};
  }
  std::erase_if(members, [&](const CandidateSubset& z) { return weakly_dominates(s.obj, z.obj); });
  members.push_back(s);
  return {true, true};
}

// ---------------------------------------------------------------------------
// Convergence statistics
// ---------------------------------------------------------------------------

// Multi-bandwidth RBF MMD between two sets of objective pairs: square root of
// the clamped V-statistic MMD^2. Five bandwidths spaced by a factor of two
// around the mean off-diagonal squared distance of the pooled points.
inline double mmd(std::span<const Objectives> a, std::span<const Objectives> b) {
  if (a.empty() || b.empty()) throw UsageError("mmd: empty snapshot");
  const std::size_t na = a.size();
  const std::size_t n = na + b.size();
  auto point = [&](std::size_t i) -> const Objectives& { return i < na ? a[i] : b[i - na]; };
  std::vector<double> d2(n * n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double du = point(i).o_u - point(j).o_u;
      const double dm = point(i).o_m - point(j).o_m;
      d2[i * n + j] = du * du + dm * dm;
      total += d2[i * n + j];
    }
  double base = total / static_cast<double>(n * n - n);
  if (!(base > 0.0)) base = 1.0;
  constexpr int kKernels = 5;
  double bandwidth[kKernels];
  for (int k = 0; k < kKernels; ++k) bandwidth[k] = base / 4.0 * std::ldexp(1.0, k);
  auto kernel = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (double bw : bandwidth) s += std::exp(-d2[i * n + j] / bw);
    return s;
  };
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const bool ia = i < na, ja = j < na;
      if (ia && ja)
        xx += kernel(i, j);
      else if (!ia && !ja)
        yy += kernel(i, j);
      else if (ia)
        xy += kernel(i, j);
    }
  const double nb = static_cast<double>(b.size());
  const double nad = static_cast<double>(na);
  const double mmd2 = xx / (nad * nad) + yy / (nb * nb) - 2.0 * xy / (nad * nb);
  return std::sqrt(std::max(mmd2, 0.0));
}

// Mean and mean squared deviation of the last `window` values.
inline std::pair<double, double> window_stats(std::span<const double> history, std::size_t window) {
  const std::size_t w = std::min(window, history.size());
  if (w == 0) return {0.0, 0.0};
  const auto tail = history.subspan(history.size() - w);
  const double mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(w);
  double sq = 0.0;
  for (double v : tail) sq += (v - mean) * (v - mean);
  return {mean, sq / static_cast<double>(w)};
}

inline long long round2(double v) { return std::llround(v * 100.0); }

// True once the last s_w + 1 checkpoints agree on both statistics rounded to
// two decimals.
inline bool early_stop_check(std::span<const std::pair<double, double>> stats, std::size_t s_w) {
  if (stats.size() < s_w + 1) return false;
  const auto tail = stats.subspan(stats.size() - (s_w + 1));
  const long long mean0 = round2(tail.front().first);
  const long long dev0 = round2(tail.front().second);
  return std::all_of(tail.begin(), tail.end(),
                     [&](const auto& st) { return round2(st.first) == mean0 && round2(st.second) == dev0; });
}

// ---------------------------------------------------------------------------
// Final selection
// ---------------------------------------------------------------------------

// argmax over members of F(s) = sum over members s' of |s ∩ s'| (self term
// included); ties go to the lexicographically smallest index list.
inline CandidateSubset final_select(const ParetoArchive& archive) {
  if (archive.members.empty()) throw UsageError("final_select: empty archive");
  std::size_t top = 0;
  for (const auto& s : archive.members)
    if (!s.indices.empty()) top = std::max(top, s.indices.back());
  std::vector<std::size_t> count(top + 1, 0);
  for (const auto& s : archive.members)
    for (std::size_t i : s.indices) ++count[i];

  const CandidateSubset* best = nullptr;
  std::size_t best_score = 0;
  for (const auto& s : archive.members) {
    std::size_t score = 0;
    for (std::size_t i : s.indices) score += count[i];
    if (!best || score > best_score || (score == best_score && s.indices < best->indices)) {
      best = &s;
      best_score = score;
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Monte-Carlo search
// ---------------------------------------------------------------------------

struct McPoalConfig {
  std::size_t max_iter = 100000; // T
  std::size_t p_inv = 100;
  std::size_t s_w = 20;
  bool early_stop = true;
};

struct McPoalResult {
  ParetoArchive archive;
  CandidateSubset chosen;
};

// Called once per iteration after the insert: (iteration, candidate, archive).
using McPoalObserver = std::function<void(std::size_t, const CandidateSubset&, const ParetoArchive&)>;

// Samples uniform fixed-size subsets and keeps the non-dominated ones. The
// archive starts empty. Each iteration records the MMD between consecutive
// archive snapshots (0 when the archive did not change, or when the previous
// snapshot was empty); every p_inv iterations the windowed mean / squared
// deviation is checkpointed and the early-stop rule is evaluated.
inline McPoalResult mc_poal(const ScoreTable& table, std::size_t b, const McPoalConfig& cfg, std::mt19937_64& rng,
                            const McPoalObserver& observer = {}) {
  const std::size_t pool = table.size();
  if (b < 1 || b > pool) throw UsageError("mc_poal: need 1 <= b <= pool size");
  if (cfg.max_iter < 1) throw UsageError("mc_poal: T must be >= 1");
  if (cfg.p_inv < 1) throw UsageError("mc_poal: p_inv must be >= 1");

  McPoalResult res;
  ParetoArchive& archive = res.archive;
  archive.mmd_history.reserve(std::min<std::size_t>(cfg.max_iter, 1 << 20));
  std::vector<Objectives> snapshot;
  for (std::size_t t = 1; t <= cfg.max_iter; ++t) {
    CandidateSubset s;
    s.indices = random_subset(pool, b, rng);
    s.obj = objectives(s.indices, table);
    const InsertResult ins = archive_insert(archive, s);

    double dist = 0.0;
    if (ins.changed) {
      std::vector<Objectives> next = archive.features();
      if (!snapshot.empty()) dist = mmd(snapshot, next);
      snapshot = std::move(next);
    }
    archive.mmd_history.push_back(dist);
    archive.iterations = t;
    if (observer) observer(t, s, archive);

    if (b == pool) break; // a single feasible subset
    if (t % cfg.p_inv == 0) {
      archive.checkpoint_stats.push_back(window_stats(archive.mmd_history, cfg.s_w));
      if (cfg.early_stop && early_stop_check(archive.checkpoint_stats, cfg.s_w)) {
        archive.stopped_early = true;
        break;
      }
    }
  }
  res.chosen = final_select(archive);
  return res;
}

// ---------------------------------------------------------------------------
// Pre-selection
// ---------------------------------------------------------------------------

namespace detail {

// Positions (from `candidates`) not strictly dominated under per-sample
// (u, m). Sort by u descending; a point is on the front iff its m is the
// maximum of its equal-u group and exceeds every m seen at strictly larger u.
inline std::vector<std::size_t> first_front(const ScoreTable& table, std::span<const std::size_t> candidates) {
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (table.u[a] != table.u[b]) return table.u[a] > table.u[b];
    if (table.m[a] != table.m[b]) return table.m[a] > table.m[b];
    return a < b;
  });
  std::vector<std::size_t> front;
  double best_above = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && table.u[order[j]] == table.u[order[i]]) ++j;
    const double group_max = table.m[order[i]];
    if (group_max > best_above)
      for (std::size_t k = i; k < j && table.m[order[k]] == group_max; ++k) front.push_back(order[k]);
    best_above = std::max(best_above, group_max);
    i = j;
  }
  std::sort(front.begin(), front.end());
  return front;
}

} // namespace detail

// Peels successive non-dominated fronts of the per-sample scores until at
// least s_m positions are collected (or the pool runs out). Sorted output.
inline std::vector<std::size_t> pre_select(const ScoreTable& table, std::size_t s_m) {
  if (s_m < 1) throw UsageError("pre_select: s_m must be >= 1");
  std::vector<std::size_t> remaining(table.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  while (chosen.size() < s_m && !remaining.empty()) {
    const auto front = detail::first_front(table, remaining);
    chosen.insert(chosen.end(), front.begin(), front.end());
    std::vector<std::size_t> rest;
    rest.reserve(remaining.size() - front.size());
    std::set_difference(remaining.begin(), remaining.end(), front.begin(), front.end(), std::back_inserter(rest));
    remaining = std::move(rest);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Restricts a table to the given positions (kept in the given order).
inline ScoreTable subtable(const ScoreTable& table, std::span<const std::size_t> positions) {
  ScoreTable out;
  out.degenerate_u = table.degenerate_u;
  for (std::size_t p : positions) {
    out.unlabeled.push_back(table.unlabeled.at(p));
    out.u.push_back(table.u.at(p));
    out.m.push_back(table.m.at(p));
    if (!table.raw_m.empty()) out.raw_m.push_back(table.raw_m.at(p));
  }
  return out;
}

} // namespace poal

#pragma once

// Brute-force reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cstddef>
#include <random>
#include <set>
#include <vector>

#include "poal/acquisition.hpp"

namespace oracle {

using Subset = std::vector<std::size_t>;

struct Scored {
  Subset idx;
  double u = 0.0, m = 0.0;
};

inline void combinations(std::size_t n, std::size_t b, std::size_t start, Subset& cur, std::vector<Subset>& out) {
  if (cur.size() == b) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = start; i < n; ++i) {
    cur.push_back(i);
    combinations(n, b, i + 1, cur, out);
    cur.pop_back();
  }
}

inline std::vector<Subset> all_subsets(std::size_t n, std::size_t b) {
  std::vector<Subset> out;
  Subset cur;
  combinations(n, b, 0, cur, out);
  return out;
}

inline bool dominates(double au, double am, double bu, double bm) {
  return au >= bu && am >= bm && (au > bu || am > bm);
}

// Subsets not strictly dominated by any other subset, sorted lexicographically.
inline std::vector<Subset> pareto_subsets(const std::vector<double>& u, const std::vector<double>& m, std::size_t b) {
  std::vector<Scored> all;
  for (auto& s : all_subsets(u.size(), b)) {
    Scored sc{s};
    for (std::size_t i : s) {
      sc.u += u[i];
      sc.m += m[i];
    }
    all.push_back(sc);
  }
  std::vector<Subset> out;
  for (const auto& a : all) {
    bool dominated = false;
    for (const auto& c : all)
      if (dominates(c.u, c.m, a.u, a.m)) {
        dominated = true;
        break;
      }
    if (!dominated) out.push_back(a.idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// argmax of sum over members of pairwise intersection sizes; lexicographic ties.
inline Subset best_by_overlap(const std::vector<Subset>& members) {
  Subset best;
  std::size_t best_f = 0;
  for (const auto& s : members) {
    std::size_t f = 0;
    for (const auto& t : members)
      for (std::size_t i : s) f += std::count(t.begin(), t.end(), i);
    if (best.empty() || f > best_f || (f == best_f && s < best)) {
      best = s;
      best_f = f;
    }
  }
  return best;
}

// Non-dominated sorting by repeated pairwise scans: layer number per point.
inline std::vector<int> layers(const std::vector<double>& u, const std::vector<double>& m) {
  const std::size_t n = u.size();
  std::vector<int> layer(n, -1);
  std::size_t assigned = 0;
  for (int l = 0; assigned < n; ++l) {
    std::vector<std::size_t> now;
    for (std::size_t i = 0; i < n; ++i) {
      if (layer[i] >= 0) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < n && !dominated; ++j)
        if (layer[j] < 0 && dominates(u[j], m[j], u[i], m[i])) dominated = true;
      if (!dominated) now.push_back(i);
    }
    for (std::size_t i : now) layer[i] = l;
    assigned += now.size();
  }
  return layer;
}

// Union of leading layers until at least s_m points are included.
inline Subset leading_layers(const std::vector<double>& u, const std::vector<double>& m, std::size_t s_m) {
  const auto layer = layers(u, m);
  Subset out;
  for (int l = 0; out.size() < s_m && out.size() < u.size(); ++l)
    for (std::size_t i = 0; i < u.size(); ++i)
      if (layer[i] == l) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

inline poal::ScoreTable table_from(const std::vector<double>& u, const std::vector<double>& m) {
  poal::ScoreTable t;
  t.u = u;
  t.m = m;
  t.raw_m = m;
  for (std::size_t i = 0; i < u.size(); ++i) t.unlabeled.push_back(i);
  return t;
}

// Random table: u a normalized density, m in [0, 1].
inline poal::ScoreTable random_table(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> u(n), m(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = d(rng);
    m[i] = d(rng);
    total += u[i];
  }
  for (double& v : u) v /= total;
  return table_from(u, m);
}

} // namespace oracle

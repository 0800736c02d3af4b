#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "poal/data.hpp"
#include "poal/error.hpp"
#include "poal/idscore.hpp"
#include "poal/learner.hpp"

namespace poal {

// Per-unlabeled-sample querying density `u` and normalized ID confidence `m`,
// aligned with `unlabeled` (dataset row indices).
struct ScoreTable {
  std::vector<std::size_t> unlabeled;
  std::vector<double> u;
  std::vector<double> m;
  std::vector<double> raw_m;    // ID confidence before normalization
  bool degenerate_u = false;    // acquisition was all zero; u fell back to uniform

  std::size_t size() const { return unlabeled.size(); }

  void validate() const {
    if (u.size() != unlabeled.size() || m.size() != unlabeled.size())
      throw UsageError("score table vectors are misaligned");
    double total = 0.0;
    for (double v : u) {
      if (!(v >= 0.0)) throw UsageError("querying density has a negative entry");
      total += v;
    }
    if (!u.empty() && std::abs(total - 1.0) > 1e-9) throw UsageError("querying density does not sum to 1");
    for (double v : m)
      if (!(v >= 0.0 && v <= 1.0)) throw UsageError("ID confidence outside [0, 1]");
  }
};

// Natural-log entropy per row; 0 ln 0 = 0.
inline std::vector<double> entropy_scores(const Eigen::MatrixXd& probs) {
  std::vector<double> out(static_cast<std::size_t>(probs.rows()), 0.0);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const double p = probs(i, k);
      if (p < 0.0) throw UsageError("entropy_scores: negative probability");
      if (p > 0.0) h -= p * std::log(p);
    }
    out[static_cast<std::size_t>(i)] = std::max(h, 0.0);
  }
  return out;
}

// 1 - (p_(1) - p_(2)); larger means more ambiguous.
inline std::vector<double> margin_scores(const Eigen::MatrixXd& probs) {
  if (probs.cols() < 2) throw UsageError("margin_scores needs K >= 2");
  std::vector<double> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double first = -1.0, second = -1.0;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      const double p = probs(i, k);
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    out[static_cast<std::size_t>(i)] = 1.0 - (first - second);
  }
  return out;
}

struct Density {
  std::vector<double> u;
  bool degenerate = false;
};

// u_i = a_i / sum(a); an all-zero input yields the uniform density, flagged.
inline Density querying_density(std::span<const double> alpha) {
  Density out;
  double total = 0.0;
  for (double a : alpha) {
    if (!std::isfinite(a)) throw NumericError("querying_density: non-finite score");
    if (a < 0.0) throw UsageError("querying_density: negative score");
    total += a;
  }
  out.u.resize(alpha.size());
  if (total == 0.0) {
    out.degenerate = true;
    std::fill(out.u.begin(), out.u.end(), alpha.empty() ? 0.0 : 1.0 / static_cast<double>(alpha.size()));
    return out;
  }
  for (std::size_t i = 0; i < alpha.size(); ++i) out.u[i] = alpha[i] / total;
  return out;
}

enum class Acquisition { Entropy, Margin, Mahalanobis, Random };

inline std::string to_string(Acquisition a) {
  switch (a) {
  case Acquisition::Entropy: return "entropy";
  case Acquisition::Margin: return "margin";
  case Acquisition::Mahalanobis: return "maha";
  case Acquisition::Random: return "random";
  }
  return "?";
}

inline ScoreTable build_score_table(const ClassifierModel& model, const IdModel& id_model, const Dataset& ds,
                                    const PoolState& pool, Acquisition acq, std::mt19937_64& rng) {
  if (pool.unlabeled().empty()) throw UsageError("build_score_table: unlabeled pool is empty");
  ScoreTable table;
  table.unlabeled = pool.unlabeled();
  std::vector<Eigen::Index> rows(table.unlabeled.begin(), table.unlabeled.end());
  const Eigen::MatrixXd X = ds.features(rows, Eigen::all);

  table.raw_m = id_confidence(id_model, X);
  table.m = normalize_scores(table.raw_m);

  std::vector<double> alpha;
  switch (acq) {
  case Acquisition::Entropy:
    alpha = entropy_scores(predict_proba(model, X));
    break;
  case Acquisition::Margin:
    alpha = margin_scores(predict_proba(model, X));
    break;
  case Acquisition::Mahalanobis: {
    const double lo = *std::min_element(table.raw_m.begin(), table.raw_m.end());
    alpha.resize(table.raw_m.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = table.raw_m[i] - lo;
    break;
  }
  case Acquisition::Random: {
    std::uniform_real_distribution<double> draw(0.0, 1.0);
    alpha.resize(table.size());
    for (double& a : alpha) a = draw(rng);
    break;
  }
  }
  Density density = querying_density(alpha);
  table.u = std::move(density.u);
  table.degenerate_u = density.degenerate;
  return table;
}

} // namespace poal

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "poal/data.hpp"
#include "poal/error.hpp"

namespace poal {

// SPD covariance with its Cholesky factor and log-determinant.
struct FactoredCovariance {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd lower; // cov = lower * lower^T
  double log_det = 0.0;
  bool diagonal = false;

  FactoredCovariance() = default;
  explicit FactoredCovariance(Eigen::MatrixXd sigma, bool is_diagonal = false)
      : cov(std::move(sigma)), diagonal(is_diagonal) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
    lower = llt.matrixL();
    log_det = 2.0 * lower.diagonal().array().log().sum();
    if (!std::isfinite(log_det)) throw NumericError("covariance log-determinant is not finite");
  }

  Eigen::Index dims() const { return cov.rows(); }
};

// Adds (1e-6 * trace/d + 1e-10) * I.
inline Eigen::MatrixXd regularize_covariance(Eigen::MatrixXd sigma) {
  const double d = static_cast<double>(sigma.rows());
  const double floor = 1e-6 * sigma.trace() / d + 1e-10;
  sigma.diagonal().array() += floor;
  return sigma;
}

// (x - mu)^T Sigma^{-1} (x - mu) via a triangular solve.
inline double mahalanobis_sq(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& mu, const FactoredCovariance& sigma) {
  if (x.size() != mu.size() || x.size() != sigma.dims()) throw UsageError("mahalanobis_sq: dimension mismatch");
  const Eigen::VectorXd z = sigma.lower.triangularView<Eigen::Lower>().solve(x - mu);
  return z.squaredNorm();
}

// ---------------------------------------------------------------------------
// Class-conditional Gaussian mixtures
// ---------------------------------------------------------------------------

struct GmmConfig {
  std::size_t c_max = 3;
  std::size_t max_iter = 200;
  double tol = 1e-6; // relative log-likelihood change
  std::uint64_t seed = 0;
};

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  FactoredCovariance cov;
};

struct ClassMixture {
  int label = 0;
  std::vector<GaussianComponent> components;
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::size_t iterations = 0;
  // Log-likelihood at initialization and after every EM step of the selected fit.
  std::vector<double> ll_history;
};

struct GmmModel {
  std::vector<ClassMixture> classes;
  std::vector<int> missing_classes; // ID classes with no labeled samples
  std::size_t dims = 0;
};

namespace detail {

inline double log_gaussian(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianComponent& c) {
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + c.cov.log_det + mahalanobis_sq(x, c.mean, c.cov));
}

inline Eigen::MatrixXd weighted_scatter(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                                        const Eigen::VectorXd& mean, double total) {
  const Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
  return (centered.transpose() * w.asDiagonal() * centered) / total;
}

inline FactoredCovariance make_covariance(Eigen::MatrixXd scatter, bool diagonal) {
  if (diagonal) scatter = Eigen::MatrixXd(scatter.diagonal().asDiagonal());
  return FactoredCovariance(regularize_covariance(std::move(scatter)), diagonal);
}

// E-step: responsibilities (n x C) and total log-likelihood.
inline double e_step(const Eigen::MatrixXd& X, const std::vector<GaussianComponent>& comps, Eigen::MatrixXd& resp) {
  const Eigen::Index n = X.rows();
  const Eigen::Index c = static_cast<Eigen::Index>(comps.size());
  resp.resize(n, c);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    for (Eigen::Index j = 0; j < c; ++j)
      resp(i, j) = std::log(comps[static_cast<std::size_t>(j)].weight) +
                   log_gaussian(x, comps[static_cast<std::size_t>(j)]);
    const double top = resp.row(i).maxCoeff();
    const double lse = top + std::log((resp.row(i).array() - top).exp().sum());
    resp.row(i) = (resp.row(i).array() - lse).exp();
    ll += lse;
  }
  return ll;
}

// Farthest-point seeding: the first mean is a seeded random sample, each
// following one the sample farthest from all chosen means (ties: lowest row).
inline std::vector<Eigen::Index> farthest_point_seeds(const Eigen::MatrixXd& X, std::size_t count,
                                                      std::mt19937_64& rng) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> seeds;
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  seeds.push_back(pick(rng));
  Eigen::VectorXd nearest = (X.rowwise() - X.row(seeds[0])).rowwise().squaredNorm();
  while (seeds.size() < count) {
    Eigen::Index best = 0;
    nearest.maxCoeff(&best);
    seeds.push_back(best);
    nearest = nearest.cwiseMin((X.rowwise() - X.row(best)).rowwise().squaredNorm());
  }
  return seeds;
}

struct EmResult {
  std::vector<GaussianComponent> components;
  std::vector<double> ll_history;
  std::size_t iterations = 0;
  bool ok = true;
};

inline EmResult run_em(const Eigen::MatrixXd& X, std::size_t n_comp, bool diagonal, const GmmConfig& cfg,
                       std::mt19937_64& rng) {
  const Eigen::Index n = X.rows();
  const double nd = static_cast<double>(n);
  EmResult res;

  const Eigen::VectorXd class_mean = X.colwise().mean().transpose();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const FactoredCovariance class_cov = make_covariance(weighted_scatter(X, ones, class_mean, nd), diagonal);
  for (Eigen::Index s : farthest_point_seeds(X, n_comp, rng))
    res.components.push_back({1.0 / static_cast<double>(n_comp), X.row(s).transpose(), class_cov});

  Eigen::MatrixXd resp;
  double ll = e_step(X, res.components, resp);
  res.ll_history.push_back(ll);
  for (; res.iterations < cfg.max_iter; ++res.iterations) {
    for (std::size_t j = 0; j < n_comp; ++j) {
      const Eigen::VectorXd w = resp.col(static_cast<Eigen::Index>(j));
      const double nk = w.sum();
      if (!(nk > 1e-10 * nd)) {
        res.ok = false; // component collapsed
        return res;
      }
      auto& comp = res.components[j];
      comp.weight = nk / nd;
      comp.mean = X.transpose() * w / nk;
      comp.cov = make_covariance(weighted_scatter(X, w, comp.mean, nk), diagonal);
    }
    const double next = e_step(X, res.components, resp);
    res.ll_history.push_back(next);
    const bool done = std::abs(next - ll) < cfg.tol * std::max(std::abs(ll), 1e-300);
    ll = next;
    if (done) {
      ++res.iterations;
      break;
    }
  }
  return res;
}

inline std::size_t free_parameters(std::size_t n_comp, std::size_t d, bool diagonal) {
  const std::size_t cov = diagonal ? d : d * (d + 1) / 2;
  return (n_comp - 1) + n_comp * (d + cov);
}

} // namespace detail

// Fits one mixture to the rows of X, choosing the component count in
// 1..c_max by BIC (ties go to fewer components). Fewer than d+1 samples
// switches to diagonal covariances.
inline ClassMixture fit_class_mixture(const Eigen::MatrixXd& X, int label, const GmmConfig& cfg) {
  if (X.rows() < 1) throw UsageError("fit_class_mixture: no samples");
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t d = static_cast<std::size_t>(X.cols());
  const bool diagonal = n < d + 1;
  const std::size_t c_top = std::max<std::size_t>(1, std::min(cfg.c_max, n));

  ClassMixture best;
  best.bic = std::numeric_limits<double>::infinity();
  for (std::size_t c = 1; c <= c_top; ++c) {
    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(label) * 131ULL + c);
    detail::EmResult em = detail::run_em(X, c, diagonal, cfg, rng);
    if (!em.ok) continue;
    const double ll = em.ll_history.back();
    const double bic = -2.0 * ll + static_cast<double>(detail::free_parameters(c, d, diagonal)) *
                                       std::log(static_cast<double>(n));
    if (bic < best.bic) {
      best.label = label;
      best.components = std::move(em.components);
      best.log_likelihood = ll;
      best.bic = bic;
      best.iterations = em.iterations;
      best.ll_history = std::move(em.ll_history);
    }
  }
  if (best.components.empty()) throw NumericError("no mixture fit succeeded for class " + std::to_string(label));
  return best;
}

inline GmmModel fit_gmm_per_class(const Eigen::MatrixXd& X, std::span<const int> y, int k_classes,
                                  const GmmConfig& cfg = {}) {
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw UsageError("label count does not match row count");
  GmmModel model;
  model.dims = static_cast<std::size_t>(X.cols());
  for (int k = 0; k < k_classes; ++k) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == k) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) {
      model.missing_classes.push_back(k);
      continue;
    }
    model.classes.push_back(fit_class_mixture(X(rows, Eigen::all), k, cfg));
  }
  if (model.classes.empty()) throw UsageError("fit_gmm_per_class: no class has labeled samples");
  return model;
}

namespace detail {

inline void labeled_matrix(const PoolState& pool, const Dataset& ds, Eigen::MatrixXd& X, std::vector<int>& y) {
  std::vector<Eigen::Index> rows;
  y.clear();
  for (const auto& [idx, label] : pool.labeled()) {
    rows.push_back(static_cast<Eigen::Index>(idx));
    y.push_back(label);
  }
  X = ds.features(rows, Eigen::all);
}

} // namespace detail

inline GmmModel fit_gmm_per_class(const PoolState& pool, const Dataset& ds, const GmmConfig& cfg = {}) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  detail::labeled_matrix(pool, ds, X, y);
  return fit_gmm_per_class(X, y, ds.k_classes, cfg);
}

// Per sample: max over classes and components of -mahalanobis_sq. Mixing
// weights play no role.
inline std::vector<double> id_confidence_gmm(const GmmModel& gmm, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != gmm.dims) throw UsageError("id_confidence_gmm: dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(X.rows()), -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    double& best = out[static_cast<std::size_t>(i)];
    for (const auto& cls : gmm.classes)
      for (const auto& comp : cls.components) best = std::max(best, -mahalanobis_sq(x, comp.mean, comp.cov));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Class means with one shared covariance
// ---------------------------------------------------------------------------

struct TiedGaussModel {
  std::vector<int> labels; // classes present, aligned with means
  std::vector<Eigen::VectorXd> means;
  FactoredCovariance shared;
};

inline TiedGaussModel fit_tied_gaussians(const Eigen::MatrixXd& X, std::span<const int> y, int k_classes) {
  if (X.rows() < 2) throw UsageError("fit_tied_gaussians needs at least 2 labeled samples");
  if (static_cast<Eigen::Index>(y.size()) != X.rows()) throw UsageError("label count does not match row count");
  const Eigen::Index d = X.cols();
  TiedGaussModel model;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < k_classes; ++k) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == k) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) continue;
    const Eigen::MatrixXd Xk = X(rows, Eigen::all);
    const Eigen::VectorXd mu = Xk.colwise().mean().transpose();
    const Eigen::MatrixXd centered = Xk.rowwise() - mu.transpose();
    scatter += centered.transpose() * centered;
    model.labels.push_back(k);
    model.means.push_back(mu);
  }
  scatter /= static_cast<double>(X.rows());
  if (scatter.trace() == 0.0)
    std::cerr << "warning: zero within-class scatter; shared covariance is the regularization floor\n";
  model.shared = FactoredCovariance(regularize_covariance(std::move(scatter)));
  return model;
}

inline TiedGaussModel fit_tied_gaussians(const PoolState& pool, const Dataset& ds) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  detail::labeled_matrix(pool, ds, X, y);
  return fit_tied_gaussians(X, y, ds.k_classes);
}

inline std::vector<double> id_confidence_tied(const TiedGaussModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.shared.dims()) throw UsageError("id_confidence_tied: dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(X.rows()), -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    for (const auto& mu : model.means)
      out[static_cast<std::size_t>(i)] = std::max(out[static_cast<std::size_t>(i)], -mahalanobis_sq(x, mu, model.shared));
  }
  return out;
}

using IdModel = std::variant<GmmModel, TiedGaussModel>;

inline std::vector<double> id_confidence(const IdModel& model, const Eigen::MatrixXd& X) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GmmModel>)
          return id_confidence_gmm(m, X);
        else
          return id_confidence_tied(m, X);
      },
      model);
}

// Affine map onto [0, 1] keeping larger-is-more-ID; constant input maps to 0.5.
inline std::vector<double> normalize_scores(std::span<const double> m) {
  if (m.empty()) throw UsageError("normalize_scores: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(m.begin(), m.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw NumericError("normalize_scores: non-finite score");
  std::vector<double> out(m.size(), 0.5);
  if (hi > lo)
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] - lo) / (hi - lo);
  return out;
}

} // namespace poal

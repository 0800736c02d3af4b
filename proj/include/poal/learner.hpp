#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "poal/error.hpp"

namespace poal {

struct LearnerConfig {
  double l2 = 1e-4;
  std::size_t max_iter = 500;
  double tol = 1e-6; // gradient max-norm
};

// Multinomial logistic regression. `weights` is K x (d+1); the last column is
// the bias.
struct ClassifierModel {
  Eigen::MatrixXd weights;
  int k_classes = 0;
  LearnerConfig config;
  std::size_t iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
  std::vector<double> loss_history; // one entry per accepted iterate, starting at W = 0

  std::size_t dims() const { return static_cast<std::size_t>(weights.cols()) - 1; }
};

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

namespace detail {

inline Eigen::MatrixXd linear_scores(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X) {
  const Eigen::Index d = weights.cols() - 1;
  Eigen::MatrixXd z = X * weights.leftCols(d).transpose();
  z.rowwise() += weights.col(d).transpose();
  return z;
}

inline void check_labels(std::span<const int> y, Eigen::Index rows, int k) {
  if (static_cast<Eigen::Index>(y.size()) != rows) throw UsageError("label count does not match row count");
  for (int v : y)
    if (v < 0 || v >= k) throw UsageError("training label " + std::to_string(v) + " outside [0, K)");
}

} // namespace detail

// Row-wise softmax with max subtraction.
inline Eigen::MatrixXd softmax_rows(Eigen::MatrixXd z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return z;
}

// Mean cross-entropy + (l2/2) * ||W without bias||^2, and its gradient.
inline LossGrad loss_and_grad(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& X,
                              std::span<const int> y, double l2) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index k = weights.rows();
  if (weights.cols() != d + 1) throw UsageError("weight/feature dimension mismatch");
  detail::check_labels(y, n, static_cast<int>(k));
  if (n == 0) throw UsageError("loss requires at least one sample");

  const Eigen::MatrixXd z = detail::linear_scores(weights, X);
  Eigen::MatrixXd p(n, k);
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zmax = z.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = z.row(i).array() - zmax;
    const double lse = std::log(shifted.array().exp().sum());
    ce -= shifted(y[static_cast<std::size_t>(i)]) - lse;
    p.row(i) = (shifted.array() - lse).exp().matrix();
  }
  for (Eigen::Index i = 0; i < n; ++i) p(i, y[static_cast<std::size_t>(i)]) -= 1.0;

  LossGrad out;
  const auto wf = weights.leftCols(d);
  out.loss = ce / static_cast<double>(n) + 0.5 * l2 * wf.squaredNorm();
  out.grad.resize(k, d + 1);
  out.grad.leftCols(d) = p.transpose() * X / static_cast<double>(n) + l2 * wf;
  out.grad.col(d) = p.colwise().sum().transpose() / static_cast<double>(n);
  return out;
}

inline LossGrad loss_and_grad(const ClassifierModel& model, const Eigen::MatrixXd& X, std::span<const int> y) {
  return loss_and_grad(model.weights, X, y, model.config.l2);
}

// Full-batch gradient descent from zero weights. A step is accepted only if
// it does not increase the loss; the step size halves until it does and
// doubles after each accepted step.
inline ClassifierModel fit(const Eigen::MatrixXd& X, std::span<const int> y, int k_classes,
                           const LearnerConfig& config = {}) {
  if (k_classes < 2) throw UsageError("classifier needs K >= 2");
  if (X.rows() < 1) throw UsageError("fit needs at least one labeled sample");
  if (!X.allFinite()) throw NumericError("non-finite training features");
  detail::check_labels(y, X.rows(), k_classes);

  ClassifierModel model;
  model.k_classes = k_classes;
  model.config = config;
  model.weights = Eigen::MatrixXd::Zero(k_classes, X.cols() + 1);

  LossGrad cur = loss_and_grad(model.weights, X, y, config.l2);
  model.loss_history.push_back(cur.loss);
  double step = 1.0;
  for (; model.iterations < config.max_iter; ++model.iterations) {
    model.grad_norm = cur.grad.cwiseAbs().maxCoeff();
    if (model.grad_norm <= config.tol) {
      model.converged = true;
      break;
    }
    bool accepted = false;
    while (step > 1e-16) {
      Eigen::MatrixXd trial = model.weights - step * cur.grad;
      LossGrad next = loss_and_grad(trial, X, y, config.l2);
      if (next.loss <= cur.loss) {
        model.weights = std::move(trial);
        cur = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break; // no descent possible at machine precision
    model.loss_history.push_back(cur.loss);
    step = std::min(step * 2.0, 1e6);
  }
  model.grad_norm = cur.grad.cwiseAbs().maxCoeff();
  if (model.grad_norm <= config.tol) model.converged = true;
  if (!model.weights.allFinite()) throw NumericError("training diverged to non-finite weights");
  return model;
}

inline Eigen::MatrixXd predict_proba(const ClassifierModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.dims())
    throw UsageError("feature dimension " + std::to_string(X.cols()) + " does not match model dimension " +
                     std::to_string(model.dims()));
  return softmax_rows(detail::linear_scores(model.weights, X));
}

inline std::vector<int> predict(const ClassifierModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd p = predict_proba(model, X);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&out[static_cast<std::size_t>(i)]);
  return out;
}

} // namespace poal

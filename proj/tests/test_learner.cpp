#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "poal/learner.hpp"

using namespace poal;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Central differences on every weight entry.
Eigen::MatrixXd numeric_grad(const Eigen::MatrixXd& W, const Eigen::MatrixXd& X, const std::vector<int>& y, double l2) {
  const double h = 1e-5;
  Eigen::MatrixXd g(W.rows(), W.cols());
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      Eigen::MatrixXd plus = W, minus = W;
      plus(i, j) += h;
      minus(i, j) -= h;
      g(i, j) = (loss_and_grad(plus, X, y, l2).loss - loss_and_grad(minus, X, y, l2).loss) / (2 * h);
    }
  return g;
}

} // namespace

TEST(Learner, ZeroIterationsGivesUniform) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 2, -1, 0, 4, 4;
  const std::vector<int> y{0, 1, 2};
  const ClassifierModel model = fit(X, y, 3, {1e-4, 0, 1e-6});
  EXPECT_TRUE(model.weights.isZero());
  const Eigen::MatrixXd p = predict_proba(model, X);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(p(i, k), 1.0 / 3.0);
}

TEST(Learner, SoftmaxClosedForm) {
  Eigen::MatrixXd z(1, 2);
  z << 0.0, std::log(3.0);
  const Eigen::MatrixXd p = softmax_rows(z);
  EXPECT_NEAR(p(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.75, 1e-15);
}

TEST(Learner, SoftmaxShiftInvariantAndStable) {
  Eigen::MatrixXd z(2, 3);
  z << 1.0, 2.0, 3.0, 1001.0, 1002.0, 1003.0;
  const Eigen::MatrixXd p = softmax_rows(z);
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR((p.row(0) - p.row(1)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(p.row(0).sum(), 1.0, 1e-15);
}

TEST(Learner, ZeroWeightLossIsLn2) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = random_matrix(7, 3, rng);
  const std::vector<int> y{0, 1, 1, 0, 1, 0, 0};
  const LossGrad lg = loss_and_grad(Eigen::MatrixXd::Zero(2, 4), X, y, 0.5);
  EXPECT_NEAR(lg.loss, std::log(2.0), 1e-15);
}

TEST(Learner, SingleSampleLossIsNegLogP) {
  Eigen::MatrixXd W(3, 3);
  W << 0.3, -0.2, 0.1, -0.5, 0.4, 0.0, 0.2, 0.2, -0.3;
  Eigen::MatrixXd X(1, 2);
  X << 1.5, -0.5;
  const std::vector<int> y{1};
  // independent oracle: explicit exponentials
  double z[3], denom = 0.0;
  for (int k = 0; k < 3; ++k) {
    z[k] = W(k, 0) * X(0, 0) + W(k, 1) * X(0, 1) + W(k, 2);
    denom += std::exp(z[k]);
  }
  const double p = std::exp(z[1]) / denom;
  EXPECT_NEAR(loss_and_grad(W, X, y, 0.0).loss, -std::log(p), 1e-14);
}

TEST(Learner, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 5 + rep, d = 1 + rep % 4, k = 2 + rep % 3;
    const Eigen::MatrixXd X = random_matrix(n, d, rng);
    const Eigen::MatrixXd W = random_matrix(k, d + 1, rng, 0.7);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % k;
    const double l2 = rep % 2 ? 0.3 : 0.0;
    const Eigen::MatrixXd g = loss_and_grad(W, X, y, l2).grad;
    const Eigen::MatrixXd fd = numeric_grad(W, X, y, l2);
    const double rel = (g - fd).cwiseAbs().maxCoeff() / std::max(1e-8, fd.cwiseAbs().maxCoeff());
    EXPECT_LT(rel, 1e-4);
  }
}

TEST(Learner, SeparableOneDimensionalPerfectAccuracy) {
  Eigen::MatrixXd X(8, 1);
  X << -4, -3, -2, -0.5, 0.5, 1, 3, 5;
  const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  const ClassifierModel model = fit(X, y, 2);
  // sign classifier oracle: x > 0 -> class 1
  const auto pred = predict(model, X);
  for (Eigen::Index i = 0; i < X.rows(); ++i) EXPECT_EQ(pred[static_cast<std::size_t>(i)], X(i, 0) > 0 ? 1 : 0);
}

TEST(Learner, LossHistoryNonIncreasing) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd X = random_matrix(40, 3, rng);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) y[static_cast<std::size_t>(i)] = (X(i, 0) + 0.5 * X(i, 1) > 0) + (X(i, 2) > 1);
  const ClassifierModel model = fit(X, y, 3);
  ASSERT_GE(model.loss_history.size(), 2u);
  for (std::size_t i = 1; i < model.loss_history.size(); ++i)
    EXPECT_LE(model.loss_history[i], model.loss_history[i - 1]);
}

TEST(Learner, DuplicatingRowsLeavesFitUnchanged) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd X = random_matrix(12, 2, rng);
  std::vector<int> y(12);
  for (int i = 0; i < 12; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) - X(i, 1) > 0.3 ? 1 : 0;
  Eigen::MatrixXd X2(24, 2);
  X2 << X, X;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  // Mean loss is unchanged by duplication, so the same l2 is the matched penalty.
  const LearnerConfig cfg{1e-2, 300, 1e-10};
  const ClassifierModel a = fit(X, y, 2, cfg);
  const ClassifierModel b = fit(X2, y2, 2, cfg);
  EXPECT_LT((a.weights - b.weights).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Learner, ConvergesOnOverlappingData) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd X = random_matrix(60, 2, rng);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = i % 2;
  const ClassifierModel model = fit(X, y, 2, {1e-2, 500, 1e-6});
  EXPECT_TRUE(model.converged);
  EXPECT_LE(model.grad_norm, 1e-6);
}

TEST(Learner, Errors) {
  Eigen::MatrixXd X(2, 1);
  X << 1, std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> y{0, 1};
  EXPECT_THROW(fit(X, y, 2), NumericError);
  X(1, 0) = 2;
  EXPECT_THROW(fit(X, std::vector<int>{0, 2}, 2), UsageError);
  EXPECT_THROW(fit(X, std::vector<int>{0}, 2), UsageError);
  const ClassifierModel model = fit(X, y, 2);
  EXPECT_THROW(predict_proba(model, Eigen::MatrixXd::Zero(1, 3)), UsageError);
}

#pragma once

// Split conformal prediction: sample quantiles, the calibrate step and symmetric
// prediction intervals built from an arbitrary monotone score transform.

#include "nfcp/core.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nfcp {

/// Exact fraction; equality compares the values, not the representation (18/20 == 9/10).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  Rational reduced() const;
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

  friend bool operator==(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
  }
};

/// n* = ceil((n + 1)(1 - alpha)). Products within 1e-9 of an integer are snapped to it,
/// so decimal alphas like 0.1 behave as the exact decimal would.
std::int64_t quantile_rank(std::int64_t n, double alpha);

/// ceil((n+1)(1-alpha)) / (n+1), the exact coverage of the split-CP interval.
/// Throws QuantileOutOfRange when n* > n.
Rational finite_sample_level(std::int64_t n, double alpha);

/// The n*-th smallest score (1-based, ties counted with multiplicity).
double sample_quantile(std::span<const double> scores, double alpha);

template <typename Derived>
double sample_quantile(const Eigen::DenseBase<Derived>& scores, double alpha) {
  const VectorXd copy = scores.derived().template cast<double>();
  return sample_quantile(std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())),
                         alpha);
}

/// A score transform b(A, x) that is strictly increasing in A with an x-independent codomain.
template <typename T>
concept ScoreTransform = requires(const T& t, double v, const Eigen::Ref<const VectorXd>& x) {
  { eval(t, v, x) } -> std::convertible_to<double>;
  { invert(t, v, x) } -> std::convertible_to<double>;
};

/// Transforms that can score a whole batch faster than row by row.
template <typename T>
concept BatchScoreTransform =
    ScoreTransform<T> && requires(const T& t, const VectorXd& a, const MatrixXd& features) {
      { eval_batch(t, a, features) } -> std::convertible_to<VectorXd>;
    };

/// B_n = b(A_n, X_n) for every row of `features`.
template <ScoreTransform T>
VectorXd transformed_scores(const T& transform, const VectorXd& residuals, const MatrixXd& features) {
  require(residuals.size() == features.rows(), ErrorCode::ShapeMismatch,
          "residual count differs from feature rows");
  if constexpr (BatchScoreTransform<T>) {
    return eval_batch(transform, residuals, features);
  } else {
    VectorXd out(residuals.size());
    for (Index i = 0; i < residuals.size(); ++i) {
      out(i) = eval(transform, residuals(i), features.row(i).transpose());
    }
    return out;
  }
}

struct PredictionInterval {
  double center = 0.0;
  double radius = 0.0;

  double lower() const { return center - radius; }
  double upper() const { return center + radius; }
  double size() const { return 2.0 * radius; }
  bool contains(double y) const { return std::abs(y - center) <= radius; }
};

template <ScoreTransform T>
struct CalibratedPredictor {
  T transform;
  double threshold_qb = 0.0;  // B-space threshold
  double alpha = 0.1;
  std::int64_t n_calib = 0;

  Rational level() const { return finite_sample_level(n_calib, alpha); }
};

/// Computes A_n = |y_n - f(x_n)|, B_n = b(A_n, x_n) and stores the sample quantile of B.
template <ScoreTransform T>
CalibratedPredictor<T> calibrate(T transform, const VectorXd& f_predictions, const VectorXd& labels,
                                 const MatrixXd& features, double alpha) {
  require(f_predictions.size() == labels.size() && labels.size() == features.rows(),
          ErrorCode::ShapeMismatch, "calibrate: predictions, labels and features must agree in length");
  require(labels.size() > 0, ErrorCode::EmptyDataset, "calibrate: empty calibration set");
  const VectorXd residuals = (labels - f_predictions).cwiseAbs();
  const VectorXd scores = transformed_scores(transform, residuals, features);
  for (Index i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores(i)), ErrorCode::NonFiniteScore,
            "calibration score " + std::to_string(i) + " is not finite");
  }
  CalibratedPredictor<T> cp{std::move(transform), 0.0, alpha, static_cast<std::int64_t>(scores.size())};
  cp.threshold_qb = sample_quantile(scores, alpha);
  return cp;
}

/// Symmetric interval f(x) +/- b^{-1}(Q_B, x).
template <ScoreTransform T>
PredictionInterval predict_interval(const CalibratedPredictor<T>& cp, double f_x,
                                    const Eigen::Ref<const VectorXd>& x) {
  const double radius = invert(cp.transform, cp.threshold_qb, x);
  require(std::isfinite(radius), ErrorCode::NonFiniteRadius, "interval radius overflowed");
  return {f_x, radius};
}

template <ScoreTransform T>
std::vector<PredictionInterval> predict_intervals(const CalibratedPredictor<T>& cp,
                                                  const VectorXd& f_predictions,
                                                  const MatrixXd& features) {
  require(f_predictions.size() == features.rows(), ErrorCode::ShapeMismatch,
          "predict_intervals: predictions and features must agree in length");
  std::vector<PredictionInterval> out;
  out.reserve(static_cast<std::size_t>(f_predictions.size()));
  for (Index i = 0; i < f_predictions.size(); ++i) {
    out.push_back(predict_interval(cp, f_predictions(i), features.row(i).transpose()));
  }
  return out;
}

}  // namespace nfcp

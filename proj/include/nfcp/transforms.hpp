#pragma once

// Conformity transforms b(A, x), strictly increasing in the absolute residual A.
//
//   Baseline  b = A                         (0, inf) -> (0, inf)
//   ER        b = A / s(x)                  (0, inf) -> (0, inf)
//   Gauss     b = log(A / s(x))             (0, inf) -> R
//   Uniform   b = logistic(A / s(x))        (0, inf) -> (1/2, 1)
//
// with s(x) = gamma + |g(x)|^p, p in {1, 2}, and g a trainable localizer.

#include "nfcp/core.hpp"
#include "nfcp/localizer.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace nfcp {

enum class Family { Baseline, ER, Gauss, Uniform };

std::string_view to_string(Family f);
Family parse_family(std::string_view name);

/// Residuals below this are floored before taking the Gauss logarithm.
inline constexpr double kMinResidual = 1e-12;

template <typename Scalar>
Scalar logistic(Scalar z) {
  using std::exp;
  return z >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-z)) : exp(z) / (Scalar(1) + exp(z));
}

/// log(1 + e^z) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::exp;
  using std::log1p;
  return z > Scalar(0) ? z + log1p(exp(-z)) : log1p(exp(z));
}

struct ConformityTransform {
  Family family = Family::Baseline;
  double gamma = 1e-3;
  int exponent = 1;
  std::optional<Localizer> localizer;  // absent for Baseline

  static ConformityTransform baseline() { return {}; }
  static ConformityTransform make(Family family, double gamma, Localizer localizer, int exponent = 1);

  /// s(x) = gamma + |g(x)|^p; 1 for Baseline.
  double scale(const Eigen::Ref<const VectorXd>& x) const;
  VectorXd scale_batch(const MatrixXd& features) const;

  /// Throws InvalidArgument when the parameters break the family's invariants.
  void validate() const;
};

/// s = gamma + |g|^p applied elementwise to localizer outputs.
VectorXd scale_from_localizer(const VectorXd& g, double gamma, int exponent);
/// ds/dg elementwise; the subgradient of |g| at 0 is 0.
VectorXd scale_derivative(const VectorXd& g, int exponent);

double eval(const ConformityTransform& t, double a, const Eigen::Ref<const VectorXd>& x);
double invert(const ConformityTransform& t, double b_val, const Eigen::Ref<const VectorXd>& x);
double jacobian(const ConformityTransform& t, double a, const Eigen::Ref<const VectorXd>& x);
VectorXd eval_batch(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features);

/// Same family formulas, with the scale already evaluated.
double eval_scaled(Family family, double a, double s);
double invert_scaled(Family family, double b_val, double s);
double jacobian_scaled(Family family, double a, double s);

/// b(A) = log A, an input-independent monotone transform.
struct LogScore {};
/// b(A) = -1 / A, an input-independent monotone transform.
struct NegReciprocalScore {};

inline double eval(LogScore, double a, const Eigen::Ref<const VectorXd>&) { return std::log(a); }
inline double invert(LogScore, double b, const Eigen::Ref<const VectorXd>&) { return std::exp(b); }
inline double eval(NegReciprocalScore, double a, const Eigen::Ref<const VectorXd>&) { return -1.0 / a; }
inline double invert(NegReciprocalScore, double b, const Eigen::Ref<const VectorXd>&) { return -1.0 / b; }

}  // namespace nfcp

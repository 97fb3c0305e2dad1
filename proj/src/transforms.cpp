#include "nfcp/transforms.hpp"

#include <algorithm>
#include <cctype>

namespace nfcp {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Baseline: return "baseline";
    case Family::ER: return "er";
    case Family::Gauss: return "gauss";
    case Family::Uniform: return "uniform";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "baseline") return Family::Baseline;
  if (lower == "er") return Family::ER;
  if (lower == "gauss") return Family::Gauss;
  if (lower == "uniform") return Family::Uniform;
  throw Error(ErrorCode::InvalidArgument, "unknown transform family '" + std::string(name) + "'");
}

ConformityTransform ConformityTransform::make(Family family, double gamma, Localizer localizer, int exponent) {
  ConformityTransform t;
  t.family = family;
  t.gamma = gamma;
  t.exponent = exponent;
  if (family != Family::Baseline) t.localizer = std::move(localizer);
  t.validate();
  return t;
}

void ConformityTransform::validate() const {
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument, "gamma must be positive");
  require(exponent == 1 || exponent == 2, ErrorCode::InvalidArgument, "exponent must be 1 or 2");
  require(family == Family::Baseline || localizer.has_value(), ErrorCode::InvalidArgument,
          std::string(to_string(family)) + " transform needs a localizer");
}

VectorXd scale_from_localizer(const VectorXd& g, double gamma, int exponent) {
  const auto mag = g.array().abs();
  if (exponent == 2) return (gamma + mag.square()).matrix();
  return (gamma + mag).matrix();
}

VectorXd scale_derivative(const VectorXd& g, int exponent) {
  if (exponent == 2) return 2.0 * g;
  return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

double ConformityTransform::scale(const Eigen::Ref<const VectorXd>& x) const {
  if (family == Family::Baseline) return 1.0;
  const double mag = std::abs(localize(*localizer, x));
  return gamma + (exponent == 2 ? mag * mag : mag);
}

VectorXd ConformityTransform::scale_batch(const MatrixXd& features) const {
  if (family == Family::Baseline) return VectorXd::Ones(features.rows());
  return scale_from_localizer(localize_batch(*localizer, features), gamma, exponent);
}

double eval_scaled(Family family, double a, double s) {
  require(a >= 0.0, ErrorCode::InvalidArgument, "conformity score must be non-negative");
  switch (family) {
    case Family::Baseline: return a;
    case Family::ER: return a / s;
    case Family::Gauss: return std::log(std::max(a, kMinResidual) / s);
    case Family::Uniform: return logistic(a / s);
  }
  return a;
}

double invert_scaled(Family family, double b_val, double s) {
  switch (family) {
    case Family::Baseline:
    case Family::ER:
      require(b_val >= 0.0, ErrorCode::OutOfCodomain, "negative threshold for a non-negative family");
      return family == Family::Baseline ? b_val : s * b_val;
    case Family::Gauss: return s * std::exp(b_val);
    case Family::Uniform:
      require(b_val > 0.5 && b_val < 1.0, ErrorCode::OutOfCodomain,
              "uniform threshold must lie in (1/2, 1), got " + std::to_string(b_val));
      return s * std::log(b_val / (1.0 - b_val));
  }
  return b_val;
}

double jacobian_scaled(Family family, double a, double s) {
  require(a > 0.0, ErrorCode::InvalidArgument, "jacobian needs a > 0");
  switch (family) {
    case Family::Baseline: return 1.0;
    case Family::ER: return 1.0 / s;
    case Family::Gauss: return 1.0 / a;
    case Family::Uniform: {
      const double sig = logistic(a / s);
      return sig * (1.0 - sig) / s;
    }
  }
  return 1.0;
}

double eval(const ConformityTransform& t, double a, const Eigen::Ref<const VectorXd>& x) {
  return eval_scaled(t.family, a, t.scale(x));
}

double invert(const ConformityTransform& t, double b_val, const Eigen::Ref<const VectorXd>& x) {
  return invert_scaled(t.family, b_val, t.scale(x));
}

double jacobian(const ConformityTransform& t, double a, const Eigen::Ref<const VectorXd>& x) {
  return jacobian_scaled(t.family, a, t.scale(x));
}

VectorXd eval_batch(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features) {
  require(residuals.size() == features.rows(), ErrorCode::ShapeMismatch,
          "residual count differs from feature rows");
  const VectorXd s = t.scale_batch(features);
  VectorXd out(residuals.size());
  for (Index i = 0; i < residuals.size(); ++i) out(i) = eval_scaled(t.family, residuals(i), s(i));
  return out;
}

}  // namespace nfcp

#include "nfcp/conformal.hpp"

#include <numeric>

namespace nfcp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::QuantileOutOfRange: return "QuantileOutOfRange";
    case ErrorCode::NonFiniteScore: return "NonFiniteScore";
    case ErrorCode::NonFiniteRadius: return "NonFiniteRadius";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LogOfZero: return "LogOfZero";
    case ErrorCode::OutOfCodomain: return "OutOfCodomain";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyPart: return "EmptyPart";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::MonotonicityViolated: return "MonotonicityViolated";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Rational Rational::reduced() const {
  const std::int64_t g = std::gcd(num, den);
  return g == 0 ? *this : Rational{num / g, den / g};
}

std::int64_t quantile_rank(std::int64_t n, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  require(n >= 0, ErrorCode::InvalidArgument, "negative sample count");
  const double x = static_cast<double>(n + 1) * (1.0 - alpha);
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return static_cast<std::int64_t>(nearest);
  return static_cast<std::int64_t>(std::ceil(x));
}

Rational finite_sample_level(std::int64_t n, double alpha) {
  const std::int64_t rank = quantile_rank(n, alpha);
  require(rank <= n, ErrorCode::QuantileOutOfRange,
          "n*=" + std::to_string(rank) + " exceeds the " + std::to_string(n) +
              " available scores; calibration set too small for alpha=" + std::to_string(alpha));
  return {rank, n + 1};
}

double sample_quantile(std::span<const double> scores, double alpha) {
  require(!scores.empty(), ErrorCode::EmptyDataset, "sample_quantile of an empty set");
  const auto n = static_cast<std::int64_t>(scores.size());
  const std::int64_t rank = finite_sample_level(n, alpha).num;
  std::vector<double> work(scores.begin(), scores.end());
  const auto nth = work.begin() + (rank - 1);
  std::nth_element(work.begin(), nth, work.end());
  return *nth;
}

}  // namespace nfcp

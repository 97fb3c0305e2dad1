#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace nfcp {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Row-major matrices are used where rows are samples and we hand out row views.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  QuantileOutOfRange,
  NonFiniteScore,
  NonFiniteRadius,
  NonFiniteLoss,
  LogOfZero,
  OutOfCodomain,
  ShapeMismatch,
  ParseError,
  EmptyDataset,
  EmptyPart,
  DegenerateLabels,
  TooFewSamples,
  MonotonicityViolated,
  InvalidArgument,
  Io,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` lets callers branch on the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace nfcp

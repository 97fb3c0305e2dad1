#pragma once

// Fully connected ReLU network with a linear scalar head, plus exact reverse-mode gradients.

#include "nfcp/core.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace nfcp {

struct MlpParams {
  std::vector<Index> layer_dims;  // input dim, hidden widths..., 1
  std::vector<MatrixXd> weights;  // weights[l] is layer_dims[l+1] x layer_dims[l]
  std::vector<VectorXd> biases;

  Index input_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
  std::size_t n_layers() const { return weights.size(); }
  Index n_params() const;

  /// All parameters in layer order: W_0 (row-major), c_0, W_1, c_1, ...
  VectorXd flatten() const;
  void unflatten(const VectorXd& flat);

  bool all_finite() const;

  static MlpParams zeros(std::vector<Index> dims);
  /// Weights uniform in +/- sqrt(6 / fan_in), biases uniform in +/- 1 / sqrt(fan_in).
  /// Nonzero biases matter: with zero biases and non-negative inputs the net is
  /// positively homogeneous in x and starts out linear on the input range.
  static MlpParams he_uniform(std::vector<Index> dims, std::uint64_t seed);
};

/// {input_dim, hidden, hidden, ..., 1}
std::vector<Index> mlp_dims(Index input_dim, const std::vector<Index>& hidden);

double forward(const MlpParams& p, const Eigen::Ref<const VectorXd>& x);

/// One output per row of `features`.
VectorXd forward_batch(const MlpParams& p, const MatrixXd& features);

/// Gradient of upstream * g(x) with respect to every parameter. ReLU'(0) is taken as 0.
MlpParams backward(const MlpParams& p, const Eigen::Ref<const VectorXd>& x, double upstream);

/// Sum over rows n of upstream(n) * dg(x_n)/dtheta.
MlpParams backward_batch(const MlpParams& p, const MatrixXd& features, const VectorXd& upstream);

/// One forward pass: the outputs g are handed to `upstream_of`, whose result is back-propagated.
MlpParams backward_batch(const MlpParams& p, const MatrixXd& features,
                         const std::function<VectorXd(const VectorXd&)>& upstream_of);

}  // namespace nfcp

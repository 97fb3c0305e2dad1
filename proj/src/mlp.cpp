#include "nfcp/mlp.hpp"

#include "nfcp/rng.hpp"

#include <cmath>

namespace nfcp {

namespace {

void check_input(const MlpParams& p, Index cols) {
  require(!p.weights.empty(), ErrorCode::ShapeMismatch, "MLP has no layers");
  require(cols == p.input_dim(), ErrorCode::ShapeMismatch,
          "MLP expects input dimension " + std::to_string(p.input_dim()) + ", got " +
              std::to_string(cols));
}

// Pre-activations per layer; samples are columns.
std::vector<MatrixXd> forward_pass(const MlpParams& p, const MatrixXd& inputs_by_column) {
  std::vector<MatrixXd> pre;
  pre.reserve(p.n_layers());
  MatrixXd h = inputs_by_column;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    MatrixXd z = p.weights[l] * h;
    z.colwise() += p.biases[l];
    if (l + 1 < p.n_layers()) h = z.cwiseMax(0.0);
    pre.push_back(std::move(z));
  }
  return pre;
}

}  // namespace

Index MlpParams::n_params() const {
  Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

VectorXd MlpParams::flatten() const {
  VectorXd flat(n_params());
  Index offset = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    Eigen::Map<RowMatrixXd>(flat.data() + offset, w.rows(), w.cols()) = w;
    offset += w.size();
    flat.segment(offset, biases[l].size()) = biases[l];
    offset += biases[l].size();
  }
  return flat;
}

void MlpParams::unflatten(const VectorXd& flat) {
  require(flat.size() == n_params(), ErrorCode::ShapeMismatch, "flat parameter vector has wrong length");
  Index offset = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l];
    w = Eigen::Map<const RowMatrixXd>(flat.data() + offset, w.rows(), w.cols());
    offset += w.size();
    biases[l] = flat.segment(offset, biases[l].size());
    offset += biases[l].size();
  }
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

MlpParams MlpParams::zeros(std::vector<Index> dims) {
  require(dims.size() >= 2 && dims.back() == 1, ErrorCode::ShapeMismatch,
          "MLP dims need an input and a scalar output");
  MlpParams p;
  p.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    require(p.layer_dims[l] > 0, ErrorCode::ShapeMismatch, "MLP layer widths must be positive");
    p.weights.push_back(MatrixXd::Zero(p.layer_dims[l + 1], p.layer_dims[l]));
    p.biases.push_back(VectorXd::Zero(p.layer_dims[l + 1]));
  }
  return p;
}

MlpParams MlpParams::he_uniform(std::vector<Index> dims, std::uint64_t seed) {
  MlpParams p = zeros(std::move(dims));
  Rng rng(seed);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    const auto fan_in = static_cast<double>(w.cols());
    const double limit = std::sqrt(6.0 / fan_in);
    // Fill row-major, then the bias, so the draw order matches the flattened layout.
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    const double bias_limit = 1.0 / std::sqrt(fan_in);
    for (Index r = 0; r < w.rows(); ++r) p.biases[l](r) = rng.uniform(-bias_limit, bias_limit);
  }
  return p;
}

std::vector<Index> mlp_dims(Index input_dim, const std::vector<Index>& hidden) {
  std::vector<Index> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  return dims;
}

double forward(const MlpParams& p, const Eigen::Ref<const VectorXd>& x) {
  check_input(p, x.size());
  VectorXd h = x;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    VectorXd z = p.weights[l] * h + p.biases[l];
    if (l + 1 == p.n_layers()) return z(0);
    h = z.cwiseMax(0.0);
  }
  return 0.0;  // unreachable: n_layers() >= 1
}

VectorXd forward_batch(const MlpParams& p, const MatrixXd& features) {
  check_input(p, features.cols());
  const auto pre = forward_pass(p, features.transpose());
  return pre.back().row(0).transpose();
}

MlpParams backward(const MlpParams& p, const Eigen::Ref<const VectorXd>& x, double upstream) {
  MatrixXd single = x.transpose();
  return backward_batch(p, single, VectorXd(VectorXd::Constant(1, upstream)));
}

MlpParams backward_batch(const MlpParams& p, const MatrixXd& features, const VectorXd& upstream) {
  require(upstream.size() == features.rows(), ErrorCode::ShapeMismatch,
          "upstream length differs from batch size");
  return backward_batch(p, features, [&](const VectorXd&) { return upstream; });
}

MlpParams backward_batch(const MlpParams& p, const MatrixXd& features,
                         const std::function<VectorXd(const VectorXd&)>& upstream_of) {
  check_input(p, features.cols());
  const MatrixXd inputs = features.transpose();
  const auto pre = forward_pass(p, inputs);
  const VectorXd upstream = upstream_of(pre.back().row(0).transpose());
  require(upstream.size() == features.rows(), ErrorCode::ShapeMismatch,
          "upstream length differs from batch size");

  MlpParams grad = MlpParams::zeros(p.layer_dims);
  MatrixXd delta = upstream.transpose();  // 1 x n
  for (std::size_t l = p.n_layers(); l-- > 0;) {
    if (l == 0) {
      grad.weights[0].noalias() = delta * inputs.transpose();
    } else {
      grad.weights[l].noalias() = delta * pre[l - 1].cwiseMax(0.0).transpose();
    }
    grad.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixXd back = p.weights[l].transpose() * delta;
      delta = (pre[l - 1].array() > 0.0).select(back, 0.0);
    }
  }
  return grad;
}

}  // namespace nfcp

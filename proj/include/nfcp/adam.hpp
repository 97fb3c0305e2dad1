#pragma once

#include "nfcp/core.hpp"
#include "nfcp/mlp.hpp"

#include <cstdint>

namespace nfcp {

/// ADAM moments over a flattened parameter vector (same layout as MlpParams::flatten).
struct AdamState {
  std::int64_t step_count = 0;
  VectorXd first_moment;
  VectorXd second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_adam = 1e-8;

  static AdamState for_size(Index n, double learning_rate) {
    AdamState s;
    s.first_moment = VectorXd::Zero(n);
    s.second_moment = VectorXd::Zero(n);
    s.learning_rate = learning_rate;
    return s;
  }
};

/// One bias-corrected ADAM update of `params` in place.
void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state);

void adam_step(MlpParams& params, const MlpParams& grad, AdamState& state);

}  // namespace nfcp

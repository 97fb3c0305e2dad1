#include "nfcp/adam.hpp"

#include <cmath>

namespace nfcp {

void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state) {
  require(params.size() == grad.size() && grad.size() == state.first_moment.size() &&
              grad.size() == state.second_moment.size(),
          ErrorCode::ShapeMismatch, "adam_step: parameter, gradient and moment sizes differ");
  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon_adam);
}

void adam_step(MlpParams& params, const MlpParams& grad, AdamState& state) {
  VectorXd flat = params.flatten();
  adam_step(flat, grad.flatten(), state);
  params.unflatten(flat);
}

}  // namespace nfcp

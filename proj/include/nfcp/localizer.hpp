#pragma once

// The trainable localizer g(x) behind the input-dependent scale s(x) = gamma + |g(x)|^p.

#include "nfcp/core.hpp"
#include "nfcp/mlp.hpp"

#include <functional>
#include <variant>

namespace nfcp {

/// g(x) = t1 x + t2 x^2 + t3 x^3 on the first feature; three parameters, no bias.
struct CubicLocalizer {
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
};

using Localizer = std::variant<MlpParams, CubicLocalizer>;

double localize(const Localizer& loc, const Eigen::Ref<const VectorXd>& x);
VectorXd localize_batch(const Localizer& loc, const MatrixXd& features);

/// Flat gradient of sum_n upstream(n) * g(x_n) in the layout of `parameters(loc)`.
VectorXd localizer_gradient(const Localizer& loc, const MatrixXd& features, const VectorXd& upstream);

/// Same, with the upstream weights computed from the outputs g of the same forward pass.
VectorXd localizer_gradient(const Localizer& loc, const MatrixXd& features,
                            const std::function<VectorXd(const VectorXd&)>& upstream_of);

VectorXd parameters(const Localizer& loc);
void set_parameters(Localizer& loc, const VectorXd& flat);
Index n_params(const Localizer& loc);

}  // namespace nfcp

#include "nfcp/localizer.hpp"

namespace nfcp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Eigen::Vector3d cubic_features(double x) { return {x, x * x, x * x * x}; }

}  // namespace

double localize(const Localizer& loc, const Eigen::Ref<const VectorXd>& x) {
  return std::visit(overloaded{
                        [&](const MlpParams& p) { return forward(p, x); },
                        [&](const CubicLocalizer& c) {
                          require(x.size() >= 1, ErrorCode::ShapeMismatch, "cubic localizer needs a feature");
                          return c.theta.dot(cubic_features(x(0)));
                        },
                    },
                    loc);
}

VectorXd localize_batch(const Localizer& loc, const MatrixXd& features) {
  return std::visit(overloaded{
                        [&](const MlpParams& p) { return forward_batch(p, features); },
                        [&](const CubicLocalizer& c) {
                          require(features.cols() >= 1, ErrorCode::ShapeMismatch,
                                  "cubic localizer needs a feature");
                          const auto x = features.col(0).array();
                          VectorXd g = (c.theta(0) * x + c.theta(1) * x.square() + c.theta(2) * x.cube()).matrix();
                          return g;
                        },
                    },
                    loc);
}

VectorXd localizer_gradient(const Localizer& loc, const MatrixXd& features, const VectorXd& upstream) {
  return std::visit(overloaded{
                        [&](const MlpParams& p) -> VectorXd {
                          return backward_batch(p, features, upstream).flatten();
                        },
                        [&](const CubicLocalizer&) -> VectorXd {
                          require(upstream.size() == features.rows(), ErrorCode::ShapeMismatch,
                                  "upstream length differs from batch size");
                          const auto x = features.col(0).array();
                          const auto u = upstream.array();
                          return Eigen::Vector3d((u * x).sum(), (u * x.square()).sum(), (u * x.cube()).sum());
                        },
                    },
                    loc);
}

VectorXd localizer_gradient(const Localizer& loc, const MatrixXd& features,
                            const std::function<VectorXd(const VectorXd&)>& upstream_of) {
  if (const auto* mlp = std::get_if<MlpParams>(&loc)) return backward_batch(*mlp, features, upstream_of).flatten();
  return localizer_gradient(loc, features, upstream_of(localize_batch(loc, features)));
}

VectorXd parameters(const Localizer& loc) {
  return std::visit(overloaded{
                        [](const MlpParams& p) -> VectorXd { return p.flatten(); },
                        [](const CubicLocalizer& c) -> VectorXd { return c.theta; },
                    },
                    loc);
}

void set_parameters(Localizer& loc, const VectorXd& flat) {
  std::visit(overloaded{
                 [&](MlpParams& p) { p.unflatten(flat); },
                 [&](CubicLocalizer& c) {
                   require(flat.size() == 3, ErrorCode::ShapeMismatch, "cubic localizer has 3 parameters");
                   c.theta = flat;
                 },
             },
             loc);
}

Index n_params(const Localizer& loc) {
  return std::visit(overloaded{
                        [](const MlpParams& p) { return p.n_params(); },
                        [](const CubicLocalizer&) { return Index{3}; },
                    },
                    loc);
}

}  // namespace nfcp

#include "nfcp/training.hpp"

#include "nfcp/data.hpp"
#include "nfcp/adam.hpp"
#include "nfcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nfcp {

double default_learning_rate(Family family) {
  switch (family) {
    case Family::ER: return 1e-2;
    case Family::Gauss: return 1e-4;
    case Family::Uniform: return 1e-5;
    case Family::Baseline: return 1e-3;  // unused
  }
  return 1e-3;
}

TrainConfig TrainConfig::defaults(Family family) {
  TrainConfig cfg;
  cfg.family = family;
  cfg.learning_rate = default_learning_rate(family);
  return cfg;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be positive");
  require(iterations > 0, ErrorCode::InvalidArgument, "iterations must be positive");
  require(gamma > 0.0, ErrorCode::InvalidArgument, "gamma must be positive");
  require(exponent == 1 || exponent == 2, ErrorCode::InvalidArgument, "exponent must be 1 or 2");
  require(batch_size >= 0, ErrorCode::InvalidArgument, "batch_size must be >= 0");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorCode::InvalidArgument,
          "holdout_fraction must lie in [0, 1)");
  require(patience > 0, ErrorCode::InvalidArgument, "patience must be positive");
  for (Index w : hidden) require(w > 0, ErrorCode::InvalidArgument, "hidden widths must be positive");
}

double er_loss(const VectorXd& g_out, const VectorXd& residuals) {
  return er_loss_grad(g_out, residuals, 1).loss;
}

LossGrad er_loss_grad(const VectorXd& g_out, const VectorXd& residuals, int exponent) {
  require(g_out.size() == residuals.size() && g_out.size() > 0, ErrorCode::ShapeMismatch,
          "er_loss: inputs must be non-empty and of equal length");
  const auto n = static_cast<double>(g_out.size());
  const auto mag = g_out.array().abs();
  const Eigen::ArrayXd fitted = exponent == 2 ? mag.square().eval() : mag.eval();
  const Eigen::ArrayXd target = exponent == 2 ? residuals.array().square().eval() : residuals.array().eval();
  const Eigen::ArrayXd diff = fitted - target;
  LossGrad out;
  out.loss = diff.square().sum() / n;
  out.dloss_dg = ((2.0 / n) * diff * scale_derivative(g_out, exponent).array()).matrix();
  return out;
}

LossGrad nf_loss_grad(Family family, const VectorXd& g_out, const VectorXd& residuals, double gamma,
                      int exponent) {
  require(family == Family::Gauss || family == Family::Uniform, ErrorCode::InvalidArgument,
          "likelihood loss is defined for the gauss and uniform families");
  require(g_out.size() == residuals.size() && g_out.size() > 0, ErrorCode::ShapeMismatch,
          "nf loss: inputs must be non-empty and of equal length");
  const auto n = static_cast<double>(g_out.size());
  const VectorXd s = scale_from_localizer(g_out, gamma, exponent);
  VectorXd dloss_ds(s.size());
  double total = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    const double a = residuals(i);
    if (family == Family::Gauss) {
      const double b = std::log(std::max(a, kMinResidual) / s(i));
      total += 0.5 * b * b;
      dloss_ds(i) = -b / s(i);
    } else {
      const double z = a / s(i);
      total += softplus(-z) + softplus(z) + std::log(s(i));
      dloss_ds(i) = (1.0 - 2.0 * logistic(z)) * a / (s(i) * s(i)) + 1.0 / s(i);
    }
  }
  LossGrad out;
  out.loss = total / n;
  out.dloss_dg = (dloss_ds.array() * scale_derivative(g_out, exponent).array() / n).matrix();
  return out;
}

namespace {

LossGrad family_loss(const ConformityTransform& t, const VectorXd& g, const VectorXd& residuals) {
  if (t.family == Family::ER) return er_loss_grad(g, residuals, t.exponent);
  return nf_loss_grad(t.family, g, residuals, t.gamma, t.exponent);
}

}  // namespace

double nf_negloglik(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features) {
  require(t.family == Family::Gauss || t.family == Family::Uniform, ErrorCode::InvalidArgument,
          "nf_negloglik needs a gauss or uniform transform");
  const double loss = training_loss(t, residuals, features);
  require(std::isfinite(loss), ErrorCode::NonFiniteLoss, "negative log-likelihood is not finite");
  return loss;
}

double training_loss(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features) {
  require(t.family != Family::Baseline, ErrorCode::InvalidArgument, "baseline transform has no loss");
  const VectorXd g = localize_batch(*t.localizer, features);
  return family_loss(t, g, residuals).loss;
}

VectorXd training_gradient(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features) {
  return training_objective(t, residuals, features).gradient;
}

Objective training_objective(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features) {
  require(t.family != Family::Baseline, ErrorCode::InvalidArgument, "baseline transform has no loss");
  Objective out;
  out.gradient = localizer_gradient(*t.localizer, features, [&](const VectorXd& g) {
    LossGrad lg = family_loss(t, g, residuals);
    out.loss = lg.loss;
    return std::move(lg.dloss_dg);
  });
  return out;
}

ConformityTransform initial_transform(const TrainConfig& cfg, Index input_dim) {
  if (cfg.family == Family::Baseline) return ConformityTransform::baseline();
  Localizer loc;
  if (cfg.localizer == LocalizerKind::Cubic) {
    Rng rng(derive_seed(cfg.seed, 1));
    CubicLocalizer c;
    for (Index i = 0; i < 3; ++i) c.theta(i) = rng.uniform(-1.0, 1.0);
    loc = c;
  } else {
    loc = MlpParams::he_uniform(mlp_dims(input_dim, cfg.hidden), derive_seed(cfg.seed, 1));
  }
  return ConformityTransform::make(cfg.family, cfg.gamma, std::move(loc), cfg.exponent);
}

TrainResult train_transform(const TrainConfig& cfg, const MatrixXd& features, const VectorXd& residuals) {
  cfg.validate();
  require(features.rows() == residuals.size(), ErrorCode::ShapeMismatch,
          "train_transform: features and residuals differ in length");
  require(residuals.size() > 0, ErrorCode::EmptyDataset, "train_transform: empty training set");
  require((residuals.array() >= 0.0).all(), ErrorCode::InvalidArgument, "residuals must be non-negative");

  TrainResult result{initial_transform(cfg, features.cols()), {}, {}, -1, 0};
  if (cfg.family == Family::Baseline) return result;

  // Seeded shuffle, then the last holdout share monitors early stopping.
  const Index n = residuals.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(cfg.seed, 2));
  for (Index i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
  }
  auto n_hold = static_cast<Index>(std::floor(cfg.holdout_fraction * static_cast<double>(n)));
  if (n - n_hold < 1) n_hold = 0;
  const Index n_fit = n - n_hold;
  MatrixXd fit_x(n_fit, features.cols()), hold_x(n_hold, features.cols());
  VectorXd fit_a(n_fit), hold_a(n_hold);
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    if (i < n_fit) {
      fit_x.row(i) = features.row(src);
      fit_a(i) = residuals(src);
    } else {
      hold_x.row(i - n_fit) = features.row(src);
      hold_a(i - n_fit) = residuals(src);
    }
  }

  ConformityTransform current = result.transform;
  VectorXd theta = parameters(*current.localizer);
  VectorXd best_theta = theta;
  AdamState adam = AdamState::for_size(theta.size(), cfg.learning_rate);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;

  const bool mini = cfg.batch_size > 0 && cfg.batch_size < n_fit;
  std::vector<Index> batch_order(static_cast<std::size_t>(n_fit));
  std::iota(batch_order.begin(), batch_order.end(), Index{0});
  Index cursor = n_fit;
  MatrixXd batch_x;
  VectorXd batch_a;

  for (int it = 0; it < cfg.iterations; ++it) {
    Objective step;
    if (mini) {
      if (cursor + cfg.batch_size > n_fit) {
        for (Index i = n_fit - 1; i > 0; --i) {
          std::swap(batch_order[static_cast<std::size_t>(i)],
                    batch_order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
        }
        cursor = 0;
      }
      batch_x.resize(cfg.batch_size, features.cols());
      batch_a.resize(cfg.batch_size);
      for (Index i = 0; i < cfg.batch_size; ++i) {
        const Index src = batch_order[static_cast<std::size_t>(cursor + i)];
        batch_x.row(i) = fit_x.row(src);
        batch_a(i) = fit_a(src);
      }
      cursor += cfg.batch_size;
      step = training_objective(current, batch_a, batch_x);
    } else {
      step = training_objective(current, fit_a, fit_x);
    }
    const double fit_loss = step.loss;
    double monitored = fit_loss;
    if (n_hold > 0) {
      monitored = training_loss(current, hold_a, hold_x);
    } else if (mini) {
      monitored = training_loss(current, fit_a, fit_x);
    }
    require(std::isfinite(fit_loss) && std::isfinite(monitored), ErrorCode::NonFiniteLoss,
            "loss became non-finite at iteration " + std::to_string(it));
    result.loss_history.push_back(monitored);
    if (monitored < best) {
      best = monitored;
      best_theta = theta;
      result.best_iteration = it;
      since_best = 0;
    } else if (++since_best >= cfg.patience && n_hold > 0) {
      result.best_loss_history.push_back(best);
      result.iterations_run = it + 1;
      break;
    }
    result.best_loss_history.push_back(best);
    result.iterations_run = it + 1;

    require(step.gradient.allFinite(), ErrorCode::NonFiniteLoss,
            "gradient became non-finite at iteration " + std::to_string(it));
    adam_step(theta, step.gradient, adam);
    set_parameters(*current.localizer, theta);
  }

  set_parameters(*result.transform.localizer, best_theta);
  return result;
}

TrainResult train_transform(const TrainConfig& cfg, const Dataset& train_set, const VectorXd& f_predictions) {
  require(f_predictions.size() == train_set.labels.size(), ErrorCode::ShapeMismatch,
          "train_transform: predictions and labels differ in length");
  return train_transform(cfg, train_set.features, (train_set.labels - f_predictions).cwiseAbs());
}

}  // namespace nfcp

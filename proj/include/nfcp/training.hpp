#pragma once

// Training objectives for the localizer and the ADAM loop that turns them into a transform.
//
// ER fits |g(x)|^p to the residual magnitude A^p (least squares). Gauss and Uniform maximise
// the change-of-variables likelihood of b(A, x) under a standard normal / Uniform([0, 1])
// target; terms that do not depend on the parameters are dropped from the reported loss.

#include "nfcp/core.hpp"
#include "nfcp/transforms.hpp"

#include <cstdint>
#include <vector>

namespace nfcp {

struct Dataset;

enum class LocalizerKind { Mlp, Cubic };

struct TrainConfig {
  Family family = Family::Gauss;
  double gamma = 1e-3;
  double learning_rate = 1e-4;
  int iterations = 2000;
  Index batch_size = 0;  // 0 means full batch
  std::uint64_t seed = 0;
  int exponent = 1;
  LocalizerKind localizer = LocalizerKind::Mlp;
  std::vector<Index> hidden{100, 100, 100, 100, 100};
  double holdout_fraction = 0.2;  // early-stopping validation share; 0 disables
  int patience = 200;

  /// Defaults for a family, including its learning rate (ER 1e-2, Gauss 1e-4, Uniform 1e-5).
  static TrainConfig defaults(Family family);
  void validate() const;
};

double default_learning_rate(Family family);

struct LossGrad {
  double loss = 0.0;
  VectorXd dloss_dg;  // derivative of the loss with respect to each localizer output
};

/// mean_n (|g_n| - A_n)^2
double er_loss(const VectorXd& g_out, const VectorXd& residuals);

/// mean_n (|g_n|^p - A_n^p)^2 and its derivative in g.
LossGrad er_loss_grad(const VectorXd& g_out, const VectorXd& residuals, int exponent = 1);

/// Negative log-likelihood (parameter-dependent part) given localizer outputs.
///   Gauss:   mean_n b_n^2 / 2,             b_n = log(A_n / s_n)
///   Uniform: -mean_n [log sig(z_n) + log(1 - sig(z_n)) - log s_n],   z_n = A_n / s_n
LossGrad nf_loss_grad(Family family, const VectorXd& g_out, const VectorXd& residuals, double gamma,
                      int exponent = 1);

double nf_negloglik(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features);

/// Loss of the family's training objective at the transform's current parameters.
double training_loss(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features);

/// Gradient of `training_loss` with respect to the flat localizer parameters.
VectorXd training_gradient(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features);

struct Objective {
  double loss = 0.0;
  VectorXd gradient;
};

/// `training_loss` and `training_gradient` from a single forward pass.
Objective training_objective(const ConformityTransform& t, const VectorXd& residuals, const MatrixXd& features);

struct TrainResult {
  ConformityTransform transform;
  std::vector<double> loss_history;       // monitored loss per iteration
  std::vector<double> best_loss_history;  // running minimum of loss_history
  int best_iteration = -1;
  int iterations_run = 0;
};

/// Initial (untrained) transform for a config: seeded He-uniform MLP or a seeded cubic.
ConformityTransform initial_transform(const TrainConfig& cfg, Index input_dim);

/// Runs ADAM on the family objective and returns the parameters with the best monitored loss
/// (held-out loss when holdout_fraction > 0, training loss otherwise). Baseline returns the
/// identity transform without iterating.
TrainResult train_transform(const TrainConfig& cfg, const MatrixXd& features, const VectorXd& residuals);

TrainResult train_transform(const TrainConfig& cfg, const Dataset& train_set, const VectorXd& f_predictions);

}  // namespace nfcp

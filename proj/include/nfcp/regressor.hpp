#pragma once

// Base point predictors: a bagged CART regression forest and the synthetic-data oracle.

#include "nfcp/core.hpp"

#include <cstdint>
#include <vector>

namespace nfcp {

struct Dataset;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean
  int count = 0;       // training rows that reached the node
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const Eigen::Ref<const VectorXd>& x) const;
  int depth() const;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 5;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  int mtry = 0;  // features tried per node; 0 means ceil(sqrt(d))
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestParams params;
  Index input_dim = 0;

  double predict(const Eigen::Ref<const VectorXd>& x) const;
  VectorXd predict_batch(const MatrixXd& features) const;
};

/// Variance-reduction CART trees on bootstrap resamples; tree t draws from derive_seed(seed, t).
ForestModel fit_forest(const Dataset& train, const ForestParams& params = {});

/// f(x) = x.w + offset, the conditional mean of the polynomial generators.
struct OraclePredictor {
  VectorXd w;
  double offset = 0.1;

  double predict(const Eigen::Ref<const VectorXd>& x) const;
  VectorXd predict_batch(const MatrixXd& features) const;
};

double mae(const VectorXd& preds, const VectorXd& labels);

}  // namespace nfcp

#include "nfcp/data.hpp"
#include "nfcp/regressor.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace nfcp {
namespace {

using testing::random_features;

Dataset two_clusters() {
  Dataset ds;
  ds.features.resize(20, 1);
  ds.labels.resize(20);
  for (Index i = 0; i < 20; ++i) {
    ds.features(i, 0) = i < 10 ? 0.1 * static_cast<double>(i) : 5.0 + 0.1 * static_cast<double>(i);
    ds.labels(i) = i < 10 ? -3.0 : 7.0;
  }
  return ds;
}

TEST(Forest, ConstantLabelsGiveConstantPredictions) {
  Dataset ds{random_features(50, 3, 1), VectorXd::Constant(50, 4.25), {}, "y", {}};
  const auto f = fit_forest(ds, {.n_trees = 10, .max_depth = 5, .min_leaf = 2, .seed = 1});
  const VectorXd p = f.predict_batch(random_features(30, 3, 2, -3.0, 3.0));
  for (Index i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p(i), 4.25);
  for (const auto& t : f.trees) EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(Forest, DepthOneStumpSeparatesTwoClusters) {
  const auto ds = two_clusters();
  const auto f = fit_forest(ds, {.n_trees = 1, .max_depth = 1, .min_leaf = 1, .seed = 0, .bootstrap = false});
  ASSERT_EQ(f.trees[0].nodes.size(), 3u);
  EXPECT_EQ(f.trees[0].depth(), 1);
  EXPECT_EQ(f.predict(VectorXd::Constant(1, 0.3)), -3.0);
  EXPECT_EQ(f.predict(VectorXd::Constant(1, 6.0)), 7.0);
  const double thr = f.trees[0].nodes[0].threshold;
  EXPECT_GT(thr, 0.9);
  EXPECT_LT(thr, 6.0);
}

TEST(Forest, IdenticalTreesWithoutBootstrapAverageToOneTree) {
  const auto ds = two_clusters();
  ForestParams p{.n_trees = 4, .max_depth = 3, .min_leaf = 1, .seed = 2, .bootstrap = false, .mtry = 1};
  const auto f = fit_forest(ds, p);
  for (const auto& t : f.trees) EXPECT_EQ(t.nodes.size(), f.trees[0].nodes.size());
  for (double x : {0.0, 0.5, 5.5, 9.0}) {
    const VectorXd v = VectorXd::Constant(1, x);
    EXPECT_DOUBLE_EQ(f.predict(v), f.trees[0].predict(v));
  }
}

TEST(Forest, PredictionIsMeanOfTreesInAnyOrder) {
  SynthSpec spec;
  spec.n = 300;
  spec.seed = 3;
  const auto ds = gen_synth(spec);
  auto f = fit_forest(ds, {.n_trees = 12, .max_depth = 6, .min_leaf = 3, .seed = 4});
  const MatrixXd x = random_features(40, 3, 5);
  const VectorXd before = f.predict_batch(x);
  std::reverse(f.trees.begin(), f.trees.end());
  const VectorXd after = f.predict_batch(x);
  for (Index i = 0; i < x.rows(); ++i) {
    EXPECT_NEAR(before(i), after(i), 1e-12);
    double mean = 0.0;
    for (const auto& t : f.trees) mean += t.predict(x.row(i).transpose());
    EXPECT_NEAR(before(i), mean / 12.0, 1e-12);
  }
}

TEST(Forest, PredictionsStayWithinTrainingLabelRange) {
  SynthSpec spec;
  spec.kind = SynthKind::Inverse;
  spec.n = 400;
  spec.seed = 6;
  const auto ds = gen_synth(spec);
  const auto f = fit_forest(ds, {.n_trees = 20, .seed = 7});
  const VectorXd p = f.predict_batch(random_features(200, 3, 8, -5.0, 5.0));
  EXPECT_GE(p.minCoeff(), ds.labels.minCoeff());
  EXPECT_LE(p.maxCoeff(), ds.labels.maxCoeff());
}

TEST(Forest, DeterministicForSeedAndRespectsLimits) {
  SynthSpec spec;
  spec.kind = SynthKind::Squared;
  spec.n = 500;
  spec.seed = 9;
  const auto ds = gen_synth(spec);
  const ForestParams p{.n_trees = 8, .max_depth = 4, .min_leaf = 7, .seed = 10};
  const auto a = fit_forest(ds, p);
  const auto b = fit_forest(ds, p);
  EXPECT_EQ(a.predict_batch(ds.features), b.predict_batch(ds.features));
  for (const auto& t : a.trees) {
    EXPECT_LE(t.depth(), 4);
    for (const auto& node : t.nodes) {
      if (node.feature < 0) {
        EXPECT_GE(node.count, 7);
      }
    }
  }
  auto q = p;
  q.seed = 11;
  EXPECT_NE(fit_forest(ds, q).predict_batch(ds.features), a.predict_batch(ds.features));
}

TEST(Forest, BeatsConstantPredictorOnSyntheticKinds) {
  for (SynthKind kind : {SynthKind::Cos, SynthKind::Squared, SynthKind::Inverse, SynthKind::Linear}) {
    SynthSpec spec;
    spec.kind = kind;
    spec.n = 2000;
    spec.seed = 12;
    const auto parts = split(gen_synth(spec), {0.5, 0.5}, 13);
    const auto f = fit_forest(parts[0], {.n_trees = 30, .seed = 14});
    const VectorXd& y = parts[1].labels;
    const double sd = std::sqrt((y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1));
    EXPECT_LT(mae(f.predict_batch(parts[1].features), y), sd) << to_string(kind);
  }
}

TEST(Forest, RejectsBadInputs) {
  const auto ds = two_clusters();
  EXPECT_THROW(fit_forest(ds, {.n_trees = 0}), Error);
  EXPECT_THROW(fit_forest(ds, {.min_leaf = 11}), Error);
  const auto f = fit_forest(ds, {.n_trees = 2});
  EXPECT_THROW(f.predict(VectorXd::Zero(2)), Error);
}

TEST(Oracle, AddsOffsetToLinearPart) {
  OraclePredictor o{Eigen::Vector3d(1.0, 0.0, 0.0), 0.1};
  EXPECT_DOUBLE_EQ(o.predict(Eigen::Vector3d(1.0, 0.4, 0.16)), 1.1);
  const VectorXd p = o.predict_batch(random_features(5, 3, 1));
  EXPECT_EQ(p.size(), 5);
  EXPECT_THROW(o.predict(VectorXd::Zero(2)), Error);
}

TEST(Mae, Examples) {
  EXPECT_DOUBLE_EQ(mae(Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(1.0, 0.0, 4.0)), 1.0);
  EXPECT_EQ(mae(VectorXd::Ones(4), VectorXd::Ones(4)), 0.0);
  EXPECT_THROW(mae(VectorXd::Ones(2), VectorXd::Ones(3)), Error);
}

}  // namespace
}  // namespace nfcp

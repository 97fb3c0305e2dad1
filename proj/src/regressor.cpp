#include "nfcp/regressor.hpp"

#include "nfcp/data.hpp"
#include "nfcp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nfcp {

double RegressionTree::predict(const Eigen::Ref<const VectorXd>& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

int RegressionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

struct TreeBuilder {
  const MatrixXd& x;
  const VectorXd& y;
  const ForestParams& params;
  int mtry;
  Rng rng;
  RegressionTree tree;

  // Builds the node for rows [begin, end) of `rows` and returns its index.
  int build(std::vector<Index>& rows, std::size_t begin, std::size_t end, int depth) {
    const auto count = static_cast<int>(end - begin);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += y(rows[i]);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, sum / count, count});

    if (depth >= params.max_depth || count < 2 * params.min_leaf) return id;

    // Candidate features: a random subset of size mtry, drawn without replacement.
    std::vector<int> feats(static_cast<std::size_t>(x.cols()));
    std::iota(feats.begin(), feats.end(), 0);
    for (int i = 0; i < mtry; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(x.cols() - i)));
      std::swap(feats[static_cast<std::size_t>(i)], feats[j]);
    }

    double best_gain = 1e-12 * std::max(1.0, std::abs(sum));
    int best_feat = -1;
    double best_thr = 0.0;
    const double parent = sum * sum / count;
    std::vector<Index> sorted(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows.begin() + static_cast<std::ptrdiff_t>(end));
    for (int fi = 0; fi < mtry; ++fi) {
      const int f = feats[static_cast<std::size_t>(fi)];
      std::sort(sorted.begin(), sorted.end(), [&](Index a, Index b) { return x(a, f) < x(b, f); });
      double left_sum = 0.0;
      for (int i = 0; i + 1 < count; ++i) {
        left_sum += y(sorted[static_cast<std::size_t>(i)]);
        const int nl = i + 1;
        const int nr = count - nl;
        if (nl < params.min_leaf) continue;
        if (nr < params.min_leaf) break;
        const double lo = x(sorted[static_cast<std::size_t>(i)], f);
        const double hi = x(sorted[static_cast<std::size_t>(i) + 1], f);
        if (!(lo < hi)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feat = f;
          best_thr = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_feat < 0) return id;

    const auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                    rows.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](Index r) { return x(r, best_feat) <= best_thr; });
    const auto split = static_cast<std::size_t>(mid - rows.begin());
    const int left = build(rows, begin, split, depth + 1);
    const int right = build(rows, split, end, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feat;
    node.threshold = best_thr;
    node.left = left;
    node.right = right;
    return id;
  }
};

}  // namespace

ForestModel fit_forest(const Dataset& train, const ForestParams& params) {
  const Index n = train.rows();
  require(n > 0, ErrorCode::EmptyDataset, "fit_forest: empty training set");
  require(params.n_trees > 0 && params.max_depth >= 0 && params.min_leaf >= 1, ErrorCode::InvalidArgument,
          "fit_forest: invalid hyperparameters");
  require(n >= 2 * params.min_leaf, ErrorCode::InvalidArgument,
          "fit_forest: need at least 2 * min_leaf training rows");
  train.validate();

  const Index d = train.dims();
  int mtry = params.mtry > 0 ? params.mtry : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  mtry = std::clamp(mtry, 1, static_cast<int>(d));

  ForestModel model;
  model.params = params;
  model.input_dim = d;
  for (int t = 0; t < params.n_trees; ++t) {
    TreeBuilder builder{train.features, train.labels, params, mtry,
                        Rng(derive_seed(params.seed, static_cast<std::uint64_t>(t))), {}};
    std::vector<Index> rows(static_cast<std::size_t>(n));
    if (params.bootstrap) {
      for (auto& r : rows) r = static_cast<Index>(builder.rng.below(static_cast<std::uint64_t>(n)));
    } else {
      std::iota(rows.begin(), rows.end(), Index{0});
    }
    builder.build(rows, 0, rows.size(), 0);
    model.trees.push_back(std::move(builder.tree));
  }
  return model;
}

double ForestModel::predict(const Eigen::Ref<const VectorXd>& x) const {
  require(x.size() == input_dim, ErrorCode::ShapeMismatch,
          "forest expects " + std::to_string(input_dim) + " features, got " + std::to_string(x.size()));
  require(!trees.empty(), ErrorCode::InvalidArgument, "forest has no trees");
  double total = 0.0;
  for (const auto& tree : trees) total += tree.predict(x);
  return total / static_cast<double>(trees.size());
}

VectorXd ForestModel::predict_batch(const MatrixXd& features) const {
  VectorXd out(features.rows());
  for (Index i = 0; i < features.rows(); ++i) out(i) = predict(features.row(i).transpose());
  return out;
}

double OraclePredictor::predict(const Eigen::Ref<const VectorXd>& x) const {
  require(x.size() == w.size(), ErrorCode::ShapeMismatch,
          "oracle expects " + std::to_string(w.size()) + " features, got " + std::to_string(x.size()));
  return x.dot(w) + offset;
}

VectorXd OraclePredictor::predict_batch(const MatrixXd& features) const {
  require(features.cols() == w.size(), ErrorCode::ShapeMismatch, "oracle feature dimension mismatch");
  return (features * w).array() + offset;
}

double mae(const VectorXd& preds, const VectorXd& labels) {
  require(preds.size() == labels.size() && preds.size() > 0, ErrorCode::ShapeMismatch,
          "mae: inputs must be non-empty and of equal length");
  return (preds - labels).cwiseAbs().mean();
}

}  // namespace nfcp

#include "nfcp/evaluation.hpp"
#include "nfcp/rng.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nfcp {
namespace {

using testing::random_features;

double brute_min_window_mean(const std::vector<double>& v, Index min_len) {
  const auto n = static_cast<Index>(v.size());
  double best = 1e300;
  for (Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Index j = i; j < n; ++j) {
      sum += v[static_cast<std::size_t>(j)];
      if (j - i + 1 >= min_len) best = std::min(best, sum / static_cast<double>(j - i + 1));
    }
  }
  return best;
}

/// Quadratic slab search over the same directions `wsc` draws.
double brute_wsc(const MatrixXd& x, const std::vector<bool>& covered, const WscOptions& opts) {
  const Index n = x.rows();
  const auto min_len = static_cast<Index>(std::ceil(opts.delta * static_cast<double>(n) - 1e-9));
  double worst = 1.0;
  for (int k = 0; k < opts.n_directions; ++k) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    VectorXd v(x.cols());
    for (Index j = 0; j < x.cols(); ++j) v(j) = rng.normal();
    const VectorXd proj = x * v.normalized();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return proj(a) < proj(b); });
    std::vector<double> flags;
    for (Index i : order) flags.push_back(covered[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
    worst = std::min(worst, brute_min_window_mean(flags, min_len));
  }
  return worst;
}

std::vector<bool> coin_flips(Index n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<bool> out(static_cast<std::size_t>(n));
  for (auto&& b : out) b = rng.uniform() < p;
  return out;
}

TEST(Coverage, CountsBoundaryAsCovered) {
  const std::vector<PredictionInterval> iv{{0.0, 1.0}, {2.0, 0.5}, {-1.0, 0.0}, {5.0, 2.0}};
  const VectorXd y = (VectorXd(4) << 1.0, 3.0, -1.0, 0.0).finished();
  EXPECT_EQ(covered_flags(iv, y), (std::vector<bool>{true, false, true, false}));
  EXPECT_DOUBLE_EQ(empirical_coverage(iv, y), 0.5);
  EXPECT_DOUBLE_EQ(average_size(iv), (2.0 + 1.0 + 0.0 + 4.0) / 4.0);
  EXPECT_THROW(empirical_coverage(iv, VectorXd::Zero(3)), Error);
  EXPECT_THROW(average_size({}), Error);
}

TEST(MinWindowMean, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Index>(1 + rng.below(40));
    std::vector<double> v(static_cast<std::size_t>(n));
    const bool binary = trial % 2 == 0;
    for (auto& x : v) x = binary ? (rng.uniform() < 0.7 ? 1.0 : 0.0) : rng.normal();
    const auto len = static_cast<Index>(1 + rng.below(static_cast<std::uint64_t>(n)));
    const double expected = brute_min_window_mean(v, len);
    EXPECT_NEAR(min_window_mean(v, len), expected, binary ? 0.0 : 1e-9) << "trial " << trial;
  }
  EXPECT_THROW(min_window_mean({1.0, 0.0}, 3), Error);
}

TEST(Wsc, MatchesBruteForceSlabSearch) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MatrixXd x = random_features(120, 3, seed);
    const auto covered = coin_flips(120, 0.8, seed + 10);
    const WscOptions opts{0.1, 25, seed};
    EXPECT_DOUBLE_EQ(wsc(x, covered, opts), brute_wsc(x, covered, opts));
  }
}

TEST(Wsc, AllCoveredIsOne) {
  EXPECT_EQ(wsc(random_features(50, 2, 1), std::vector<bool>(50, true)), 1.0);
}

TEST(Wsc, BoundedByMarginalCoverageAndMonotoneInDirections) {
  const MatrixXd x = random_features(1000, 4, 3);
  const auto covered = coin_flips(1000, 0.9, 4);
  const double marginal = static_cast<double>(std::count(covered.begin(), covered.end(), true)) / 1000.0;
  double prev = 1.0;
  for (int dirs : {1, 5, 20, 80}) {
    const double w = wsc(x, covered, {0.1, dirs, 5});
    EXPECT_LE(w, marginal);
    EXPECT_LE(w, prev);
    prev = w;
  }
  // Independent flips: the worst 10% slab is still well above zero.
  EXPECT_GT(prev, 0.75);
}

TEST(Wsc, FindsPlantedUndercoveredSlab) {
  const MatrixXd x = random_features(1000, 1, 6);
  std::vector<bool> covered(1000, true);
  for (Index i = 0; i < 1000; ++i) {
    if (x(i, 0) > 0.7) covered[static_cast<std::size_t>(i)] = false;
  }
  // One dimension: every direction is +-1, so the slab x > 0.7 is found exactly.
  EXPECT_EQ(wsc(x, covered, {0.1, 3, 7}), 0.0);
}

TEST(Wsc, RejectsTooFewSamples) {
  try {
    wsc(random_features(10, 2, 1), coin_flips(10, 0.5, 2), {0.1, 10, 0});
    FAIL() << "expected TooFewSamples";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
  EXPECT_THROW(wsc(random_features(50, 2, 1), coin_flips(49, 0.5, 2)), Error);
  EXPECT_THROW(wsc(random_features(50, 2, 1), coin_flips(50, 0.5, 2), {1.5, 10, 0}), Error);
}

TEST(MeanStd, UsesSampleStandardDeviation) {
  const auto ms = mean_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_DOUBLE_EQ(ms.std, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(mean_std({7.0}).std, 0.0);
  EXPECT_EQ(mean_std({}).mean, 0.0);
}

std::vector<SplitMetrics> sample_rows() {
  std::vector<SplitMetrics> rows;
  for (int s = 0; s < 3; ++s) {
    for (const char* fam : {"baseline", "gauss"}) {
      SplitMetrics m;
      m.split = s;
      m.family = fam;
      m.alpha = 0.1;
      m.n_calib = 9;
      m.n_test = 100;
      m.level = Rational{9, 10};
      m.coverage = 0.88 + 0.01 * s;
      m.avg_size = (fam[0] == 'g' ? 2.0 : 3.0) + s;
      m.wsc = 0.7 + 0.05 * s;
      rows.push_back(m);
    }
  }
  return rows;
}

TEST(Summarize, GroupsByCellAndRecomputesStatistics) {
  const auto cells = summarize(sample_rows());
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].family, "baseline");
  EXPECT_EQ(cells[1].family, "gauss");
  EXPECT_EQ(cells[1].splits.size(), 3u);
  EXPECT_DOUBLE_EQ(cells[1].avg_size.mean, 3.0);
  EXPECT_DOUBLE_EQ(cells[1].avg_size.std, 1.0);
  EXPECT_DOUBLE_EQ(cells[0].coverage.mean, 0.89);
  EXPECT_NEAR(cells[0].wsc.std, 0.05, 1e-12);
}

TEST(Report, CsvHasSplitMeanAndStdRows) {
  const auto path = std::filesystem::temp_directory_path() / "nfcp_test_report.csv";
  write_report_csv(summarize(sample_rows()), path.string());
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 1u + 2u * 5u);
  EXPECT_EQ(lines[0], "family,alpha,split,n_calib,n_test,level,level_value,coverage,size,wsc");
  EXPECT_EQ(lines[1].rfind("baseline,0.1,0,9,100,9/10,0.9,", 0), 0u);
  EXPECT_EQ(lines[4].rfind("baseline,0.1,mean,", 0), 0u);
  EXPECT_EQ(lines[5].rfind("baseline,0.1,std,", 0), 0u);
}

TEST(Report, JsonCarriesSummary) {
  const auto doc = nlohmann::json::parse(report_json(summarize(sample_rows())));
  ASSERT_EQ(doc.size(), 2u);
  EXPECT_EQ(doc[1]["family"], "gauss");
  EXPECT_EQ(doc[1]["finite_sample_level"], "9/10");
  EXPECT_DOUBLE_EQ(doc[1]["size"]["mean"].get<double>(), 3.0);
  EXPECT_EQ(doc[1]["splits"].size(), 3u);
}

}  // namespace
}  // namespace nfcp

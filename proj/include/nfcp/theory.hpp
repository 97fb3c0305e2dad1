#pragma once

// Executable coverage checks on controlled constructions with known score distributions.

#include "nfcp/conformal.hpp"
#include "nfcp/core.hpp"
#include "nfcp/rng.hpp"
#include "nfcp/special.hpp"
#include "nfcp/transforms.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nfcp {

/// ceil((n+1)(1-alpha)) / (n+1) without the n* <= n precondition. When n* = n + 1 the
/// threshold is the infinite quantile and the value is 1.
Rational rank_level(std::int64_t n, double alpha);

/// Exact coverage by enumeration: n distinct calibration scores 1..n, the test score placed in
/// each of the n + 1 gaps with equal weight, covered when it does not exceed the n*-th score.
/// Requires 1 <= n <= 8.
Rational enumerate_coverage(std::int64_t n, double alpha);

/// Monte Carlo estimate of the same probability with i.i.d. uniform scores.
double simulate_rank_coverage(std::int64_t n, double alpha, int n_trials, std::uint64_t seed);

/// X ~ U[0, 1], A | X ~ sigma(X) |E| with E standard normal and sigma a step at 0.5.
struct StepNoiseModel {
  double sigma_low = 1.0;   // X < 0.5
  double sigma_high = 1.0;  // X >= 0.5

  static StepNoiseModel homoscedastic() { return {1.0, 1.0}; }
  static StepNoiseModel toy(double xi = 5.0) { return {1.0, xi}; }

  double sigma(double x) const { return x < 0.5 ? sigma_low : sigma_high; }
};

/// The exact flow of a StepNoiseModel: b = F(A / sigma(x)) with F the half-normal CDF, composed
/// with the inverse CDF of the target. b(A, X) is independent of X with the target law.
struct ExactToyFlow {
  enum class Target { Uniform, Gauss };
  StepNoiseModel model = StepNoiseModel::toy();
  Target target = Target::Uniform;
};

double eval(const ExactToyFlow& t, double a, const Eigen::Ref<const VectorXd>& x);
double invert(const ExactToyFlow& t, double b_val, const Eigen::Ref<const VectorXd>& x);

struct BinCoverageOptions {
  int n_calib = 200;
  int n_bins = 10;
  int n_trials = 2000;
  double alpha = 0.1;
  double n_se = 3.0;
  std::uint64_t seed = 0;
};

struct BinCoverage {
  double lo = 0.0;
  double hi = 1.0;
  int hits = 0;
  int trials = 0;
  double coverage = 0.0;
  double se = 0.0;  // binomial standard error at the finite-sample level
  bool within = false;
};

struct BinCoverageReport {
  Rational level;
  std::vector<BinCoverage> bins;

  bool all_within() const;
};

/// Each trial draws a fresh calibration set and one test point uniformly inside every
/// equal-width X bin. A bin passes when its coverage is within n_se standard errors of the level.
template <ScoreTransform T>
BinCoverageReport bin_coverage(const T& transform, const StepNoiseModel& model, const BinCoverageOptions& opts) {
  require(opts.n_calib >= 1 && opts.n_bins >= 1 && opts.n_trials >= 1, ErrorCode::InvalidArgument,
          "bin_coverage: sizes must be positive");
  BinCoverageReport report;
  report.level = finite_sample_level(opts.n_calib, opts.alpha);
  const double p = report.level.value();
  const double width = 1.0 / opts.n_bins;
  std::vector<int> hits(static_cast<std::size_t>(opts.n_bins), 0);
  VectorXd scores(opts.n_calib);
  VectorXd x(1);
  for (int trial = 0; trial < opts.n_trials; ++trial) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(trial)));
    for (int i = 0; i < opts.n_calib; ++i) {
      x(0) = rng.uniform();
      const double a = model.sigma(x(0)) * std::abs(rng.normal());
      scores(i) = eval(transform, a, x);
    }
    const double q = sample_quantile(scores, opts.alpha);
    for (int k = 0; k < opts.n_bins; ++k) {
      x(0) = (k + rng.uniform()) * width;
      const double a = model.sigma(x(0)) * std::abs(rng.normal());
      if (a <= invert(transform, q, x)) ++hits[static_cast<std::size_t>(k)];
    }
  }
  const double se = std::sqrt(p * (1.0 - p) / opts.n_trials);
  for (int k = 0; k < opts.n_bins; ++k) {
    BinCoverage bin;
    bin.lo = k * width;
    bin.hi = (k + 1) * width;
    bin.hits = hits[static_cast<std::size_t>(k)];
    bin.trials = opts.n_trials;
    bin.coverage = static_cast<double>(bin.hits) / opts.n_trials;
    bin.se = se;
    bin.within = std::abs(bin.coverage - p) <= opts.n_se * se;
    report.bins.push_back(bin);
  }
  return report;
}

/// Bin-wise coverage of the baseline transform on homoscedastic data, where A and X are
/// independent and every bin should sit at the finite-sample level.
BinCoverageReport check_factorization_equivalence(int n_trials, std::uint64_t seed, BinCoverageOptions opts = {});

/// Bin-wise coverage of the exact toy flow on heteroscedastic toy data.
BinCoverageReport check_exact_flow(int n_trials, std::uint64_t seed, double xi = 5.0, BinCoverageOptions opts = {},
                                   ExactToyFlow::Target target = ExactToyFlow::Target::Uniform);

struct RankingWitness {
  VectorXd calib_scores;  // A_n
  VectorXd calib_x;       // X_n
  double test_x = 0.0;
  double alpha = 0.5;
  ConformityTransform transform;
  double q_a = 0.0;
  double q_b = 0.0;
  double size_a = 0.0;  // |C_A| = 2 Q_A
  double size_b = 0.0;  // |C_B| = 2 b^{-1}(Q_B, test_x)
  std::vector<Index> order_a;  // calibration indices sorted by A
  std::vector<Index> order_b;  // sorted by B
  bool ranks_differ = false;
};

/// Sizes of the baseline and ER intervals for an explicit calibration set and cubic localizer.
RankingWitness ranking_witness(const Eigen::Vector3d& theta, const VectorXd& calib_scores, const VectorXd& calib_x,
                               double test_x, double alpha, double gamma = 1e-3);

/// Three calibration points (A, X) = (1, 1), (5, 10), (2, 1), g(x) = x, alpha = 0.5 and a test
/// point at x = 10: |C_A| = 4 while |C_B| is close to 20. Throws if the sizes coincide.
RankingWitness construct_ranking_change();

/// Huber-perturbed flow on X ~ U[0, 1], A | X ~ U[0, 1 + X]. The exact flow is the ER transform
/// b = A / (1 + X), uniform on [0, 1] and independent of X. The perturbation is
/// delta(A, X) = c tanh(A) cos(pi X), so b_hat = (1 - eps) b + eps delta.
///
/// d b_hat / dA >= (1 - eps) / 2 - eps c, hence b_hat is strictly increasing for eps < 1 / (1 + 2c);
/// `check_monotone` confirms it on a grid before use.
struct PerturbedFlow {
  ConformityTransform base;
  double epsilon = 0.0;
  double delta_scale = 1.0;
  double L_delta = 1.0;  // sup |d delta / dA| = c
  double L_binv = 2.0;   // sup |d b^{-1} / dB| = sup (1 + x)

  static PerturbedFlow documented(double epsilon, double delta_scale = 1.0);

  double delta(double a, double x) const;
  double sigma(double x) const { return 1.0 + x; }
};

double eval(const PerturbedFlow& pf, double a, const Eigen::Ref<const VectorXd>& x);
/// Bisection on A >= 0.
double invert(const PerturbedFlow& pf, double b_val, const Eigen::Ref<const VectorXd>& x);

/// Throws MonotonicityViolated when b_hat fails to increase strictly along A on a grid x grid
/// covering x in [0, 1] and A in [0, 2 sup sigma].
void check_monotone(const PerturbedFlow& pf, int grid = 401);

struct Theorem2Options {
  int n_trials = 4000;
  int n_calib = 100;
  int n_points = 11;  // test inputs x = 0, 0.1, ..., 1 for the conditional coverage
  double alpha = 0.1;
  int grid = 401;
  double n_se = 3.0;
  std::uint64_t seed = 0;
};

/// Coverage given X_{N+1} = x. With A | x uniform it is min(1, b_hat^{-1}(Q, x) / sigma(x)) for a
/// calibrated threshold Q, averaged over calibration draws.
struct ConditionalCoverage {
  double x = 0.0;
  double coverage = 0.0;
  double se = 0.0;
};

struct Theorem2Result {
  double epsilon = 0.0;
  Rational level;
  std::vector<ConditionalCoverage> conditional;
  double marginal_coverage = 0.0;  // X_{N+1} ~ U[0, 1]
  double marginal_se = 0.0;
  double gap = 0.0;     // level minus the smallest conditional coverage
  double gap_se = 0.0;  // standard error at that point
  double sup_px = 1.0;
  double L_delta = 0.0;  // grid supremum
  double L_binv = 0.0;   // grid supremum
  double bound = 0.0;          // 2 eps sup p_X L_delta L_binv
  double bound_theorem = 0.0;  // eps sup p_X L_delta L_binv, half the total-variation bound
  bool holds = false;          // gap <= bound + n_se * gap_se
};

Theorem2Result theorem2_gap_vs_bound(const PerturbedFlow& pf, const Theorem2Options& opts = {});

struct TheoryCheckOptions {
  std::uint64_t seed = 0;
  int bin_trials = 2000;
  int theorem2_trials = 4000;
  int rank_mc_trials = 200000;
  std::vector<double> epsilons{0.0, 0.005, 0.01, 0.02};
  double rejected_epsilon = 0.4;  // must fail the monotonicity guard
};

struct RankRow {
  std::int64_t n = 0;
  double alpha = 0.0;
  Rational enumerated;
  Rational expected;
  bool matches = false;
};

struct TheoryReport {
  std::vector<RankRow> ranks;  // n = 1..8 by alpha in {0.05, 0.1, 0.35, 0.5}
  double rank_mc = 0.0;        // simulated coverage at n = 8, alpha = 0.35
  Rational rank_mc_level;
  double rank_mc_se = 0.0;
  BinCoverageReport homoscedastic;
  BinCoverageReport exact_uniform;
  BinCoverageReport exact_gauss;
  BinCoverageReport control;  // baseline on toy data; expected to miss some bins
  RankingWitness witness;
  std::vector<Theorem2Result> theorem2;
  bool rejected_nonmonotone = false;
  double n_se = 3.0;

  bool ranks_ok() const;
  bool rank_mc_ok() const;
  bool bins_ok() const;
  bool witness_ok() const;
  bool theorem2_ok() const;
  bool passed() const;
};

TheoryReport run_theory_checks(const TheoryCheckOptions& opts = {});
std::string format_theory_report(const TheoryReport& report);

}  // namespace nfcp

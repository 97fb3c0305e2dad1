#include "nfcp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

namespace nfcp {

Rational rank_level(std::int64_t n, double alpha) {
  require(n >= 1, ErrorCode::InvalidArgument, "rank_level needs n >= 1");
  return {std::min(quantile_rank(n, alpha), n + 1), n + 1};
}

Rational enumerate_coverage(std::int64_t n, double alpha) {
  require(n >= 1 && n <= 8, ErrorCode::InvalidArgument, "enumerate_coverage supports 1 <= n <= 8");
  std::vector<double> calib(static_cast<std::size_t>(n));
  std::iota(calib.begin(), calib.end(), 1.0);
  const bool finite = quantile_rank(n, alpha) <= n;
  const double q = finite ? sample_quantile(std::span<const double>(calib), alpha)
                          : std::numeric_limits<double>::infinity();
  std::int64_t covered = 0;
  for (std::int64_t gap = 1; gap <= n + 1; ++gap) {
    const double test = static_cast<double>(gap) - 0.5;
    if (test <= q) ++covered;
  }
  return {covered, n + 1};
}

double simulate_rank_coverage(std::int64_t n, double alpha, int n_trials, std::uint64_t seed) {
  require(n_trials > 0, ErrorCode::InvalidArgument, "need at least one trial");
  const bool finite = quantile_rank(n, alpha) <= n;
  std::vector<double> calib(static_cast<std::size_t>(n));
  int hits = 0;
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    for (auto& v : calib) v = rng.uniform();
    const double test = rng.uniform();
    const double q = finite ? sample_quantile(std::span<const double>(calib), alpha)
                            : std::numeric_limits<double>::infinity();
    if (test <= q) ++hits;
  }
  return static_cast<double>(hits) / n_trials;
}

double eval(const ExactToyFlow& t, double a, const Eigen::Ref<const VectorXd>& x) {
  const double u = half_normal_cdf(a / t.model.sigma(x(0)));
  return t.target == ExactToyFlow::Target::Uniform ? u : normal_quantile(u);
}

double invert(const ExactToyFlow& t, double b_val, const Eigen::Ref<const VectorXd>& x) {
  const double u = t.target == ExactToyFlow::Target::Uniform ? b_val : normal_cdf(b_val);
  require(u >= 0.0 && u < 1.0, ErrorCode::OutOfCodomain, "exact toy flow threshold outside [0, 1)");
  return t.model.sigma(x(0)) * half_normal_quantile(u);
}

bool BinCoverageReport::all_within() const {
  return std::all_of(bins.begin(), bins.end(), [](const BinCoverage& b) { return b.within; });
}

BinCoverageReport check_factorization_equivalence(int n_trials, std::uint64_t seed, BinCoverageOptions opts) {
  opts.n_trials = n_trials;
  opts.seed = seed;
  return bin_coverage(ConformityTransform::baseline(), StepNoiseModel::homoscedastic(), opts);
}

BinCoverageReport check_exact_flow(int n_trials, std::uint64_t seed, double xi, BinCoverageOptions opts,
                                   ExactToyFlow::Target target) {
  opts.n_trials = n_trials;
  opts.seed = seed;
  const ExactToyFlow flow{StepNoiseModel::toy(xi), target};
  return bin_coverage(flow, StepNoiseModel::toy(xi), opts);
}

RankingWitness ranking_witness(const Eigen::Vector3d& theta, const VectorXd& calib_scores, const VectorXd& calib_x,
                               double test_x, double alpha, double gamma) {
  require(calib_scores.size() == calib_x.size() && calib_scores.size() > 0, ErrorCode::ShapeMismatch,
          "ranking_witness: scores and inputs must be non-empty and of equal length");
  RankingWitness w;
  w.calib_scores = calib_scores;
  w.calib_x = calib_x;
  w.test_x = test_x;
  w.alpha = alpha;
  w.transform = ConformityTransform::make(Family::ER, gamma, CubicLocalizer{theta});

  const Index n = calib_scores.size();
  const MatrixXd features = calib_x;  // n x 1
  const VectorXd zeros = VectorXd::Zero(n);

  const auto base = calibrate(ConformityTransform::baseline(), zeros, calib_scores, features, alpha);
  const auto er = calibrate(w.transform, zeros, calib_scores, features, alpha);
  w.q_a = base.threshold_qb;
  w.q_b = er.threshold_qb;
  const VectorXd xt = VectorXd::Constant(1, test_x);
  w.size_a = predict_interval(base, 0.0, xt).size();
  w.size_b = predict_interval(er, 0.0, xt).size();

  const VectorXd b = transformed_scores(w.transform, calib_scores, features);
  w.order_a.resize(static_cast<std::size_t>(n));
  std::iota(w.order_a.begin(), w.order_a.end(), Index{0});
  w.order_b = w.order_a;
  std::stable_sort(w.order_a.begin(), w.order_a.end(), [&](Index i, Index j) { return calib_scores(i) < calib_scores(j); });
  std::stable_sort(w.order_b.begin(), w.order_b.end(), [&](Index i, Index j) { return b(i) < b(j); });
  w.ranks_differ = w.order_a != w.order_b;
  return w;
}

RankingWitness construct_ranking_change() {
  const VectorXd scores = (VectorXd(3) << 1.0, 5.0, 2.0).finished();
  const VectorXd xs = (VectorXd(3) << 1.0, 10.0, 1.0).finished();
  RankingWitness w = ranking_witness(Eigen::Vector3d(1.0, 0.0, 0.0), scores, xs, 10.0, 0.5);
  require(w.ranks_differ && std::abs(w.size_b - w.size_a) > 1e-9, ErrorCode::InvalidArgument,
          "ranking-change construction produced equal interval sizes");
  return w;
}

PerturbedFlow PerturbedFlow::documented(double epsilon, double delta_scale) {
  require(epsilon >= 0.0 && epsilon < 1.0, ErrorCode::InvalidArgument, "epsilon must lie in [0, 1)");
  require(delta_scale >= 0.0, ErrorCode::InvalidArgument, "delta scale must be non-negative");
  // g(x) = x + 1 - gamma is a one-layer MLP, so s(x) = gamma + |g(x)| = 1 + x on [0, 1].
  constexpr double gamma = 1e-3;
  MlpParams affine = MlpParams::zeros({1, 1});
  affine.weights[0](0, 0) = 1.0;
  affine.biases[0](0) = 1.0 - gamma;
  PerturbedFlow pf;
  pf.base = ConformityTransform::make(Family::ER, gamma, affine);
  pf.epsilon = epsilon;
  pf.delta_scale = delta_scale;
  pf.L_delta = delta_scale;
  pf.L_binv = 2.0;
  return pf;
}

double PerturbedFlow::delta(double a, double x) const {
  return delta_scale * std::tanh(a) * std::cos(std::numbers::pi * x);
}

double eval(const PerturbedFlow& pf, double a, const Eigen::Ref<const VectorXd>& x) {
  return (1.0 - pf.epsilon) * eval(pf.base, a, x) + pf.epsilon * pf.delta(a, x(0));
}

double invert(const PerturbedFlow& pf, double b_val, const Eigen::Ref<const VectorXd>& x) {
  double lo = 0.0;
  require(eval(pf, lo, x) <= b_val, ErrorCode::OutOfCodomain, "perturbed-flow threshold below b_hat(0, x)");
  double hi = pf.sigma(x(0));
  while (eval(pf, hi, x) < b_val) {
    lo = hi;
    hi *= 2.0;
    require(std::isfinite(hi), ErrorCode::NonFiniteRadius, "perturbed-flow inversion diverged");
  }
  for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (eval(pf, mid, x) < b_val ? lo : hi) = mid;
  }
  return hi;
}

void check_monotone(const PerturbedFlow& pf, int grid) {
  require(grid >= 2, ErrorCode::InvalidArgument, "monotonicity grid needs at least 2 points");
  const double a_max = 2.0 * pf.sigma(1.0);
  VectorXd x(1);
  for (int i = 0; i < grid; ++i) {
    x(0) = static_cast<double>(i) / (grid - 1);
    double prev = eval(pf, 0.0, x);
    for (int j = 1; j < grid; ++j) {
      const double a = a_max * j / (grid - 1);
      const double cur = eval(pf, a, x);
      if (!(cur > prev)) {
        throw Error(ErrorCode::MonotonicityViolated,
                    "b_hat is not increasing at x=" + std::to_string(x(0)) + ", A=" + std::to_string(a) +
                        " (epsilon=" + std::to_string(pf.epsilon) + ")");
      }
      prev = cur;
    }
  }
}

Theorem2Result theorem2_gap_vs_bound(const PerturbedFlow& pf, const Theorem2Options& opts) {
  require(opts.n_trials >= 2 && opts.n_calib >= 1 && opts.n_points >= 1, ErrorCode::InvalidArgument,
          "theorem2: sizes must be positive (at least two trials)");
  check_monotone(pf, opts.grid);

  Theorem2Result r;
  r.epsilon = pf.epsilon;
  r.level = finite_sample_level(opts.n_calib, opts.alpha);

  // Lipschitz constants by grid supremum over the evaluation region A in [0, sigma(x)].
  const double h = 1e-6;
  VectorXd x(1);
  for (int i = 0; i < opts.grid; ++i) {
    x(0) = static_cast<double>(i) / (opts.grid - 1);
    const double s = pf.sigma(x(0));
    for (int j = 0; j < opts.grid; ++j) {
      const double a = s * j / (opts.grid - 1);
      const double lo = std::max(0.0, a - h);
      const double d = (pf.delta(a + h, x(0)) - pf.delta(lo, x(0))) / (a + h - lo);
      r.L_delta = std::max(r.L_delta, std::abs(d));
      const double bv = static_cast<double>(j) / (opts.grid - 1);
      const double blo = std::max(0.0, bv - h);
      const double dinv = (invert(pf.base, bv + h, x) - invert(pf.base, blo, x)) / (bv + h - blo);
      r.L_binv = std::max(r.L_binv, std::abs(dinv));
    }
  }
  r.sup_px = 1.0;  // X ~ U[0, 1]
  r.bound = 2.0 * pf.epsilon * r.sup_px * r.L_delta * r.L_binv;
  r.bound_theorem = 0.5 * r.bound;

  // Conditional coverage is computed exactly given each calibrated threshold, so the only
  // Monte Carlo error comes from the calibration draw.
  const auto n_points = static_cast<std::size_t>(opts.n_points);
  std::vector<double> sum(n_points + 1, 0.0), sum_sq(n_points + 1, 0.0);
  VectorXd scores(opts.n_calib);
  auto covered_prob = [&](double xv, double q) {
    VectorXd xt = VectorXd::Constant(1, xv);
    return std::min(1.0, invert(pf, q, xt) / pf.sigma(xv));
  };
  for (int t = 0; t < opts.n_trials; ++t) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(t)));
    for (int i = 0; i < opts.n_calib; ++i) {
      x(0) = rng.uniform();
      scores(i) = eval(pf, pf.sigma(x(0)) * rng.uniform(), x);
    }
    const double q = sample_quantile(scores, opts.alpha);
    for (std::size_t k = 0; k <= n_points; ++k) {
      const double xv = k < n_points ? (n_points == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n_points - 1))
                                     : rng.uniform();
      const double c = covered_prob(xv, q);
      sum[k] += c;
      sum_sq[k] += c * c;
    }
  }
  const double T = opts.n_trials;
  auto mean_se = [&](std::size_t k) {
    const double m = sum[k] / T;
    const double var = std::max(0.0, (sum_sq[k] - T * m * m) / (T - 1.0));
    return std::make_pair(m, std::sqrt(var / T));
  };
  r.gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_points; ++k) {
    const auto [m, se] = mean_se(k);
    const double xv = n_points == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n_points - 1);
    r.conditional.push_back({xv, m, se});
    if (r.level.value() - m > r.gap) {
      r.gap = r.level.value() - m;
      r.gap_se = se;
    }
  }
  std::tie(r.marginal_coverage, r.marginal_se) = mean_se(n_points);
  r.holds = r.gap <= r.bound + opts.n_se * r.gap_se;
  return r;
}

bool TheoryReport::ranks_ok() const {
  return !ranks.empty() && std::all_of(ranks.begin(), ranks.end(), [](const RankRow& r) { return r.matches; });
}

bool TheoryReport::rank_mc_ok() const { return std::abs(rank_mc - rank_mc_level.value()) <= n_se * rank_mc_se; }

bool TheoryReport::bins_ok() const {
  return homoscedastic.all_within() && exact_uniform.all_within() && exact_gauss.all_within() && !control.all_within();
}

bool TheoryReport::witness_ok() const { return witness.ranks_differ && std::abs(witness.size_b - witness.size_a) > 1e-9; }

bool TheoryReport::theorem2_ok() const {
  if (theorem2.empty() || !rejected_nonmonotone) return false;
  for (const auto& r : theorem2) {
    if (r.epsilon == 0.0 ? std::abs(r.gap) > n_se * r.gap_se : !r.holds) return false;
  }
  return true;
}

bool TheoryReport::passed() const { return ranks_ok() && rank_mc_ok() && bins_ok() && witness_ok() && theorem2_ok(); }

TheoryReport run_theory_checks(const TheoryCheckOptions& opts) {
  TheoryReport rep;
  for (double alpha : {0.05, 0.1, 0.35, 0.5}) {
    for (std::int64_t n = 1; n <= 8; ++n) {
      RankRow row{n, alpha, enumerate_coverage(n, alpha), rank_level(n, alpha), false};
      row.matches = row.enumerated == row.expected;
      rep.ranks.push_back(row);
    }
  }
  rep.rank_mc = simulate_rank_coverage(8, 0.35, opts.rank_mc_trials, derive_seed(opts.seed, 1));
  rep.rank_mc_level = rank_level(8, 0.35);
  const double p = rep.rank_mc_level.value();
  rep.rank_mc_se = std::sqrt(p * (1.0 - p) / opts.rank_mc_trials);

  rep.homoscedastic = check_factorization_equivalence(opts.bin_trials, derive_seed(opts.seed, 2));
  rep.exact_uniform = check_exact_flow(opts.bin_trials, derive_seed(opts.seed, 3));
  rep.exact_gauss = check_exact_flow(opts.bin_trials, derive_seed(opts.seed, 4), 5.0, {}, ExactToyFlow::Target::Gauss);
  BinCoverageOptions control;
  control.n_trials = opts.bin_trials;
  control.seed = derive_seed(opts.seed, 5);
  rep.control = bin_coverage(ConformityTransform::baseline(), StepNoiseModel::toy(), control);

  rep.witness = construct_ranking_change();

  Theorem2Options t2;
  t2.n_trials = opts.theorem2_trials;
  t2.seed = derive_seed(opts.seed, 6);
  for (double eps : opts.epsilons) rep.theorem2.push_back(theorem2_gap_vs_bound(PerturbedFlow::documented(eps), t2));
  try {
    check_monotone(PerturbedFlow::documented(opts.rejected_epsilon), t2.grid);
  } catch (const Error& e) {
    rep.rejected_nonmonotone = e.code() == ErrorCode::MonotonicityViolated;
  }
  return rep;
}

namespace {

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

void print_bins(std::ostream& out, const std::string& title, const BinCoverageReport& r, bool expect_within) {
  const bool ok = r.all_within() == expect_within;
  out << "[" << verdict(ok) << "] " << title << " (level " << r.level.str() << " = " << r.level.value()
      << (expect_within ? ", every bin within tolerance" : ", some bin outside tolerance") << ")\n";
  for (const auto& b : r.bins) {
    out << "  [" << b.lo << ", " << b.hi << ")  coverage " << b.coverage << "  se " << b.se
        << (b.within ? "" : "  outside") << '\n';
  }
}

}  // namespace

std::string format_theory_report(const TheoryReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << "Exact rank coverage: enumeration versus ceil((n+1)(1-alpha))/(n+1)\n";
  out << "[" << verdict(r.ranks_ok()) << "] " << r.ranks.size() << " cases\n";
  for (const auto& row : r.ranks) {
    out << "  n=" << row.n << " alpha=" << row.alpha << "  enumerated " << row.enumerated.str() << "  expected "
        << row.expected.str() << (row.matches ? "" : "  MISMATCH") << '\n';
  }
  out << "[" << verdict(r.rank_mc_ok()) << "] simulated coverage n=8 alpha=0.35: " << r.rank_mc << " vs "
      << r.rank_mc_level.str() << " (se " << r.rank_mc_se << ")\n\n";

  out << "Bin-wise coverage, 10 equal-width bins of x\n";
  print_bins(out, "baseline on homoscedastic data", r.homoscedastic, true);
  print_bins(out, "exact toy flow, uniform target", r.exact_uniform, true);
  print_bins(out, "exact toy flow, Gaussian target", r.exact_gauss, true);
  print_bins(out, "control: baseline on heteroscedastic toy data", r.control, false);
  out << '\n';

  out << "Ranking change under an input-dependent transform\n";
  out << "[" << verdict(r.witness_ok()) << "] |C_A| = " << r.witness.size_a << ", |C_B| = " << r.witness.size_b
      << ", Q_A = " << r.witness.q_a << ", Q_B = " << r.witness.q_b << "\n\n";

  out << "Perturbed flow: conditional coverage gap versus bound\n";
  out << "[" << verdict(r.theorem2_ok()) << "]\n";
  for (const auto& t : r.theorem2) {
    const bool ok = t.epsilon == 0.0 ? std::abs(t.gap) <= r.n_se * t.gap_se : t.holds;
    out << "  eps=" << t.epsilon << "  level " << t.level.str() << "  gap " << t.gap << " (se " << t.gap_se
        << ")  bound " << t.bound << "  (eps sup p_X L_delta L_binv = " << t.bound_theorem << ", L_delta "
        << t.L_delta << ", L_binv " << t.L_binv << ")  marginal " << t.marginal_coverage << "  "
        << verdict(ok) << '\n';
  }
  out << "  non-monotone perturbation rejected: " << (r.rejected_nonmonotone ? "yes" : "no") << "\n\n";
  out << "Overall: " << verdict(r.passed()) << '\n';
  return out.str();
}

}  // namespace nfcp

// Acceptance suite: one PASS/FAIL line per criterion. The exit status is 0 once every criterion has
// been evaluated; with --strict it is 1 when any criterion fails.

#include "nfcp/conformal.hpp"
#include "nfcp/data.hpp"
#include "nfcp/experiment.hpp"
#include "nfcp/rng.hpp"
#include "nfcp/theory.hpp"
#include "nfcp/training.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

namespace nfcp {
namespace {

using testing::central_diff;
using testing::rel_err;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s C%d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

const CellSummary& cell(const ExperimentResult& r, Family family, double alpha) {
  for (const auto& c : r.cells) {
    if (c.family == to_string(family) && c.alpha == alpha) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "missing result cell");
}

/// Calibration 500 and test 2000 points per split, with the default regressor and training parts.
ExperimentConfig synthetic_run(const std::string& dataset, std::vector<Family> families, std::vector<double> alphas) {
  ExperimentConfig cfg;
  cfg.dataset = dataset;
  cfg.n = 4000;
  cfg.fractions = {0.25, 0.125, 0.125, 0.5};
  cfg.families = std::move(families);
  cfg.alphas = std::move(alphas);
  cfg.n_splits = 5;
  return cfg;
}

Outcome exact_coverage() {
  // alpha as an exact fraction p / q; the level is ceil((n+1)(q-p)/q) / (n+1).
  const std::pair<double, std::pair<std::int64_t, std::int64_t>> alphas[] = {
      {0.05, {1, 20}}, {0.1, {1, 10}}, {0.35, {7, 20}}, {0.5, {1, 2}}};
  const auto t0 = std::chrono::steady_clock::now();
  int matched = 0, total = 0;
  for (const auto& [alpha, pq] : alphas) {
    const auto [p, q] = pq;
    for (std::int64_t n = 1; n <= 8; ++n) {
      const std::int64_t rank = ((n + 1) * (q - p) + q - 1) / q;
      matched += enumerate_coverage(n, alpha) == Rational{rank, n + 1};
      ++total;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {matched == total && secs < 1.0, fmt("%d/%d exact matches in %.4f s", matched, total, secs)};
}

Outcome marginal_validity(const ExperimentResult& r) {
  bool ok = true;
  std::string detail;
  for (const auto& c : r.cells) {
    const auto& s = c.splits.front();
    const double level = s.level.value();
    const bool within = std::abs(c.coverage.mean - level) <= 0.03 && s.n_calib == 500 && s.n_test >= 2000;
    ok = ok && within;
    detail += fmt("%s@%.2f %.3f(%.3f) vs %.3f%s; ", c.family.c_str(), c.alpha, c.coverage.mean, c.coverage.std, level,
                  within ? "" : " OUT");
  }
  return {ok && r.cells.size() == 12, detail};
}

Outcome toy_adaptivity() {
  ExperimentConfig cfg;
  cfg.dataset = "toy";
  cfg.n = 3000;
  cfg.regressor = RegressorKind::Oracle;
  cfg.fractions = {0.0, 1.0 / 6, 1.0 / 6, 4.0 / 6};
  cfg.families = {Family::Baseline, Family::Gauss};
  cfg.alphas = {0.1};
  cfg.wsc_directions = 10;
  const auto prepared = prepare_data(cfg);
  const auto result = run_experiment(cfg);
  std::vector<double> ratios[2];
  for (const auto& s : result.splits) {
    // The same partition run_split draws for this split.
    const auto parts = split(prepared.data, {cfg.fractions[1], cfg.fractions[2], cfg.fractions[3]},
                             derive_seed(derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(s.split)), 0));
    const VectorXd f_calib = VectorXd::Constant(parts[1].rows(), prepared.labels.apply(0.0));
    const VectorXd f_test = VectorXd::Constant(parts[2].rows(), prepared.labels.apply(0.0));
    for (std::size_t fi = 0; fi < 2; ++fi) {
      const auto cp = calibrate(s.transforms[fi], f_calib, parts[1].labels, parts[1].features, 0.1);
      const auto iv = predict_intervals(cp, f_test, parts[2].features);
      // Running means stay exact when every radius is equal.
      double lo = 0.0, hi = 0.0;
      int nl = 0, nh = 0;
      for (Index i = 0; i < parts[2].rows(); ++i) {
        const double r = iv[static_cast<std::size_t>(i)].radius;
        if (parts[2].features(i, 0) > 0.5) {
          hi += (r - hi) / ++nh;
        } else {
          lo += (r - lo) / ++nl;
        }
      }
      ratios[fi].push_back(hi / lo);
    }
  }
  const double flow = mean_std(ratios[1]).mean;
  const bool baseline_exact = std::all_of(ratios[0].begin(), ratios[0].end(), [](double v) { return v == 1.0; });
  std::string per_split;
  for (double v : ratios[1]) per_split += fmt(" %.2f", v);
  return {flow >= 3.0 && flow <= 7.0 && baseline_exact,
          fmt("gauss ratio %.3f (splits%s), baseline ratio %s", flow, per_split.c_str(),
              baseline_exact ? "1 exactly" : "not 1")};
}

Outcome efficiency(const ExperimentResult& cos, const ExperimentResult& inverse) {
  bool ok = true;
  std::string detail;
  for (const auto& [name, r] : {std::pair<const char*, const ExperimentResult*>{"cos", &cos}, {"inverse", &inverse}}) {
    const double g = cell(*r, Family::Gauss, 0.05).avg_size.mean;
    const double b = cell(*r, Family::Baseline, 0.05).avg_size.mean;
    ok = ok && g <= 0.7 * b;
    detail += fmt("%s gauss %.4f baseline %.4f ratio %.3f; ", name, g, b, g / b);
  }
  return {ok, detail};
}

Outcome conditional_improvement(const ExperimentResult& r) {
  const auto& g = cell(r, Family::Gauss, 0.05);
  const auto& b = cell(r, Family::Baseline, 0.05);
  const double diff = g.wsc.mean - b.wsc.mean;
  return {diff >= 0.05, fmt("wsc gauss %.3f(%.3f) baseline %.3f(%.3f) diff %.3f", g.wsc.mean, g.wsc.std, b.wsc.mean,
                            b.wsc.std, diff)};
}

Outcome global_monotone_invariance() {
  SynthSpec spec;
  spec.kind = SynthKind::Toy;
  spec.n = 2000;
  spec.seed = 11;
  const auto parts = split(gen_synth(spec), {0.5, 0.5}, 12);
  const VectorXd f_calib = VectorXd::Zero(parts[0].rows());
  const VectorXd f_test = VectorXd::Zero(parts[1].rows());
  double worst = 0.0;
  for (double alpha : {0.05, 0.1, 0.35}) {
    const auto base = predict_intervals(calibrate(ConformityTransform::baseline(), f_calib, parts[0].labels,
                                                  parts[0].features, alpha), f_test, parts[1].features);
    const auto log = predict_intervals(calibrate(LogScore{}, f_calib, parts[0].labels, parts[0].features, alpha),
                                       f_test, parts[1].features);
    const auto rec = predict_intervals(
        calibrate(NegReciprocalScore{}, f_calib, parts[0].labels, parts[0].features, alpha), f_test, parts[1].features);
    for (std::size_t i = 0; i < base.size(); ++i) {
      worst = std::max({worst, rel_err(log[i].radius, base[i].radius), rel_err(rec[i].radius, base[i].radius)});
    }
  }
  return {worst < 1e-9, fmt("max relative radius difference %.2e over %lld test points", worst,
                            static_cast<long long>(parts[1].rows()))};
}

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(rng.uniform(std::log(lo), std::log(hi))); }

Outcome invertibility_and_jacobian() {
  Rng rng(7);
  double worst_rt = 0.0, worst_jac = 0.0;
  std::string detail;
  for (Family f : {Family::Baseline, Family::ER, Family::Gauss, Family::Uniform}) {
    double rt = 0.0, jac_err = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const int p = 1 + k % 2;
      const auto t = testing::random_transform(f, 3, static_cast<std::uint64_t>(k / 100), p);
      const VectorXd x = testing::random_features(1, 3, rng()).row(0).transpose();
      const double s = t.scale(x);
      // Uniform saturates in double precision once a / s is large.
      const double a = f == Family::Uniform ? s * log_uniform(rng, 1e-5, 10.0) : log_uniform(rng, 1e-6, 1e3);
      rt = std::max(rt, rel_err(invert(t, eval(t, a, x), x), a));
      const double fd = central_diff([&](double v) { return eval(t, v, x); }, a, 1e-4 * a);
      jac_err = std::max(jac_err, rel_err(fd, jacobian(t, a, x)));
    }
    worst_rt = std::max(worst_rt, rt);
    worst_jac = std::max(worst_jac, jac_err);
    detail += fmt("%s round trip %.1e jacobian %.1e; ", std::string(to_string(f)).c_str(), rt, jac_err);
  }
  return {worst_rt < 1e-9 && worst_jac < 1e-5, detail};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  int draws = 0;
  for (Family f : {Family::ER, Family::Gauss, Family::Uniform}) {
    for (int p : {1, 2}) {
      for (LocalizerKind kind : {LocalizerKind::Mlp, LocalizerKind::Cubic}) {
        for (std::uint64_t draw = 0; draw < 5; ++draw) {
          TrainConfig cfg = TrainConfig::defaults(f);
          cfg.exponent = p;
          cfg.localizer = kind;
          cfg.hidden = {6, 6};
          cfg.gamma = 0.05;
          cfg.seed = 500 + draw;
          const bool cubic = kind == LocalizerKind::Cubic;
          const Index dim = cubic ? 1 : 3;
          const MatrixXd x = testing::random_features(30, dim, 600 + draw, cubic ? 0.0 : -1.0, 1.0);
          const VectorXd a = testing::random_features(30, 1, 700 + draw, 0.05, 2.0).col(0);
          auto t = initial_transform(cfg, dim);
          const VectorXd grad = training_gradient(t, a, x);
          const VectorXd theta = parameters(*t.localizer);
          for (Index k = 0; k < theta.size(); ++k) {
            VectorXd v = theta;
            v(k) = theta(k) + 1e-6;
            set_parameters(*t.localizer, v);
            const double up = training_loss(t, a, x);
            v(k) = theta(k) - 1e-6;
            set_parameters(*t.localizer, v);
            const double down = training_loss(t, a, x);
            worst = std::max(worst, rel_err((up - down) / 2e-6, grad(k), 1e-6));
          }
          ++draws;
        }
      }
    }
  }
  return {worst < 1e-4, fmt("max relative error %.2e over %d parameter draws (ER, Gauss, Uniform)", worst, draws)};
}

std::string bins_summary(const char* name, const BinCoverageReport& r) {
  double worst = 0.0;
  for (const auto& b : r.bins) worst = std::max(worst, std::abs(b.coverage - r.level.value()) / b.se);
  return fmt("%s %s (worst %.2f se); ", name, r.all_within() ? "all bins within" : "bins outside", worst);
}

Outcome binwise_coverage() {
  const auto hom = check_factorization_equivalence(2000, 21);
  const auto exact_u = check_exact_flow(2000, 22);
  const auto exact_g = check_exact_flow(2000, 23, 5.0, {}, ExactToyFlow::Target::Gauss);
  return {hom.all_within() && exact_u.all_within() && exact_g.all_within(),
          bins_summary("homoscedastic baseline", hom) + bins_summary("exact uniform flow", exact_u) +
              bins_summary("exact gauss flow", exact_g)};
}

Outcome perturbation_bound() {
  bool ok = true;
  std::string detail;
  for (double eps : {0.0, 0.005, 0.01, 0.02}) {
    const auto pf = PerturbedFlow::documented(eps);
    check_monotone(pf);
    const auto r = theorem2_gap_vs_bound(pf);
    const bool pass = eps == 0.0 ? std::abs(r.gap) <= 3.0 * r.gap_se : r.holds;
    ok = ok && pass;
    detail += fmt("eps %.3f gap %.4f se %.4f bound %.4f%s; ", eps, r.gap, r.gap_se, r.bound, pass ? "" : " FAIL");
  }
  return {ok, detail};
}

int run(bool strict) {
  criterion(1, "exact finite-sample coverage", exact_coverage);

  auto cos_cfg = synthetic_run("synth-cos", {Family::Baseline, Family::ER, Family::Gauss, Family::Uniform},
                               {0.05, 0.1, 0.35});
  cos_cfg.wsc_directions = 10;
  ExperimentResult cos;
  criterion(2, "marginal validity on synth-cos", [&] {
    cos = run_experiment(cos_cfg);
    return marginal_validity(cos);
  });

  criterion(3, "toy adaptivity", toy_adaptivity);

  auto inv_cfg = synthetic_run("synth-inverse", {Family::Baseline, Family::Gauss}, {0.05});
  inv_cfg.wsc_directions = 10;
  criterion(4, "efficiency on synth-cos and synth-inverse", [&] { return efficiency(cos, run_experiment(inv_cfg)); });

  criterion(5, "conditional coverage on synth-squared", [&] {
    return conditional_improvement(
        run_experiment(synthetic_run("synth-squared", {Family::Baseline, Family::Gauss}, {0.05})));
  });

  criterion(6, "global monotone invariance", global_monotone_invariance);
  criterion(7, "invertibility and jacobian", invertibility_and_jacobian);
  criterion(8, "gradient correctness", gradient_correctness);
  criterion(9, "bin-wise coverage", binwise_coverage);
  criterion(10, "perturbation bound", perturbation_bound);

  std::printf("%d of 10 criteria failed\n", failures);
  return strict && failures > 0 ? 1 : 0;
}

}  // namespace
}  // namespace nfcp

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  return nfcp::run(strict);
}

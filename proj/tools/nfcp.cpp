#include "nfcp/experiment.hpp"
#include "nfcp/theory.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kRuntimeError = 2, kTheoryFailure = 3 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<double> alphas;
  std::vector<std::string> families;
};

nfcp::ExperimentConfig resolve(const Overrides& o) {
  nfcp::ExperimentConfig cfg = o.config.empty() ? nfcp::ExperimentConfig{} : nfcp::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.alphas.empty()) cfg.alphas = o.alphas;
  if (!o.families.empty()) {
    cfg.families.clear();
    for (const auto& f : o.families) {
      try {
        cfg.families.push_back(nfcp::parse_family(f));
      } catch (const nfcp::Error& e) {
        throw nfcp::Error(nfcp::ErrorCode::ConfigError, std::string("field 'families': ") + e.what());
      }
    }
  }
  cfg.validate();
  return cfg;
}

void print_summary(const nfcp::ExperimentResult& result) {
  for (const auto& c : result.cells) {
    const auto& first = c.splits.front();
    std::cout << c.family << " alpha=" << c.alpha << " level=" << first.level.str() << " coverage=" << c.coverage.mean
              << "(" << c.coverage.std << ") size=" << c.avg_size.mean << "(" << c.avg_size.std
              << ") wsc=" << c.wsc.mean << "(" << c.wsc.std << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split conformal prediction with trainable conformity transforms"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default run configuration and exit");

  Overrides gen, run, theory, figure;
  const auto add_common = [](CLI::App* sub, Overrides& o, const std::string& out_help) {
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--out", o.out, out_help);
  };

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV plus a .meta sidecar");
  gen_cmd->add_option("--config", gen.config, "Configuration file (dataset, n, xi, seed)");
  add_common(gen_cmd, gen, "Output CSV path (default data.csv)");

  auto* run_cmd = app.add_subcommand("run", "Train, calibrate and evaluate over repeated splits");
  run_cmd->add_option("--config", run.config, "Configuration file");
  add_common(run_cmd, run, "Output directory (overrides 'out')");
  run_cmd->add_option("--alpha", run.alphas, "Miscoverage level; repeat for several")->take_all();
  run_cmd->add_option("--family", run.families, "baseline, er, gauss or uniform; repeat for several")->take_all();

  auto* theory_cmd = app.add_subcommand("check-theory", "Run the coverage-theory verification suite");
  add_common(theory_cmd, theory, "Report path (default theory_report.txt)");

  auto* figure_cmd = app.add_subcommand("figure-data", "Emit the toy-example figure data as CSV");
  add_common(figure_cmd, figure, "Output directory (default figure)");
  figure_cmd->add_option("--alpha", figure.alphas, "Miscoverage level (default 0.1)")->expected(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (print_defaults) {
      std::cout << nfcp::to_text(nfcp::ExperimentConfig{});
      return kOk;
    }
    if (gen_cmd->parsed()) {
      Overrides o = gen;
      const std::string path = o.out.empty() ? "data.csv" : o.out;
      o.out.clear();
      const auto cfg = resolve(o);
      nfcp::gen_data(cfg, path);
      std::cout << "wrote " << path << " and " << path << ".meta\n";
      return kOk;
    }
    if (run_cmd->parsed()) {
      const auto cfg = resolve(run);
      const auto result = nfcp::run_experiment(cfg, cfg.out);
      print_summary(result);
      std::cout << "wrote " << cfg.out << "/report.csv, table.csv, report.json\n";
      return kOk;
    }
    if (theory_cmd->parsed()) {
      nfcp::TheoryCheckOptions opts;
      if (theory.seed) opts.seed = *theory.seed;
      const auto report = nfcp::run_theory_checks(opts);
      const std::string text = nfcp::format_theory_report(report);
      const std::string path = theory.out.empty() ? "theory_report.txt" : theory.out;
      std::ofstream out(path);
      if (!out.good()) throw nfcp::Error(nfcp::ErrorCode::Io, "cannot write '" + path + "'");
      out << text;
      std::cout << text;
      return report.passed() ? kOk : kTheoryFailure;
    }
    if (figure_cmd->parsed()) {
      nfcp::FigureOptions opts;
      if (figure.seed) opts.seed = *figure.seed;
      if (!figure.alphas.empty()) opts.alpha = figure.alphas.front();
      if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) {
        throw nfcp::Error(nfcp::ErrorCode::ConfigError, "field 'alpha': must lie in (0, 1)");
      }
      const std::string dir = figure.out.empty() ? "figure" : figure.out;
      const auto fig = nfcp::figure_data(opts);
      nfcp::write_figure_data(fig, dir);
      std::cout << "wrote " << dir << "/figure.csv, calibration.csv, quantiles.txt\n";
      return kOk;
    }
    std::cout << app.help();
    return kOk;
  } catch (const nfcp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == nfcp::ErrorCode::ConfigError ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

#pragma once

// End-to-end experiments: configuration, the per-split pipeline, report files, synthetic data
// export and the toy-example figure data. The configuration grammar is described in
// docs/config-format.md.

#include "nfcp/data.hpp"
#include "nfcp/evaluation.hpp"
#include "nfcp/regressor.hpp"
#include "nfcp/training.hpp"
#include "nfcp/transforms.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nfcp {

enum class RegressorKind { Forest, Oracle };

std::string to_string(RegressorKind kind);

struct ExperimentConfig {
  std::string dataset = "synth-cos";  // synth-{cos,squared,inverse,linear}, toy or csv
  std::string csv_path;
  Index n = 2000;
  double xi = 5.0;
  std::uint64_t seed = 0;

  RegressorKind regressor = RegressorKind::Forest;
  ForestParams forest;

  std::vector<Family> families{Family::Baseline, Family::ER, Family::Gauss, Family::Uniform};
  std::vector<double> alphas{0.05, 0.1, 0.35};
  int n_splits = 5;
  std::vector<double> fractions{0.5, 0.25, 0.125, 0.125};  // regressor, train, calibration, test

  LabelScaling label_scaling = LabelScaling::MinMax;
  Index pca_dims = 10;  // applied only when the data has more features

  LocalizerKind localizer = LocalizerKind::Mlp;
  std::vector<Index> hidden{100, 100, 100, 100, 100};
  double gamma = 1e-3;
  int exponent = 1;
  int iterations = 2000;
  Index batch_size = 0;
  double holdout_fraction = 0.2;
  int patience = 200;
  double lr_er = 1e-2;
  double lr_gauss = 1e-4;
  double lr_uniform = 1e-5;

  double wsc_delta = 0.1;
  int wsc_directions = 1000;

  int threads = 0;  // 0 means one per hardware thread
  bool save_models = false;
  std::string out = "results";

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Synthetic kind behind `dataset`; nullopt for csv.
  std::optional<SynthKind> synth_kind() const;
  TrainConfig train_config(Family family, std::uint64_t seed) const;
};

/// Flat `key = value` lines; `#` starts a comment and lists are comma separated. Unknown keys,
/// malformed values and failed validation throw ConfigError naming the key and line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Every key with its current value, in a form `parse_config` reads back.
std::string to_text(const ExperimentConfig& cfg);

/// Features, normalized labels and the regressor-independent facts needed by the pipeline.
struct PreparedData {
  Dataset data;
  LabelTransform labels;
  bool pca_applied = false;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct SplitOutcome {
  int split = 0;
  double mae = 0.0;  // regressor MAE on the test part, normalized units
  std::vector<SplitMetrics> rows;
  std::vector<ConformityTransform> transforms;  // one per configured family
  std::optional<ForestModel> forest;
};

/// One split: partition, regressor, transform training, calibration per alpha and evaluation.
/// Split s draws everything from derive_seed(cfg.seed, 100 + s).
SplitOutcome run_split(const ExperimentConfig& cfg, const PreparedData& prepared, int split);

struct ExperimentResult {
  std::vector<SplitOutcome> splits;  // ordered by split index
  std::vector<CellSummary> cells;
};

/// Runs all splits on a thread pool. With an output directory each split is flushed to
/// split_<k>.csv as soon as it finishes and the summary files are written at the end.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::optional<std::string>& out_dir = {});

/// Family rows by alpha columns of "mean(std)" cells for coverage, size and WSC.
void write_table_csv(const std::vector<CellSummary>& cells, const std::string& path);

/// Writes the dataset CSV and `<path>.meta`.
void gen_data(const ExperimentConfig& cfg, const std::string& path);

struct FigureOptions {
  Index n_train = 500;
  Index n_calib = 500;
  Index n_test = 500;
  double alpha = 0.1;
  double xi = 5.0;
  double gamma = 0.01;
  int exponent = 2;
  int iterations = 2000;
  double lr_er = 1e-2;
  double lr_flow = 1e-2;
  std::uint64_t seed = 0;
};

struct FigurePoint {
  double x = 0.0;
  double score = 0.0;  // A = |Y| with f = 0
  double baseline_bound = 0.0;
  double er_bound = 0.0;
  double flow_bound = 0.0;
};

struct CalibrationPoint {
  double x = 0.0;
  double a = 0.0;
  double b_er = 0.0;
  double b_flow = 0.0;
};

struct FigureData {
  std::vector<FigurePoint> test;
  std::vector<CalibrationPoint> calibration;
  double q_a = 0.0;
  double q_er = 0.0;
  double q_flow = 0.0;
  ConformityTransform er;
  ConformityTransform flow;
};

/// Toy example with f = 0: ER and Gauss flow transforms with the cubic localizer and scale
/// gamma + |g|^exponent, trained on a separate set, then calibrated and evaluated.
FigureData figure_data(const FigureOptions& opts = {});

/// figure.csv, calibration.csv and quantiles.txt inside `dir`.
void write_figure_data(const FigureData& fig, const std::string& dir);

}  // namespace nfcp

#pragma once

// Interval quality metrics: marginal coverage, average size and worst-slab coverage.

#include "nfcp/conformal.hpp"
#include "nfcp/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nfcp {

/// Fraction of labels inside [center - radius, center + radius]; the boundary counts as covered.
double empirical_coverage(const std::vector<PredictionInterval>& intervals, const VectorXd& labels);

std::vector<bool> covered_flags(const std::vector<PredictionInterval>& intervals, const VectorXd& labels);

/// Mean of 2 * radius.
double average_size(const std::vector<PredictionInterval>& intervals);

/// Smallest mean of `values` over contiguous windows of at least `min_len` entries.
/// Exact for 0/1 data of length below ~1e5 (the answer is snapped to a witness window).
double min_window_mean(const std::vector<double>& values, Index min_len);

struct WscOptions {
  double delta = 0.1;
  int n_directions = 1000;
  std::uint64_t seed = 0;
};

/// Worst-slab coverage: for each random unit direction v the samples are ordered by v.x and
/// every contiguous slab holding at least ceil(delta * n) samples is scored by its coverage;
/// the minimum over slabs and directions is returned. Direction i uses derive_seed(seed, i),
/// so a larger n_directions only adds slabs.
double wsc(const MatrixXd& features, const std::vector<bool>& covered, const WscOptions& opts = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

MeanStd mean_std(const std::vector<double>& values);

/// Metrics of one family at one alpha on one split.
struct SplitMetrics {
  int split = 0;
  std::string family;
  double alpha = 0.1;
  std::int64_t n_calib = 0;
  std::int64_t n_test = 0;
  Rational level;
  double coverage = 0.0;
  double avg_size = 0.0;
  double wsc = 0.0;
};

struct CellSummary {
  std::string family;
  double alpha = 0.1;
  MeanStd coverage;
  MeanStd avg_size;
  MeanStd wsc;
  std::vector<SplitMetrics> splits;
};

/// Groups per-split rows by (family, alpha), preserving first-seen order.
std::vector<CellSummary> summarize(const std::vector<SplitMetrics>& rows);

/// One row per split and cell plus a mean row and a std row per cell.
void write_report_csv(const std::vector<CellSummary>& cells, const std::string& path);

/// JSON summary document.
std::string report_json(const std::vector<CellSummary>& cells);

}  // namespace nfcp

#pragma once

// Samples, synthetic generators, CSV I/O, PCA, label scaling and seeded splits.

#include "nfcp/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nfcp {

struct DatasetMeta {
  std::string generator;  // "toy", "cos", ..., "csv"
  std::uint64_t seed = 0;
  VectorXd w;             // true coefficients of the synthetic mean (empty for toy / csv)
  double offset = 0.0;    // deterministic noise offset (0.1 for the polynomial kinds)
  double xi = 0.0;        // toy noise scale
};

struct Dataset {
  MatrixXd features;  // n x d
  VectorXd labels;    // n
  std::vector<std::string> feature_names;
  std::string label_name = "y";
  DatasetMeta meta;

  Index rows() const { return labels.size(); }
  Index dims() const { return features.cols(); }

  /// Rows in the given order.
  Dataset subset(const std::vector<Index>& rows) const;
  /// Throws ShapeMismatch / ParseError when row counts disagree or values are non-finite.
  void validate() const;
};

enum class SynthKind { Toy, Cos, Squared, Inverse, Linear };

std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& name);

struct SynthSpec {
  SynthKind kind = SynthKind::Cos;
  Index n = 1000;
  std::uint64_t seed = 0;
  std::optional<Eigen::Vector3d> w;  // drawn from N(0, I) with the seed when absent
  double xi = 5.0;                   // toy only: standard deviation for x > 0.5
};

/// Heteroscedastic noise scale sigma(x1) of a synthetic kind (toy: 1 or xi).
double noise_sigma(SynthKind kind, double x1, double xi = 5.0);

/// Polynomial kinds: x1 ~ U[-1, 1], row [1, x1, x1^2], y = row.w + 0.1 + sigma(x1) E.
/// Toy: x ~ U[0, 1], row [x], y ~ N(0, 1) for x < 0.5 and N(0, xi^2) otherwise.
Dataset gen_synth(const SynthSpec& spec);

/// Header row required; the last column is the label.
Dataset load_csv(const std::string& path);
/// Shortest round-trip decimal formatting.
void write_csv(const Dataset& ds, const std::string& path);
/// key=value sidecar describing the generator.
void write_meta(const Dataset& ds, const std::string& path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Whole-string decimal parse; nullopt on trailing characters, empty input or non-finite values.
std::optional<double> parse_double(std::string_view text);

struct PcaResult {
  Dataset reduced;
  MatrixXd projection;  // k x d, orthonormal rows
  VectorXd mean;        // d
  VectorXd eigenvalues; // top-k covariance eigenvalues, descending
  bool rank_deficient = false;
};

/// Centres the features and projects them on the top-k covariance eigenvectors. Each
/// component is signed so its largest-magnitude entry is positive. When fewer than k
/// positive eigenvalues exist the extra components are zero rows and `rank_deficient` is set.
PcaResult pca_reduce(const Dataset& ds, Index k);

enum class LabelScaling { MinMax, ZScore, None };

std::string to_string(LabelScaling s);
LabelScaling parse_label_scaling(const std::string& name);

/// y' = (y - shift) / scale.
struct LabelTransform {
  LabelScaling mode = LabelScaling::None;
  double shift = 0.0;
  double scale = 1.0;

  double apply(double y) const { return (y - shift) / scale; }
  double restore(double y) const { return y * scale + shift; }
  /// Interval sizes map back with the scale only.
  double restore_size(double size) const { return size * scale; }
};

struct NormalizedDataset {
  Dataset data;
  LabelTransform transform;
};

NormalizedDataset normalize_labels(const Dataset& ds, LabelScaling mode = LabelScaling::MinMax);

/// Seeded uniformly random partition into parts with the given fractions (sum 1).
/// Sizes use largest remainders so they add up to n exactly.
std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions, std::uint64_t seed);

/// The index partition behind `split`.
std::vector<std::vector<Index>> split_indices(Index n, const std::vector<double>& fractions, std::uint64_t seed);

}  // namespace nfcp

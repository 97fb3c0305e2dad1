#include "nfcp/data.hpp"

#include "nfcp/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace nfcp {

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    require(r >= 0 && r < this->rows(), ErrorCode::InvalidArgument, "subset row out of range");
    out.features.row(static_cast<Index>(i)) = features.row(r);
    out.labels(static_cast<Index>(i)) = labels(r);
  }
  out.feature_names = feature_names;
  out.label_name = label_name;
  out.meta = meta;
  return out;
}

void Dataset::validate() const {
  require(features.rows() == labels.size(), ErrorCode::ShapeMismatch, "feature and label row counts differ");
  require(features.allFinite() && labels.allFinite(), ErrorCode::ParseError, "dataset contains non-finite values");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Toy: return "toy";
    case SynthKind::Cos: return "cos";
    case SynthKind::Squared: return "squared";
    case SynthKind::Inverse: return "inverse";
    case SynthKind::Linear: return "linear";
  }
  return "unknown";
}

SynthKind parse_synth_kind(const std::string& name) {
  std::string key = name;
  if (key.rfind("synth-", 0) == 0) key = key.substr(6);
  if (key == "toy") return SynthKind::Toy;
  if (key == "cos") return SynthKind::Cos;
  if (key == "squared") return SynthKind::Squared;
  if (key == "inverse") return SynthKind::Inverse;
  if (key == "linear") return SynthKind::Linear;
  throw Error(ErrorCode::InvalidArgument, "unknown synthetic kind '" + name + "'");
}

double noise_sigma(SynthKind kind, double x1, double xi) {
  switch (kind) {
    case SynthKind::Toy: return x1 < 0.5 ? 1.0 : xi;
    case SynthKind::Cos: return x1 < 0.5 ? 2.0 * std::cos(std::numbers::pi / 2.0 * x1) : 0.0;
    case SynthKind::Squared: return x1 > 0.5 ? 2.0 * x1 * x1 : 0.0;
    case SynthKind::Inverse: return x1 < 0.5 ? 2.0 / (0.1 + std::abs(x1)) : 0.0;
    case SynthKind::Linear: return x1 > 0.5 ? 2.0 * std::abs(x1) : 0.0;
  }
  return 0.0;
}

Dataset gen_synth(const SynthSpec& spec) {
  require(spec.n > 0, ErrorCode::InvalidArgument, "synthetic sample count must be positive");
  Dataset ds;
  ds.meta.generator = to_string(spec.kind);
  ds.meta.seed = spec.seed;
  Rng rng(derive_seed(spec.seed, 1));
  if (spec.kind == SynthKind::Toy) {
    ds.meta.xi = spec.xi;
    ds.features.resize(spec.n, 1);
    ds.labels.resize(spec.n);
    ds.feature_names = {"x"};
    for (Index i = 0; i < spec.n; ++i) {
      const double x = rng.uniform();
      ds.features(i, 0) = x;
      ds.labels(i) = noise_sigma(SynthKind::Toy, x, spec.xi) * rng.normal();
    }
    return ds;
  }

  Eigen::Vector3d w;
  if (spec.w) {
    w = *spec.w;
  } else {
    Rng wrng(derive_seed(spec.seed, 0));
    for (Index j = 0; j < 3; ++j) w(j) = wrng.normal();
  }
  ds.meta.w = w;
  ds.meta.offset = 0.1;
  ds.features.resize(spec.n, 3);
  ds.labels.resize(spec.n);
  ds.feature_names = {"bias", "x1", "x1_sq"};
  for (Index i = 0; i < spec.n; ++i) {
    const double x1 = rng.uniform(-1.0, 1.0);
    const Eigen::Vector3d row(1.0, x1, x1 * x1);
    ds.features.row(i) = row.transpose();
    ds.labels(i) = row.dot(w) + 0.1 + noise_sigma(spec.kind, x1) * rng.normal();
  }
  return ds;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::EmptyDataset, "'" + path + "' has no header row");
  const auto header = split_commas(trim(line));
  require(header.size() >= 2, ErrorCode::ParseError, "header needs at least one feature and a label");
  const std::size_t cols = header.size();

  std::vector<double> values;
  Index n = 0;
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(trim(line));
    require(cells.size() == cols, ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns, found " +
                std::to_string(cells.size()));
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string& cell = cells[c];
      const auto v = parse_double(cell);
      require(v.has_value(), ErrorCode::ParseError,
              "line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " ('" + header[c] +
                  "'): cannot parse '" + cell + "' as a finite number");
      values.push_back(*v);
    }
    ++n;
  }
  require(n > 0, ErrorCode::EmptyDataset, "'" + path + "' has no data rows");

  Dataset ds;
  const auto d = static_cast<Index>(cols - 1);
  const Eigen::Map<const RowMatrixXd> all(values.data(), n, static_cast<Index>(cols));
  ds.features = all.leftCols(d);
  ds.labels = all.col(d);
  ds.feature_names.assign(header.begin(), header.end() - 1);
  ds.label_name = header.back();
  ds.meta.generator = "csv";
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  for (Index j = 0; j < ds.dims(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    out << (idx < ds.feature_names.size() ? ds.feature_names[idx] : "f" + std::to_string(j)) << ',';
  }
  out << ds.label_name << '\n';
  for (Index i = 0; i < ds.rows(); ++i) {
    for (Index j = 0; j < ds.dims(); ++j) out << format_double(ds.features(i, j)) << ',';
    out << format_double(ds.labels(i)) << '\n';
  }
  require(out.good(), ErrorCode::Io, "write to '" + path + "' failed");
}

void write_meta(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out << "generator=" << ds.meta.generator << '\n';
  out << "seed=" << ds.meta.seed << '\n';
  out << "n=" << ds.rows() << '\n';
  for (Index j = 0; j < ds.meta.w.size(); ++j) out << "w" << j << '=' << format_double(ds.meta.w(j)) << '\n';
  if (ds.meta.w.size() > 0) out << "offset=" << format_double(ds.meta.offset) << '\n';
  if (ds.meta.generator == "toy") out << "xi=" << format_double(ds.meta.xi) << '\n';
}

PcaResult pca_reduce(const Dataset& ds, Index k) {
  const Index d = ds.dims();
  require(k >= 1 && k <= d, ErrorCode::InvalidArgument, "pca: need 1 <= k <= d");
  require(ds.rows() >= 2, ErrorCode::EmptyDataset, "pca needs at least two rows");
  PcaResult res;
  res.mean = ds.features.colwise().mean().transpose();
  const MatrixXd centered = ds.features.rowwise() - res.mean.transpose();
  const MatrixXd cov = centered.transpose() * centered / static_cast<double>(ds.rows() - 1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::InvalidArgument, "covariance eigendecomposition failed");

  const VectorXd& evals = solver.eigenvalues();  // ascending
  const double tol = 1e-12 * std::max(1.0, std::abs(evals(d - 1)));
  res.projection = MatrixXd::Zero(k, d);
  res.eigenvalues = VectorXd::Zero(k);
  for (Index c = 0; c < k; ++c) {
    const Index src = d - 1 - c;
    if (evals(src) <= tol) {
      res.rank_deficient = true;
      continue;
    }
    VectorXd v = solver.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    res.projection.row(c) = v.transpose();
    res.eigenvalues(c) = evals(src);
  }
  res.reduced = ds;
  res.reduced.features = centered * res.projection.transpose();
  res.reduced.feature_names.clear();
  for (Index c = 0; c < k; ++c) res.reduced.feature_names.push_back("pc" + std::to_string(c + 1));
  return res;
}

std::string to_string(LabelScaling s) {
  switch (s) {
    case LabelScaling::MinMax: return "minmax";
    case LabelScaling::ZScore: return "zscore";
    case LabelScaling::None: return "none";
  }
  return "none";
}

LabelScaling parse_label_scaling(const std::string& name) {
  if (name == "minmax") return LabelScaling::MinMax;
  if (name == "zscore") return LabelScaling::ZScore;
  if (name == "none") return LabelScaling::None;
  throw Error(ErrorCode::InvalidArgument, "unknown label scaling '" + name + "'");
}

NormalizedDataset normalize_labels(const Dataset& ds, LabelScaling mode) {
  require(ds.rows() >= 2, ErrorCode::InvalidArgument, "label normalization needs at least two rows");
  LabelTransform t;
  t.mode = mode;
  if (mode == LabelScaling::MinMax) {
    const double lo = ds.labels.minCoeff();
    const double hi = ds.labels.maxCoeff();
    require(hi > lo, ErrorCode::DegenerateLabels, "all labels are equal");
    t.shift = lo;
    t.scale = hi - lo;
  } else if (mode == LabelScaling::ZScore) {
    const double mean = ds.labels.mean();
    const double var = (ds.labels.array() - mean).square().sum() / static_cast<double>(ds.rows() - 1);
    require(var > 0.0, ErrorCode::DegenerateLabels, "all labels are equal");
    t.shift = mean;
    t.scale = std::sqrt(var);
  }
  NormalizedDataset out{ds, t};
  out.data.labels = ds.labels.unaryExpr([&](double y) { return t.apply(y); });
  if (mode == LabelScaling::MinMax) {
    // Pin the extremes so round-off cannot leave [0, 1].
    out.data.labels = out.data.labels.cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

std::vector<std::vector<Index>> split_indices(Index n, const std::vector<double>& fractions, std::uint64_t seed) {
  require(!fractions.empty(), ErrorCode::InvalidArgument, "split needs at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    require(f >= 0.0, ErrorCode::InvalidArgument, "split fractions must be non-negative");
    total += f;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "split fractions must sum to 1");

  // Largest-remainder apportionment; ties go to the earlier part.
  const std::size_t parts = fractions.size();
  std::vector<Index> sizes(parts);
  std::vector<std::pair<double, std::size_t>> remainders;
  Index assigned = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const double exact = fractions[p] * static_cast<double>(n);
    double whole = std::floor(exact + 1e-9);
    sizes[p] = static_cast<Index>(whole);
    assigned += sizes[p];
    remainders.emplace_back(exact - whole, p);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[remainders[i % parts].second];
  for (std::size_t p = 0; p < parts; ++p) {
    require(sizes[p] > 0, ErrorCode::EmptyPart, "split part " + std::to_string(p) + " would be empty");
  }

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  if (parts > 1) {
    Rng rng(seed);
    for (Index i = n - 1; i > 0; --i) {
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    }
  }
  std::vector<std::vector<Index>> out;
  auto it = perm.begin();
  for (Index size : sizes) {
    out.emplace_back(it, it + size);
    it += size;
  }
  return out;
}

std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions, std::uint64_t seed) {
  std::vector<Dataset> parts;
  for (const auto& idx : split_indices(ds.rows(), fractions, seed)) parts.push_back(ds.subset(idx));
  return parts;
}

}  // namespace nfcp

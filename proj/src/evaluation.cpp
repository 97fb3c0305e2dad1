#include "nfcp/evaluation.hpp"

#include "nfcp/data.hpp"
#include "nfcp/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

namespace nfcp {

std::vector<bool> covered_flags(const std::vector<PredictionInterval>& intervals, const VectorXd& labels) {
  require(static_cast<Index>(intervals.size()) == labels.size(), ErrorCode::ShapeMismatch,
          "intervals and labels differ in length");
  std::vector<bool> out(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) out[i] = intervals[i].contains(labels(static_cast<Index>(i)));
  return out;
}

double empirical_coverage(const std::vector<PredictionInterval>& intervals, const VectorXd& labels) {
  require(!intervals.empty(), ErrorCode::EmptyDataset, "coverage of an empty test set");
  const auto flags = covered_flags(intervals, labels);
  const auto hits = std::count(flags.begin(), flags.end(), true);
  return static_cast<double>(hits) / static_cast<double>(flags.size());
}

double average_size(const std::vector<PredictionInterval>& intervals) {
  require(!intervals.empty(), ErrorCode::EmptyDataset, "average size of an empty test set");
  double total = 0.0;
  for (const auto& pi : intervals) total += pi.size();
  return total / static_cast<double>(intervals.size());
}

double min_window_mean(const std::vector<double>& values, Index min_len) {
  const auto n = static_cast<Index>(values.size());
  require(min_len >= 1 && min_len <= n, ErrorCode::InvalidArgument, "window length out of range");
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (Index i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + values[static_cast<std::size_t>(i)];
  auto mean_of = [&](Index i, Index j) {
    return (prefix[static_cast<std::size_t>(j)] - prefix[static_cast<std::size_t>(i)]) / static_cast<double>(j - i);
  };

  // Is there a window [i, j) with j - i >= min_len and mean <= t? Returns one if so.
  auto witness = [&](double t) -> std::optional<std::pair<Index, Index>> {
    double best = -std::numeric_limits<double>::infinity();
    Index best_i = 0;
    for (Index j = min_len; j <= n; ++j) {
      const Index i = j - min_len;
      const double cand = prefix[static_cast<std::size_t>(i)] - t * static_cast<double>(i);
      if (cand > best) {
        best = cand;
        best_i = i;
      }
      if (prefix[static_cast<std::size_t>(j)] - t * static_cast<double>(j) <= best) return std::make_pair(best_i, j);
    }
    return std::nullopt;
  };

  double hi = mean_of(0, n);
  double lo = *std::min_element(values.begin(), values.end()) - 1.0;
  auto found = std::make_pair(Index{0}, n);
  for (int iter = 0; iter < 64 && hi - lo > 1e-13; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (auto w = witness(mid)) {
      hi = mid;
      found = *w;
    } else {
      lo = mid;
    }
  }
  return std::min(mean_of(found.first, found.second), mean_of(0, n));
}

double wsc(const MatrixXd& features, const std::vector<bool>& covered, const WscOptions& opts) {
  const Index n = features.rows();
  require(static_cast<Index>(covered.size()) == n, ErrorCode::ShapeMismatch, "wsc: covered flags and features differ");
  require(opts.delta > 0.0 && opts.delta < 1.0, ErrorCode::InvalidArgument, "wsc: delta must lie in (0, 1)");
  require(opts.n_directions >= 1, ErrorCode::InvalidArgument, "wsc: need at least one direction");
  require(opts.delta * static_cast<double>(n) >= 2.0, ErrorCode::TooFewSamples,
          "wsc: delta * n must be at least 2");
  const auto min_len = static_cast<Index>(std::ceil(opts.delta * static_cast<double>(n) - 1e-9));

  if (std::all_of(covered.begin(), covered.end(), [](bool c) { return c; })) return 1.0;

  const Index d = features.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::vector<double> ordered(static_cast<std::size_t>(n));
  double worst = 1.0;
  for (int k = 0; k < opts.n_directions; ++k) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    VectorXd v(d);
    do {
      for (Index j = 0; j < d; ++j) v(j) = rng.normal();
    } while (v.norm() == 0.0);
    v.normalize();
    const VectorXd proj = features * v;
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return proj(a) < proj(b); });
    for (Index i = 0; i < n; ++i) {
      ordered[static_cast<std::size_t>(i)] = covered[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] ? 1.0 : 0.0;
    }
    worst = std::min(worst, min_window_mean(ordered, min_len));
  }
  return worst;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const auto n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::vector<CellSummary> summarize(const std::vector<SplitMetrics>& rows) {
  std::vector<CellSummary> cells;
  for (const auto& row : rows) {
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const CellSummary& c) { return c.family == row.family && c.alpha == row.alpha; });
    if (it == cells.end()) {
      cells.push_back(CellSummary{row.family, row.alpha, {}, {}, {}, {}});
      it = cells.end() - 1;
    }
    it->splits.push_back(row);
  }
  for (auto& cell : cells) {
    std::vector<double> cov, size, w;
    for (const auto& s : cell.splits) {
      cov.push_back(s.coverage);
      size.push_back(s.avg_size);
      w.push_back(s.wsc);
    }
    cell.coverage = mean_std(cov);
    cell.avg_size = mean_std(size);
    cell.wsc = mean_std(w);
  }
  return cells;
}

void write_report_csv(const std::vector<CellSummary>& cells, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out << "family,alpha,split,n_calib,n_test,level,level_value,coverage,size,wsc\n";
  for (const auto& cell : cells) {
    for (const auto& s : cell.splits) {
      out << cell.family << ',' << format_double(cell.alpha) << ',' << s.split << ',' << s.n_calib << ','
          << s.n_test << ',' << s.level.str() << ',' << format_double(s.level.value()) << ','
          << format_double(s.coverage) << ',' << format_double(s.avg_size) << ',' << format_double(s.wsc) << '\n';
    }
    const auto& first = cell.splits.front();
    out << cell.family << ',' << format_double(cell.alpha) << ",mean," << first.n_calib << ',' << first.n_test << ','
        << first.level.str() << ',' << format_double(first.level.value()) << ',' << format_double(cell.coverage.mean)
        << ',' << format_double(cell.avg_size.mean) << ',' << format_double(cell.wsc.mean) << '\n';
    out << cell.family << ',' << format_double(cell.alpha) << ",std," << first.n_calib << ',' << first.n_test << ','
        << first.level.str() << ',' << format_double(first.level.value()) << ',' << format_double(cell.coverage.std)
        << ',' << format_double(cell.avg_size.std) << ',' << format_double(cell.wsc.std) << '\n';
  }
  require(out.good(), ErrorCode::Io, "write to '" + path + "' failed");
}

std::string report_json(const std::vector<CellSummary>& cells) {
  using nlohmann::json;
  json doc = json::array();
  for (const auto& cell : cells) {
    json splits = json::array();
    for (const auto& s : cell.splits) {
      splits.push_back({{"split", s.split}, {"coverage", s.coverage}, {"size", s.avg_size}, {"wsc", s.wsc}});
    }
    const auto& first = cell.splits.front();
    doc.push_back({
        {"family", cell.family},
        {"alpha", cell.alpha},
        {"n_calib", first.n_calib},
        {"n_test", first.n_test},
        {"finite_sample_level", first.level.str()},
        {"finite_sample_level_value", first.level.value()},
        {"coverage", {{"mean", cell.coverage.mean}, {"std", cell.coverage.std}}},
        {"size", {{"mean", cell.avg_size.mean}, {"std", cell.avg_size.std}}},
        {"wsc", {{"mean", cell.wsc.mean}, {"std", cell.wsc.std}}},
        {"splits", splits},
    });
  }
  return doc.dump(2);
}

}  // namespace nfcp

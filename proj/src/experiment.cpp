#include "nfcp/experiment.hpp"

#include "nfcp/conformal.hpp"
#include "nfcp/rng.hpp"
#include "nfcp/serialize.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace nfcp {

namespace {

[[noreturn]] void config_fail(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::ConfigError, "field '" + key + "': " + what);
}

void config_require(bool cond, const std::string& key, const std::string& what) {
  if (!cond) config_fail(key, what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  const auto d = parse_double(v);
  if (!d) config_fail(key, "'" + v + "' is not a finite number");
  return *d;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) config_fail(key, "'" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  config_fail(key, "'" + v + "' is not a boolean (true/false)");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) {
    if (item.empty()) config_fail(key, "empty list entry");
    out.push_back(convert(item));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

std::string localizer_name(LocalizerKind k) { return k == LocalizerKind::Mlp ? "mlp" : "cubic"; }

const std::vector<std::string> kDatasets{"synth-cos", "synth-squared", "synth-inverse", "synth-linear", "toy", "csv"};

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
      {"csv_path", [](auto& c, auto&, auto& v) { c.csv_path = v; }},
      {"n", [](auto& c, auto& k, auto& v) { c.n = to_int<Index>(k, v); }},
      {"xi", [](auto& c, auto& k, auto& v) { c.xi = to_double(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_int<std::uint64_t>(k, v); }},
      {"regressor",
       [](auto& c, auto& k, auto& v) {
         if (v == "forest") c.regressor = RegressorKind::Forest;
         else if (v == "oracle") c.regressor = RegressorKind::Oracle;
         else config_fail(k, "expected forest or oracle, found '" + v + "'");
       }},
      {"forest_trees", [](auto& c, auto& k, auto& v) { c.forest.n_trees = to_int<int>(k, v); }},
      {"forest_max_depth", [](auto& c, auto& k, auto& v) { c.forest.max_depth = to_int<int>(k, v); }},
      {"forest_min_leaf", [](auto& c, auto& k, auto& v) { c.forest.min_leaf = to_int<int>(k, v); }},
      {"forest_mtry", [](auto& c, auto& k, auto& v) { c.forest.mtry = to_int<int>(k, v); }},
      {"forest_bootstrap", [](auto& c, auto& k, auto& v) { c.forest.bootstrap = to_bool(k, v); }},
      {"families",
       [](auto& c, auto& k, auto& v) {
         c.families = to_list<Family>(k, v, [&](const std::string& s) {
           try {
             return parse_family(s);
           } catch (const Error& e) {
             config_fail(k, e.what());
           }
         });
       }},
      {"alphas",
       [](auto& c, auto& k, auto& v) {
         c.alphas = to_list<double>(k, v, [&](const std::string& s) { return to_double(k, s); });
       }},
      {"n_splits", [](auto& c, auto& k, auto& v) { c.n_splits = to_int<int>(k, v); }},
      {"fractions",
       [](auto& c, auto& k, auto& v) {
         c.fractions = to_list<double>(k, v, [&](const std::string& s) { return to_double(k, s); });
       }},
      {"label_scaling",
       [](auto& c, auto& k, auto& v) {
         try {
           c.label_scaling = parse_label_scaling(v);
         } catch (const Error& e) {
           config_fail(k, e.what());
         }
       }},
      {"pca_dims", [](auto& c, auto& k, auto& v) { c.pca_dims = to_int<Index>(k, v); }},
      {"localizer",
       [](auto& c, auto& k, auto& v) {
         if (v == "mlp") c.localizer = LocalizerKind::Mlp;
         else if (v == "cubic") c.localizer = LocalizerKind::Cubic;
         else config_fail(k, "expected mlp or cubic, found '" + v + "'");
       }},
      {"hidden",
       [](auto& c, auto& k, auto& v) {
         c.hidden = to_list<Index>(k, v, [&](const std::string& s) { return to_int<Index>(k, s); });
       }},
      {"gamma", [](auto& c, auto& k, auto& v) { c.gamma = to_double(k, v); }},
      {"exponent", [](auto& c, auto& k, auto& v) { c.exponent = to_int<int>(k, v); }},
      {"iterations", [](auto& c, auto& k, auto& v) { c.iterations = to_int<int>(k, v); }},
      {"batch_size",
       [](auto& c, auto& k, auto& v) { c.batch_size = v == "full" ? Index{0} : to_int<Index>(k, v); }},
      {"holdout_fraction", [](auto& c, auto& k, auto& v) { c.holdout_fraction = to_double(k, v); }},
      {"patience", [](auto& c, auto& k, auto& v) { c.patience = to_int<int>(k, v); }},
      {"lr_er", [](auto& c, auto& k, auto& v) { c.lr_er = to_double(k, v); }},
      {"lr_gauss", [](auto& c, auto& k, auto& v) { c.lr_gauss = to_double(k, v); }},
      {"lr_uniform", [](auto& c, auto& k, auto& v) { c.lr_uniform = to_double(k, v); }},
      {"wsc_delta", [](auto& c, auto& k, auto& v) { c.wsc_delta = to_double(k, v); }},
      {"wsc_directions", [](auto& c, auto& k, auto& v) { c.wsc_directions = to_int<int>(k, v); }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = to_int<int>(k, v); }},
      {"save_models", [](auto& c, auto& k, auto& v) { c.save_models = to_bool(k, v); }},
      {"out", [](auto& c, auto&, auto& v) { c.out = v; }},
  };
  return table;
}

std::string fmt_metric(const MeanStd& m) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  out << m.mean << '(' << m.std << ')';
  return out.str();
}

void write_rows_csv(const std::vector<SplitMetrics>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out << "family,alpha,split,n_calib,n_test,level,level_value,coverage,size,wsc\n";
  for (const auto& s : rows) {
    out << s.family << ',' << format_double(s.alpha) << ',' << s.split << ',' << s.n_calib << ',' << s.n_test << ','
        << s.level.str() << ',' << format_double(s.level.value()) << ',' << format_double(s.coverage) << ','
        << format_double(s.avg_size) << ',' << format_double(s.wsc) << '\n';
  }
  require(out.good(), ErrorCode::Io, "write to '" + path + "' failed");
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorCode::Io, "write to '" + path + "' failed");
}

/// Part fractions actually used: the regressor part is dropped when it is empty.
std::vector<double> used_fractions(const ExperimentConfig& cfg) {
  if (cfg.fractions[0] == 0.0) return {cfg.fractions.begin() + 1, cfg.fractions.end()};
  return cfg.fractions;
}

Index calibration_size(const ExperimentConfig& cfg, Index n) {
  const auto parts = split_indices(n, used_fractions(cfg), 0);
  return static_cast<Index>(parts[parts.size() - 2].size());
}

}  // namespace

std::string to_string(RegressorKind kind) { return kind == RegressorKind::Forest ? "forest" : "oracle"; }

std::optional<SynthKind> ExperimentConfig::synth_kind() const {
  if (dataset == "csv") return std::nullopt;
  return parse_synth_kind(dataset);
}

void ExperimentConfig::validate() const {
  config_require(std::find(kDatasets.begin(), kDatasets.end(), dataset) != kDatasets.end(), "dataset",
                 "unknown dataset '" + dataset + "'");
  const bool csv = dataset == "csv";
  config_require(!csv || !csv_path.empty(), "csv_path", "required when dataset = csv");
  config_require(csv || n >= 10, "n", "must be at least 10");
  config_require(xi > 0.0, "xi", "must be positive");
  config_require(!(csv && regressor == RegressorKind::Oracle), "regressor",
                 "the oracle is only available for synthetic datasets");
  config_require(forest.n_trees >= 1, "forest_trees", "must be positive");
  config_require(forest.max_depth >= 1, "forest_max_depth", "must be positive");
  config_require(forest.min_leaf >= 1, "forest_min_leaf", "must be positive");
  config_require(forest.mtry >= 0, "forest_mtry", "must be >= 0");

  config_require(!families.empty(), "families", "at least one family is required");
  for (std::size_t i = 0; i < families.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      config_require(families[i] != families[j], "families", "duplicate entry '" + std::string(nfcp::to_string(families[i])) + "'");
    }
  }
  config_require(!alphas.empty(), "alphas", "at least one alpha is required");
  for (double a : alphas) config_require(a > 0.0 && a < 1.0, "alphas", "every alpha must lie in (0, 1)");
  config_require(n_splits >= 1, "n_splits", "must be positive");

  config_require(fractions.size() == 4, "fractions", "expects 4 entries: regressor, train, calibration, test");
  double total = 0.0;
  for (double f : fractions) {
    config_require(f >= 0.0, "fractions", "entries must be non-negative");
    total += f;
  }
  config_require(std::abs(total - 1.0) <= 1e-9, "fractions", "entries must sum to 1");
  config_require(fractions[1] > 0.0 && fractions[2] > 0.0 && fractions[3] > 0.0, "fractions",
                 "train, calibration and test parts must be non-empty");
  config_require(regressor == RegressorKind::Oracle || fractions[0] > 0.0, "fractions",
                 "the forest needs a non-empty regressor part");

  config_require(pca_dims >= 1, "pca_dims", "must be positive");
  config_require(gamma > 0.0, "gamma", "must be positive");
  config_require(exponent == 1 || exponent == 2, "exponent", "must be 1 or 2");
  config_require(iterations > 0, "iterations", "must be positive");
  config_require(batch_size >= 0, "batch_size", "must be 'full' or a positive integer");
  config_require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "holdout_fraction", "must lie in [0, 1)");
  config_require(patience > 0, "patience", "must be positive");
  for (Index w : hidden) config_require(w > 0, "hidden", "widths must be positive");
  config_require(lr_er > 0.0, "lr_er", "must be positive");
  config_require(lr_gauss > 0.0, "lr_gauss", "must be positive");
  config_require(lr_uniform > 0.0, "lr_uniform", "must be positive");
  config_require(wsc_delta > 0.0 && wsc_delta < 1.0, "wsc_delta", "must lie in (0, 1)");
  config_require(wsc_directions >= 1, "wsc_directions", "must be positive");
  config_require(threads >= 0, "threads", "must be >= 0");
}

TrainConfig ExperimentConfig::train_config(Family family, std::uint64_t train_seed) const {
  TrainConfig t = TrainConfig::defaults(family);
  t.gamma = gamma;
  t.exponent = exponent;
  t.iterations = iterations;
  t.batch_size = batch_size;
  t.holdout_fraction = holdout_fraction;
  t.patience = patience;
  t.localizer = localizer;
  t.hidden = hidden;
  t.seed = train_seed;
  switch (family) {
    case Family::ER: t.learning_rate = lr_er; break;
    case Family::Gauss: t.learning_rate = lr_gauss; break;
    case Family::Uniform: t.learning_rate = lr_uniform; break;
    case Family::Baseline: break;
  }
  return t;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": unknown field '" + key + "'");
    }
    try {
      it->second(cfg, key, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& c) {
  const std::function<std::string(const double&)> fd = [](const double& v) { return format_double(v); };
  std::ostringstream out;
  out << "dataset = " << c.dataset << '\n'
      << "csv_path = " << c.csv_path << '\n'
      << "n = " << c.n << '\n'
      << "xi = " << format_double(c.xi) << '\n'
      << "seed = " << c.seed << '\n'
      << "regressor = " << to_string(c.regressor) << '\n'
      << "forest_trees = " << c.forest.n_trees << '\n'
      << "forest_max_depth = " << c.forest.max_depth << '\n'
      << "forest_min_leaf = " << c.forest.min_leaf << '\n'
      << "forest_mtry = " << c.forest.mtry << '\n'
      << "forest_bootstrap = " << (c.forest.bootstrap ? "true" : "false") << '\n'
      << "families = "
      << join<Family>(c.families, [](const Family& f) { return std::string(nfcp::to_string(f)); }) << '\n'
      << "alphas = " << join(c.alphas, fd) << '\n'
      << "n_splits = " << c.n_splits << '\n'
      << "fractions = " << join(c.fractions, fd) << '\n'
      << "label_scaling = " << to_string(c.label_scaling) << '\n'
      << "pca_dims = " << c.pca_dims << '\n'
      << "localizer = " << localizer_name(c.localizer) << '\n'
      << "hidden = " << join<Index>(c.hidden, [](const Index& w) { return std::to_string(w); }) << '\n'
      << "gamma = " << format_double(c.gamma) << '\n'
      << "exponent = " << c.exponent << '\n'
      << "iterations = " << c.iterations << '\n'
      << "batch_size = " << (c.batch_size == 0 ? std::string("full") : std::to_string(c.batch_size)) << '\n'
      << "holdout_fraction = " << format_double(c.holdout_fraction) << '\n'
      << "patience = " << c.patience << '\n'
      << "lr_er = " << format_double(c.lr_er) << '\n'
      << "lr_gauss = " << format_double(c.lr_gauss) << '\n'
      << "lr_uniform = " << format_double(c.lr_uniform) << '\n'
      << "wsc_delta = " << format_double(c.wsc_delta) << '\n'
      << "wsc_directions = " << c.wsc_directions << '\n'
      << "threads = " << c.threads << '\n'
      << "save_models = " << (c.save_models ? "true" : "false") << '\n'
      << "out = " << c.out << '\n';
  return out.str();
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset raw;
  if (const auto kind = cfg.synth_kind()) {
    SynthSpec spec;
    spec.kind = *kind;
    spec.n = cfg.n;
    spec.seed = cfg.seed;
    spec.xi = cfg.xi;
    raw = gen_synth(spec);
  } else {
    raw = load_csv(cfg.csv_path);
  }
  PreparedData out;
  if (raw.dims() > cfg.pca_dims) {
    raw = pca_reduce(raw, cfg.pca_dims).reduced;
    out.pca_applied = true;
  }
  auto normalized = normalize_labels(raw, cfg.label_scaling);
  out.data = std::move(normalized.data);
  out.labels = normalized.transform;
  // The calibration part must hold enough points for a finite quantile at every alpha.
  Index n_calib = 0;
  try {
    n_calib = calibration_size(cfg, out.data.rows());
  } catch (const Error& e) {
    config_fail("fractions", e.what());
  }
  for (double a : cfg.alphas) {
    config_require(quantile_rank(n_calib, a) <= n_calib, "alphas",
                   "alpha " + format_double(a) + " needs more than the " + std::to_string(n_calib) +
                       " calibration points");
  }
  return out;
}

SplitOutcome run_split(const ExperimentConfig& cfg, const PreparedData& prepared, int split_index) {
  const std::uint64_t split_seed = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(split_index));
  auto parts = split(prepared.data, used_fractions(cfg), derive_seed(split_seed, 0));
  if (parts.size() == 3) parts.insert(parts.begin(), Dataset{});
  const Dataset& train = parts[1];
  const Dataset& calib = parts[2];
  const Dataset& test = parts[3];

  SplitOutcome out;
  out.split = split_index;
  std::function<VectorXd(const MatrixXd&)> predict;
  if (cfg.regressor == RegressorKind::Forest) {
    ForestParams fp = cfg.forest;
    fp.seed = derive_seed(split_seed, 1);
    out.forest = fit_forest(parts[0], fp);
    predict = [&forest = *out.forest](const MatrixXd& x) { return forest.predict_batch(x); };
  } else {
    const auto& meta = prepared.data.meta;
    const LabelTransform lt = prepared.labels;
    if (meta.w.size() == 0) {
      predict = [lt](const MatrixXd& x) { return VectorXd::Constant(x.rows(), lt.apply(0.0)).eval(); };
    } else {
      const OraclePredictor oracle{meta.w, meta.offset};
      predict = [oracle, lt](const MatrixXd& x) {
        return oracle.predict_batch(x).unaryExpr([&](double v) { return lt.apply(v); }).eval();
      };
    }
  }
  const VectorXd f_train = predict(train.features);
  const VectorXd f_calib = predict(calib.features);
  const VectorXd f_test = predict(test.features);
  out.mae = mae(f_test, test.labels);

  WscOptions wo;
  wo.delta = cfg.wsc_delta;
  wo.n_directions = cfg.wsc_directions;
  wo.seed = derive_seed(split_seed, 2);

  for (std::size_t fi = 0; fi < cfg.families.size(); ++fi) {
    const Family family = cfg.families[fi];
    const TrainConfig tc = cfg.train_config(family, derive_seed(split_seed, 10 + static_cast<std::uint64_t>(family)));
    auto trained = train_transform(tc, train, f_train);
    for (double alpha : cfg.alphas) {
      const auto cp = calibrate(trained.transform, f_calib, calib.labels, calib.features, alpha);
      const auto intervals = predict_intervals(cp, f_test, test.features);
      SplitMetrics m;
      m.split = split_index;
      m.family = std::string(to_string(family));
      m.alpha = alpha;
      m.n_calib = cp.n_calib;
      m.n_test = static_cast<std::int64_t>(intervals.size());
      m.level = cp.level();
      m.coverage = empirical_coverage(intervals, test.labels);
      m.avg_size = average_size(intervals);
      m.wsc = wsc(test.features, covered_flags(intervals, test.labels), wo);
      out.rows.push_back(std::move(m));
    }
    out.transforms.push_back(std::move(trained.transform));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::optional<std::string>& out_dir) {
  const PreparedData prepared = prepare_data(cfg);
  namespace fs = std::filesystem;
  if (out_dir) {
    fs::create_directories(*out_dir);
    if (cfg.save_models) fs::create_directories(fs::path(*out_dir) / "models");
    write_text(to_text(cfg), (fs::path(*out_dir) / "config.txt").string());
  }

  ExperimentResult result;
  result.splits.resize(static_cast<std::size_t>(cfg.n_splits));
  std::vector<std::exception_ptr> errors(result.splits.size());
  std::atomic<int> next{0};
  std::mutex io_mutex;

  const auto worker = [&] {
    for (int s = next++; s < cfg.n_splits; s = next++) {
      try {
        auto outcome = run_split(cfg, prepared, s);
        if (out_dir) {
          const std::lock_guard lock(io_mutex);
          const fs::path dir(*out_dir);
          write_rows_csv(outcome.rows, (dir / ("split_" + std::to_string(s) + ".csv")).string());
          if (cfg.save_models) {
            const fs::path models = dir / "models";
            const std::string prefix = "split" + std::to_string(s) + "_";
            if (outcome.forest) save(*outcome.forest, (models / (prefix + "forest.params")).string());
            for (std::size_t i = 0; i < cfg.families.size(); ++i) {
              save(outcome.transforms[i],
                   (models / (prefix + std::string(to_string(cfg.families[i])) + ".params")).string());
            }
          }
        }
        result.splits[static_cast<std::size_t>(s)] = std::move(outcome);
      } catch (...) {
        errors[static_cast<std::size_t>(s)] = std::current_exception();
      }
    }
  };

  int n_threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, cfg.n_splits);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<SplitMetrics> rows;
  for (const auto& s : result.splits) rows.insert(rows.end(), s.rows.begin(), s.rows.end());
  result.cells = summarize(rows);

  if (out_dir) {
    const fs::path dir(*out_dir);
    write_report_csv(result.cells, (dir / "report.csv").string());
    write_table_csv(result.cells, (dir / "table.csv").string());
    write_text(report_json(result.cells) + "\n", (dir / "report.json").string());
    std::ostringstream mae_csv;
    mae_csv << "split,mae\n";
    for (const auto& s : result.splits) mae_csv << s.split << ',' << format_double(s.mae) << '\n';
    write_text(mae_csv.str(), (dir / "mae.csv").string());
  }
  return result;
}

void write_table_csv(const std::vector<CellSummary>& cells, const std::string& path) {
  std::vector<std::string> families;
  std::vector<double> alphas;
  for (const auto& c : cells) {
    if (std::find(families.begin(), families.end(), c.family) == families.end()) families.push_back(c.family);
    if (std::find(alphas.begin(), alphas.end(), c.alpha) == alphas.end()) alphas.push_back(c.alpha);
  }
  std::ostringstream out;
  out << "family";
  for (double a : alphas) {
    const std::string tag = format_double(a);
    out << ",coverage@" << tag << ",size@" << tag << ",wsc@" << tag;
  }
  out << '\n';
  for (const auto& f : families) {
    out << f;
    for (double a : alphas) {
      const auto it = std::find_if(cells.begin(), cells.end(),
                                   [&](const CellSummary& c) { return c.family == f && c.alpha == a; });
      if (it == cells.end()) {
        out << ",,,";
      } else {
        out << ',' << fmt_metric(it->coverage) << ',' << fmt_metric(it->avg_size) << ',' << fmt_metric(it->wsc);
      }
    }
    out << '\n';
  }
  write_text(out.str(), path);
}

void gen_data(const ExperimentConfig& cfg, const std::string& path) {
  // Only the data fields matter here; run settings such as alphas are not checked.
  config_require(std::find(kDatasets.begin(), kDatasets.end(), cfg.dataset) != kDatasets.end(), "dataset",
                 "unknown dataset '" + cfg.dataset + "'");
  const auto kind = cfg.synth_kind();
  config_require(kind.has_value(), "dataset", "gen-data needs a synthetic dataset");
  config_require(cfg.n >= 1, "n", "must be positive");
  config_require(cfg.xi > 0.0, "xi", "must be positive");
  SynthSpec spec;
  spec.kind = *kind;
  spec.n = cfg.n;
  spec.seed = cfg.seed;
  spec.xi = cfg.xi;
  const Dataset ds = gen_synth(spec);
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  write_csv(ds, path);
  write_meta(ds, path + ".meta");
}

FigureData figure_data(const FigureOptions& opts) {
  require(opts.n_train > 0 && opts.n_calib > 0 && opts.n_test > 0, ErrorCode::InvalidArgument,
          "figure_data: part sizes must be positive");
  SynthSpec spec;
  spec.kind = SynthKind::Toy;
  spec.n = opts.n_train + opts.n_calib + opts.n_test;
  spec.seed = opts.seed;
  spec.xi = opts.xi;
  const Dataset ds = gen_synth(spec);
  const double n = static_cast<double>(spec.n);
  const auto parts = split(ds, {opts.n_train / n, opts.n_calib / n, opts.n_test / n}, derive_seed(opts.seed, 0));
  const Dataset& train = parts[0];
  const Dataset& calib = parts[1];
  const Dataset& test = parts[2];

  const auto config = [&](Family family, double lr, std::uint64_t stream) {
    TrainConfig tc = TrainConfig::defaults(family);
    tc.localizer = LocalizerKind::Cubic;
    tc.gamma = opts.gamma;
    tc.exponent = opts.exponent;
    tc.iterations = opts.iterations;
    tc.learning_rate = lr;
    tc.holdout_fraction = 0.0;
    tc.seed = derive_seed(opts.seed, stream);
    return tc;
  };
  FigureData fig;
  fig.er = train_transform(config(Family::ER, opts.lr_er, 1), train, VectorXd::Zero(train.rows())).transform;
  fig.flow = train_transform(config(Family::Gauss, opts.lr_flow, 2), train, VectorXd::Zero(train.rows())).transform;

  const VectorXd f_calib = VectorXd::Zero(calib.rows());
  const auto cp_a = calibrate(ConformityTransform::baseline(), f_calib, calib.labels, calib.features, opts.alpha);
  const auto cp_er = calibrate(fig.er, f_calib, calib.labels, calib.features, opts.alpha);
  const auto cp_flow = calibrate(fig.flow, f_calib, calib.labels, calib.features, opts.alpha);
  fig.q_a = cp_a.threshold_qb;
  fig.q_er = cp_er.threshold_qb;
  fig.q_flow = cp_flow.threshold_qb;

  for (Index i = 0; i < calib.rows(); ++i) {
    const auto x = calib.features.row(i).transpose();
    const double a = std::abs(calib.labels(i));
    fig.calibration.push_back({x(0), a, eval(fig.er, a, x), eval(fig.flow, a, x)});
  }
  for (Index i = 0; i < test.rows(); ++i) {
    const auto x = test.features.row(i).transpose();
    fig.test.push_back({x(0), std::abs(test.labels(i)), predict_interval(cp_a, 0.0, x).radius,
                        predict_interval(cp_er, 0.0, x).radius, predict_interval(cp_flow, 0.0, x).radius});
  }
  return fig;
}

void write_figure_data(const FigureData& fig, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ostringstream main;
  main << "x,score,baseline_bound,er_bound,flow_bound\n";
  for (const auto& p : fig.test) {
    main << format_double(p.x) << ',' << format_double(p.score) << ',' << format_double(p.baseline_bound) << ','
         << format_double(p.er_bound) << ',' << format_double(p.flow_bound) << '\n';
  }
  write_text(main.str(), (fs::path(dir) / "figure.csv").string());

  std::ostringstream cal;
  cal << "x,a,b_er,b_flow\n";
  for (const auto& p : fig.calibration) {
    cal << format_double(p.x) << ',' << format_double(p.a) << ',' << format_double(p.b_er) << ','
        << format_double(p.b_flow) << '\n';
  }
  write_text(cal.str(), (fs::path(dir) / "calibration.csv").string());

  std::ostringstream q;
  q << "q_a = " << format_double(fig.q_a) << '\n'
    << "q_er = " << format_double(fig.q_er) << '\n'
    << "q_flow = " << format_double(fig.q_flow) << '\n';
  write_text(q.str(), (fs::path(dir) / "quantiles.txt").string());
  save(fig.er, (fs::path(dir) / "er.params").string());
  save(fig.flow, (fs::path(dir) / "flow.params").string());
}

}  // namespace nfcp

#include "nfcp/serialize.hpp"

#include "nfcp/data.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace nfcp {

namespace {

void write_values(std::ostream& out, const char* tag, const double* data, Index count) {
  out << tag;
  for (Index i = 0; i < count; ++i) out << ' ' << format_double(data[i]);
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  /// Next non-empty line split on whitespace.
  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) return tokens;
    }
    fail("unexpected end of file");
  }

  /// Next line, which must start with `key` and hold `count` values after it (any count when < 0).
  std::vector<std::string> expect(const std::string& key, long count = -1) {
    auto tokens = next();
    if (tokens.front() != key) fail("expected '" + key + "', found '" + tokens.front() + "'");
    if (count >= 0 && static_cast<long>(tokens.size()) != count + 1) {
      fail("'" + key + "' expects " + std::to_string(count) + " values, found " + std::to_string(tokens.size() - 1));
    }
    tokens.erase(tokens.begin());
    return tokens;
  }

  double number(const std::string& tok) {
    const auto v = parse_double(tok);
    if (!v) fail("cannot parse '" + tok + "' as a finite number");
    return *v;
  }

  long long integer(const std::string& tok) {
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("cannot parse '" + tok + "' as an integer");
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "parameter file line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istringstream in_;
  int line_no_ = 0;
};

void read_header(LineReader& r, const std::string& kind) {
  const auto head = r.next();
  if (head.size() != 2 || head[0] != kParamsMagic) r.fail("missing 'nfcp-params <version>' header");
  if (r.integer(head[1]) != kParamsVersion) r.fail("unsupported version " + head[1]);
  const auto k = r.expect("kind", 1);
  if (k[0] != kind) r.fail("expected kind '" + kind + "', found '" + k[0] + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorCode::Io, "write to '" + path + "' failed");
}

}  // namespace

std::string serialize(const ConformityTransform& t) {
  t.validate();
  std::ostringstream out;
  out << kParamsMagic << ' ' << kParamsVersion << '\n';
  out << "kind transform\n";
  out << "family " << to_string(t.family) << '\n';
  out << "gamma " << format_double(t.gamma) << '\n';
  out << "exponent " << t.exponent << '\n';
  if (!t.localizer) {
    out << "localizer none\n";
  } else if (const auto* c = std::get_if<CubicLocalizer>(&*t.localizer)) {
    out << "localizer cubic\n";
    write_values(out, "theta", c->theta.data(), 3);
  } else {
    const auto& p = std::get<MlpParams>(*t.localizer);
    out << "localizer mlp\n";
    out << "layers " << p.n_layers() << '\n';
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
      const RowMatrixXd w = p.weights[l];
      out << "layer " << w.rows() << ' ' << w.cols() << '\n';
      write_values(out, "weights", w.data(), w.size());
      write_values(out, "bias", p.biases[l].data(), p.biases[l].size());
    }
  }
  out << "end\n";
  return out.str();
}

ConformityTransform parse_transform(const std::string& text) {
  LineReader r(text);
  read_header(r, "transform");
  ConformityTransform t;
  try {
    t.family = parse_family(r.expect("family", 1)[0]);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  t.gamma = r.number(r.expect("gamma", 1)[0]);
  t.exponent = static_cast<int>(r.integer(r.expect("exponent", 1)[0]));
  const auto loc = r.expect("localizer", 1)[0];
  if (loc == "cubic") {
    const auto th = r.expect("theta", 3);
    CubicLocalizer c;
    for (int i = 0; i < 3; ++i) c.theta(i) = r.number(th[static_cast<std::size_t>(i)]);
    t.localizer = c;
  } else if (loc == "mlp") {
    const auto n_layers = r.integer(r.expect("layers", 1)[0]);
    if (n_layers < 1) r.fail("an MLP needs at least one layer");
    MlpParams p;
    for (long long l = 0; l < n_layers; ++l) {
      const auto shape = r.expect("layer", 2);
      const auto rows = r.integer(shape[0]);
      const auto cols = r.integer(shape[1]);
      if (rows < 1 || cols < 1) r.fail("layer shapes must be positive");
      if (l == 0) p.layer_dims.push_back(cols);
      if (p.layer_dims.back() != cols) r.fail("layer input width does not match the previous layer");
      p.layer_dims.push_back(rows);
      const auto w = r.expect("weights", rows * cols);
      RowMatrixXd wm(rows, cols);
      for (Index i = 0; i < wm.size(); ++i) wm.data()[i] = r.number(w[static_cast<std::size_t>(i)]);
      const auto b = r.expect("bias", rows);
      VectorXd bv(rows);
      for (Index i = 0; i < rows; ++i) bv(i) = r.number(b[static_cast<std::size_t>(i)]);
      p.weights.push_back(wm);
      p.biases.push_back(bv);
    }
    if (p.layer_dims.back() != 1) r.fail("the last layer must have a single output");
    t.localizer = std::move(p);
  } else if (loc != "none") {
    r.fail("unknown localizer '" + loc + "'");
  }
  r.expect("end", 0);
  try {
    t.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return t;
}

std::string serialize(const ForestModel& forest) {
  std::ostringstream out;
  const auto& p = forest.params;
  out << kParamsMagic << ' ' << kParamsVersion << '\n';
  out << "kind forest\n";
  out << "input_dim " << forest.input_dim << '\n';
  out << "params " << p.n_trees << ' ' << p.max_depth << ' ' << p.min_leaf << ' ' << p.seed << ' '
      << (p.bootstrap ? 1 : 0) << ' ' << p.mtry << '\n';
  out << "trees " << forest.trees.size() << '\n';
  for (const auto& tree : forest.trees) {
    out << "tree " << tree.nodes.size() << '\n';
    for (const auto& n : tree.nodes) {
      out << "node " << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << format_double(n.value) << ' ' << n.count << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

ForestModel parse_forest(const std::string& text) {
  LineReader r(text);
  read_header(r, "forest");
  ForestModel f;
  f.input_dim = r.integer(r.expect("input_dim", 1)[0]);
  if (f.input_dim < 1) r.fail("input_dim must be positive");
  const auto p = r.expect("params", 6);
  f.params.n_trees = static_cast<int>(r.integer(p[0]));
  f.params.max_depth = static_cast<int>(r.integer(p[1]));
  f.params.min_leaf = static_cast<int>(r.integer(p[2]));
  f.params.seed = static_cast<std::uint64_t>(r.integer(p[3]));
  f.params.bootstrap = r.integer(p[4]) != 0;
  f.params.mtry = static_cast<int>(r.integer(p[5]));
  const auto n_trees = r.integer(r.expect("trees", 1)[0]);
  if (n_trees < 1) r.fail("a forest needs at least one tree");
  for (long long t = 0; t < n_trees; ++t) {
    const auto n_nodes = r.integer(r.expect("tree", 1)[0]);
    if (n_nodes < 1) r.fail("a tree needs at least one node");
    RegressionTree tree;
    for (long long i = 0; i < n_nodes; ++i) {
      const auto v = r.expect("node", 6);
      TreeNode node{static_cast<int>(r.integer(v[0])), r.number(v[1]), static_cast<int>(r.integer(v[2])),
                    static_cast<int>(r.integer(v[3])), r.number(v[4]), static_cast<int>(r.integer(v[5]))};
      if (node.feature >= f.input_dim) r.fail("split feature out of range");
      if (node.feature >= 0 && (node.left <= i || node.right <= i || node.left >= n_nodes || node.right >= n_nodes)) {
        r.fail("child index out of range");
      }
      tree.nodes.push_back(node);
    }
    f.trees.push_back(std::move(tree));
  }
  r.expect("end", 0);
  return f;
}

void save(const ConformityTransform& t, const std::string& path) { write_file(serialize(t), path); }
void save(const ForestModel& forest, const std::string& path) { write_file(serialize(forest), path); }
ConformityTransform load_transform(const std::string& path) { return parse_transform(read_file(path)); }
ForestModel load_forest(const std::string& path) { return parse_forest(read_file(path)); }

}  // namespace nfcp

#include "stancelab/gbt.hpp"

namespace stancelab {

namespace {

constexpr std::string_view kMagic = "stancelab-gbt 1";

void write_node(std::string& out, const Tree& tree, std::int32_t id, int depth) {
  const TreeNode& n = tree.nodes[id];
  out.append(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  if (n.leaf()) {
    out += "leaf " + hexfloat(n.value) + "\n";
    return;
  }
  out += "split " + std::to_string(n.column) + " " + hexfloat(n.threshold) + " " + hexfloat(n.value) + "\n";
  write_node(out, tree, n.left, depth + 1);
  write_node(out, tree, n.right, depth + 1);
}

class Reader {
 public:
  explicit Reader(std::string_view text) : lines_(split(text, '\n')) {}

  std::vector<std::string> next() {
    while (pos_ < lines_.size()) {
      const std::string_view line = trim(lines_[pos_++]);
      if (line.empty()) continue;
      std::vector<std::string> fields;
      for (std::string& f : split(line, ' '))
        if (!f.empty()) fields.push_back(std::move(f));
      return fields;
    }
    throw fail("unexpected end of model");
  }

  std::vector<std::string> expect(std::string_view key, std::size_t n_fields) {
    std::vector<std::string> f = next();
    if (f[0] != key || f.size() != n_fields)
      throw fail("expected '" + std::string(key) + "' with " + std::to_string(n_fields - 1) + " fields");
    return f;
  }

  Error fail(const std::string& why) const { return Error("model line " + std::to_string(pos_) + ": " + why); }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

std::int32_t read_node(Reader& in, Tree& tree, std::size_t n_columns) {
  const std::vector<std::string> f = in.next();
  const auto id = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (f[0] == "leaf" && f.size() == 2) {
    tree.nodes[id].value = parse_double(f[1]);
    return id;
  }
  if (f[0] != "split" || f.size() != 4) throw in.fail("expected 'leaf' or 'split'");
  const long long column = parse_int(f[1]);
  if (column < 0 || static_cast<std::size_t>(column) >= n_columns) throw in.fail("split column out of range");
  tree.nodes[id].column = static_cast<std::int32_t>(column);
  tree.nodes[id].threshold = parse_double(f[2]);
  tree.nodes[id].value = parse_double(f[3]);
  const std::int32_t l = read_node(in, tree, n_columns);
  const std::int32_t r = read_node(in, tree, n_columns);
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return id;
}

}  // namespace

std::string serialize_model(const BoostedModel& m) {
  const BoostParams& p = m.params;
  std::string out(kMagic);
  out += "\n";
  out += "n_estimators " + std::to_string(p.n_estimators) + "\n";
  out += "learning_rate " + hexfloat(p.learning_rate) + "\n";
  out += "max_delta_step " + hexfloat(p.max_delta_step) + "\n";
  out += "max_depth " + std::to_string(p.max_depth) + "\n";
  out += "validation_fraction " + hexfloat(p.validation_fraction) + "\n";
  out += "early_stopping_rounds " + std::to_string(p.early_stopping_rounds) + "\n";
  out += "min_child_weight " + hexfloat(p.min_child_weight) + "\n";
  out += "reg_lambda " + hexfloat(p.reg_lambda) + "\n";
  out += "rng_seed " + std::to_string(p.rng_seed) + "\n";
  out += "base_score " + hexfloat(m.base_score) + "\n";
  out += "stopped_at " + std::to_string(m.stopped_at) + "\n";
  out += "best_iteration " + std::to_string(m.best_iteration) + "\n";
  out += "best_validation_loss " + (m.best_validation_loss ? hexfloat(*m.best_validation_loss) : "none") + "\n";
  out += "columns " + std::to_string(m.columns.size()) + "\n";
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    const FeatureColumn& col = m.columns[c];
    out += "column " + std::to_string(c) + " " + col.identifier + " " + std::string(to_string(col.block)) + " " +
           std::string(to_string(col.type)) + " " + hexfloat(m.total_gain[c]) + "\n";
  }
  out += "trees " + std::to_string(m.trees.size()) + "\n";
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    out += "tree " + std::to_string(t) + "\n";
    write_node(out, m.trees[t], 0, 0);
  }
  return out;
}

BoostedModel parse_model(std::string_view text) {
  Reader in(text);
  {
    const std::vector<std::string> f = in.next();
    if (f.size() != 2 || f[0] != "stancelab-gbt" || f[1] != "1") throw in.fail("not a stancelab-gbt 1 model");
  }
  BoostedModel m;
  BoostParams& p = m.params;
  p.n_estimators = static_cast<int>(parse_int(in.expect("n_estimators", 2)[1]));
  p.learning_rate = parse_double(in.expect("learning_rate", 2)[1]);
  p.max_delta_step = parse_double(in.expect("max_delta_step", 2)[1]);
  p.max_depth = static_cast<int>(parse_int(in.expect("max_depth", 2)[1]));
  p.validation_fraction = parse_double(in.expect("validation_fraction", 2)[1]);
  p.early_stopping_rounds = static_cast<int>(parse_int(in.expect("early_stopping_rounds", 2)[1]));
  p.min_child_weight = parse_double(in.expect("min_child_weight", 2)[1]);
  p.reg_lambda = parse_double(in.expect("reg_lambda", 2)[1]);
  p.rng_seed = std::stoull(in.expect("rng_seed", 2)[1]);
  m.base_score = parse_double(in.expect("base_score", 2)[1]);
  m.stopped_at = static_cast<int>(parse_int(in.expect("stopped_at", 2)[1]));
  m.best_iteration = static_cast<int>(parse_int(in.expect("best_iteration", 2)[1]));
  const std::string loss = in.expect("best_validation_loss", 2)[1];
  if (loss != "none") m.best_validation_loss = parse_double(loss);
  const auto n_columns = static_cast<std::size_t>(parse_int(in.expect("columns", 2)[1]));
  for (std::size_t c = 0; c < n_columns; ++c) {
    const std::vector<std::string> f = in.expect("column", 6);
    if (static_cast<std::size_t>(parse_int(f[1])) != c) throw in.fail("columns out of order");
    m.columns.push_back(FeatureColumn{f[2], block_from_string(f[3]), feature_type_from_string(f[4])});
    m.total_gain.push_back(parse_double(f[5]));
  }
  const auto n_trees = static_cast<std::size_t>(parse_int(in.expect("trees", 2)[1]));
  for (std::size_t t = 0; t < n_trees; ++t) {
    if (static_cast<std::size_t>(parse_int(in.expect("tree", 2)[1])) != t) throw in.fail("trees out of order");
    Tree tree;
    read_node(in, tree, n_columns);
    m.trees.push_back(std::move(tree));
  }
  validate(m.params);
  return m;
}

void save_model(const BoostedModel& model, const std::string& path) {
  write_file_atomic(path, serialize_model(model));
}

BoostedModel load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace stancelab

#include "stancelab/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "stancelab/random.hpp"

namespace stancelab {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

void validate(const BoostParams& p) {
  if (p.n_estimators < 1) throw Error("boost: n_estimators must be positive");
  if (!(p.learning_rate > 0.0)) throw Error("boost: learning_rate must be positive");
  if (!(p.max_delta_step >= 0.0)) throw Error("boost: max_delta_step must be non-negative");
  if (p.max_depth < 1) throw Error("boost: max_depth must be positive");
  if (!(p.validation_fraction >= 0.0 && p.validation_fraction < 1.0))
    throw Error("boost: validation_fraction must lie in [0, 1)");
  if (p.early_stopping_rounds < 1) throw Error("boost: early_stopping_rounds must be positive");
  if (!(p.min_child_weight >= 0.0)) throw Error("boost: min_child_weight must be non-negative");
  if (!(p.reg_lambda >= 0.0)) throw Error("boost: reg_lambda must be non-negative");
}

TrainingData training_data(const FeatureMatrix& m) {
  TrainingData d;
  d.n_rows = m.n_rows();
  d.rows.resize(m.n_cols());
  d.values.resize(m.n_cols());
  std::vector<std::vector<std::pair<double, std::uint32_t>>> cols(m.n_cols());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    const auto c = m.row_columns(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) cols[c[k]].emplace_back(v[k], static_cast<std::uint32_t>(i));
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto& col = cols[j];
    std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (const auto& [v, r] : col) {
      d.rows[j].push_back(r);
      d.values[j].push_back(v);
    }
  }
  std::vector<std::uint32_t> order(m.n_cols());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return m.columns()[a].identifier < m.columns()[b].identifier;
  });
  d.rank.resize(m.n_cols());
  for (std::size_t i = 0; i < order.size(); ++i) d.rank[order[i]] = static_cast<std::uint32_t>(i);
  return d;
}

namespace {

constexpr double kMinSplitGain = 1e-10;
constexpr double kMinHessian = 1e-16;
// Gains this close count as tied, so rounding in the gradient sums cannot
// override the column-rank tie break.
constexpr double kTieTolerance = 1e-12;

struct Stats {
  double g = 0.0, h = 0.0;
  std::size_t n = 0;
};

struct Candidate {
  double gain = kMinSplitGain;
  std::int32_t column = -1;
  double threshold = 0.0;
};

struct ScanState {
  Stats right;
  double last = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingData& data, const std::vector<std::uint32_t>& order,
              const std::vector<char>& train, const BoostParams& params)
      : data_(data), order_(order), train_(train), params_(params) {}

  /// Grows one tree from the current gradients. On return leaf_of[r] holds the
  /// node reached by every row, training or not.
  std::vector<TreeNode> grow(const std::vector<double>& g, const std::vector<double>& h,
                             std::vector<std::int32_t>& leaf_of) {
    const std::size_t n = data_.n_rows;
    std::vector<TreeNode> nodes(1);
    std::vector<Stats> stats(1);
    leaf_of.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r)
      if (train_[r]) add(stats[0], g[r], h[r]);

    std::vector<std::int32_t> frontier{0};
    for (int depth = 0; !frontier.empty(); ++depth) {
      if (depth >= params_.max_depth) {
        for (std::int32_t id : frontier) make_leaf(nodes[id], stats[id]);
        break;
      }
      const std::vector<Candidate> best = find_splits(frontier, stats, nodes.size(), g, h, leaf_of);

      std::vector<std::int32_t> next;
      std::vector<std::int32_t> split_of(nodes.size(), -1);
      for (std::size_t f = 0; f < frontier.size(); ++f) {
        const std::int32_t id = frontier[f];
        if (best[f].column < 0) {
          make_leaf(nodes[id], stats[id]);
          continue;
        }
        const auto left = static_cast<std::int32_t>(nodes.size());
        nodes.resize(nodes.size() + 2);
        stats.resize(nodes.size());
        TreeNode& node = nodes[id];
        node.column = best[f].column;
        node.threshold = best[f].threshold;
        node.left = left;
        node.right = left + 1;
        node.value = best[f].gain;
        split_of[id] = static_cast<std::int32_t>(f);
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;

      // Absent values default left; rows at or above the threshold move right.
      const std::vector<std::int32_t> prev = leaf_of;
      for (std::size_t r = 0; r < n; ++r)
        if (split_of[prev[r]] >= 0) leaf_of[r] = nodes[prev[r]].left;
      std::vector<std::int32_t> split_columns;
      for (std::int32_t id : frontier)
        if (split_of[id] >= 0) split_columns.push_back(nodes[id].column);
      std::sort(split_columns.begin(), split_columns.end());
      split_columns.erase(std::unique(split_columns.begin(), split_columns.end()), split_columns.end());
      for (std::int32_t c : split_columns) {
        const auto& rows = data_.rows[c];
        const auto& vals = data_.values[c];
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const std::int32_t parent = prev[rows[k]];
          if (split_of[parent] < 0) continue;
          const TreeNode& p = nodes[parent];
          if (p.column == c && vals[k] >= p.threshold) leaf_of[rows[k]] = p.right;
        }
      }
      for (std::size_t r = 0; r < n; ++r)
        if (train_[r] && split_of[prev[r]] >= 0) add(stats[leaf_of[r]], g[r], h[r]);
      frontier = std::move(next);
    }
    return nodes;
  }

 private:
  static void add(Stats& s, double g, double h) {
    s.g += g;
    s.h += h;
    ++s.n;
  }

  double score(double g, double h) const { return g * g / (h + params_.reg_lambda); }

  void make_leaf(TreeNode& node, const Stats& s) const {
    double w = -s.g / (s.h + params_.reg_lambda);
    if (params_.max_delta_step > 0.0) w = std::clamp(w, -params_.max_delta_step, params_.max_delta_step);
    node = TreeNode{};
    node.value = w * params_.learning_rate;
  }

  void consider(Candidate& best, const Stats& total, const Stats& right, std::int32_t column,
                double threshold) const {
    const std::size_t n_left = total.n - right.n;
    if (n_left == 0 || right.n == 0) return;
    const double gl = total.g - right.g, hl = total.h - right.h;
    if (hl < params_.min_child_weight || right.h < params_.min_child_weight) return;
    const double gain =
        0.5 * (score(gl, hl) + score(right.g, right.h) - score(total.g, total.h));
    if (gain > kMinSplitGain && gain > best.gain + kTieTolerance * best.gain)
      best = Candidate{gain, column, threshold};
  }

  std::vector<Candidate> find_splits(const std::vector<std::int32_t>& frontier,
                                     const std::vector<Stats>& stats, std::size_t n_nodes,
                                     const std::vector<double>& g, const std::vector<double>& h,
                                     const std::vector<std::int32_t>& leaf_of) const {
    std::vector<Candidate> best(frontier.size());
    std::vector<std::int32_t> slot(n_nodes, -1);
    for (std::size_t f = 0; f < frontier.size(); ++f) slot[frontier[f]] = static_cast<std::int32_t>(f);
    std::vector<ScanState> scan(frontier.size());

    for (std::uint32_t c : order_) {
      std::fill(scan.begin(), scan.end(), ScanState{});
      const auto& rows = data_.rows[c];
      const auto& vals = data_.values[c];
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::uint32_t r = rows[k];
        if (!train_[r]) continue;
        const std::int32_t f = slot[leaf_of[r]];
        if (f < 0) continue;
        ScanState& st = scan[f];
        const double v = vals[k];
        if (st.right.n > 0 && v != st.last) {
          double thr = st.last + (v - st.last) * 0.5;
          if (!(thr > v)) thr = st.last;
          consider(best[f], stats[frontier[f]], st.right, static_cast<std::int32_t>(c), thr);
        }
        add(st.right, g[r], h[r]);
        st.last = v;
      }
      for (std::size_t f = 0; f < frontier.size(); ++f) {
        const ScanState& st = scan[f];
        if (st.right.n == 0) continue;
        double thr = st.last * 0.5;
        if (!(thr > 0.0)) thr = st.last;
        consider(best[f], stats[frontier[f]], st.right, static_cast<std::int32_t>(c), thr);
      }
    }
    return best;
  }

  const TrainingData& data_;
  const std::vector<std::uint32_t>& order_;
  const std::vector<char>& train_;
  const BoostParams& params_;
};

/// Renumbers a level-order tree into preorder.
Tree to_preorder(const std::vector<TreeNode>& nodes) {
  Tree t;
  t.nodes.reserve(nodes.size());
  auto visit = [&](auto&& self, std::int32_t id) -> std::int32_t {
    const auto at = static_cast<std::int32_t>(t.nodes.size());
    t.nodes.push_back(nodes[id]);
    if (!nodes[id].leaf()) {
      const std::int32_t l = self(self, nodes[id].left);
      const std::int32_t r = self(self, nodes[id].right);
      t.nodes[at].left = l;
      t.nodes[at].right = r;
    }
    return at;
  };
  visit(visit, 0);
  return t;
}

/// Stratified hold-out: per class, a seeded shuffle sends round(fraction*n)
/// rows to validation while keeping at least one row of each class in training.
std::vector<char> training_mask(std::span<const int> labels, double fraction, std::uint64_t seed) {
  std::vector<char> train(labels.size(), 1);
  if (fraction <= 0.0) return train;
  Rng rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    rng.shuffle(idx);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (!idx.empty()) take = std::min(take, idx.size() - 1);
    for (std::size_t i = 0; i < take; ++i) train[idx[i]] = 0;
  }
  return train;
}

double log_loss(double margin, int y) {
  // log(1 + exp(-m)) for y = 1, log(1 + exp(m)) for y = 0, computed stably.
  const double m = y == 1 ? -margin : margin;
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

}  // namespace

BoostedModel train_columns(const TrainingData& data, std::span<const int> labels,
                           const BoostParams& params) {
  validate(params);
  const std::size_t n = data.n_rows;
  if (n == 0) throw Error("train: empty matrix");
  if (labels.size() != n)
    throw Error("train: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  for (int y : labels)
    if (y != 0 && y != 1) throw Error("train: labels must be 0 or 1");

  const std::vector<char> train = training_mask(labels, params.validation_fraction, params.rng_seed);
  std::size_t n_train = 0, n_pos = 0, n_val = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (train[r]) {
      ++n_train;
      n_pos += labels[r] == 1;
    } else {
      ++n_val;
    }
  }
  if (n_pos == 0 || n_pos == n_train) throw Error("train: training labels contain a single class");

  std::vector<std::uint32_t> order(data.rank.size());
  for (std::size_t c = 0; c < data.rank.size(); ++c) order[data.rank[c]] = static_cast<std::uint32_t>(c);

  BoostedModel model;
  model.params = params;
  model.base_score = logit(static_cast<double>(n_pos) / static_cast<double>(n_train));
  std::vector<double> margin(n, model.base_score), g(n, 0.0), h(n, 0.0);
  std::vector<std::int32_t> leaf_of;
  TreeBuilder builder(data, order, train, params);

  double best_loss = std::numeric_limits<double>::infinity();
  int best = -1, grown = 0;
  for (int t = 0; t < params.n_estimators; ++t) {
    for (std::size_t r = 0; r < n; ++r) {
      if (!train[r]) continue;
      const double p = sigmoid(margin[r]);
      g[r] = p - labels[r];
      h[r] = std::max(p * (1.0 - p), kMinHessian);
    }
    const std::vector<TreeNode> nodes = builder.grow(g, h, leaf_of);
    for (std::size_t r = 0; r < n; ++r) margin[r] += nodes[leaf_of[r]].value;
    model.trees.push_back(to_preorder(nodes));
    grown = t + 1;

    if (n_val == 0) {
      best = t;
      continue;
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (!train[r]) loss += log_loss(margin[r], labels[r]);
    loss /= static_cast<double>(n_val);
    if (loss < best_loss) {
      best_loss = loss;
      best = t;
    } else if (t - best >= params.early_stopping_rounds) {
      break;
    }
  }
  model.trees.resize(static_cast<std::size_t>(best) + 1);
  model.stopped_at = grown;
  model.best_iteration = best;
  if (n_val > 0) model.best_validation_loss = best_loss;

  model.total_gain.assign(data.rank.size(), 0.0);
  for (const Tree& tree : model.trees)
    for (const TreeNode& node : tree.nodes)
      if (!node.leaf()) model.total_gain[node.column] += node.value;
  return model;
}

BoostedModel train(const FeatureMatrix& matrix, std::span<const int> labels, const BoostParams& params) {
  if (matrix.n_rows() == 0) throw Error("train: empty matrix");
  BoostedModel model = train_columns(training_data(matrix), labels, params);
  model.columns = matrix.columns();
  return model;
}

std::vector<double> predict_margin(const BoostedModel& model, const FeatureMatrix& matrix) {
  if (model.columns.size() != model.total_gain.size())
    throw Error("predict: model lacks column metadata");
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t j = 0; j < matrix.n_cols(); ++j) index.emplace(matrix.columns()[j].identifier, j);
  std::vector<std::int64_t> remap(model.columns.size(), -1);
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    auto it = index.find(model.columns[c].identifier);
    if (it != index.end()) remap[c] = static_cast<std::int64_t>(it->second);
  }

  std::vector<double> out(matrix.n_rows(), model.base_score);
  for (std::size_t i = 0; i < matrix.n_rows(); ++i) {
    double m = model.base_score;
    for (const Tree& tree : model.trees) {
      std::int32_t id = 0;
      while (!tree.nodes[id].leaf()) {
        const TreeNode& node = tree.nodes[id];
        const std::int64_t col = remap[node.column];
        const double v = col < 0 ? 0.0 : matrix.at(i, static_cast<std::size_t>(col));
        id = v < node.threshold ? node.left : node.right;
      }
      m += tree.nodes[id].value;
    }
    out[i] = m;
  }
  return out;
}

std::vector<double> predict_confidence(const BoostedModel& model, const FeatureMatrix& matrix) {
  std::vector<double> out = predict_margin(model, matrix);
  for (double& v : out) v = sigmoid(v);
  return out;
}

std::vector<std::pair<FeatureColumn, double>> feature_importance(const BoostedModel& model) {
  std::vector<std::pair<FeatureColumn, double>> out;
  for (std::size_t c = 0; c < model.columns.size(); ++c) out.emplace_back(model.columns[c], model.total_gain[c]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first.identifier < b.first.identifier;
  });
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error("cross-validation needs at least 2 folds");
  std::vector<int> fold(labels.size(), -1);
  Rng rng(seed);
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int cls : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    if (static_cast<int>(idx.size()) < k)
      throw Error("cross-validation: class " + std::to_string(cls) + " has " +
                  std::to_string(idx.size()) + " rows, fewer than the " + std::to_string(k) +
                  " folds required for stratification");
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return fold;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

CVReport cross_validate(const FeatureMatrix& matrix, std::span<const int> labels,
                        const BoostParams& params, int k) {
  if (labels.size() != matrix.n_rows()) throw Error("cross_validate: label count mismatch");
  const std::vector<int> fold = stratified_folds(labels, k, params.rng_seed);
  CVReport report;
  report.k = k;
  report.out_of_fold.assign(labels.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> fit_rows, test_rows;
    std::vector<int> fit_labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold[i] == f) {
        test_rows.push_back(i);
      } else {
        fit_rows.push_back(i);
        fit_labels.push_back(labels[i]);
      }
    }
    const BoostedModel model = train(select_rows(matrix, fit_rows), fit_labels, params);
    const std::vector<double> conf = predict_confidence(model, select_rows(matrix, test_rows));

    double tp[2] = {0, 0}, predicted[2] = {0, 0}, actual[2] = {0, 0};
    for (std::size_t t = 0; t < test_rows.size(); ++t) {
      report.out_of_fold[test_rows[t]] = conf[t];
      const int pred = conf[t] >= 0.5 ? 1 : 0;
      const int truth = labels[test_rows[t]];
      predicted[pred] += 1;
      actual[truth] += 1;
      if (pred == truth) tp[truth] += 1;
    }
    double precision = 0.0, recall = 0.0;
    for (int c = 0; c < 2; ++c) {
      precision += predicted[c] > 0 ? tp[c] / predicted[c] : 0.0;
      recall += actual[c] > 0 ? tp[c] / actual[c] : 0.0;
    }
    report.fold_precision.push_back(precision / 2.0);
    report.fold_recall.push_back(recall / 2.0);
  }
  report.precision_mean = mean_of(report.fold_precision);
  report.precision_std = sample_std(report.fold_precision);
  report.recall_mean = mean_of(report.fold_recall);
  report.recall_std = sample_std(report.fold_recall);
  return report;
}

std::vector<std::optional<bool>> accept_by_threshold(std::span<const double> confidences, double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw Error("acceptance threshold must lie in (0.5, 1]");
  std::vector<std::optional<bool>> out;
  out.reserve(confidences.size());
  for (double c : confidences) {
    if (c >= threshold)
      out.emplace_back(true);
    else if (c <= 1.0 - threshold)
      out.emplace_back(false);
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

OneVsRestModel train_one_vs_rest(const FeatureMatrix& matrix, std::span<const int> classes,
                                 int n_classes, const BoostParams& params) {
  if (n_classes < 2) throw Error("one-vs-rest needs at least 2 classes");
  if (classes.size() != matrix.n_rows()) throw Error("one-vs-rest: label count mismatch");
  const TrainingData data = training_data(matrix);
  OneVsRestModel out;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int> binary(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) binary[i] = classes[i] == c ? 1 : 0;
    BoostedModel m = train_columns(data, binary, params);
    m.columns = matrix.columns();
    out.models.push_back(std::move(m));
  }
  return out;
}

std::vector<std::vector<double>> predict_one_vs_rest(const OneVsRestModel& model, const FeatureMatrix& matrix) {
  std::vector<std::vector<double>> out(matrix.n_rows(), std::vector<double>(model.models.size(), 0.0));
  for (std::size_t c = 0; c < model.models.size(); ++c) {
    const std::vector<double> conf = predict_confidence(model.models[c], matrix);
    for (std::size_t i = 0; i < conf.size(); ++i) out[i][c] = conf[i];
  }
  for (auto& row : out) {
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    for (double& v : row) v /= total;
  }
  return out;
}

std::vector<std::optional<int>> accept_argmax(const std::vector<std::vector<double>>& probabilities,
                                              double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("acceptance threshold must lie in (0, 1]");
  std::vector<std::optional<int>> out;
  for (const auto& row : probabilities) {
    const auto it = std::max_element(row.begin(), row.end());
    if (it != row.end() && *it >= threshold)
      out.emplace_back(static_cast<int>(it - row.begin()));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

}  // namespace stancelab

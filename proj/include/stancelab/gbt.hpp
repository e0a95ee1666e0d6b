#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stancelab/features.hpp"

namespace stancelab {

struct BoostParams {
  int n_estimators = 300;
  double learning_rate = 0.1;
  /// Cap on each leaf's step before shrinkage; 0 disables the cap.
  double max_delta_step = 1.0;
  int max_depth = 6;
  /// Share of rows held out for early stopping; 0 trains on every row and
  /// runs all n_estimators rounds.
  double validation_fraction = 0.2;
  int early_stopping_rounds = 20;
  double min_child_weight = 1.0;
  double reg_lambda = 1.0;
  std::uint64_t rng_seed = 0;

  bool operator==(const BoostParams&) const = default;
};

void validate(const BoostParams& params);

struct TreeNode {
  /// Model column index; -1 marks a leaf.
  std::int32_t column = -1;
  /// Rows with value < threshold (absent rows included) go left.
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  /// Additive score for leaves, loss reduction for splits.
  double value = 0.0;

  bool leaf() const { return column < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes are stored in preorder: a split's left subtree follows it directly.
struct Tree {
  std::vector<TreeNode> nodes;
  bool operator==(const Tree&) const = default;
};

struct BoostedModel {
  BoostParams params;
  std::vector<FeatureColumn> columns;
  double base_score = 0.0;
  std::vector<Tree> trees;
  /// Summed split gain per model column.
  std::vector<double> total_gain;
  /// Rounds grown before stopping, and the round kept (trees.size() - 1).
  int stopped_at = 0;
  int best_iteration = -1;
  /// Validation log-loss at best_iteration; empty without a validation split.
  std::optional<double> best_validation_loss;

  bool operator==(const BoostedModel&) const = default;
};

/// Column-major view used by the trainer: per column, the stored entries
/// sorted by value descending (ties by row).
struct TrainingData {
  std::size_t n_rows = 0;
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::vector<double>> values;
  /// Position of each column in identifier order; split ties go to the
  /// lower rank so training is invariant to column order.
  std::vector<std::uint32_t> rank;
};

TrainingData training_data(const FeatureMatrix& matrix);

/// Trains on precomputed column data; labels are 0/1 per row. The returned
/// model has no column metadata.
BoostedModel train_columns(const TrainingData& data, std::span<const int> labels,
                           const BoostParams& params);

BoostedModel train(const FeatureMatrix& matrix, std::span<const int> labels,
                   const BoostParams& params);

/// Additive score before the logistic link, per matrix row. Matrix columns
/// are matched to model columns by identifier; absent ones read as zero.
std::vector<double> predict_margin(const BoostedModel& model, const FeatureMatrix& matrix);
std::vector<double> predict_confidence(const BoostedModel& model, const FeatureMatrix& matrix);

std::vector<std::pair<FeatureColumn, double>> feature_importance(const BoostedModel& model);

struct CVReport {
  int k = 0;
  double precision_mean = 0.0, precision_std = 0.0;
  double recall_mean = 0.0, recall_std = 0.0;
  std::vector<double> fold_precision, fold_recall;
  /// Confidence for each row from the fold model that did not see it.
  std::vector<double> out_of_fold;
};

/// Stratified k-fold assignment seeded for determinism.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

CVReport cross_validate(const FeatureMatrix& matrix, std::span<const int> labels,
                        const BoostParams& params, int k = 5);

/// Positive at c >= threshold, negative at c <= 1 - threshold, else rejected.
std::vector<std::optional<bool>> accept_by_threshold(std::span<const double> confidences,
                                                     double threshold);

/// One binary model per class, each class against the rest.
struct OneVsRestModel {
  std::vector<BoostedModel> models;
};

OneVsRestModel train_one_vs_rest(const FeatureMatrix& matrix, std::span<const int> classes,
                                 int n_classes, const BoostParams& params);
/// Per row, the per-class confidences rescaled to sum to one.
std::vector<std::vector<double>> predict_one_vs_rest(const OneVsRestModel& model,
                                                     const FeatureMatrix& matrix);
/// Winning class when its normalized probability reaches the threshold.
std::vector<std::optional<int>> accept_argmax(const std::vector<std::vector<double>>& probabilities,
                                              double threshold);

std::string serialize_model(const BoostedModel& model);
BoostedModel parse_model(std::string_view text);
void save_model(const BoostedModel& model, const std::string& path);
BoostedModel load_model(const std::string& path);

double sigmoid(double x);
double logit(double p);

}  // namespace stancelab

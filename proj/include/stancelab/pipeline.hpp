#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/calibration.hpp"
#include "stancelab/gbt.hpp"
#include "stancelab/stats.hpp"
#include "stancelab/synth.hpp"

namespace stancelab {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct RulePaths {
  /// Empty paths select the shipped rule files.
  std::string gazetteer, names, patterns, seeds;
};

struct Thresholds {
  int min_tweet_term = 50;
  int min_bio_term = 10;
  double gender = 0.7;
  double location = 0.7;
  double age = 0.65;
  BandBoundaries bands;
};

struct CalibrationConfig {
  PlattInput input = PlattInput::confidence;
  /// Share of stance-labeled users kept out of training for the Platt fit.
  double holdout_fraction = 0.3;
};

enum class ActivitySource { profile, corpus };

struct PipelineConfig {
  /// Exactly one of corpus and synth is set.
  std::optional<std::string> corpus;
  std::optional<SynthSpec> synth;
  RulePaths rules;
  std::string lexicon, stopwords;
  std::optional<std::string> manual_labels;
  std::string output_dir = "out";

  std::optional<TimeRange> time_range;
  std::vector<std::string> include_terms;
  std::vector<std::string> exclude_patterns;
  bool use_lcc = true;

  Thresholds thresholds;
  /// rng_seed inside is replaced by the pipeline seed.
  BoostParams boost;
  int cv_folds = 5;
  std::optional<double> alpha0;
  std::optional<std::array<TimeRange, 2>> periods;
  CalibrationConfig calibration;
  /// Regression reference level per categorical covariate; the most
  /// frequent level otherwise.
  std::map<std::string, std::string> reference_levels;
  ActivitySource activity_source = ActivitySource::profile;
  bool count_retweets = true;
  int edge_min_indegree = 5;
  /// Converts birth years into ages; the year the corpus starts when unset.
  std::optional<int> reference_year;
  /// Emoji whose first-period use enters the regression as a 0/1 covariate.
  std::vector<std::string> signal_emoji{"💚", "💙"};
  std::uint64_t rng_seed = 0;
};

/// Relative paths resolve against base_dir. Unknown keys are an error.
PipelineConfig parse_config(std::string_view json, const std::string& base_dir = ".");
PipelineConfig load_config(const std::string& path);
/// Canonical JSON form; the output directory is left out when asked.
std::string serialize_config(const PipelineConfig& config, bool include_output_dir = true);
void validate(const PipelineConfig& config);
/// Sets the pipeline seed and, for synthetic input, the generator seed.
void apply_seed(PipelineConfig& config, std::uint64_t seed);

enum class Stage { ingest, label, featurize, train, calibrate, predict, importance, turnaround, regress, report };

inline constexpr Stage kAllStages[] = {Stage::ingest,  Stage::label,      Stage::featurize,  Stage::train,
                                       Stage::calibrate, Stage::predict, Stage::importance, Stage::turnaround,
                                       Stage::regress, Stage::report};

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view text);

inline constexpr const char* kReportFiles[] = {"volume_weekly.tsv",       "terms_by_year.tsv",  "cv_metrics.tsv",
                                               "calibration.tsv",         "stance_distribution.tsv",
                                               "importance_hsd.tsv",      "turnaround.tsv",     "regression.tsv"};

struct StageResult {
  Stage stage = Stage::ingest;
  bool skipped = false;
  double seconds = 0.0;
  std::vector<std::string> outputs;
};

struct RunOptions {
  /// Skip a stage whose inputs and outputs match the manifest entry.
  bool skip_fresh = false;
};

/// One pipeline instance per output directory, held by a lock file for the
/// lifetime of the object.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  StageResult run(Stage stage, const RunOptions& options = {});
  std::vector<StageResult> run_all(const RunOptions& options = {});

  const PipelineConfig& config() const { return config_; }
  std::string stage_path(std::string_view name) const;
  std::string report_path(std::string_view name) const;
  /// Digest of the config, inputs and every non-report stage output. Reports
  /// embed it; timings and the output directory do not enter it.
  std::string manifest_digest() const;

 private:
  struct Impl;
  PipelineConfig config_;
  std::string lock_path_;
  Impl* impl_ = nullptr;
};

struct TurnaroundResult {
  std::vector<TurnaroundRecord> records;
  RegressionResult regression;
  ModelSpec model;
  /// Covariates left out because they were constant over the rows.
  std::vector<std::string> dropped;
};

/// Runs the turnaround and regress stages from existing artifacts.
TurnaroundResult turnaround_pipeline(const PipelineConfig& config);

/// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace stancelab

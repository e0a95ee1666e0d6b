#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stancelab/common.hpp"
#include "stancelab/features.hpp"

namespace stancelab {

// ---------------------------------------------------------------------------
// Log-odds ratio with an informative-by-frequency Dirichlet prior.

using CountMap = std::map<std::string, long long>;

struct TermScore {
  std::string term;
  double delta = 0.0;
  double variance = 0.0;
  double z = 0.0;
};

/// 0.01 * (n_a + n_b): the prior strength used when none is configured.
double default_alpha0(const CountMap& a, const CountMap& b);

/// Scores every term of either map, ranked by z descending (ties by term).
std::vector<TermScore> log_odds_prior(const CountMap& a, const CountMap& b, double alpha0);

// ---------------------------------------------------------------------------
// Tukey HSD.

struct HSDComparison {
  std::string group_a, group_b;
  /// mean(group_a) - mean(group_b)
  double mean_diff = 0.0;
  double q_statistic = 0.0;
  double p_adjusted = 1.0;
  bool significant_at_05 = false;
};

/// P(Q <= q) for the studentized range with k groups and df error degrees
/// of freedom; df = 0 means infinite.
double studentized_range_cdf(double q, int k, double df);

/// All pairs in input order, Tukey-Kramer standard errors for unequal sizes.
std::vector<HSDComparison> tukey_hsd(const std::vector<std::pair<std::string, std::vector<double>>>& groups);

/// Feature-type group of a column: emoji, hashtag, network (mentions and
/// interaction edges), url, tweet_term, bio_term; meta columns have none.
std::optional<std::string> importance_group(const FeatureColumn& column);

/// Gains grouped by importance_group in a fixed order, groups with fewer
/// than two columns dropped.
std::vector<std::pair<std::string, std::vector<double>>> importance_groups(
    std::span<const std::pair<FeatureColumn, double>> importances);

std::vector<HSDComparison> group_importance_test(std::span<const std::pair<FeatureColumn, double>> importances);

// ---------------------------------------------------------------------------
// Turnaround and regression.

struct TurnaroundRecord {
  UserId user_id;
  double p_t0 = 0.0, p_t1 = 0.0;
  double delta = 0.0;
};

/// p1 - p0.
double turnaround(double p0, double p1);

enum class CovariateKind { numeric, count, categorical };

struct CovariateSpec {
  std::string name;
  CovariateKind kind = CovariateKind::numeric;
  /// Categorical only; the most frequent level when unset.
  std::optional<std::string> reference;
};

struct ModelSpec {
  std::vector<CovariateSpec> covariates;
};

using CovariateValue = std::variant<double, std::string>;
using CovariateRecord = std::map<std::string, CovariateValue>;

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double t_value = 0.0;
  /// Two-sided, normal approximation.
  double p_value = 1.0;
};

struct DummyLevel {
  std::string covariate;
  std::string level;
  /// Design column name, empty for the reference level.
  std::string column;
};

struct RegressionResult {
  std::vector<Coefficient> coefficients;  // intercept first
  std::vector<DummyLevel> dummy_coding;
  std::size_t n = 0;
  std::size_t p = 0;  // design columns including the intercept
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  /// Residual sum of squares over n - p.
  double mse = 0.0;
  double f_statistic = 0.0;
  double f_p_value = 1.0;
  double log_likelihood = 0.0;
  std::vector<double> residuals;

  const Coefficient* find(std::string_view name) const;
};

/// Design column name of a covariate ("x", "log1p(x)", "x[level]").
std::string design_column(const CovariateSpec& covariate, const std::string& level = {});

RegressionResult ols_regress(const std::vector<CovariateRecord>& records, std::span<const double> response,
                             const ModelSpec& spec);

}  // namespace stancelab

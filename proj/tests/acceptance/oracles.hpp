#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Exact depth-1 stump for binary columns under the logistic loss, with the
/// base score at the log-odds of the labels and reg_lambda = 1.
struct Stump {
  std::optional<int> column;
  double gain = 0.0;
  double left = 0.0, right = 0.0;  // leaf steps after cap and shrinkage
  double root = 0.0;               // leaf step when there is no split
};

/// x[r][c] in {0, 1}; labels in {0, 1} with both classes present.
Stump best_stump(const std::vector<std::vector<int>>& x, const std::vector<int>& y, int min_child_weight,
                 double max_delta_step, double learning_rate);

struct LogOdds {
  double delta, variance, z;
};

/// Log-odds ratio of one term with an informative Dirichlet prior.
LogOdds log_odds(double ya, double yb, double na, double nb, double alpha0);

struct KramerPair {
  double mean_diff, q;
};

/// Tukey-Kramer statistic for groups i and j, and the pooled degrees of freedom.
KramerPair tukey_kramer(const std::vector<std::vector<double>>& groups, std::size_t i, std::size_t j);
int error_df(const std::vector<std::vector<double>>& groups);

/// P(Q <= q) by composite Simpson integration over the range and the scale.
double studentized_range_cdf(double q, int k, int df);

/// Largest weakly connected component by union-find; ties to the smallest id.
std::set<std::string> largest_component(const std::set<std::string>& nodes,
                                        const std::vector<std::pair<std::string, std::string>>& edges);

}  // namespace oracle

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stancelab/stats.hpp"

namespace stancelab {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kTolerance = 1e-10;
constexpr unsigned kMaxDepth = 15;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / M_SQRT2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// P(range of k standard normals <= w).
double range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  auto f = [&](double z) {
    const double inner = normal_cdf(z) - normal_cdf(z - w);
    return normal_pdf(z) * std::pow(std::max(inner, 0.0), k - 1);
  };
  // phi(z) makes the integrand negligible outside [-8.5, 8.5]; splitting at
  // the peak of the bracket keeps each piece smooth.
  const double mid = std::min(w / 2.0, 8.0);
  double value = gauss_kronrod<double, 61>::integrate(f, -8.5, mid, kMaxDepth, kTolerance) +
                 gauss_kronrod<double, 61>::integrate(f, mid, 8.5, kMaxDepth, kTolerance);
  return std::clamp(k * value, 0.0, 1.0);
}

}  // namespace

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw Error("studentized range needs k >= 2");
  if (df < 0.0) throw Error("studentized range needs df > 0");
  if (!(q > 0.0)) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (df == 0.0 || df > 50000.0) return range_cdf(q, k);

  // Q = R / S with S = sqrt(chi2_df / df); integrate over the density of S.
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s);
  };
  const boost::math::chi_squared chi(df);
  const double lo = std::sqrt(boost::math::quantile(chi, 1e-14) / df);
  const double hi = std::sqrt(boost::math::quantile(boost::math::complement(chi, 1e-14)) / df);
  const double mode = std::sqrt(std::max(df - 1.0, 0.0) / df);
  auto f = [&](double s) { return density(s) * range_cdf(q * s, k); };
  double value = 0.0;
  if (mode > lo && mode < hi)
    value = gauss_kronrod<double, 31>::integrate(f, lo, mode, kMaxDepth, kTolerance) +
            gauss_kronrod<double, 31>::integrate(f, mode, hi, kMaxDepth, kTolerance);
  else
    value = gauss_kronrod<double, 31>::integrate(f, lo, hi, kMaxDepth, kTolerance);
  return std::clamp(value, 0.0, 1.0);
}

std::vector<HSDComparison> tukey_hsd(const std::vector<std::pair<std::string, std::vector<double>>>& groups) {
  const std::size_t k = groups.size();
  if (k < 2) throw Error("tukey_hsd: needs at least 2 groups");
  std::size_t n = 0;
  std::vector<double> mean(k, 0.0);
  double ssw = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    const auto& values = groups[g].second;
    if (values.size() < 2)
      throw Error("tukey_hsd: group '" + groups[g].first + "' has fewer than 2 values");
    for (double v : values) mean[g] += v;
    mean[g] /= static_cast<double>(values.size());
    for (double v : values) ssw += (v - mean[g]) * (v - mean[g]);
    n += values.size();
  }
  if (n <= k) throw Error("tukey_hsd: total size must exceed the group count");
  const double df = static_cast<double>(n - k);
  const double msw = ssw / df;

  std::vector<HSDComparison> out;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      HSDComparison c;
      c.group_a = groups[a].first;
      c.group_b = groups[b].first;
      c.mean_diff = mean[a] - mean[b];
      const double diff = std::fabs(c.mean_diff);
      if (msw > 0.0) {
        const double se = std::sqrt(msw / 2.0 * (1.0 / static_cast<double>(groups[a].second.size()) +
                                                 1.0 / static_cast<double>(groups[b].second.size())));
        c.q_statistic = diff / se;
        c.p_adjusted = std::clamp(1.0 - studentized_range_cdf(c.q_statistic, static_cast<int>(k), df), 0.0, 1.0);
      } else {
        // No within-group spread: the limit is certainty either way.
        c.q_statistic = diff > 0.0 ? HUGE_VAL : 0.0;
        c.p_adjusted = diff > 0.0 ? 0.0 : 1.0;
      }
      c.significant_at_05 = c.p_adjusted < 0.05;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::optional<std::string> importance_group(const FeatureColumn& c) {
  switch (c.type) {
    case FeatureType::emoji: return "emoji";
    case FeatureType::hashtag: return "hashtag";
    case FeatureType::mention:
    case FeatureType::network: return "network";
    case FeatureType::url: return "url";
    case FeatureType::word:
    case FeatureType::lexicon_category: return c.block == Block::tweet_term ? "tweet_term" : "bio_term";
    case FeatureType::meta: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::vector<double>>> importance_groups(
    std::span<const std::pair<FeatureColumn, double>> importances) {
  static const char* const kOrder[] = {"emoji", "hashtag", "network", "url", "tweet_term", "bio_term"};
  std::map<std::string, std::vector<double>> by_group;
  for (const auto& [column, gain] : importances)
    if (auto g = importance_group(column)) by_group[*g].push_back(gain);
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const char* name : kOrder) {
    auto it = by_group.find(name);
    if (it != by_group.end() && it->second.size() >= 2) out.emplace_back(name, std::move(it->second));
  }
  return out;
}

std::vector<HSDComparison> group_importance_test(std::span<const std::pair<FeatureColumn, double>> importances) {
  auto groups = importance_groups(importances);
  if (groups.size() < 2)
    throw Error("group_importance_test: needs at least 2 feature types with 2 or more columns each, found " +
                std::to_string(groups.size()));
  return tukey_hsd(groups);
}

}  // namespace stancelab

#include <algorithm>
#include <cmath>

#include "stancelab/stats.hpp"

namespace stancelab {

namespace {

long long total(const CountMap& m) {
  long long n = 0;
  for (const auto& [term, c] : m) {
    if (c < 0) throw Error("log_odds_prior: negative count for '" + term + "'");
    n += c;
  }
  return n;
}

}  // namespace

double default_alpha0(const CountMap& a, const CountMap& b) {
  return 0.01 * static_cast<double>(total(a) + total(b));
}

std::vector<TermScore> log_odds_prior(const CountMap& a, const CountMap& b, double alpha0) {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw Error("log_odds_prior: alpha0 must be positive");
  const double na = static_cast<double>(total(a)), nb = static_cast<double>(total(b));
  if (na + nb <= 0.0) throw Error("log_odds_prior: both count maps are empty");

  std::map<std::string, std::pair<double, double>> vocab;
  for (const auto& [t, c] : a) vocab[t].first = static_cast<double>(c);
  for (const auto& [t, c] : b) vocab[t].second = static_cast<double>(c);

  std::vector<TermScore> out;
  out.reserve(vocab.size());
  for (const auto& [term, y] : vocab) {
    const double ya = y.first, yb = y.second;
    const double alpha = alpha0 * (ya + yb) / (na + nb);
    if (alpha <= 0.0) continue;  // zero in both maps carries no information
    const double rest_a = na + alpha0 - ya - alpha, rest_b = nb + alpha0 - yb - alpha;
    if (!(rest_a > 0.0) || !(rest_b > 0.0))
      throw Error("log_odds_prior: term '" + term + "' holds the whole mass of a group");
    TermScore s;
    s.term = term;
    s.delta = std::log((ya + alpha) / rest_a) - std::log((yb + alpha) / rest_b);
    s.variance = 1.0 / (ya + alpha) + 1.0 / (yb + alpha);
    s.z = s.delta / std::sqrt(s.variance);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const TermScore& x, const TermScore& y) {
    return x.z != y.z ? x.z > y.z : x.term < y.term;
  });
  return out;
}

double turnaround(double p0, double p1) {
  if (!(p0 >= 0.0 && p0 <= 1.0 && p1 >= 0.0 && p1 <= 1.0))
    throw Error("turnaround: probabilities must lie in [0, 1]");
  return p1 - p0;
}

}  // namespace stancelab

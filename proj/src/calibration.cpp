#include "stancelab/calibration.hpp"

#include <cmath>
#include <cstdio>

#include "stancelab/gbt.hpp"

namespace stancelab {

std::string_view to_string(StanceBand band) {
  switch (band) {
    case StanceBand::opposition: return "opposition";
    case StanceBand::undisclosed: return "undisclosed";
    case StanceBand::defense: return "defense";
  }
  return "undisclosed";
}

StanceBand band_from_string(std::string_view t) {
  for (StanceBand b : {StanceBand::opposition, StanceBand::undisclosed, StanceBand::defense})
    if (to_string(b) == t) return b;
  throw Error("unknown stance band '" + std::string(t) + "'");
}

StanceBand stance_band(double p, const BandBoundaries& bounds) {
  if (p < bounds.low) return StanceBand::opposition;
  if (p < bounds.high) return StanceBand::undisclosed;
  return StanceBand::defense;
}

std::string_view to_string(PlattInput input) {
  return input == PlattInput::margin ? "margin" : "confidence";
}

PlattInput platt_input_from_string(std::string_view t) {
  if (t == "confidence") return PlattInput::confidence;
  if (t == "margin") return PlattInput::margin;
  throw Error("unknown calibration input '" + std::string(t) + "'");
}

namespace {

// Cross-entropy term log(1 + e^z) - t z, stable for large |z|.
double entropy_term(double z, double t) {
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - t * z;
}

}  // namespace

PlattModel fit_platt(std::span<const double> scores, std::span<const int> labels, const PlattOptions& options) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw Error("fit_platt: score and label counts differ");
  if (n < 10) throw Error("fit_platt: needs at least 10 labeled scores, got " + std::to_string(n));
  double n_pos = 0.0, n_neg = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("fit_platt: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw Error("fit_platt: non-finite score");
    (labels[i] == 1 ? n_pos : n_neg) += 1.0;
    mean += scores[i];
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw Error("fit_platt: labels contain a single class");
  mean /= static_cast<double>(n);

  const double t_pos = (n_pos + 1.0) / (n_pos + 2.0), t_neg = 1.0 / (n_neg + 2.0);
  std::vector<double> s(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Centering keeps the problem well conditioned and pins A at 0 when every
    // score is identical.
    s[i] = scores[i] - mean;
    t[i] = labels[i] == 1 ? t_pos : t_neg;
  }
  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) f += entropy_term(a * s[i] + b, t[i]);
    return f;
  };

  constexpr double kRidge = 1e-12, kMinStep = 1e-10, kSufficientDecrease = 1e-4;
  double a = 0.0, b = std::log((n_pos + 1.0) / (n_neg + 1.0));
  double f = objective(a, b);
  int it = 0;
  double grad_norm = 0.0;
  for (;; ++it) {
    double ga = 0.0, gb = 0.0, haa = kRidge, hab = 0.0, hbb = kRidge;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(a * s[i] + b);
      const double w = p * (1.0 - p);
      ga += (p - t[i]) * s[i];
      gb += p - t[i];
      haa += w * s[i] * s[i];
      hab += w * s[i];
      hbb += w;
    }
    grad_norm = std::hypot(ga, gb) / static_cast<double>(n);
    if (grad_norm < options.tolerance) break;
    if (it >= options.max_iterations) {
      char msg[256];
      std::snprintf(msg, sizeof msg,
                    "fit_platt: no convergence after %d iterations (gradient norm %.3e, A=%.6g, B=%.6g)",
                    it, grad_norm, a, b - a * mean);
      throw Error(msg);
    }
    const double det = haa * hbb - hab * hab;
    const double da = -(hbb * ga - hab * gb) / det;
    const double db = -(-hab * ga + haa * gb) / det;
    const double slope = ga * da + gb * db;
    double step = 1.0;
    for (;;) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < f + kSufficientDecrease * step * slope) {
        a = na;
        b = nb;
        f = nf;
        break;
      }
      step *= 0.5;
      if (step < kMinStep) {
        char msg[256];
        std::snprintf(msg, sizeof msg,
                      "fit_platt: line search failed at iteration %d (gradient norm %.3e, A=%.6g, B=%.6g)",
                      it, grad_norm, a, b - a * mean);
        throw Error(msg);
      }
    }
  }
  PlattModel model;
  model.a = a;
  model.b = b - a * mean;
  model.input = options.input;
  model.iterations = it;
  return model;
}

PlattModel fit_platt(std::span<const double> scores, std::span<const int> labels,
                     std::span<const UserId> fit_users, const std::set<UserId>& training_users,
                     const PlattOptions& options) {
  if (fit_users.size() != scores.size()) throw Error("fit_platt: user and score counts differ");
  std::size_t overlap = 0;
  std::string first;
  for (const UserId& u : fit_users) {
    if (training_users.count(u) == 0) continue;
    if (overlap++ == 0) first = u;
  }
  if (overlap > 0)
    throw Error("fit_platt: calibration set shares " + std::to_string(overlap) +
                " users with the classifier training set (first: " + first + ")");
  return fit_platt(scores, labels, options);
}

double calibrate(const PlattModel& model, double score) { return sigmoid(model.a * score + model.b); }

StanceScore score_stance(const PlattModel& model, const UserId& user, double confidence, double margin,
                         const BandBoundaries& bounds) {
  StanceScore s;
  s.user_id = user;
  s.raw_confidence = confidence;
  s.probability = calibrate(model, model.input == PlattInput::margin ? margin : confidence);
  s.band = stance_band(s.probability, bounds);
  return s;
}

std::vector<ReliabilityBin> reliability_bins(std::span<const double> probabilities, std::span<const int> labels,
                                             int n_bins) {
  if (probabilities.size() != labels.size()) throw Error("reliability_bins: size mismatch");
  if (n_bins < 1) throw Error("reliability_bins: n_bins must be positive");
  std::vector<ReliabilityBin> bins(static_cast<std::size_t>(n_bins));
  std::vector<double> sum_p(bins.size(), 0.0), sum_y(bins.size(), 0.0);
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    auto k = static_cast<std::size_t>(std::floor(p * n_bins));
    if (k >= bins.size()) k = bins.size() - 1;
    sum_p[k] += p;
    sum_y[k] += labels[i];
    ++bins[k].count;
  }
  for (std::size_t k = 0; k < bins.size(); ++k) {
    bins[k].lower = static_cast<double>(k) / n_bins;
    bins[k].upper = static_cast<double>(k + 1) / n_bins;
    if (bins[k].count == 0) continue;
    bins[k].mean_confidence = sum_p[k] / static_cast<double>(bins[k].count);
    bins[k].empirical_rate = sum_y[k] / static_cast<double>(bins[k].count);
  }
  return bins;
}

double expected_calibration_error(std::span<const double> probabilities, std::span<const int> labels,
                                  int n_bins) {
  if (probabilities.empty()) throw Error("expected_calibration_error: no predictions");
  double ece = 0.0;
  for (const ReliabilityBin& bin : reliability_bins(probabilities, labels, n_bins))
    ece += static_cast<double>(bin.count) * std::fabs(bin.empirical_rate - bin.mean_confidence);
  return ece / static_cast<double>(probabilities.size());
}

}  // namespace stancelab

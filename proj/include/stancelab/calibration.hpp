#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/common.hpp"

namespace stancelab {

enum class StanceBand { opposition, undisclosed, defense };

std::string_view to_string(StanceBand band);
StanceBand band_from_string(std::string_view text);

struct BandBoundaries {
  double low = 0.4;
  double high = 0.6;
};

/// opposition below low, defense at or above high, undisclosed in between.
StanceBand stance_band(double probability, const BandBoundaries& bounds = {});

/// Which classifier output the sigmoid was fitted on.
enum class PlattInput { confidence, margin };

std::string_view to_string(PlattInput input);
PlattInput platt_input_from_string(std::string_view text);

/// p = sigmoid(A * score + B).
struct PlattModel {
  double a = 0.0;
  double b = 0.0;
  PlattInput input = PlattInput::confidence;
  int iterations = 0;

  bool operator==(const PlattModel&) const = default;
};

struct PlattOptions {
  int max_iterations = 100;
  /// Convergence when the gradient norm divided by the sample size drops below this.
  double tolerance = 1e-8;
  PlattInput input = PlattInput::confidence;
};

/// Newton fit against the smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2).
PlattModel fit_platt(std::span<const double> scores, std::span<const int> labels,
                     const PlattOptions& options = {});

/// As above, after rejecting any fitting user that the classifier trained on.
PlattModel fit_platt(std::span<const double> scores, std::span<const int> labels,
                     std::span<const UserId> fit_users, const std::set<UserId>& training_users,
                     const PlattOptions& options = {});

double calibrate(const PlattModel& model, double score);

struct StanceScore {
  UserId user_id;
  double raw_confidence = 0.0;
  double probability = 0.0;
  StanceBand band = StanceBand::undisclosed;
};

/// Chooses the score on the model's input scale from a raw confidence and margin.
StanceScore score_stance(const PlattModel& model, const UserId& user, double confidence,
                         double margin, const BandBoundaries& bounds = {});

struct ReliabilityBin {
  double lower = 0.0, upper = 0.0;
  double mean_confidence = 0.0;
  double empirical_rate = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [0, 1]; the last bin is closed.
std::vector<ReliabilityBin> reliability_bins(std::span<const double> probabilities,
                                             std::span<const int> labels, int n_bins = 10);

/// Count-weighted mean of |empirical rate - mean confidence| over the bins.
double expected_calibration_error(std::span<const double> probabilities, std::span<const int> labels,
                                  int n_bins = 10);

}  // namespace stancelab

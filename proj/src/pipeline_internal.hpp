#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stancelab/pipeline.hpp"

namespace stancelab::detail {

/// Tab-separated artifact: '#' lines are comments, the first other line is the header.
struct Tsv {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

Tsv read_tsv(const std::string& path);
std::string tsv_line(const std::vector<std::string>& fields);

/// Readable decimal for reports.
std::string num(double v);

struct Paths {
  std::string root;
  std::string stage(std::string_view name) const { return root + "/stages/" + std::string(name); }
  std::string report(std::string_view name) const { return root + "/reports/" + std::string(name); }
};

struct PredictionRow {
  UserId user;
  double stance_confidence = 0.0, stance_margin = 0.0, stance_probability = 0.0;
  StanceBand band = StanceBand::undisclosed;
  std::string stance_label;
  /// Final value per attribute (label first, then accepted prediction), its
  /// source (label, predicted, none) and the model's winning confidence.
  std::string gender, gender_source;
  std::optional<double> gender_confidence;
  std::string location, location_source;
  std::optional<double> location_confidence;
  std::string age, age_source;
  std::optional<double> age_confidence;
};

std::string serialize_predictions(const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions(const std::string& path);

struct TurnaroundRow {
  UserId user;
  double confidence_t0 = 0.0, confidence_t1 = 0.0;
  double p_t0 = 0.0, p_t1 = 0.0, delta = 0.0;
  StanceBand band_t0 = StanceBand::undisclosed, band_t1 = StanceBand::undisclosed;
};

std::string serialize_turnaround(const std::vector<TurnaroundRow>& rows, const std::string& note);
std::vector<TurnaroundRow> read_turnaround(const std::string& path);

PlattModel read_platt(const std::string& path);

/// Writes the report files; returns their paths.
std::vector<std::string> write_reports(const PipelineConfig& config, const Paths& paths, const std::string& digest);

}  // namespace stancelab::detail

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "pipeline_internal.hpp"

namespace stancelab::detail {

namespace {

constexpr std::size_t kTermsPerYear = 15;
constexpr std::size_t kTopFeatures = 20;

struct Writer {
  const Paths& paths;
  std::string header;
  std::vector<std::string> written;

  void write(const std::string& name, const std::string& body) {
    const std::string path = paths.report(name);
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    write_file_atomic(path, header + body);
    written.push_back(path);
  }
};

std::string volume_report(const Corpus& corpus) {
  std::string out = tsv_line({"week", "week_start", "posts"});
  for (const WeekCount& w : weekly_volume(corpus))
    out += tsv_line({w.week.label(), format_date(iso_week_start(days_from_civil(w.week.year, 1, 4) * 86400 +
                                                                (static_cast<std::int64_t>(w.week.week) - 1) * 7 * 86400)),
                     std::to_string(w.count)});
  return out;
}

std::string terms_report(const PipelineConfig& c, const Corpus& corpus, std::string& note) {
  const Stopwords stop = c.stopwords.empty() ? default_stopwords() : load_stopwords(c.stopwords);
  std::map<int, CountMap> by_year;
  for (const MicroPost& p : corpus.posts) {
    CountMap& m = by_year[year_of(p.timestamp)];
    for (const Token& t : tokenize(p.text))
      if (stop.count(t.term()) == 0) ++m[t.term()];
  }
  std::string out;
  if (by_year.size() < 2) out += "# fewer than two years in the corpus; nothing to compare\n";
  out += tsv_line({"year", "rank", "term", "delta", "variance", "z", "alpha0"});
  for (const auto& [year, counts] : by_year) {
    if (by_year.size() < 2) break;
    CountMap rest;
    for (const auto& [other, m] : by_year)
      if (other != year)
        for (const auto& [term, n] : m) rest[term] += n;
    const double alpha0 = c.alpha0.value_or(default_alpha0(counts, rest));
    std::vector<TermScore> scores = log_odds_prior(counts, rest, alpha0);
    std::stable_sort(scores.begin(), scores.end(), [](const TermScore& a, const TermScore& b) {
      return std::fabs(a.z) != std::fabs(b.z) ? std::fabs(a.z) > std::fabs(b.z) : a.term < b.term;
    });
    for (std::size_t k = 0; k < std::min(kTermsPerYear, scores.size()); ++k)
      out += tsv_line({std::to_string(year), std::to_string(k + 1), scores[k].term, num(scores[k].delta),
                       num(scores[k].variance), num(scores[k].z), num(alpha0)});
    note += "alpha0 " + std::to_string(year) + " vs rest: " + num(alpha0) + "\n";
  }
  return out;
}

std::string cv_report(const Paths& paths, std::string& note) {
  const Tsv t = read_tsv(paths.stage("cv.tsv"));
  std::string out = tsv_line(t.header);
  for (const auto& f : t.rows) {
    std::vector<std::string> g = f;
    for (std::size_t i = 4; i <= 7; ++i)
      if (!g[i].empty()) g[i] = num(parse_double(g[i]));
    out += tsv_line(g);
    if (!f[4].empty())
      note += f[0] + (f[1].empty() ? "" : " (" + f[1] + ")") + ": precision " + num(parse_double(f[4])) + " +- " +
              num(parse_double(f[5])) + ", recall " + num(parse_double(f[6])) + " +- " + num(parse_double(f[7])) +
              "\n";
  }
  return out;
}

std::string calibration_report(const Paths& paths, std::string& note) {
  const PlattModel platt = read_platt(paths.stage("platt.tsv"));
  std::vector<double> hold_p;
  std::vector<int> hold_y;
  for (const auto& f : read_tsv(paths.stage("calibration_holdout.tsv")).rows) {
    hold_y.push_back(static_cast<int>(parse_int(f[1])));
    hold_p.push_back(parse_double(f[4]));
  }
  std::vector<double> oof_p;
  std::vector<int> oof_y;
  for (const auto& f : read_tsv(paths.stage("stance_oof.tsv")).rows) {
    oof_y.push_back(static_cast<int>(parse_int(f[1])));
    const double conf = std::clamp(parse_double(f[2]), 1e-15, 1.0 - 1e-15);
    oof_p.push_back(calibrate(platt, platt.input == PlattInput::margin ? logit(conf) : conf));
  }
  const double ece_hold = expected_calibration_error(hold_p, hold_y);
  const double ece_oof = expected_calibration_error(oof_p, oof_y);
  std::string out = "# platt_a " + num(platt.a) + "\n# platt_b " + num(platt.b) + "\n# platt_input " +
                    std::string(to_string(platt.input)) + "\n# ece_holdout " + num(ece_hold) +
                    "\n# ece_training_oof " + num(ece_oof) + "\n";
  out += tsv_line({"set", "bin_lower", "bin_upper", "mean_confidence", "empirical_rate", "count"});
  auto bins = [&](const char* set, const std::vector<double>& p, const std::vector<int>& y) {
    for (const ReliabilityBin& b : reliability_bins(p, y))
      out += tsv_line({set, num(b.lower), num(b.upper), num(b.mean_confidence), num(b.empirical_rate),
                       std::to_string(b.count)});
  };
  bins("holdout", hold_p, hold_y);
  bins("training_oof", oof_p, oof_y);
  note += "platt A " + num(platt.a) + ", B " + num(platt.b) + " on " + std::string(to_string(platt.input)) +
          "; hold-out ECE " + num(ece_hold) + " (" + std::to_string(hold_p.size()) + " users)\n";
  return out;
}

std::string distribution_report(const std::vector<PredictionRow>& preds, const std::vector<TurnaroundRow>& turn,
                                std::string& note) {
  std::string out = tsv_line({"scope", "band", "users", "share"});
  auto emit = [&](const char* scope, const std::vector<StanceBand>& bands) {
    for (StanceBand b : {StanceBand::opposition, StanceBand::undisclosed, StanceBand::defense}) {
      const auto n = static_cast<std::size_t>(std::count(bands.begin(), bands.end(), b));
      const double share = bands.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(bands.size());
      out += tsv_line({scope, std::string(to_string(b)), std::to_string(n), num(share)});
      if (std::string_view(scope) == "all")
        note += "band " + std::string(to_string(b)) + ": " + std::to_string(n) + " (" + num(share) + ")\n";
    }
  };
  std::vector<StanceBand> all, t0, t1;
  for (const PredictionRow& r : preds) all.push_back(r.band);
  for (const TurnaroundRow& r : turn) {
    t0.push_back(r.band_t0);
    t1.push_back(r.band_t1);
  }
  emit("all", all);
  if (!turn.empty()) {
    emit("t0", t0);
    emit("t1", t1);
  }
  return out;
}

std::string importance_report(const Paths& paths, std::string& note) {
  const Tsv imp = read_tsv(paths.stage("importance.tsv"));
  std::map<std::string, std::pair<std::size_t, double>> groups;
  for (const auto& f : imp.rows)
    if (!f[4].empty()) {
      auto& g = groups[f[4]];
      ++g.first;
      g.second += parse_double(f[5]);
    }
  std::string out = "# section groups\n" + tsv_line({"group", "columns", "mean_gain", "total_gain"});
  for (const auto& [name, g] : groups)
    out += tsv_line({name, std::to_string(g.first), num(g.second / static_cast<double>(g.first)), num(g.second)});
  out += "# section top_features\n" + tsv_line({"rank", "column", "block", "type", "group", "gain"});
  for (std::size_t k = 0; k < std::min(kTopFeatures, imp.rows.size()); ++k) {
    std::vector<std::string> f = imp.rows[k];
    f[5] = num(parse_double(f[5]));
    out += tsv_line(f);
  }
  const Tsv hsd = read_tsv(paths.stage("hsd.tsv"));
  out += "# section hsd\n";
  for (const std::string& cmt : hsd.comments) out += cmt + "\n";
  out += tsv_line(hsd.header);
  for (const auto& f : hsd.rows) {
    out += tsv_line({f[0], f[1], num(parse_double(f[2])), num(parse_double(f[3])), num(parse_double(f[4])), f[5]});
    if (f[5] == "1") note += "significant importance difference: " + f[0] + " vs " + f[1] + "\n";
  }
  return out;
}

std::string turnaround_report(const std::vector<TurnaroundRow>& rows, const Tsv& raw, std::string& note) {
  std::string out;
  for (const std::string& cmt : raw.comments) out += cmt + "\n";
  out += tsv_line({"user", "p_t0", "p_t1", "delta", "band_t0", "band_t1"});
  double sum = 0.0;
  for (const TurnaroundRow& r : rows) {
    out += tsv_line({r.user, num(r.p_t0), num(r.p_t1), num(r.delta), std::string(to_string(r.band_t0)),
                     std::string(to_string(r.band_t1))});
    sum += r.delta;
  }
  note += "turnaround users: " + std::to_string(rows.size());
  if (!rows.empty()) note += ", mean delta " + num(sum / static_cast<double>(rows.size()));
  note += "\n";
  return out;
}

std::string regression_report(const Paths& paths, std::string& note) {
  const Tsv coef = read_tsv(paths.stage("regression.tsv"));
  const Tsv fit = read_tsv(paths.stage("regression_fit.tsv"));
  std::string out;
  for (const std::string& cmt : coef.comments) out += cmt + "\n";
  for (const auto& f : fit.rows) {
    const bool numeric = f[0] != "n" && f[0] != "p" && f[0].find(':') == std::string::npos && f[0] != "dropped";
    out += "# " + f[0] + " " + (numeric ? num(parse_double(f[1])) : f[1]) + "\n";
  }
  out += tsv_line(coef.header);
  for (const auto& f : coef.rows) {
    std::vector<std::string> g{f[0]};
    for (std::size_t i = 1; i < f.size(); ++i) g.push_back(num(parse_double(f[i])));
    out += tsv_line(g);
    note += "coefficient " + f[0] + ": " + num(parse_double(f[1])) + " [" + num(parse_double(f[3])) + ", " +
            num(parse_double(f[4])) + "]\n";
  }
  return out;
}

}  // namespace

std::vector<std::string> write_reports(const PipelineConfig& c, const Paths& paths, const std::string& digest) {
  Writer w{paths, "# manifest_digest " + digest + "\n", {}};
  const Corpus corpus = load_corpus(paths.stage("corpus.jsonl"));
  const std::vector<PredictionRow> preds = read_predictions(paths.stage("predictions.tsv"));
  const std::vector<TurnaroundRow> turn = read_turnaround(paths.stage("turnaround.tsv"));

  std::string summary = "stancelab " + std::string(kToolVersion) + "\n";
  summary += "users " + std::to_string(corpus.users.size()) + ", posts " + std::to_string(corpus.posts.size()) + "\n";
  for (const auto& f : read_tsv(paths.stage("ingest.tsv")).rows) summary += "ingest " + f[0] + " " + f[1] + "\n";

  std::string notes;
  w.write("volume_weekly.tsv", volume_report(corpus));
  w.write("terms_by_year.tsv", terms_report(c, corpus, notes));
  w.write("cv_metrics.tsv", cv_report(paths, notes));
  w.write("calibration.tsv", calibration_report(paths, notes));
  w.write("stance_distribution.tsv", distribution_report(preds, turn, notes));
  w.write("importance_hsd.tsv", importance_report(paths, notes));
  w.write("turnaround.tsv", turnaround_report(turn, read_tsv(paths.stage("turnaround.tsv")), notes));
  w.write("regression.tsv", regression_report(paths, notes));
  w.write("summary.txt", summary + notes);
  return w.written;
}

}  // namespace stancelab::detail

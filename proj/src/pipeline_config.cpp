#include <algorithm>
#include <filesystem>

#include <json.hpp>

#include "json_reader.hpp"
#include "stancelab/pipeline.hpp"

namespace stancelab {

using nlohmann::json;
using nlohmann::ordered_json;
using Reader = detail::JsonReader;

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

TimeRange read_range(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
    throw Error(where + ": expected [start, end]");
  return TimeRange{parse_date(j[0].get<std::string>()), parse_date_end(j[1].get<std::string>())};
}

std::string date_start(Timestamp t) {
  const std::string d = format_date(t);
  return parse_date(d) == t ? d : std::to_string(t);
}

std::string date_end(Timestamp t) {
  const std::string d = format_date(t);
  return parse_date_end(d) == t ? d : std::to_string(t);
}

ordered_json write_range(const TimeRange& r) { return ordered_json::array({date_start(r.start), date_end(r.end)}); }

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::label: return "label";
    case Stage::featurize: return "featurize";
    case Stage::train: return "train";
    case Stage::calibrate: return "calibrate";
    case Stage::predict: return "predict";
    case Stage::importance: return "importance";
    case Stage::turnaround: return "turnaround";
    case Stage::regress: return "regress";
    case Stage::report: return "report";
  }
  return "ingest";
}

Stage stage_from_string(std::string_view text) {
  for (Stage s : kAllStages)
    if (to_string(s) == text) return s;
  throw Error("unknown stage '" + std::string(text) + "'");
}

PipelineConfig parse_config(std::string_view text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig c;
  Reader r(j, "config");

  if (r.has("corpus")) {
    std::string p;
    r.get("corpus", p);
    c.corpus = resolve(base_dir, p);
  }
  if (r.has("synth")) {
    const json& s = r.at("synth");
    if (s.is_string())
      c.synth = load_synth_spec(resolve(base_dir, s.get<std::string>()));
    else
      c.synth = parse_synth_spec(s.dump());
  }
  if (r.has("rules")) {
    Reader rr(r.at("rules"), "config.rules");
    rr.get("gazetteer", c.rules.gazetteer);
    rr.get("names", c.rules.names);
    rr.get("patterns", c.rules.patterns);
    rr.get("seeds", c.rules.seeds);
    rr.finish();
    for (std::string* p : {&c.rules.gazetteer, &c.rules.names, &c.rules.patterns, &c.rules.seeds})
      *p = resolve(base_dir, *p);
  }
  r.get("lexicon", c.lexicon);
  r.get("stopwords", c.stopwords);
  c.lexicon = resolve(base_dir, c.lexicon);
  c.stopwords = resolve(base_dir, c.stopwords);
  if (r.has("manual_labels")) {
    std::string p;
    r.get("manual_labels", p);
    c.manual_labels = resolve(base_dir, p);
  }
  r.get("output_dir", c.output_dir);
  c.output_dir = resolve(base_dir, c.output_dir);

  if (r.has("time_range")) c.time_range = read_range(r.at("time_range"), "config.time_range");
  r.get("include_terms", c.include_terms);
  r.get("exclude_patterns", c.exclude_patterns);
  r.get("use_lcc", c.use_lcc);

  if (r.has("thresholds")) {
    Reader t(r.at("thresholds"), "config.thresholds");
    t.get("min_tweet_term", c.thresholds.min_tweet_term);
    t.get("min_bio_term", c.thresholds.min_bio_term);
    t.get("gender", c.thresholds.gender);
    t.get("location", c.thresholds.location);
    t.get("age", c.thresholds.age);
    t.get("band_low", c.thresholds.bands.low);
    t.get("band_high", c.thresholds.bands.high);
    t.finish();
  }
  if (r.has("boost")) {
    Reader b(r.at("boost"), "config.boost");
    b.get("n_estimators", c.boost.n_estimators);
    b.get("learning_rate", c.boost.learning_rate);
    b.get("max_delta_step", c.boost.max_delta_step);
    b.get("max_depth", c.boost.max_depth);
    b.get("validation_fraction", c.boost.validation_fraction);
    b.get("early_stopping_rounds", c.boost.early_stopping_rounds);
    b.get("min_child_weight", c.boost.min_child_weight);
    b.get("reg_lambda", c.boost.reg_lambda);
    b.finish();
  }
  r.get("cv_folds", c.cv_folds);
  if (r.has("alpha0") && !r.at("alpha0").is_null()) {
    double a = 0.0;
    r.get("alpha0", a);
    c.alpha0 = a;
  }
  if (r.has("periods")) {
    const json& p = r.at("periods");
    if (!p.is_array() || p.size() != 2) throw Error("config.periods: expected two [start, end] windows");
    c.periods = std::array<TimeRange, 2>{read_range(p[0], "config.periods[0]"), read_range(p[1], "config.periods[1]")};
  } else if (c.synth) {
    c.periods = c.synth->periods;
  }
  if (r.has("calibration")) {
    Reader k(r.at("calibration"), "config.calibration");
    std::string input(to_string(c.calibration.input));
    k.get("input", input);
    c.calibration.input = platt_input_from_string(input);
    k.get("holdout_fraction", c.calibration.holdout_fraction);
    k.finish();
  }
  r.get("reference_levels", c.reference_levels);
  if (r.has("activity_source")) {
    std::string a;
    r.get("activity_source", a);
    if (a == "profile")
      c.activity_source = ActivitySource::profile;
    else if (a == "corpus")
      c.activity_source = ActivitySource::corpus;
    else
      throw Error("config.activity_source: expected 'profile' or 'corpus'");
  }
  r.get("count_retweets", c.count_retweets);
  r.get("edge_min_indegree", c.edge_min_indegree);
  if (r.has("reference_year") && !r.at("reference_year").is_null()) {
    int y = 0;
    r.get("reference_year", y);
    c.reference_year = y;
  }
  r.get("signal_emoji", c.signal_emoji);
  r.get("rng_seed", c.rng_seed);
  r.finish();
  apply_seed(c, c.rng_seed);
  validate(c);
  return c;
}

PipelineConfig load_config(const std::string& path) {
  const std::string base = std::filesystem::path(path).parent_path().string();
  try {
    return parse_config(read_file(path), base.empty() ? "." : base);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void apply_seed(PipelineConfig& c, std::uint64_t seed) {
  c.rng_seed = seed;
  c.boost.rng_seed = seed;
  if (c.synth) c.synth->rng_seed = seed;
}

std::string serialize_config(const PipelineConfig& c, bool include_output_dir) {
  ordered_json j;
  if (c.corpus) j["corpus"] = *c.corpus;
  if (c.synth) j["synth"] = ordered_json::parse(serialize_synth_spec(*c.synth));
  j["rules"] = {{"gazetteer", c.rules.gazetteer},
                {"names", c.rules.names},
                {"patterns", c.rules.patterns},
                {"seeds", c.rules.seeds}};
  j["lexicon"] = c.lexicon;
  j["stopwords"] = c.stopwords;
  if (c.manual_labels) j["manual_labels"] = *c.manual_labels;
  if (include_output_dir) j["output_dir"] = c.output_dir;
  if (c.time_range) j["time_range"] = write_range(*c.time_range);
  j["include_terms"] = c.include_terms;
  j["exclude_patterns"] = c.exclude_patterns;
  j["use_lcc"] = c.use_lcc;
  j["thresholds"] = {{"min_tweet_term", c.thresholds.min_tweet_term},
                     {"min_bio_term", c.thresholds.min_bio_term},
                     {"gender", c.thresholds.gender},
                     {"location", c.thresholds.location},
                     {"age", c.thresholds.age},
                     {"band_low", c.thresholds.bands.low},
                     {"band_high", c.thresholds.bands.high}};
  j["boost"] = {{"n_estimators", c.boost.n_estimators},
                {"learning_rate", c.boost.learning_rate},
                {"max_delta_step", c.boost.max_delta_step},
                {"max_depth", c.boost.max_depth},
                {"validation_fraction", c.boost.validation_fraction},
                {"early_stopping_rounds", c.boost.early_stopping_rounds},
                {"min_child_weight", c.boost.min_child_weight},
                {"reg_lambda", c.boost.reg_lambda}};
  j["cv_folds"] = c.cv_folds;
  j["alpha0"] = c.alpha0 ? ordered_json(*c.alpha0) : ordered_json(nullptr);
  if (c.periods) j["periods"] = ordered_json::array({write_range((*c.periods)[0]), write_range((*c.periods)[1])});
  j["calibration"] = {{"input", to_string(c.calibration.input)}, {"holdout_fraction", c.calibration.holdout_fraction}};
  j["reference_levels"] = c.reference_levels;
  j["activity_source"] = c.activity_source == ActivitySource::profile ? "profile" : "corpus";
  j["count_retweets"] = c.count_retweets;
  j["edge_min_indegree"] = c.edge_min_indegree;
  j["reference_year"] = c.reference_year ? ordered_json(*c.reference_year) : ordered_json(nullptr);
  j["signal_emoji"] = c.signal_emoji;
  j["rng_seed"] = c.rng_seed;
  return j.dump(2) + "\n";
}

void validate(const PipelineConfig& c) {
  if (c.corpus.has_value() == c.synth.has_value()) throw Error("config: set exactly one of 'corpus' and 'synth'");
  if (c.synth) validate(*c.synth, default_rules());
  if (c.output_dir.empty()) throw Error("config: output_dir is empty");
  const bool custom_rules = !c.rules.gazetteer.empty() || !c.rules.names.empty() || !c.rules.patterns.empty() ||
                            !c.rules.seeds.empty();
  if (custom_rules && (c.rules.gazetteer.empty() || c.rules.names.empty() || c.rules.patterns.empty() ||
                       c.rules.seeds.empty()))
    throw Error("config.rules: give all four rule files or none");
  if (c.time_range && c.time_range->start > c.time_range->end) throw Error("config.time_range: end precedes start");
  const Thresholds& t = c.thresholds;
  if (t.min_tweet_term < 1 || t.min_bio_term < 1) throw Error("config.thresholds: minimum term counts must be >= 1");
  for (double v : {t.gender, t.location, t.age})
    if (!(v > 0.5 && v <= 1.0)) throw Error("config.thresholds: confidence thresholds must lie in (0.5, 1]");
  if (!(t.bands.low >= 0.0 && t.bands.low <= t.bands.high && t.bands.high <= 1.0))
    throw Error("config.thresholds: stance bands need 0 <= band_low <= band_high <= 1");
  validate(c.boost);
  if (c.cv_folds < 2) throw Error("config.cv_folds must be >= 2");
  if (c.alpha0 && !(*c.alpha0 > 0.0)) throw Error("config.alpha0 must be positive");
  if (c.periods) {
    const auto& p = *c.periods;
    if (p[0].start > p[0].end || p[1].start > p[1].end) throw Error("config.periods: a window ends before it starts");
    if (p[0].end >= p[1].start) throw Error("config.periods: windows must be ordered and non-overlapping");
  }
  if (!(c.calibration.holdout_fraction > 0.0 && c.calibration.holdout_fraction < 1.0))
    throw Error("config.calibration.holdout_fraction must lie in (0, 1)");
  static const char* const kCategorical[] = {"gender", "cohort", "country", "band_t0"};
  for (const auto& [name, level] : c.reference_levels)
    if (std::find(std::begin(kCategorical), std::end(kCategorical), name) == std::end(kCategorical))
      throw Error("config.reference_levels: '" + name + "' is not a categorical covariate");
  if (c.edge_min_indegree < 1) throw Error("config.edge_min_indegree must be >= 1");
}

}  // namespace stancelab

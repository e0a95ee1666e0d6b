#include "stancelab/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>

#include <openssl/evp.h>

#include <json.hpp>

#include "pipeline_internal.hpp"
#include "stancelab/random.hpp"

namespace stancelab {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* const kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

namespace detail {

std::size_t Tsv::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error("artifact lacks column '" + std::string(name) + "'");
}

Tsv read_tsv(const std::string& path) {
  Tsv t;
  bool have_header = false;
  std::size_t line_no = 0;
  for (const std::string& line : split(read_file(path), '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    std::vector<std::string> f = split(line, '\t');
    if (!have_header) {
      t.header = std::move(f);
      have_header = true;
      continue;
    }
    if (f.size() != t.header.size())
      throw Error(path + " line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                  " fields, found " + std::to_string(f.size()));
    t.rows.push_back(std::move(f));
  }
  if (!have_header) throw Error(path + ": no header line");
  return t;
}

std::string tsv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += '\t';
    out += fields[i];
  }
  out += '\n';
  return out;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::string opt_hex(const std::optional<double>& v) { return v ? hexfloat(*v) : ""; }
std::optional<double> opt_parse(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

}  // namespace

std::string serialize_predictions(const std::vector<PredictionRow>& rows) {
  std::string out = tsv_line({"user", "stance_confidence", "stance_margin", "stance_probability", "stance_band",
                              "stance_label", "gender", "gender_source", "gender_confidence", "location",
                              "location_source", "location_confidence", "age", "age_source", "age_confidence"});
  for (const PredictionRow& r : rows)
    out += tsv_line({r.user, hexfloat(r.stance_confidence), hexfloat(r.stance_margin), hexfloat(r.stance_probability),
                     std::string(to_string(r.band)), r.stance_label, r.gender, r.gender_source,
                     opt_hex(r.gender_confidence), r.location, r.location_source, opt_hex(r.location_confidence), r.age,
                     r.age_source, opt_hex(r.age_confidence)});
  return out;
}

std::vector<PredictionRow> read_predictions(const std::string& path) {
  const Tsv t = read_tsv(path);
  std::vector<PredictionRow> out;
  for (const auto& f : t.rows) {
    if (f.size() != 15) throw Error(path + ": expected 15 columns");
    PredictionRow r;
    r.user = f[0];
    r.stance_confidence = parse_double(f[1]);
    r.stance_margin = parse_double(f[2]);
    r.stance_probability = parse_double(f[3]);
    r.band = band_from_string(f[4]);
    r.stance_label = f[5];
    r.gender = f[6];
    r.gender_source = f[7];
    r.gender_confidence = opt_parse(f[8]);
    r.location = f[9];
    r.location_source = f[10];
    r.location_confidence = opt_parse(f[11]);
    r.age = f[12];
    r.age_source = f[13];
    r.age_confidence = opt_parse(f[14]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_turnaround(const std::vector<TurnaroundRow>& rows, const std::string& note) {
  std::string out = note.empty() ? "" : "# " + note + "\n";
  out += tsv_line({"user", "confidence_t0", "confidence_t1", "p_t0", "p_t1", "delta", "band_t0", "band_t1"});
  for (const TurnaroundRow& r : rows)
    out += tsv_line({r.user, hexfloat(r.confidence_t0), hexfloat(r.confidence_t1), hexfloat(r.p_t0), hexfloat(r.p_t1),
                     hexfloat(r.delta), std::string(to_string(r.band_t0)), std::string(to_string(r.band_t1))});
  return out;
}

std::vector<TurnaroundRow> read_turnaround(const std::string& path) {
  const Tsv t = read_tsv(path);
  std::vector<TurnaroundRow> out;
  for (const auto& f : t.rows) {
    TurnaroundRow r;
    r.user = f[0];
    r.confidence_t0 = parse_double(f[1]);
    r.confidence_t1 = parse_double(f[2]);
    r.p_t0 = parse_double(f[3]);
    r.p_t1 = parse_double(f[4]);
    r.delta = parse_double(f[5]);
    r.band_t0 = band_from_string(f[6]);
    r.band_t1 = band_from_string(f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

PlattModel read_platt(const std::string& path) {
  const Tsv t = read_tsv(path);
  PlattModel m;
  for (const auto& f : t.rows) {
    if (f[0] == "a")
      m.a = parse_double(f[1]);
    else if (f[0] == "b")
      m.b = parse_double(f[1]);
    else if (f[0] == "input")
      m.input = platt_input_from_string(f[1]);
    else if (f[0] == "iterations")
      m.iterations = static_cast<int>(parse_int(f[1]));
  }
  return m;
}

}  // namespace detail

namespace {

using detail::Paths;
using detail::PredictionRow;
using detail::Tsv;
using detail::TurnaroundRow;
using detail::tsv_line;

// ---------------------------------------------------------------------------
// Inputs shared by the stages.

struct Resources {
  RuleSet rules;
  Lexicon lexicon;
  Stopwords stopwords;
};

Resources load_resources(const PipelineConfig& c) {
  Resources r;
  r.rules = c.rules.gazetteer.empty() ? default_rules()
                                      : load_rules(c.rules.gazetteer, c.rules.names, c.rules.patterns, c.rules.seeds);
  r.lexicon = c.lexicon.empty() ? default_lexicon() : load_lexicon(c.lexicon);
  r.stopwords = c.stopwords.empty() ? default_stopwords() : load_stopwords(c.stopwords);
  return r;
}

/// Digest per external input; shipped defaults are digested from their text.
std::map<std::string, std::string> input_digests(const PipelineConfig& c) {
  std::map<std::string, std::string> d;
  const DefaultRuleText& t = default_rule_text();
  auto file_or = [&](const std::string& key, const std::string& path, std::string_view builtin) {
    d[key] = path.empty() ? sha256_hex(builtin) : sha256_hex(read_file(path));
  };
  if (c.corpus) d["corpus"] = sha256_hex(read_file(*c.corpus));
  if (c.synth) d["synth"] = sha256_hex(serialize_synth_spec(*c.synth));
  file_or("rules.gazetteer", c.rules.gazetteer, t.gazetteer);
  file_or("rules.names", c.rules.names, t.names);
  file_or("rules.patterns", c.rules.patterns, t.patterns);
  file_or("rules.seeds", c.rules.seeds, t.seeds);
  file_or("lexicon", c.lexicon, t.lexicon);
  file_or("stopwords", c.stopwords, t.stopwords);
  if (c.manual_labels) d["manual_labels"] = sha256_hex(read_file(*c.manual_labels));
  return d;
}

int reference_year_for(const PipelineConfig& c, const Corpus& corpus) {
  if (c.reference_year) return *c.reference_year;
  if (c.synth) return year_of(c.synth->periods[0].start);
  if (corpus.time_range) return year_of(corpus.time_range->start);
  throw Error("reference_year: the corpus is empty and no reference_year is configured");
}

void write_artifact(const std::string& path, std::string_view content, std::vector<std::string>& outputs) {
  fs::create_directories(fs::path(path).parent_path());
  write_file_atomic(path, content);
  outputs.push_back(path);
}

FeaturizeOptions featurize_options(const PipelineConfig& c) {
  FeaturizeOptions o;
  o.min_tweet_term = c.thresholds.min_tweet_term;
  o.min_bio_term = c.thresholds.min_bio_term;
  o.count_retweets = c.count_retweets;
  o.matrix.edge_min_indegree = c.edge_min_indegree;
  return o;
}

// ---------------------------------------------------------------------------
// Stage dependencies: the artifacts each stage needs and who makes them.

struct Need {
  Stage stage;
  const char* artifact;
};

std::vector<Need> needs_of(Stage s, const PipelineConfig& c) {
  switch (s) {
    case Stage::ingest: return {};
    case Stage::label: return {{Stage::ingest, "corpus.jsonl"}};
    case Stage::featurize: return {{Stage::ingest, "corpus.jsonl"}};
    case Stage::train: return {{Stage::featurize, "matrix.tsv"}, {Stage::label, "labels.tsv"}};
    case Stage::calibrate:
      return {{Stage::featurize, "matrix.tsv"}, {Stage::train, "models/stance.model"}, {Stage::train, "stance_split.tsv"}};
    case Stage::predict:
      return {{Stage::featurize, "matrix.tsv"},
              {Stage::label, "labels.tsv"},
              {Stage::train, "models/stance.model"},
              {Stage::train, "demographics.tsv"},
              {Stage::calibrate, "platt.tsv"}};
    case Stage::importance: return {{Stage::train, "models/stance.model"}};
    case Stage::turnaround: {
      std::vector<Need> n;
      if (c.periods) n = {{Stage::featurize, "matrix_t0.tsv"}, {Stage::featurize, "matrix_t1.tsv"}};
      n.push_back({Stage::train, "models/stance.model"});
      n.push_back({Stage::calibrate, "platt.tsv"});
      n.push_back({Stage::predict, "predictions.tsv"});
      return n;
    }
    case Stage::regress:
      return {{Stage::ingest, "corpus.jsonl"}, {Stage::predict, "predictions.tsv"}, {Stage::turnaround, "turnaround.tsv"}};
    case Stage::report:
      return {{Stage::ingest, "corpus.jsonl"},        {Stage::train, "cv.tsv"},
              {Stage::train, "stance_oof.tsv"},       {Stage::calibrate, "platt.tsv"},
              {Stage::calibrate, "calibration_holdout.tsv"}, {Stage::predict, "predictions.tsv"},
              {Stage::importance, "importance.tsv"},  {Stage::importance, "hsd.tsv"},
              {Stage::turnaround, "turnaround.tsv"},  {Stage::regress, "regression.tsv"},
              {Stage::regress, "regression_fit.tsv"}};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Stages.

std::vector<std::string> run_ingest(const PipelineConfig& c, const Paths& paths, const Resources& res) {
  std::vector<std::string> out;
  Corpus corpus;
  LoadReport report;
  std::string manual;
  if (c.synth) {
    SynthOutput s = generate(*c.synth, res.rules, res.lexicon, res.stopwords);
    write_artifact(paths.stage("synth_truth.tsv"), serialize_truth(s.truth), out);
    write_artifact(paths.stage("synth_manual_labels.tsv"), s.manual_labels, out);
    corpus = c.time_range ? restrict_period(s.corpus, *c.time_range) : std::move(s.corpus);
    report.lines = corpus.posts.size();
  } else {
    LoadOptions o;
    o.time_range = c.time_range;
    corpus = load_corpus(*c.corpus, o, &report);
  }
  const std::size_t loaded_posts = corpus.posts.size(), loaded_users = corpus.users.size();
  if (!c.include_terms.empty()) corpus = filter_relevant(corpus, c.include_terms, c.exclude_patterns);
  const std::size_t relevant_posts = corpus.posts.size(), relevant_users = corpus.users.size();
  if (c.use_lcc) corpus = restrict_users(corpus, largest_connected_component(build_interaction_graph(corpus)));
  if (corpus.users.empty()) throw Error("ingest: no users left after filtering");

  std::string stats = tsv_line({"quantity", "value"});
  auto stat = [&](const char* k, std::size_t v) { stats += tsv_line({k, std::to_string(v)}); };
  stat("lines", report.lines);
  stat("malformed", report.malformed);
  stat("out_of_range", report.out_of_range);
  stat("loaded_posts", loaded_posts);
  stat("loaded_users", loaded_users);
  stat("relevant_posts", relevant_posts);
  stat("relevant_users", relevant_users);
  stat("posts", corpus.posts.size());
  stat("users", corpus.users.size());
  write_artifact(paths.stage("ingest.tsv"), stats, out);
  write_artifact(paths.stage("corpus.jsonl"), serialize_corpus(corpus), out);
  return out;
}

Corpus stage_corpus(const Paths& paths) { return load_corpus(paths.stage("corpus.jsonl")); }

std::vector<std::string> run_label(const PipelineConfig& c, const Paths& paths, const Resources& res) {
  std::vector<std::string> out;
  const Corpus corpus = stage_corpus(paths);
  LabelSet labels = label_corpus(corpus, res.rules, reference_year_for(c, corpus));
  if (c.manual_labels)
    import_manual_labels(labels, read_file(*c.manual_labels));
  else if (c.synth)
    import_manual_labels(labels, read_file(paths.stage("synth_manual_labels.tsv")));
  write_artifact(paths.stage("labels.tsv"), serialize_labels(labels), out);
  return out;
}

std::vector<std::string> run_featurize(const PipelineConfig& c, const Paths& paths, const Resources& res) {
  std::vector<std::string> out;
  const Corpus corpus = stage_corpus(paths);
  const FeaturizeOptions o = featurize_options(c);
  write_artifact(paths.stage("matrix.tsv"), serialize_matrix(featurize(corpus, res.lexicon, res.stopwords, o)), out);
  if (c.periods)
    for (std::size_t t = 0; t < 2; ++t)
      write_artifact(paths.stage("matrix_t" + std::to_string(t) + ".tsv"),
                     serialize_matrix(featurize(corpus, res.lexicon, res.stopwords, o, (*c.periods)[t])), out);
  return out;
}

/// Value of an attribute's label as a class name.
std::optional<std::string> label_value(const UserLabels& l, std::string_view attribute) {
  if (attribute == "stance") return l.stance ? std::optional<std::string>(to_string(l.stance->value)) : std::nullopt;
  if (attribute == "gender") return l.gender ? std::optional<std::string>(to_string(l.gender->value)) : std::nullopt;
  if (attribute == "location") return l.location ? std::optional<std::string>(l.location->value) : std::nullopt;
  if (attribute == "age")
    return l.age_cohort ? std::optional<std::string>(to_string(l.age_cohort->value)) : std::nullopt;
  return std::nullopt;
}

constexpr const char* kDemographics[] = {"gender", "location", "age"};

double threshold_of(const PipelineConfig& c, std::string_view attribute) {
  if (attribute == "gender") return c.thresholds.gender;
  if (attribute == "location") return c.thresholds.location;
  return c.thresholds.age;
}

std::string cv_row(const std::string& attribute, const std::string& cls, std::size_t n, const CVReport* r,
                   const std::string& note) {
  if (!r) return tsv_line({attribute, cls, "", std::to_string(n), "", "", "", "", note});
  return tsv_line({attribute, cls, std::to_string(r->k), std::to_string(n), hexfloat(r->precision_mean),
                   hexfloat(r->precision_std), hexfloat(r->recall_mean), hexfloat(r->recall_std), note});
}

std::vector<std::string> run_train(const PipelineConfig& c, const Paths& paths, const Resources& res) {
  std::vector<std::string> out;
  const FeatureMatrix full = load_matrix(paths.stage("matrix.tsv"));
  const LabelSet labels = parse_labels(read_file(paths.stage("labels.tsv")));
  const FeatureMatrix x = drop_columns(full, leakage_columns(res.rules, full.columns()));

  auto labeled_rows = [&](std::string_view attribute) {
    std::vector<std::pair<std::size_t, std::string>> rows;
    for (std::size_t i = 0; i < x.n_rows(); ++i)
      if (const UserLabels* l = labels.find(x.rows()[i]))
        if (auto v = label_value(*l, attribute)) rows.emplace_back(i, *v);
    return rows;
  };

  std::string cv = tsv_line({"attribute", "class", "k", "n", "precision_mean", "precision_std", "recall_mean",
                             "recall_std", "note"});

  // Stance: stratified hold-out for calibration, the rest for training.
  const auto stance_rows = labeled_rows("stance");
  std::vector<std::size_t> by_class[2];
  for (const auto& [i, v] : stance_rows) by_class[v == "defense" ? 1 : 0].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw Error("train: stance labels need both classes (defense " + std::to_string(by_class[1].size()) +
                ", opposition " + std::to_string(by_class[0].size()) + ")");
  Rng rng(c.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> train_idx, hold_idx;
  for (auto& members : by_class) {
    rng.shuffle(members);
    auto n_hold = static_cast<std::size_t>(std::llround(c.calibration.holdout_fraction * static_cast<double>(members.size())));
    n_hold = std::min(n_hold, members.size() - 1);
    hold_idx.insert(hold_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_hold));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_hold), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(hold_idx.begin(), hold_idx.end());
  std::map<std::size_t, int> stance_label;
  for (const auto& [i, v] : stance_rows) stance_label[i] = v == "defense" ? 1 : 0;

  const FeatureMatrix xs = select_rows(x, train_idx);
  std::vector<int> ys;
  for (std::size_t i : train_idx) ys.push_back(stance_label[i]);
  const BoostedModel stance = train(xs, ys, c.boost);
  write_artifact(paths.stage("models/stance.model"), serialize_model(stance), out);
  const CVReport stance_cv = cross_validate(xs, ys, c.boost, c.cv_folds);
  cv += cv_row("stance", "defense", ys.size(), &stance_cv, "");

  std::string split = tsv_line({"user", "role", "label"});
  std::string oof = tsv_line({"user", "label", "confidence"});
  for (std::size_t k = 0; k < train_idx.size(); ++k) {
    const UserId& u = x.rows()[train_idx[k]];
    split += tsv_line({u, "train", std::to_string(ys[k])});
    oof += tsv_line({u, std::to_string(ys[k]), hexfloat(stance_cv.out_of_fold[k])});
  }
  for (std::size_t i : hold_idx) split += tsv_line({x.rows()[i], "holdout", std::to_string(stance_label[i])});
  write_artifact(paths.stage("stance_split.tsv"), split, out);
  write_artifact(paths.stage("stance_oof.tsv"), oof, out);

  // Demographics: binary models for two classes, one-vs-rest beyond.
  std::string demo = tsv_line({"attribute", "kind", "classes", "n", "note"});
  for (const char* attribute : kDemographics) {
    const auto rows = labeled_rows(attribute);
    std::map<std::string, std::size_t> counts;
    for (const auto& [i, v] : rows) ++counts[v];
    std::vector<std::string> classes;
    std::string class_list;
    for (const auto& [v, n] : counts) {
      classes.push_back(v);
      class_list += (class_list.empty() ? "" : ",") + v;
    }
    if (classes.size() < 2) {
      demo += tsv_line({attribute, "skipped", class_list, std::to_string(rows.size()), "fewer than two classes"});
      cv += cv_row(attribute, "", rows.size(), nullptr, "skipped: fewer than two classes");
      continue;
    }
    std::vector<std::size_t> idx;
    std::vector<int> y;
    for (const auto& [i, v] : rows) {
      idx.push_back(i);
      y.push_back(static_cast<int>(std::find(classes.begin(), classes.end(), v) - classes.begin()));
    }
    const FeatureMatrix xa = select_rows(x, idx);
    auto cross = [&](const std::vector<int>& binary, const std::string& cls) {
      const std::size_t pos = static_cast<std::size_t>(std::count(binary.begin(), binary.end(), 1));
      const std::size_t k = static_cast<std::size_t>(c.cv_folds);
      if (pos < k || binary.size() - pos < k) {
        cv += cv_row(attribute, cls, binary.size(), nullptr, "skipped: a class has fewer rows than folds");
        return;
      }
      const CVReport r = cross_validate(xa, binary, c.boost, c.cv_folds);
      cv += cv_row(attribute, cls, binary.size(), &r, "");
    };
    if (classes.size() == 2) {
      write_artifact(paths.stage(std::string("models/") + attribute + ".model"), serialize_model(train(xa, y, c.boost)),
                     out);
      demo += tsv_line({attribute, "binary", class_list, std::to_string(rows.size()), ""});
      cross(y, classes[1]);
    } else {
      const OneVsRestModel m = train_one_vs_rest(xa, y, static_cast<int>(classes.size()), c.boost);
      for (std::size_t k = 0; k < m.models.size(); ++k)
        write_artifact(paths.stage(std::string("models/") + attribute + "." + std::to_string(k) + ".model"),
                       serialize_model(m.models[k]), out);
      demo += tsv_line({attribute, "one_vs_rest", class_list, std::to_string(rows.size()), ""});
      for (std::size_t k = 0; k < classes.size(); ++k) {
        std::vector<int> binary;
        for (int v : y) binary.push_back(v == static_cast<int>(k) ? 1 : 0);
        cross(binary, classes[k]);
      }
    }
  }
  write_artifact(paths.stage("demographics.tsv"), demo, out);
  write_artifact(paths.stage("cv.tsv"), cv, out);
  return out;
}

struct StanceSplit {
  std::vector<UserId> train, holdout;
  std::map<UserId, int> label;
};

StanceSplit read_split(const Paths& paths) {
  const Tsv t = detail::read_tsv(paths.stage("stance_split.tsv"));
  StanceSplit s;
  for (const auto& f : t.rows) {
    (f[1] == "train" ? s.train : s.holdout).push_back(f[0]);
    s.label[f[0]] = static_cast<int>(parse_int(f[2]));
  }
  return s;
}

std::vector<std::size_t> rows_of(const FeatureMatrix& m, const std::vector<UserId>& users) {
  std::vector<std::size_t> idx;
  for (const UserId& u : users) {
    auto r = m.find_row(u);
    if (!r) throw Error("user " + u + " is missing from the feature matrix");
    idx.push_back(*r);
  }
  return idx;
}

double platt_score(const PlattModel& m, double confidence, double margin) {
  return m.input == PlattInput::margin ? margin : confidence;
}

std::vector<std::string> run_calibrate(const PipelineConfig& c, const Paths& paths) {
  std::vector<std::string> out;
  const FeatureMatrix matrix = load_matrix(paths.stage("matrix.tsv"));
  const BoostedModel model = load_model(paths.stage("models/stance.model"));
  const StanceSplit split = read_split(paths);
  const FeatureMatrix hold = select_rows(matrix, rows_of(matrix, split.holdout));
  const std::vector<double> conf = predict_confidence(model, hold);
  const std::vector<double> margin = predict_margin(model, hold);
  std::vector<double> scores;
  std::vector<int> y;
  for (std::size_t i = 0; i < hold.n_rows(); ++i) {
    scores.push_back(c.calibration.input == PlattInput::margin ? margin[i] : conf[i]);
    y.push_back(split.label.at(hold.rows()[i]));
  }
  PlattOptions o;
  o.input = c.calibration.input;
  const std::set<UserId> trained(split.train.begin(), split.train.end());
  const PlattModel platt = fit_platt(scores, y, hold.rows(), trained, o);

  std::string p = tsv_line({"parameter", "value"});
  p += tsv_line({"a", hexfloat(platt.a)});
  p += tsv_line({"b", hexfloat(platt.b)});
  p += tsv_line({"input", std::string(to_string(platt.input))});
  p += tsv_line({"iterations", std::to_string(platt.iterations)});
  write_artifact(paths.stage("platt.tsv"), p, out);

  std::string h = tsv_line({"user", "label", "confidence", "margin", "probability"});
  for (std::size_t i = 0; i < hold.n_rows(); ++i)
    h += tsv_line({hold.rows()[i], std::to_string(y[i]), hexfloat(conf[i]), hexfloat(margin[i]),
                   hexfloat(calibrate(platt, scores[i]))});
  write_artifact(paths.stage("calibration_holdout.tsv"), h, out);
  return out;
}

struct DemographicModel {
  std::string attribute;
  std::vector<std::string> classes;
  std::optional<BoostedModel> binary;
  OneVsRestModel ovr;
};

std::vector<DemographicModel> read_demographic_models(const Paths& paths) {
  std::vector<DemographicModel> out;
  for (const auto& f : detail::read_tsv(paths.stage("demographics.tsv")).rows) {
    if (f[1] == "skipped") continue;
    DemographicModel m;
    m.attribute = f[0];
    m.classes = split(f[2], ',');
    if (f[1] == "binary") {
      m.binary = load_model(paths.stage("models/" + f[0] + ".model"));
    } else {
      for (std::size_t k = 0; k < m.classes.size(); ++k)
        m.ovr.models.push_back(load_model(paths.stage("models/" + f[0] + "." + std::to_string(k) + ".model")));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> run_predict(const PipelineConfig& c, const Paths& paths) {
  std::vector<std::string> out;
  const FeatureMatrix matrix = load_matrix(paths.stage("matrix.tsv"));
  const LabelSet labels = parse_labels(read_file(paths.stage("labels.tsv")));
  const BoostedModel stance = load_model(paths.stage("models/stance.model"));
  const PlattModel platt = detail::read_platt(paths.stage("platt.tsv"));
  const std::vector<double> conf = predict_confidence(stance, matrix);
  const std::vector<double> margin = predict_margin(stance, matrix);

  std::vector<PredictionRow> rows(matrix.n_rows());
  for (std::size_t i = 0; i < matrix.n_rows(); ++i) {
    PredictionRow& r = rows[i];
    r.user = matrix.rows()[i];
    const StanceScore s = score_stance(platt, r.user, conf[i], margin[i], c.thresholds.bands);
    r.stance_confidence = conf[i];
    r.stance_margin = margin[i];
    r.stance_probability = s.probability;
    r.band = s.band;
    const UserLabels* l = labels.find(r.user);
    if (l) r.stance_label = label_value(*l, "stance").value_or("");
    for (const char* a : kDemographics) {
      std::string& value = std::string_view(a) == "gender" ? r.gender : std::string_view(a) == "location" ? r.location : r.age;
      std::string& source = std::string_view(a) == "gender" ? r.gender_source
                            : std::string_view(a) == "location" ? r.location_source
                                                                : r.age_source;
      source = "none";
      if (l)
        if (auto v = label_value(*l, a)) {
          value = *v;
          source = "label";
        }
    }
  }

  for (const DemographicModel& m : read_demographic_models(paths)) {
    const double threshold = threshold_of(c, m.attribute);
    std::vector<std::optional<int>> accepted;
    std::vector<double> winning;
    if (m.binary) {
      const std::vector<double> p = predict_confidence(*m.binary, matrix);
      for (const auto& a : accept_by_threshold(p, threshold)) accepted.push_back(a ? std::optional<int>(*a ? 1 : 0) : std::nullopt);
      for (double v : p) winning.push_back(std::max(v, 1.0 - v));
    } else {
      const auto probs = predict_one_vs_rest(m.ovr, matrix);
      accepted = accept_argmax(probs, threshold);
      for (const auto& p : probs) winning.push_back(*std::max_element(p.begin(), p.end()));
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      PredictionRow& r = rows[i];
      std::string& value = m.attribute == "gender" ? r.gender : m.attribute == "location" ? r.location : r.age;
      std::string& source = m.attribute == "gender" ? r.gender_source
                            : m.attribute == "location" ? r.location_source
                                                        : r.age_source;
      std::optional<double>& confidence = m.attribute == "gender" ? r.gender_confidence
                                          : m.attribute == "location" ? r.location_confidence
                                                                      : r.age_confidence;
      confidence = winning[i];
      if (source == "none" && accepted[i]) {
        value = m.classes[static_cast<std::size_t>(*accepted[i])];
        source = "predicted";
      }
    }
  }
  write_artifact(paths.stage("predictions.tsv"), detail::serialize_predictions(rows), out);
  return out;
}

std::vector<std::string> run_importance(const Paths& paths) {
  std::vector<std::string> out;
  const BoostedModel model = load_model(paths.stage("models/stance.model"));
  const auto imp = feature_importance(model);
  std::string t = tsv_line({"rank", "column", "block", "type", "group", "gain"});
  for (std::size_t k = 0; k < imp.size(); ++k) {
    const auto& [col, gain] = imp[k];
    t += tsv_line({std::to_string(k + 1), col.identifier, std::string(to_string(col.block)),
                   std::string(to_string(col.type)), importance_group(col).value_or(""), hexfloat(gain)});
  }
  write_artifact(paths.stage("importance.tsv"), t, out);

  const auto groups = importance_groups(imp);
  std::string h;
  if (groups.size() < 2) h = "# fewer than two feature groups with two or more columns\n";
  h += tsv_line({"group_a", "group_b", "mean_diff", "q_statistic", "p_adjusted", "significant_at_05"});
  if (groups.size() >= 2)
    for (const HSDComparison& cmp : tukey_hsd(groups))
      h += tsv_line({cmp.group_a, cmp.group_b, hexfloat(cmp.mean_diff), hexfloat(cmp.q_statistic),
                     hexfloat(cmp.p_adjusted), cmp.significant_at_05 ? "1" : "0"});
  write_artifact(paths.stage("hsd.tsv"), h, out);
  return out;
}

std::vector<std::string> run_turnaround(const PipelineConfig& c, const Paths& paths) {
  std::vector<std::string> out;
  if (!c.periods) {
    write_artifact(paths.stage("turnaround.tsv"), detail::serialize_turnaround({}, "no periods configured"), out);
    return out;
  }
  const FeatureMatrix m0 = load_matrix(paths.stage("matrix_t0.tsv"));
  const FeatureMatrix m1 = load_matrix(paths.stage("matrix_t1.tsv"));
  const BoostedModel model = load_model(paths.stage("models/stance.model"));
  const PlattModel platt = detail::read_platt(paths.stage("platt.tsv"));
  std::set<UserId> eligible;
  for (const PredictionRow& r : detail::read_predictions(paths.stage("predictions.tsv")))
    if (!r.gender.empty() && !r.age.empty()) eligible.insert(r.user);

  const auto [a0, a1] = align_rows(m0, m1);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < a0.n_rows(); ++i)
    if (eligible.count(a0.rows()[i])) keep.push_back(i);
  if (keep.empty())
    throw Error("turnaround: no users to compare (first period " + std::to_string(m0.n_rows()) + ", second period " +
                std::to_string(m1.n_rows()) + ", both " + std::to_string(a0.n_rows()) + ", with gender and age " +
                std::to_string(eligible.size()) + ")");
  const FeatureMatrix s0 = select_rows(a0, keep), s1 = select_rows(a1, keep);
  const auto c0 = predict_confidence(model, s0), c1 = predict_confidence(model, s1);
  const auto g0 = predict_margin(model, s0), g1 = predict_margin(model, s1);
  std::vector<TurnaroundRow> rows;
  for (std::size_t i = 0; i < s0.n_rows(); ++i) {
    TurnaroundRow r;
    r.user = s0.rows()[i];
    r.confidence_t0 = c0[i];
    r.confidence_t1 = c1[i];
    r.p_t0 = calibrate(platt, platt_score(platt, c0[i], g0[i]));
    r.p_t1 = calibrate(platt, platt_score(platt, c1[i], g1[i]));
    r.delta = turnaround(r.p_t0, r.p_t1);
    r.band_t0 = stance_band(r.p_t0, c.thresholds.bands);
    r.band_t1 = stance_band(r.p_t1, c.thresholds.bands);
    rows.push_back(std::move(r));
  }
  write_artifact(paths.stage("turnaround.tsv"), detail::serialize_turnaround(rows, ""), out);
  return out;
}

TurnaroundResult compute_regression(const PipelineConfig& c, const Paths& paths) {
  TurnaroundResult result;
  const std::vector<TurnaroundRow> rows = detail::read_turnaround(paths.stage("turnaround.tsv"));
  for (const TurnaroundRow& r : rows) result.records.push_back(TurnaroundRecord{r.user, r.p_t0, r.p_t1, r.delta});
  if (!c.periods) return result;

  const Corpus corpus = stage_corpus(paths);
  std::map<UserId, PredictionRow> preds;
  for (PredictionRow& r : detail::read_predictions(paths.stage("predictions.tsv"))) preds.emplace(r.user, std::move(r));
  const Timestamp reference = c.periods->at(0).start;
  const Timestamp crawl = corpus.time_range ? corpus.time_range->end : reference;

  std::map<UserId, std::int64_t> corpus_posts;
  std::map<UserId, std::set<std::string>> first_emoji;
  const std::set<std::string> signal(c.signal_emoji.begin(), c.signal_emoji.end());
  for (const MicroPost& p : corpus.posts) {
    ++corpus_posts[p.author_id];
    if (!c.periods->at(0).contains(p.timestamp)) continue;
    for (const Token& t : tokenize(p.text))
      if (t.kind == TokenKind::emoji && signal.count(t.surface)) first_emoji[p.author_id].insert(t.surface);
  }

  std::vector<CovariateRecord> records;
  std::vector<double> response;
  for (const TurnaroundRow& r : rows) {
    const UserProfile& profile = corpus.users.at(r.user);
    const PredictionRow& pr = preds.at(r.user);
    CovariateRecord rec;
    rec["gender"] = pr.gender;
    rec["cohort"] = pr.age;
    rec["country"] = pr.location.empty() ? std::string("unknown") : pr.location;
    rec["followers"] = static_cast<double>(std::max<std::int64_t>(profile.n_followers, 0));
    rec["followees"] = static_cast<double>(std::max<std::int64_t>(profile.n_friends, 0));
    const double age_days = std::max(1.0, static_cast<double>(crawl - profile.account_created) / 86400.0);
    const double posts = c.activity_source == ActivitySource::profile ? static_cast<double>(profile.n_posts)
                                                                       : static_cast<double>(corpus_posts[r.user]);
    rec["activity_ratio"] = std::max(posts, 0.0) / age_days;
    rec["account_age_years"] = std::max(0.0, static_cast<double>(reference - profile.account_created) / (365.25 * 86400.0));
    rec["band_t0"] = std::string(to_string(r.band_t0));
    for (const std::string& e : c.signal_emoji) rec["emoji_t0:" + e] = first_emoji[r.user].count(e) ? 1.0 : 0.0;
    records.push_back(std::move(rec));
    response.push_back(r.delta);
  }

  std::vector<CovariateSpec> candidates = {{"gender", CovariateKind::categorical, std::nullopt},
                                           {"cohort", CovariateKind::categorical, std::nullopt},
                                           {"country", CovariateKind::categorical, std::nullopt},
                                           {"followers", CovariateKind::count, std::nullopt},
                                           {"followees", CovariateKind::count, std::nullopt},
                                           {"activity_ratio", CovariateKind::count, std::nullopt},
                                           {"account_age_years", CovariateKind::numeric, std::nullopt},
                                           {"band_t0", CovariateKind::categorical, std::nullopt}};
  for (const std::string& e : c.signal_emoji) candidates.push_back({"emoji_t0:" + e, CovariateKind::numeric, std::nullopt});
  for (CovariateSpec& spec : candidates) {
    auto ref = c.reference_levels.find(spec.name);
    if (ref != c.reference_levels.end()) spec.reference = ref->second;
    std::set<std::string> levels;
    std::set<double> values;
    for (const CovariateRecord& rec : records) {
      const CovariateValue& v = rec.at(spec.name);
      if (std::holds_alternative<std::string>(v))
        levels.insert(std::get<std::string>(v));
      else
        values.insert(std::get<double>(v));
    }
    if (levels.size() + values.size() < 2) {
      result.dropped.push_back(spec.name);
      continue;
    }
    if (spec.reference && levels.count(*spec.reference) == 0) spec.reference.reset();
    result.model.covariates.push_back(spec);
  }
  result.regression = ols_regress(records, response, result.model);
  return result;
}

std::vector<std::string> run_regress(const PipelineConfig& c, const Paths& paths) {
  std::vector<std::string> out;
  const TurnaroundResult r = compute_regression(c, paths);
  std::string coef;
  std::string fit = tsv_line({"quantity", "value"});
  if (!c.periods) coef = "# no periods configured\n";
  coef += tsv_line({"coefficient", "estimate", "std_error", "ci_low", "ci_high", "t_value", "p_value"});
  if (c.periods) {
    const RegressionResult& g = r.regression;
    for (const Coefficient& k : g.coefficients)
      coef += tsv_line({k.name, hexfloat(k.estimate), hexfloat(k.std_error), hexfloat(k.ci_low), hexfloat(k.ci_high),
                        hexfloat(k.t_value), hexfloat(k.p_value)});
    fit += tsv_line({"n", std::to_string(g.n)});
    fit += tsv_line({"p", std::to_string(g.p)});
    fit += tsv_line({"r_squared", hexfloat(g.r_squared)});
    fit += tsv_line({"adj_r_squared", hexfloat(g.adj_r_squared)});
    fit += tsv_line({"mse", hexfloat(g.mse)});
    fit += tsv_line({"f_statistic", hexfloat(g.f_statistic)});
    fit += tsv_line({"f_p_value", hexfloat(g.f_p_value)});
    fit += tsv_line({"log_likelihood", hexfloat(g.log_likelihood)});
    for (const DummyLevel& d : g.dummy_coding)
      if (d.column.empty()) fit += tsv_line({"reference:" + d.covariate, d.level});
    for (const std::string& d : r.dropped) fit += tsv_line({"dropped", d});
  }
  write_artifact(paths.stage("regression.tsv"), coef, out);
  write_artifact(paths.stage("regression_fit.tsv"), fit, out);
  return out;
}

std::string relative_to(const std::string& root, const std::string& path) {
  return fs::path(path).lexically_relative(root).generic_string();
}

}  // namespace

// ---------------------------------------------------------------------------

struct Pipeline::Impl {
  Paths paths;
  std::string config_text;
  std::map<std::string, std::string> inputs;
  ordered_json stages = ordered_json::object();
  std::optional<Resources> resources;

  const Resources& res(const PipelineConfig& c) {
    if (!resources) resources = load_resources(c);
    return *resources;
  }

  std::string manifest_path() const { return paths.root + "/manifest.json"; }

  ordered_json digest_basis() const {
    ordered_json j;
    j["tool"] = "stancelab";
    j["version"] = std::string(kToolVersion);
    j["config"] = ordered_json::parse(config_text);
    j["inputs"] = inputs;
    ordered_json s = ordered_json::object();
    for (Stage st : kAllStages) {
      if (st == Stage::report) continue;
      const std::string name(to_string(st));
      if (!stages.contains(name)) continue;
      s[name] = {{"key", stages[name]["key"]}, {"outputs", stages[name]["outputs"]}};
    }
    j["stages"] = s;
    return j;
  }

  void save_manifest() const {
    ordered_json j = digest_basis();
    j["digest"] = sha256_hex(digest_basis().dump());
    ordered_json all = ordered_json::object();
    for (Stage st : kAllStages) {
      const std::string name(to_string(st));
      if (stages.contains(name)) all[name] = stages[name];
    }
    j["stages"] = all;
    write_file_atomic(manifest_path(), j.dump(2) + "\n");
  }
};

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  validate(config_);
  fs::create_directories(config_.output_dir);
  lock_path_ = config_.output_dir + "/.lock";
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw Error("output directory " + config_.output_dir + " is locked by another run (remove " + lock_path_ +
                  " if no run is active)");
    throw Error("cannot create lock " + lock_path_ + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::write(fd, pid.data(), pid.size()) < 0) {
    // The lock is held by the file's existence; its content is informational.
  }
  ::close(fd);
  try {
    impl_ = new Impl;
    impl_->paths.root = config_.output_dir;
    impl_->config_text = serialize_config(config_, false);
    impl_->inputs = input_digests(config_);
    if (fs::exists(impl_->manifest_path())) {
      const ordered_json old = ordered_json::parse(read_file(impl_->manifest_path()));
      if (old.contains("stages")) impl_->stages = old["stages"];
    }
  } catch (...) {
    delete impl_;
    impl_ = nullptr;
    ::unlink(lock_path_.c_str());
    throw;
  }
}

Pipeline::~Pipeline() {
  delete impl_;
  ::unlink(lock_path_.c_str());
}

std::string Pipeline::stage_path(std::string_view name) const { return impl_->paths.stage(name); }
std::string Pipeline::report_path(std::string_view name) const { return impl_->paths.report(name); }
std::string Pipeline::manifest_digest() const { return sha256_hex(impl_->digest_basis().dump()); }

StageResult Pipeline::run(Stage stage, const RunOptions& options) {
  const Paths& paths = impl_->paths;
  const std::string name(to_string(stage));
  std::string key_text = "stancelab " + std::string(kToolVersion) + "\nstage " + name + "\n" + impl_->config_text;
  for (const auto& [k, v] : impl_->inputs) key_text += "input " + k + " " + v + "\n";
  for (const Need& n : needs_of(stage, config_)) {
    const std::string path = paths.stage(n.artifact);
    if (!fs::exists(path)) throw Error("missing stage: " + std::string(to_string(n.stage)));
    key_text += "artifact " + std::string(n.artifact) + " " + sha256_hex(read_file(path)) + "\n";
  }
  const std::string key = sha256_hex(key_text);

  StageResult result;
  result.stage = stage;
  if (options.skip_fresh && impl_->stages.contains(name) && impl_->stages[name]["key"] == key) {
    bool fresh = true;
    for (const auto& o : impl_->stages[name]["outputs"]) {
      const std::string path = paths.root + "/" + o["path"].get<std::string>();
      if (!fs::exists(path) || sha256_hex(read_file(path)) != o["sha256"].get<std::string>()) {
        fresh = false;
        break;
      }
      result.outputs.push_back(path);
    }
    if (fresh) {
      result.skipped = true;
      return result;
    }
    result.outputs.clear();
  }

  const auto start = std::chrono::steady_clock::now();
  switch (stage) {
    case Stage::ingest: result.outputs = run_ingest(config_, paths, impl_->res(config_)); break;
    case Stage::label: result.outputs = run_label(config_, paths, impl_->res(config_)); break;
    case Stage::featurize: result.outputs = run_featurize(config_, paths, impl_->res(config_)); break;
    case Stage::train: result.outputs = run_train(config_, paths, impl_->res(config_)); break;
    case Stage::calibrate: result.outputs = run_calibrate(config_, paths); break;
    case Stage::predict: result.outputs = run_predict(config_, paths); break;
    case Stage::importance: result.outputs = run_importance(paths); break;
    case Stage::turnaround: result.outputs = run_turnaround(config_, paths); break;
    case Stage::regress: result.outputs = run_regress(config_, paths); break;
    case Stage::report: result.outputs = detail::write_reports(config_, paths, manifest_digest()); break;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ordered_json outs = ordered_json::array();
  for (const std::string& path : result.outputs)
    outs.push_back({{"path", relative_to(paths.root, path)}, {"sha256", sha256_hex(read_file(path))}});
  impl_->stages[name] = {{"key", key}, {"seconds", result.seconds}, {"outputs", outs}};
  impl_->save_manifest();
  return result;
}

std::vector<StageResult> Pipeline::run_all(const RunOptions& options) {
  std::vector<StageResult> out;
  for (Stage s : kAllStages) out.push_back(run(s, options));
  return out;
}

TurnaroundResult turnaround_pipeline(const PipelineConfig& config) {
  Pipeline p(config);
  p.run(Stage::turnaround);
  p.run(Stage::regress);
  Paths paths{config.output_dir};
  return compute_regression(config, paths);
}

}  // namespace stancelab

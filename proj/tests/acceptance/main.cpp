#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stancelab/pipeline.hpp"
#include "stancelab/random.hpp"

using namespace stancelab;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = std::string(STANCELAB_SOURCE_DIR) + "/configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("table lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(const std::string& path) {
  Table t;
  for (const std::string& line : split(read_file(path), '\n')) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty())
      t.header = split(line, '\t');
    else
      t.rows.push_back(split(line, '\t'));
  }
  return t;
}

/// Scratch output directory removed on scope exit.
struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& name) : path(fs::temp_directory_path() / ("stancelab_acceptance_" + name)) {
    fs::remove_all(path);
  }
  ~Scratch() { fs::remove_all(path); }
};

PipelineConfig config_for(const std::string& file, std::uint64_t seed, const fs::path& out) {
  PipelineConfig c = load_config(kConfigs + "/" + file);
  apply_seed(c, seed);
  c.output_dir = out.string();
  return c;
}

void run_stages(Pipeline& p, std::initializer_list<Stage> stages) {
  for (Stage s : stages) p.run(s);
}

// ---------------------------------------------------------------------------

Outcome gbt_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  BoostParams params;
  params.n_estimators = 1;
  params.max_depth = 1;
  params.validation_fraction = 0.0;

  std::size_t instances = 0, single_class = 0, mismatches = 0;
  std::string first;
  std::vector<int> counts(16, 0);

  auto check = [&](int mcw) {
    params.min_child_weight = mcw;
    std::vector<std::vector<int>> x;
    std::vector<int> y;
    TrainingData data;
    data.rank = {0, 1, 2};
    for (std::size_t t = 0; t < 16; ++t)
      for (int k = 0; k < counts[t]; ++k) {
        x.push_back({static_cast<int>(t & 1), static_cast<int>((t >> 1) & 1), static_cast<int>((t >> 2) & 1)});
        y.push_back(static_cast<int>((t >> 3) & 1));
      }
    data.n_rows = y.size();
    data.rows.assign(3, {});
    data.values.assign(3, {});
    for (std::size_t r = 0; r < y.size(); ++r)
      for (std::size_t c = 0; c < 3; ++c)
        if (x[r][c]) {
          data.rows[c].push_back(static_cast<std::uint32_t>(r));
          data.values[c].push_back(1.0);
        }
    const auto pos = std::count(y.begin(), y.end(), 1);
    ++instances;
    if (pos == 0 || pos == static_cast<long>(y.size())) {
      ++single_class;
      bool threw = false;
      try {
        train_columns(data, y, params);
      } catch (const Error&) {
        threw = true;
      }
      if (!threw && mismatches++ == 0) first = "single-class instance accepted";
      return;
    }
    const BoostedModel m = train_columns(data, y, params);
    const oracle::Stump s = oracle::best_stump(x, y, mcw, params.max_delta_step, params.learning_rate);
    const Tree& tree = m.trees.at(0);
    bool ok = std::fabs(m.base_score - std::log(static_cast<double>(pos) / static_cast<double>(y.size() - pos))) < 1e-12;
    if (!s.column) {
      ok = ok && tree.nodes.size() == 1 && std::fabs(tree.nodes[0].value - s.root) < 1e-12;
    } else {
      ok = ok && tree.nodes.size() == 3 && tree.nodes[0].column == *s.column && tree.nodes[0].threshold > 0.0 &&
           tree.nodes[0].threshold <= 1.0 && std::fabs(tree.nodes[0].value - s.gain) <= 1e-12 * (1.0 + s.gain) &&
           std::fabs(tree.nodes[1].value - s.left) < 1e-12 && std::fabs(tree.nodes[2].value - s.right) < 1e-12;
    }
    if (!ok && mismatches++ == 0) {
      first = "instance";
      for (std::size_t t = 0; t < 16; ++t) first += " " + std::to_string(counts[t]);
      first += " mcw " + std::to_string(mcw);
    }
  };

  // Every multiset of the 16 row types (3 binary columns x label) with 1..8 rows.
  std::function<void(std::size_t, int)> rec = [&](std::size_t type, int left) {
    if (type == 16) {
      int n = 0;
      for (int c : counts) n += c;
      if (n > 0) {
        check(1);
        check(0);
      }
      return;
    }
    for (int k = 0; k <= left; ++k) {
      counts[type] = k;
      rec(type + 1, left - k);
    }
    counts[type] = 0;
  };
  rec(0, 8);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && secs < 5.0;
  o.detail = std::to_string(instances) + " trainings (" + std::to_string(single_class) + " single-class), " +
             std::to_string(mismatches) + " mismatches" + (first.empty() ? "" : " first: " + first) + ", " +
             fmt("%.2f s", secs) + " (limit 5 s)";
  return o;
}

Outcome cv_magnitude() {
  const auto t0 = std::chrono::steady_clock::now();
  Scratch dir("cv");
  double precision = 0.0, recall = 0.0;
  std::size_t columns = 0, n = 0;
  {
    Pipeline p(config_for("stance.json", 1, dir.path));
    run_stages(p, {Stage::ingest, Stage::label, Stage::featurize, Stage::train});
    columns = load_matrix(p.stage_path("matrix.tsv")).n_cols();
    const Table cv = read_table(p.stage_path("cv.tsv"));
    for (const auto& r : cv.rows)
      if (r[cv.col("attribute")] == "stance") {
        precision = parse_double(r[cv.col("precision_mean")]);
        recall = parse_double(r[cv.col("recall_mean")]);
        n = static_cast<std::size_t>(parse_int(r[cv.col("n")]));
      }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = precision >= 0.85 && recall >= 0.85 && secs < 60.0;
  o.detail = "precision " + fmt("%.3f", precision) + ", recall " + fmt("%.3f", recall) + " (>= 0.85) on " +
             std::to_string(n) + " training users, " + std::to_string(columns) + " columns, " + fmt("%.1f s", secs) +
             " (limit 60 s)";
  return o;
}

std::string truth_value(const UserTruth& t, const std::string& attribute) {
  if (attribute == "gender") return std::string(to_string(t.gender));
  if (attribute == "location") return t.country;
  return std::string(to_string(t.cohort));
}

bool has_label(const UserLabels* l, const std::string& attribute) {
  if (!l) return false;
  if (attribute == "gender") return l->gender.has_value();
  if (attribute == "location") return l->location.has_value();
  return l->age_cohort.has_value();
}

Outcome threshold_behavior() {
  const char* attributes[] = {"gender", "location", "age"};
  int good_runs = 0;
  std::string worst;
  std::map<std::string, std::pair<double, double>> sums;  // accepted error, all error
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scratch dir("thresholds_" + std::to_string(seed));
    Pipeline p(config_for("demographics.json", seed, dir.path));
    run_stages(p, {Stage::ingest, Stage::label, Stage::featurize, Stage::train});
    const Thresholds& th = p.config().thresholds;
    const FeatureMatrix x = load_matrix(p.stage_path("matrix.tsv"));
    const LabelSet labels = parse_labels(read_file(p.stage_path("labels.tsv")));
    const GroundTruth truth = parse_truth(read_file(p.stage_path("synth_truth.tsv")));
    const Table demo = read_table(p.stage_path("demographics.tsv"));
    bool run_ok = true;
    for (const std::string attribute : attributes) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < x.n_rows(); ++i)
        if (!has_label(labels.find(x.rows()[i]), attribute)) idx.push_back(i);
      const FeatureMatrix eval = select_rows(x, idx);
      std::vector<std::string> classes, kind;
      for (const auto& r : demo.rows)
        if (r[demo.col("attribute")] == attribute) {
          classes = split(r[demo.col("classes")], ',');
          kind = {r[demo.col("kind")]};
        }
      std::vector<std::string> all_pred(eval.n_rows());
      std::vector<std::optional<std::string>> accepted(eval.n_rows());
      if (kind.at(0) == "binary") {
        const BoostedModel m = load_model(p.stage_path("models/" + attribute + ".model"));
        const std::vector<double> c = predict_confidence(m, eval);
        const double t = attribute == "gender" ? th.gender : th.location;
        const auto acc = accept_by_threshold(c, t);
        for (std::size_t i = 0; i < c.size(); ++i) {
          all_pred[i] = classes[c[i] >= 0.5 ? 1 : 0];
          if (acc[i]) accepted[i] = classes[*acc[i] ? 1 : 0];
        }
      } else {
        OneVsRestModel m;
        for (std::size_t k = 0; k < classes.size(); ++k)
          m.models.push_back(load_model(p.stage_path("models/" + attribute + "." + std::to_string(k) + ".model")));
        const auto prob = predict_one_vs_rest(m, eval);
        const auto acc = accept_argmax(prob, th.age);
        for (std::size_t i = 0; i < prob.size(); ++i) {
          all_pred[i] = classes[static_cast<std::size_t>(
              std::max_element(prob[i].begin(), prob[i].end()) - prob[i].begin())];
          if (acc[i]) accepted[i] = classes[static_cast<std::size_t>(*acc[i])];
        }
      }
      std::size_t wrong_all = 0, n_acc = 0, wrong_acc = 0;
      for (std::size_t i = 0; i < eval.n_rows(); ++i) {
        const std::string want = truth_value(*truth.find(eval.rows()[i]), attribute);
        wrong_all += all_pred[i] != want;
        if (accepted[i]) {
          ++n_acc;
          wrong_acc += *accepted[i] != want;
        }
      }
      const double e_all = static_cast<double>(wrong_all) / static_cast<double>(eval.n_rows());
      const double e_acc = n_acc ? static_cast<double>(wrong_acc) / static_cast<double>(n_acc) : 1.0;
      sums[attribute].first += e_acc / 20.0;
      sums[attribute].second += e_all / 20.0;
      if (n_acc == 0 || e_acc > e_all) {
        run_ok = false;
        if (worst.empty())
          worst = " first violation: seed " + std::to_string(seed) + " " + attribute + " accepted " +
                  std::to_string(n_acc) + " error " + fmt("%.3f", e_acc) + " vs " + fmt("%.3f", e_all);
      }
    }
    good_runs += run_ok;
  }
  Outcome o;
  o.pass = good_runs == 20;
  o.detail = std::to_string(good_runs) + "/20 runs with accepted error <= unthresholded error;";
  for (const auto& [a, s] : sums) o.detail += " " + a + " " + fmt("%.3f", s.first) + " vs " + fmt("%.3f", s.second);
  o.detail += worst;
  return o;
}

Outcome calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  const double a = 2.0, b = -1.0;
  const std::size_t n = 5000;
  // Fitting set: evenly spaced scores; labels by error diffusion so the
  // local positive share follows the sigmoid without sampling noise.
  std::vector<double> s;
  std::vector<int> y;
  double carry = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -3.0 + 6.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    carry += sigmoid(a * x + b);
    s.push_back(x);
    const int label = carry >= 0.5 ? 1 : 0;
    carry -= label;
    y.push_back(label);
  }
  PlattOptions opt;
  opt.input = PlattInput::margin;
  const PlattModel m = fit_platt(s, y, opt);
  // Hold-out: independent scores and Bernoulli labels.
  Rng rng(2024);
  std::vector<double> hp;
  std::vector<int> hy;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-3.0, 3.0);
    hy.push_back(rng.bernoulli(sigmoid(a * x + b)) ? 1 : 0);
    hp.push_back(calibrate(m, x));
  }
  const double ece = expected_calibration_error(hp, hy, 10);
  const double ra = std::fabs(m.a - a) / std::fabs(a), rb = std::fabs(m.b - b) / std::fabs(b);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ra <= 0.05 && rb <= 0.05 && ece <= 0.05 && secs < 5.0;
  o.detail = "A " + fmt("%.4f", m.a) + " (rel " + fmt("%.4f", ra) + "), B " + fmt("%.4f", m.b) + " (rel " +
             fmt("%.4f", rb) + "), limit 0.05; hold-out ECE " + fmt("%.4f", ece) + " (<= 0.05), " +
             fmt("%.2f s", secs);
  return o;
}

Outcome stance_bands() {
  Rng rng(5);
  std::size_t bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double p = rng.uniform();
    const StanceBand want = p < 0.4 ? StanceBand::opposition : p >= 0.6 ? StanceBand::defense : StanceBand::undisclosed;
    const StanceBand got = stance_band(p);
    const int hits = (got == StanceBand::opposition) + (got == StanceBand::undisclosed) + (got == StanceBand::defense);
    bad += hits != 1 || got != want;
  }
  const bool anchors = stance_band(0.39) == StanceBand::opposition && stance_band(0.40) == StanceBand::undisclosed &&
                       stance_band(0.60) == StanceBand::defense && stance_band(0.0) == StanceBand::opposition &&
                       stance_band(1.0) == StanceBand::defense &&
                       stance_band(std::nextafter(0.6, 0.0)) == StanceBand::undisclosed &&
                       stance_band(std::nextafter(0.4, 0.0)) == StanceBand::opposition;
  Outcome o;
  o.pass = bad == 0 && anchors;
  o.detail = std::to_string(10000 - bad) + "/10000 random p in the expected band; anchors " +
             (anchors ? "ok" : "wrong") + " (0.39 opposition, 0.40 undisclosed, 0.60 defense)";
  return o;
}

// ---------------------------------------------------------------------------

Outcome emoji_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  int good = 0;
  std::string notes;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scratch dir("emoji_" + std::to_string(seed));
    Pipeline p(config_for("emoji.json", seed, dir.path));
    run_stages(p, {Stage::ingest, Stage::label, Stage::featurize, Stage::train, Stage::importance});
    const Table imp = read_table(p.stage_path("importance.tsv"));
    std::set<std::string> top;
    for (std::size_t k = 0; k < std::min<std::size_t>(10, imp.rows.size()); ++k)
      top.insert(imp.rows[k][imp.col("column")]);
    const bool ranked = top.count("💚") && top.count("💙");
    const Table hsd = read_table(p.stage_path("hsd.tsv"));
    bool significant = false;
    for (const auto& r : hsd.rows) {
      const std::string a = r[hsd.col("group_a")], b = r[hsd.col("group_b")];
      if ((a == "emoji" && b == "tweet_term") || (a == "tweet_term" && b == "emoji"))
        significant = parse_double(r[hsd.col("p_adjusted")]) < 0.05;
    }
    good += ranked && significant;
    if (!(ranked && significant))
      notes += " seed " + std::to_string(seed) + (ranked ? "" : " rank") + (significant ? "" : " hsd") + ";";
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = good >= 16 && secs < 300.0;
  o.detail = std::to_string(good) + "/20 seeds with both signal emoji in the top 10 and emoji vs tweet_term p < 0.05 "
             "(need 16), " + fmt("%.1f s", secs) + " (limit 300 s)" + (notes.empty() ? "" : ";" + notes);
  return o;
}

Outcome log_odds_oracle() {
  const CountMap a{{"aborto", 120}, {"legal", 45}, {"vida", 12}, {"marea", 30}, {"ley", 9}};
  const CountMap b{{"aborto", 150}, {"legal", 10}, {"vida", 60}, {"familia", 25}, {"ley", 14}};
  double na = 0, nb = 0;
  for (const auto& [t, c] : a) na += static_cast<double>(c);
  for (const auto& [t, c] : b) nb += static_cast<double>(c);
  double worst = 0.0;
  bool exact = true;
  std::size_t terms = 0;
  for (double alpha0 : {default_alpha0(a, b), 1.0, 25.0}) {
    const auto ab = log_odds_prior(a, b, alpha0);
    const auto ba = log_odds_prior(b, a, alpha0);
    for (const TermScore& s : ab) {
      const double ya = a.count(s.term) ? static_cast<double>(a.at(s.term)) : 0.0;
      const double yb = b.count(s.term) ? static_cast<double>(b.at(s.term)) : 0.0;
      const oracle::LogOdds want = oracle::log_odds(ya, yb, na, nb, alpha0);
      worst = std::max({worst, std::fabs(s.delta - want.delta), std::fabs(s.variance - want.variance),
                        std::fabs(s.z - want.z)});
      const auto it = std::find_if(ba.begin(), ba.end(), [&](const TermScore& t) { return t.term == s.term; });
      exact = exact && it != ba.end() && it->delta == -s.delta && it->z == -s.z && it->variance == s.variance;
      ++terms;
    }
  }
  Outcome o;
  o.pass = worst <= 1e-9 && exact && terms == 18;
  o.detail = std::to_string(terms) + " term scores over 3 priors, max deviation " + fmt("%.2e", worst) +
             " (<= 1e-9), swap antisymmetry " + (exact ? "exact" : "broken");
  return o;
}

Outcome tukey_oracle() {
  const std::vector<std::vector<double>> g{{2.1, 2.5, 3.2, 2.8, 3.0}, {3.4, 3.9, 4.1, 3.6}, {2.9, 3.3, 2.7, 3.1, 3.5, 3.0}};
  // Upper tail of the studentized range, frozen from an external reference.
  const std::map<std::pair<std::size_t, std::size_t>, double> reference{
      {{0, 1}, 0.002215036716626484}, {{0, 2}, 0.2350298059107515}, {{1, 2}, 0.028995285910752622}};
  const auto result = tukey_hsd({{"a", g[0]}, {"b", g[1]}, {"c", g[2]}});
  const int df = oracle::error_df(g);
  double q_dev = 0.0, p_dev = 0.0, ref_dev = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j, ++k) {
      const HSDComparison& c = result.at(k);
      const oracle::KramerPair want = oracle::tukey_kramer(g, i, j);
      q_dev = std::max({q_dev, std::fabs(c.q_statistic - want.q), std::fabs(c.mean_diff - want.mean_diff)});
      p_dev = std::max(p_dev, std::fabs(c.p_adjusted - (1.0 - oracle::studentized_range_cdf(want.q, 3, df))));
      ref_dev = std::max(ref_dev, std::fabs(c.p_adjusted - reference.at({i, j})));
    }
  Outcome o;
  o.pass = result.size() == 3 && q_dev <= 1e-9 && p_dev <= 1e-4 && ref_dev <= 1e-4;
  o.detail = "q deviation " + fmt("%.2e", q_dev) + " (<= 1e-9), p vs Simpson integration " + fmt("%.2e", p_dev) +
             ", p vs frozen reference " + fmt("%.2e", ref_dev) + " (<= 1e-4)";
  return o;
}

Outcome regression_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec{{{"gender", CovariateKind::categorical, "female"},
                        {"cohort", CovariateKind::categorical, "40+"},
                        {"country", CovariateKind::categorical, "Argentina"}}};
  auto fit = [&](const SynthSpec& s) {
    const SynthOutput out = generate(s);
    std::vector<CovariateRecord> rec;
    std::vector<double> y;
    for (const UserTruth& t : out.truth.users) {
      if (!t.active[0] || !t.active[1]) continue;
      rec.push_back({{"gender", std::string(to_string(t.gender))},
                     {"cohort", std::string(to_string(t.cohort))},
                     {"country", t.country}});
      y.push_back(t.delta);
    }
    return ols_regress(rec, y, spec);
  };
  std::map<std::string, double> truth{{"gender[male]", 0.0}, {"country[Chile]", 0.0},
                                      {"cohort[<18]", 0.0}, {"cohort[18-29]", 0.0}, {"cohort[30-39]", 0.0}};
  const SynthSpec planted = load_synth_spec(kConfigs + "/turnaround_synth.json");
  for (const TurnaroundEffect& e : planted.effects) truth[e.attribute + "[" + e.value + "]"] = e.size;
  const double intercept = planted.turnaround_intercept;

  std::map<std::string, int> within, covers;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SynthSpec s = planted;
    s.rng_seed = seed;
    const RegressionResult r = fit(s);
    for (const Coefficient& c : r.coefficients) {
      const double want = c.name == r.coefficients[0].name ? intercept : truth.at(c.name);
      within[c.name] += std::fabs(c.estimate - want) <= 3.0 * c.std_error;
    }
    SynthSpec null = load_synth_spec(kConfigs + "/turnaround_null_synth.json");
    null.rng_seed = seed;
    const RegressionResult z = fit(null);
    for (std::size_t k = 1; k < z.coefficients.size(); ++k)
      covers[z.coefficients[k].name] += z.coefficients[k].ci_low <= 0.0 && z.coefficients[k].ci_high >= 0.0;
  }
  bool ok = within.size() == truth.size() + 1 && covers.size() == truth.size();
  std::string d = "within 3 SE of truth (need 99/100):";
  for (const auto& [name, n] : within) {
    ok = ok && n >= 99;
    d += " " + name + " " + std::to_string(n);
  }
  d += "; null CI covers 0 (need 90/100):";
  for (const auto& [name, n] : covers) {
    ok = ok && n >= 90;
    d += " " + name + " " + std::to_string(n);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok && secs < 600.0;
  o.detail = d + "; " + fmt("%.1f s", secs) + " (limit 600 s)";
  return o;
}

FeatureMatrix random_matrix(Rng& rng, std::size_t rows, const std::vector<FeatureColumn>& cols) {
  std::vector<UserId> ids;
  std::vector<std::vector<Cell>> cells(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    ids.push_back("u" + std::to_string(i));
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (rng.bernoulli(0.4)) cells[i].push_back(Cell{static_cast<std::uint32_t>(j), static_cast<double>(1 + rng.below(5))});
  }
  return FeatureMatrix(ids, cols, cells);
}

Outcome delta_properties() {
  Rng rng(10);
  std::vector<FeatureColumn> cols;
  for (int j = 0; j < 6; ++j) cols.push_back({"f" + std::to_string(j), Block::tweet_term, FeatureType::word});
  const FeatureMatrix train_x = random_matrix(rng, 300, cols);
  std::vector<int> y;
  for (std::size_t i = 0; i < train_x.n_rows(); ++i)
    y.push_back(train_x.at(i, 0) + train_x.at(i, 1) > rng.uniform(0.0, 8.0) ? 1 : 0);
  BoostParams bp;
  bp.n_estimators = 30;
  const BoostedModel model = train(train_x, y, bp);
  const PlattModel platt{2.0, -1.0, PlattInput::confidence, 0};

  std::size_t anti = 0, bounded = 0, zero = 0;
  for (int i = 0; i < 10000; ++i) {
    double p0 = rng.uniform(), p1 = rng.uniform();
    if (i % 100 == 0) p0 = 0.0, p1 = 1.0;
    if (i % 100 == 1) p0 = 1.0, p1 = 0.0;
    anti += turnaround(p0, p1) == -turnaround(p1, p0);
    const double d = turnaround(p0, p1);
    bounded += d >= -1.0 && d <= 1.0;

    const FeatureMatrix m0 = random_matrix(rng, 1 + rng.below(4), cols);
    const auto [a, b] = align_rows(m0, parse_matrix(serialize_matrix(m0)));
    const auto c0 = predict_confidence(model, a), c1 = predict_confidence(model, b);
    bool all_zero = true;
    for (std::size_t r = 0; r < c0.size(); ++r) all_zero = all_zero && turnaround(calibrate(platt, c0[r]), calibrate(platt, c1[r])) == 0.0;
    zero += all_zero;
  }
  Outcome o;
  o.pass = anti == 10000 && bounded == 10000 && zero == 10000;
  o.detail = "antisymmetric " + std::to_string(anti) + "/10000, bounded " + std::to_string(bounded) +
             "/10000, zero on identical period matrices " + std::to_string(zero) + "/10000";
  return o;
}

Outcome lcc_oracle() {
  Rng rng(11);
  int matches = 0, reversal = 0;
  std::size_t largest = 0;
  for (int g = 0; g < 100; ++g) {
    const std::size_t n = g < 5 ? g + 1 : 1 + rng.below(1000);
    std::set<std::string> nodes;
    char buf[16];
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "n%04zu", i);
      nodes.insert(buf);
    }
    const std::vector<std::string> ids(nodes.begin(), nodes.end());
    const auto m = static_cast<std::size_t>(static_cast<double>(n) * rng.uniform(0.2, 1.2));
    std::vector<std::pair<std::string, std::string>> pairs;
    InteractionGraph forward, backward;
    forward.nodes = backward.nodes = nodes;
    const InteractionKind kinds[] = {InteractionKind::retweet, InteractionKind::mention, InteractionKind::reply,
                                     InteractionKind::quote};
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (std::size_t e = 0; e < m; ++e) {
      const std::string& s = ids[rng.below(n)];
      const std::string& t = ids[rng.below(n)];
      const int k = static_cast<int>(rng.below(4));
      if (!seen.insert({s, t, k}).second) continue;
      pairs.emplace_back(s, t);
      forward.edges.push_back({s, t, kinds[k], 1});
      backward.edges.push_back({t, s, kinds[k], 1});
    }
    auto by_key = [](const Edge& a, const Edge& b) {
      return std::tie(a.source, a.target, a.kind) < std::tie(b.source, b.target, b.kind);
    };
    std::sort(forward.edges.begin(), forward.edges.end(), by_key);
    std::sort(backward.edges.begin(), backward.edges.end(), by_key);
    const std::set<UserId> got = largest_connected_component(forward);
    matches += got == oracle::largest_component(nodes, pairs);
    reversal += largest_connected_component(backward) == got;
    largest = std::max(largest, n);
  }
  Outcome o;
  o.pass = matches == 100 && reversal == 100;
  o.detail = std::to_string(matches) + "/100 graphs match union-find (up to " + std::to_string(largest) +
             " nodes), " + std::to_string(reversal) + "/100 invariant under reversal";
  return o;
}

Outcome determinism() {
  Scratch a("determinism_a"), b("determinism_b");
  for (const Scratch* s : {&a, &b}) {
    Pipeline p(config_for("demo.json", 7, s->path));
    p.run_all();
  }
  std::vector<std::string> files(std::begin(kReportFiles), std::end(kReportFiles));
  files.push_back("summary.txt");
  std::size_t same = 0;
  std::string diff;
  for (const std::string& f : files) {
    const fs::path pa = a.path / "reports" / f, pb = b.path / "reports" / f;
    const bool eq = fs::exists(pa) && fs::exists(pb) && read_file(pa.string()) == read_file(pb.string());
    same += eq;
    if (!eq) diff += " " + f;
  }
  Outcome o;
  o.pass = same == files.size();
  o.detail = std::to_string(same) + "/" + std::to_string(files.size()) + " report files byte-identical" +
             (diff.empty() ? "" : "; differ:" + diff);
  return o;
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gbt_oracle_equivalence", gbt_oracle},
    {2, "cv_magnitude", cv_magnitude},
    {3, "threshold_behavior", threshold_behavior},
    {4, "platt_calibration", calibration},
    {5, "stance_bands", stance_bands},
    {6, "emoji_signal_recovery", emoji_recovery},
    {7, "log_odds_oracle", log_odds_oracle},
    {8, "tukey_hsd_oracle", tukey_oracle},
    {9, "turnaround_regression_recovery", regression_recovery},
    {10, "delta_properties", delta_properties},
    {11, "lcc_oracle", lcc_oracle},
    {12, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > 12) {
    std::fprintf(stderr, "criterion must be 1..12\n");
    return 2;
  }
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d %s %s: %s\n", c.number, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}

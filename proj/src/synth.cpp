#include "stancelab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "json_reader.hpp"
#include "stancelab/random.hpp"

namespace stancelab {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using Reader = detail::JsonReader;

std::vector<StanceTerm> read_stance_terms(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(where + ": expected an array");
  std::vector<StanceTerm> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader r(arr[i], where + "[" + std::to_string(i) + "]");
    StanceTerm t;
    r.get("term", t.term);
    r.get("defense", t.defense);
    r.get("opposition", t.opposition);
    r.finish();
    out.push_back(std::move(t));
  }
  return out;
}

ordered_json write_stance_terms(const std::vector<StanceTerm>& terms) {
  ordered_json arr = ordered_json::array();
  for (const StanceTerm& t : terms) arr.push_back({{"term", t.term}, {"defense", t.defense}, {"opposition", t.opposition}});
  return arr;
}

std::string date_text(Timestamp t, bool end) {
  // Whole days print as dates; anything else keeps its second resolution.
  const std::string d = format_date(t);
  const Timestamp back = end ? parse_date_end(d) : parse_date(d);
  return back == t ? d : std::to_string(t);
}

int age_lower(AgeCohort c) {
  switch (c) {
    case AgeCohort::under_18: return 13;
    case AgeCohort::from_18_to_29: return 18;
    case AgeCohort::from_30_to_39: return 30;
    case AgeCohort::over_40: return 40;
  }
  return 18;
}

int age_upper(AgeCohort c) {
  switch (c) {
    case AgeCohort::under_18: return 17;
    case AgeCohort::from_18_to_29: return 29;
    case AgeCohort::from_30_to_39: return 39;
    case AgeCohort::over_40: return 75;
  }
  return 29;
}

bool holds(const UserTruth& u, const std::string& attribute, const std::string& value) {
  if (attribute == "gender") return to_string(u.gender) == value;
  if (attribute == "country") return u.country == value;
  if (attribute == "cohort") return to_string(u.cohort) == value;
  return false;
}

void check_rate(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error("synth spec: " + what + " must lie in [0, 1]");
}

void check_marginal(const std::map<std::string, double>& m, const std::string& what) {
  if (m.empty()) throw Error("synth spec: " + what + " marginal is empty");
  double total = 0.0;
  for (const auto& [k, w] : m) {
    if (!(w >= 0.0)) throw Error("synth spec: " + what + " weight for '" + k + "' is negative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw Error("synth spec: " + what + " weights sum to " + std::to_string(total));
}

/// Tokens of a phrase as the tokenizer sees them.
std::vector<std::string> surfaces(std::string_view text) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(text)) out.push_back(t.surface);
  return out;
}

/// Every token the rules, lexicon or planted terms use; neutral words avoid them.
std::set<std::string> reserved_tokens(const SynthSpec& spec, const RuleSet& rules, const Lexicon& lexicon,
                                      const Stopwords& stopwords) {
  std::set<std::string> out(stopwords.begin(), stopwords.end());
  auto add = [&](std::string_view text) {
    for (const std::string& s : surfaces(text)) out.insert(s);
  };
  for (const auto& [stance, s] : rules.stance_seeds) {
    for (const auto& p : s.bio) out.insert(p.surfaces.begin(), p.surfaces.end());
    for (const auto& p : s.tweet) out.insert(p.surfaces.begin(), p.surfaces.end());
  }
  for (const auto& [p, g] : rules.gender_expressions) out.insert(p.surfaces.begin(), p.surfaces.end());
  for (const auto& [name, g] : rules.name_genders) add(name);
  for (const auto& [place, c] : rules.gazetteer) add(place);
  for (const AgePattern& p : rules.age_patterns) {
    std::string t = p.source;
    if (auto at = t.find("{N}"); at != std::string::npos) t.replace(at, 3, " ");
    add(t);
  }
  for (const auto& [cat, terms] : lexicon.categories)
    for (const std::string& t : terms) add(t);
  for (const auto* list : {&spec.tweet_signal, &spec.bio_signal, &spec.name_signal})
    for (const StanceTerm& t : *list) add(t.term);
  for (const DemographicTerm& t : spec.demographic_terms) add(t.term);
  add(spec.keyword);
  return out;
}

/// Tokens whose presence alone would trigger a rule.
std::set<std::string> rule_trigger_tokens(const RuleSet& rules) {
  std::set<std::string> out;
  for (const auto& [stance, s] : rules.stance_seeds) {
    for (const auto& p : s.bio)
      if (!p.multiword()) out.insert(p.surfaces.front());
    for (const auto& p : s.tweet)
      if (!p.multiword()) out.insert(p.surfaces.front());
  }
  for (const auto& [p, g] : rules.gender_expressions)
    if (!p.multiword()) out.insert(p.surfaces.front());
  return out;
}

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {}

  std::string make(int min_syllables, int max_syllables) {
    static const char* const kOnsets[] = {"b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                          "br", "tr", "pl", "ch", "gu", "qu"};
    static const char* const kVowels[] = {"a", "e", "i", "o", "u"};
    const int n = min_syllables + static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_syllables - min_syllables + 1)));
    std::string w;
    for (int s = 0; s < n; ++s) {
      w += kOnsets[rng_.below(std::size(kOnsets))];
      w += kVowels[rng_.below(std::size(kVowels))];
    }
    if (rng_.bernoulli(0.3)) w += "nrsl"[rng_.below(4)];
    return w;
  }

 private:
  Rng& rng_;
};

std::string capitalized(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

std::size_t pick_key(Rng& rng, const std::map<std::string, double>& m, std::vector<std::string>& keys) {
  keys.clear();
  std::vector<double> w;
  for (const auto& [k, v] : m) {
    keys.push_back(k);
    w.push_back(v);
  }
  return rng.categorical(w);
}

std::string padded(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

SynthSpec parse_synth_spec(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("synth spec: invalid JSON: ") + e.what());
  }
  SynthSpec s;
  Reader r(j, "synth spec");
  r.get("n_users", s.n_users);
  r.get("rng_seed", s.rng_seed);
  if (r.has("stance_weights")) {
    Reader w(r.at("stance_weights"), "synth spec.stance_weights");
    for (Stance st : {Stance::defense, Stance::opposition}) w.get(std::string(to_string(st)).c_str(), s.stance_weights[st]);
    w.finish();
  }
  if (r.has("p_defense")) {
    Reader w(r.at("p_defense"), "synth spec.p_defense");
    for (Stance st : {Stance::defense, Stance::opposition}) w.get(std::string(to_string(st)).c_str(), s.p_defense[st]);
    w.finish();
  }
  if (!r.has("periods")) throw Error("synth spec: 'periods' is required");
  {
    const json& p = r.at("periods");
    if (!p.is_array() || p.size() != 2) throw Error("synth spec.periods: expected two [start, end] pairs");
    for (std::size_t i = 0; i < 2; ++i) {
      if (!p[i].is_array() || p[i].size() != 2 || !p[i][0].is_string() || !p[i][1].is_string())
        throw Error("synth spec.periods: expected two [start, end] pairs");
      s.periods[i] = TimeRange{parse_date(p[i][0].get<std::string>()), parse_date_end(p[i][1].get<std::string>())};
    }
  }
  r.get("both_periods_rate", s.both_periods_rate);
  r.get("posts_per_period", s.posts_per_period);
  r.get("neutral_tokens_per_post", s.neutral_tokens_per_post);
  r.get("neutral_vocabulary", s.neutral_vocabulary);
  r.get("neutral_zipf", s.neutral_zipf);
  r.get("stopwords_per_post", s.stopwords_per_post);
  r.get("bio_neutral_words", s.bio_neutral_words);
  r.get("lexicon_rate", s.lexicon_rate);
  r.get("keyword", s.keyword);
  if (r.has("tweet_signal")) s.tweet_signal = read_stance_terms(r.at("tweet_signal"), "synth spec.tweet_signal");
  if (r.has("bio_signal")) s.bio_signal = read_stance_terms(r.at("bio_signal"), "synth spec.bio_signal");
  if (r.has("name_signal")) s.name_signal = read_stance_terms(r.at("name_signal"), "synth spec.name_signal");
  if (r.has("demographic_terms")) {
    const json& arr = r.at("demographic_terms");
    if (!arr.is_array()) throw Error("synth spec.demographic_terms: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader t(arr[i], "synth spec.demographic_terms[" + std::to_string(i) + "]");
      DemographicTerm d;
      std::string scope = "tweet";
      t.get("term", d.term);
      t.get("attribute", d.attribute);
      t.get("value", d.value);
      t.get("rate", d.rate);
      t.get("base_rate", d.base_rate);
      t.get("scope", scope);
      t.finish();
      if (scope == "tweet")
        d.scope = TermScope::tweet;
      else if (scope == "bio")
        d.scope = TermScope::bio;
      else
        throw Error(t.where() + ": scope must be 'tweet' or 'bio'");
      s.demographic_terms.push_back(std::move(d));
    }
  }
  r.get("gender", s.gender);
  r.get("country", s.country);
  r.get("cohort", s.cohort);
  r.get("report_gender", s.report_gender);
  r.get("report_location", s.report_location);
  r.get("report_age", s.report_age);
  r.get("report_stance", s.report_stance);
  r.get("stance_in_tweet", s.stance_in_tweet);
  r.get("timezone_rate", s.timezone_rate);
  r.get("timezones", s.timezones);
  r.get("url_rate", s.url_rate);
  r.get("n_hubs", s.n_hubs);
  r.get("retweet_rate", s.retweet_rate);
  r.get("mention_rate", s.mention_rate);
  r.get("homophily", s.homophily);
  r.get("turnaround_intercept", s.turnaround_intercept);
  r.get("turnaround_noise", s.turnaround_noise);
  if (r.has("effects")) {
    const json& arr = r.at("effects");
    if (!arr.is_array()) throw Error("synth spec.effects: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader t(arr[i], "synth spec.effects[" + std::to_string(i) + "]");
      TurnaroundEffect e;
      t.get("attribute", e.attribute);
      t.get("value", e.value);
      t.get("size", e.size);
      t.finish();
      s.effects.push_back(std::move(e));
    }
  }
  r.get("manual_stance_labels", s.manual_stance_labels);
  r.finish();
  return s;
}

SynthSpec load_synth_spec(const std::string& path) {
  try {
    return parse_synth_spec(read_file(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string serialize_synth_spec(const SynthSpec& s) {
  ordered_json j;
  j["n_users"] = s.n_users;
  j["rng_seed"] = s.rng_seed;
  j["stance_weights"] = {{"defense", s.stance_weights.at(Stance::defense)},
                         {"opposition", s.stance_weights.at(Stance::opposition)}};
  j["p_defense"] = {{"defense", s.p_defense.at(Stance::defense)}, {"opposition", s.p_defense.at(Stance::opposition)}};
  j["periods"] = ordered_json::array();
  for (const TimeRange& p : s.periods)
    j["periods"].push_back(ordered_json::array({date_text(p.start, false), date_text(p.end, true)}));
  j["both_periods_rate"] = s.both_periods_rate;
  j["posts_per_period"] = s.posts_per_period;
  j["neutral_tokens_per_post"] = s.neutral_tokens_per_post;
  j["neutral_vocabulary"] = s.neutral_vocabulary;
  j["neutral_zipf"] = s.neutral_zipf;
  j["stopwords_per_post"] = s.stopwords_per_post;
  j["bio_neutral_words"] = s.bio_neutral_words;
  j["lexicon_rate"] = s.lexicon_rate;
  j["keyword"] = s.keyword;
  j["tweet_signal"] = write_stance_terms(s.tweet_signal);
  j["bio_signal"] = write_stance_terms(s.bio_signal);
  j["name_signal"] = write_stance_terms(s.name_signal);
  ordered_json demo = ordered_json::array();
  for (const DemographicTerm& d : s.demographic_terms)
    demo.push_back({{"term", d.term},
                    {"attribute", d.attribute},
                    {"value", d.value},
                    {"rate", d.rate},
                    {"base_rate", d.base_rate},
                    {"scope", d.scope == TermScope::tweet ? "tweet" : "bio"}});
  j["demographic_terms"] = demo;
  j["gender"] = s.gender;
  j["country"] = s.country;
  j["cohort"] = s.cohort;
  j["report_gender"] = s.report_gender;
  j["report_location"] = s.report_location;
  j["report_age"] = s.report_age;
  j["report_stance"] = s.report_stance;
  j["stance_in_tweet"] = s.stance_in_tweet;
  j["timezone_rate"] = s.timezone_rate;
  j["timezones"] = s.timezones;
  j["url_rate"] = s.url_rate;
  j["n_hubs"] = s.n_hubs;
  j["retweet_rate"] = s.retweet_rate;
  j["mention_rate"] = s.mention_rate;
  j["homophily"] = s.homophily;
  j["turnaround_intercept"] = s.turnaround_intercept;
  j["turnaround_noise"] = s.turnaround_noise;
  ordered_json eff = ordered_json::array();
  for (const TurnaroundEffect& e : s.effects) eff.push_back({{"attribute", e.attribute}, {"value", e.value}, {"size", e.size}});
  j["effects"] = eff;
  j["manual_stance_labels"] = s.manual_stance_labels;
  return j.dump(2) + "\n";
}

void validate(const SynthSpec& s, const RuleSet& rules) {
  if (s.n_users == 0) throw Error("synth spec: n_users must be positive");
  {
    double total = 0.0;
    for (const auto& [st, w] : s.stance_weights) {
      if (!(w >= 0.0)) throw Error("synth spec: stance weights must be non-negative");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw Error("synth spec: stance weights sum to " + std::to_string(total));
  }
  for (const auto& [st, range] : s.p_defense) {
    check_rate(range[0], "p_defense." + std::string(to_string(st)) + " lower bound");
    check_rate(range[1], "p_defense." + std::string(to_string(st)) + " upper bound");
    if (range[0] > range[1]) throw Error("synth spec: p_defense range for " + std::string(to_string(st)) + " is reversed");
  }
  for (const TimeRange& p : s.periods)
    if (p.start > p.end) throw Error("synth spec: a period ends before it starts");
  if (s.periods[0].end >= s.periods[1].start) throw Error("synth spec: periods must be ordered and disjoint");

  check_rate(s.both_periods_rate, "both_periods_rate");
  if (!(s.posts_per_period >= 1.0)) throw Error("synth spec: posts_per_period must be at least 1");
  if (!(s.neutral_tokens_per_post >= 0.0) || !(s.stopwords_per_post >= 0.0) || !(s.bio_neutral_words >= 0.0))
    throw Error("synth spec: token rates must be non-negative");
  if (s.neutral_vocabulary < 1) throw Error("synth spec: neutral_vocabulary must be positive");
  if (!(s.neutral_zipf >= 0.0)) throw Error("synth spec: neutral_zipf must be non-negative");
  check_rate(s.lexicon_rate, "lexicon_rate");
  check_rate(s.report_gender, "report_gender");
  check_rate(s.report_location, "report_location");
  check_rate(s.report_age, "report_age");
  check_rate(s.report_stance, "report_stance");
  check_rate(s.stance_in_tweet, "stance_in_tweet");
  check_rate(s.timezone_rate, "timezone_rate");
  check_rate(s.url_rate, "url_rate");
  check_rate(s.retweet_rate, "retweet_rate");
  check_rate(s.mention_rate, "mention_rate");
  check_rate(s.retweet_rate + s.mention_rate, "retweet_rate + mention_rate");
  check_rate(s.homophily, "homophily");
  if (s.n_hubs < 0 || static_cast<std::size_t>(s.n_hubs) > s.n_users)
    throw Error("synth spec: n_hubs must lie in [0, n_users]");
  if ((s.retweet_rate > 0.0 || s.mention_rate > 0.0) && s.n_hubs == 0)
    throw Error("synth spec: interactions need at least one hub");

  check_marginal(s.gender, "gender");
  check_marginal(s.country, "country");
  check_marginal(s.cohort, "cohort");
  for (const auto& [g, w] : s.gender) (void)gender_from_string(g);
  for (const auto& [c, w] : s.cohort) (void)cohort_from_string(c);
  const std::set<std::string> countries = rules.countries();
  for (const auto& [c, w] : s.country) {
    if (countries.count(c) == 0) throw Error("synth spec: country '" + c + "' is not in the gazetteer");
    bool unique_place = false;
    for (const auto& [place, cs] : rules.gazetteer) unique_place |= cs.size() == 1 && *cs.begin() == c;
    if (!unique_place && w > 0.0 && s.report_location > 0.0)
      throw Error("synth spec: no unambiguous gazetteer place for '" + c + "'");
  }
  if (s.report_gender > 0.0)
    for (Gender g : {Gender::female, Gender::male}) {
      bool expr = false;
      for (const auto& [p, pg] : rules.gender_expressions) expr |= pg == g;
      if (!expr) throw Error("synth spec: rules have no gender expression for " + std::string(to_string(g)));
    }
  if (s.report_age > 0.0 && rules.age_patterns.empty()) throw Error("synth spec: rules have no age patterns");
  if (s.report_stance > 0.0)
    for (const auto& [st, seeds] : rules.stance_seeds)
      if (seeds.bio.empty() || seeds.tweet.empty())
        throw Error("synth spec: rules need bio and tweet seeds for " + std::string(to_string(st)));

  const std::set<std::string> triggers = rule_trigger_tokens(rules);
  auto check_term = [&](const std::string& term, const std::string& what) {
    const std::vector<Token> toks = tokenize(term);
    if (toks.size() != 1 || toks[0].surface != term)
      throw Error("synth spec: " + what + " '" + term + "' must be a single normalized token");
    if (triggers.count(term) != 0) throw Error("synth spec: " + what + " '" + term + "' would trigger a labeling rule");
  };
  for (const auto* list : {&s.tweet_signal, &s.bio_signal, &s.name_signal})
    for (const StanceTerm& t : *list) {
      check_term(t.term, "signal term");
      check_rate(t.defense, "rate of '" + t.term + "'");
      check_rate(t.opposition, "rate of '" + t.term + "'");
    }
  for (const DemographicTerm& d : s.demographic_terms) {
    check_term(d.term, "demographic term");
    check_rate(d.rate, "rate of '" + d.term + "'");
    check_rate(d.base_rate, "base rate of '" + d.term + "'");
    const std::map<std::string, double>* m = d.attribute == "gender"    ? &s.gender
                                             : d.attribute == "country" ? &s.country
                                             : d.attribute == "cohort"  ? &s.cohort
                                                                        : nullptr;
    if (!m) throw Error("synth spec: demographic term attribute must be gender, country or cohort");
    if (m->count(d.value) == 0) throw Error("synth spec: unknown " + d.attribute + " value '" + d.value + "'");
  }
  check_term(s.keyword, "keyword");

  // Feasibility: p_t1 = p_t0 + delta must stay inside [0, 1] for every user.
  if (!std::isfinite(s.turnaround_intercept) || !(s.turnaround_noise >= 0.0) || !std::isfinite(s.turnaround_noise))
    throw Error("synth spec: turnaround intercept and noise must be finite, noise non-negative");
  double lo = s.turnaround_intercept - 3.0 * s.turnaround_noise;
  double hi = s.turnaround_intercept + 3.0 * s.turnaround_noise;
  for (const char* attribute : {"gender", "country", "cohort"}) {
    const std::map<std::string, double>& m = std::string(attribute) == "gender"    ? s.gender
                                             : std::string(attribute) == "country" ? s.country
                                                                                   : s.cohort;
    double a_lo = HUGE_VAL, a_hi = -HUGE_VAL;
    for (const auto& [value, w] : m) {
      if (w <= 0.0) continue;
      double size = 0.0;
      for (const TurnaroundEffect& e : s.effects)
        if (e.attribute == attribute && e.value == value) size += e.size;
      a_lo = std::min(a_lo, size);
      a_hi = std::max(a_hi, size);
    }
    lo += a_lo;
    hi += a_hi;
  }
  for (const TurnaroundEffect& e : s.effects) {
    if (!std::isfinite(e.size)) throw Error("synth spec: effect sizes must be finite");
    const std::map<std::string, double>* m = e.attribute == "gender"    ? &s.gender
                                             : e.attribute == "country" ? &s.country
                                             : e.attribute == "cohort"  ? &s.cohort
                                                                        : nullptr;
    if (!m) throw Error("synth spec: effect attribute must be gender, country or cohort");
    if (m->count(e.value) == 0) throw Error("synth spec: unknown " + e.attribute + " value '" + e.value + "'");
  }
  double p_lo = 1.0, p_hi = 0.0;
  for (const auto& [st, w] : s.stance_weights) {
    if (w <= 0.0) continue;
    p_lo = std::min(p_lo, s.p_defense.at(st)[0]);
    p_hi = std::max(p_hi, s.p_defense.at(st)[1]);
  }
  if (p_lo + lo < 0.0 || p_hi + hi > 1.0) {
    char msg[256];
    std::snprintf(msg, sizeof msg,
                  "synth spec: infeasible turnaround; second-period p(defense) can reach [%.4f, %.4f]",
                  p_lo + lo, p_hi + hi);
    throw Error(msg);
  }
}

const UserTruth* GroundTruth::find(const UserId& id) const {
  auto it = std::lower_bound(users.begin(), users.end(), id,
                             [](const UserTruth& u, const UserId& key) { return u.user_id < key; });
  return it != users.end() && it->user_id == id ? &*it : nullptr;
}

SynthOutput generate(const SynthSpec& spec, const RuleSet& rules, const Lexicon& lexicon, const Stopwords& stopwords) {
  validate(spec, rules);
  Rng rng(spec.rng_seed);
  SynthOutput out;
  GroundTruth& truth = out.truth;
  truth.reference_year = year_of(spec.periods[0].start);

  // Vocabularies.
  const std::set<std::string> reserved = reserved_tokens(spec, rules, lexicon, stopwords);
  WordMaker maker(rng);
  auto fresh_words = [&](std::size_t n, int lo, int hi, std::set<std::string>& taken) {
    std::vector<std::string> words;
    std::size_t attempts = 0;
    while (words.size() < n) {
      if (++attempts > 100 * n + 1000) throw Error("synth: cannot generate enough distinct words");
      std::string w = maker.make(lo, hi);
      if (reserved.count(w) != 0 || !taken.insert(w).second) continue;
      words.push_back(std::move(w));
    }
    return words;
  };
  std::set<std::string> taken;
  const std::vector<std::string> neutral = fresh_words(static_cast<std::size_t>(spec.neutral_vocabulary), 2, 3, taken);
  const std::vector<std::string> pseudo_names = fresh_words(60, 2, 2, taken);
  const std::vector<std::string> surnames = fresh_words(60, 3, 3, taken);
  std::vector<double> zipf_cdf;
  {
    double acc = 0.0;
    for (std::size_t r = 0; r < neutral.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.neutral_zipf);
      zipf_cdf.push_back(acc);
    }
  }
  auto neutral_word = [&]() -> const std::string& {
    const double u = rng.uniform() * zipf_cdf.back();
    auto it = std::upper_bound(zipf_cdf.begin(), zipf_cdf.end(), u);
    if (it == zipf_cdf.end()) --it;
    return neutral[static_cast<std::size_t>(it - zipf_cdf.begin())];
  };
  const std::vector<std::string> stop_list(stopwords.begin(), stopwords.end());

  std::map<Gender, std::vector<std::string>> first_names;
  for (const auto& [name, gs] : rules.name_genders)
    if (gs.size() == 1 && tokenize(name).size() == 1) first_names[*gs.begin()].push_back(name);
  std::map<Gender, std::vector<std::string>> gender_phrases;
  for (const auto& [p, g] : rules.gender_expressions) gender_phrases[g].push_back(p.text);
  std::map<std::string, std::vector<std::string>> places;
  for (const auto& [place, cs] : rules.gazetteer)
    if (cs.size() == 1) places[*cs.begin()].push_back(place);
  std::vector<std::string> non_places;
  for (const char* text : {"planeta tierra", "en mi mundo", "sudamérica", "latinoamérica", "donde me lleve el viento"}) {
    UserProfile probe;
    probe.location_text = text;
    if (!label_location(probe, rules)) non_places.emplace_back(text);
  }
  // Lexicon terms that double as rule triggers, places or names would leak labels.
  const std::set<std::string> triggers = rule_trigger_tokens(rules);
  std::map<std::string, std::vector<std::string>> lexicon_terms;
  for (const auto& [cat, terms] : lexicon.categories)
    for (const std::string& t : terms)
      if (tokenize(t).size() == 1 && triggers.count(t) == 0 && rules.gazetteer.count(t) == 0 &&
          rules.name_genders.count(t) == 0)
        lexicon_terms[cat].push_back(t);
  static const std::vector<std::string> kDomains = {"instagram.com", "facebook.com", "youtube.com",
                                                    "blogspot.com",  "wordpress.com", "linkedin.com"};

  // Users.
  const std::size_t width = std::max<std::size_t>(5, std::to_string(spec.n_users).size());
  std::vector<std::string> keys;
  std::vector<UserProfile> profiles;
  std::vector<std::vector<std::string>> stance_bio_seed(spec.n_users);
  const Timestamp created_hi = spec.periods[0].start - 30 * 86400;
  const Timestamp created_lo = parse_date("2008-01-01");
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    UserTruth u;
    u.user_id = "u" + padded(i + 1, width);
    u.stance = rng.bernoulli(spec.stance_weights.at(Stance::defense)) ? Stance::defense : Stance::opposition;
    const auto& range = spec.p_defense.at(u.stance);
    u.p_t0 = rng.uniform(range[0], range[1]);
    u.gender = gender_from_string(keys[pick_key(rng, spec.gender, keys)]);
    u.country = keys[pick_key(rng, spec.country, keys)];
    u.cohort = cohort_from_string(keys[pick_key(rng, spec.cohort, keys)]);
    u.age = age_lower(u.cohort) +
            static_cast<int>(rng.below(static_cast<std::uint64_t>(age_upper(u.cohort) - age_lower(u.cohort) + 1)));

    double delta = spec.turnaround_intercept;
    for (const TurnaroundEffect& e : spec.effects)
      if (holds(u, e.attribute, e.value)) delta += e.size;
    if (spec.turnaround_noise > 0.0) {
      double z;
      do z = rng.normal();
      while (std::fabs(z) > 3.0);
      delta += spec.turnaround_noise * z;
    }
    u.p_t1 = u.p_t0 + delta;
    u.delta = u.p_t1 - u.p_t0;

    if (rng.bernoulli(spec.both_periods_rate)) {
      u.active = {true, true};
    } else {
      const bool first = rng.bernoulli(0.5);
      u.active = {first, !first};
    }
    u.reports_gender = rng.bernoulli(spec.report_gender);
    u.reports_location = rng.bernoulli(spec.report_location);
    u.reports_age = rng.bernoulli(spec.report_age);
    u.reports_stance = rng.bernoulli(spec.report_stance);
    u.hub = i < static_cast<std::size_t>(spec.n_hubs);

    UserProfile p;
    p.user_id = u.user_id;
    p.screen_name = "usr" + padded(i + 1, width);

    std::vector<std::string> bio;
    std::string first = capitalized(pick(rng, pseudo_names));
    if (u.reports_gender) {
      const auto& names = first_names[u.gender];
      if (!names.empty() && rng.bernoulli(0.7))
        first = capitalized(pick(rng, names));
      else
        bio.push_back(pick(rng, gender_phrases[u.gender]));
    }
    std::vector<std::string> name_parts{first, capitalized(pick(rng, surnames))};
    for (const StanceTerm& t : spec.name_signal)
      if (rng.bernoulli(u.stance == Stance::defense ? t.defense : t.opposition)) name_parts.push_back(t.term);
    p.full_name = join(name_parts);

    const int n_neutral = rng.poisson(spec.bio_neutral_words);
    for (int k = 0; k < n_neutral; ++k) bio.push_back(neutral_word());
    for (const auto& [cat, terms] : lexicon_terms)
      if (!terms.empty() && rng.bernoulli(spec.lexicon_rate)) bio.push_back(pick(rng, terms));
    for (const StanceTerm& t : spec.bio_signal)
      if (rng.bernoulli(u.stance == Stance::defense ? t.defense : t.opposition)) bio.push_back(t.term);
    for (const DemographicTerm& d : spec.demographic_terms)
      if (d.scope == TermScope::bio && rng.bernoulli(holds(u, d.attribute, d.value) ? d.rate : d.base_rate))
        bio.push_back(d.term);
    if (u.reports_age) {
      const AgePattern& pat = pick(rng, rules.age_patterns);
      const int number = pat.kind == AgePattern::Kind::birth_year ? truth.reference_year - u.age : u.age;
      std::string phrase = pat.source;
      phrase.replace(phrase.find("{N}"), 3, std::to_string(number));
      bio.push_back(phrase);
    }
    bool stance_in_tweet = false;
    if (u.reports_stance) {
      stance_in_tweet = rng.bernoulli(spec.stance_in_tweet);
      const StanceSeeds& seeds = rules.stance_seeds.at(u.stance);
      if (stance_in_tweet)
        stance_bio_seed[i].push_back(pick(rng, seeds.tweet).text);
      else
        bio.push_back(pick(rng, seeds.bio).text);
    }
    rng.shuffle(bio);
    if (!bio.empty()) p.bio = join(bio);

    if (u.reports_location)
      p.location_text = pick(rng, places.at(u.country));
    else if (!non_places.empty() && rng.bernoulli(0.3))
      p.location_text = pick(rng, non_places);
    if (rng.bernoulli(spec.timezone_rate)) {
      auto tz = spec.timezones.find(u.country);
      if (tz != spec.timezones.end()) p.timezone = tz->second;
    }
    if (rng.bernoulli(spec.url_rate)) p.url = "https://www." + pick(rng, kDomains) + "/" + p.screen_name;
    p.n_followers = static_cast<std::int64_t>(std::llround(std::exp(5.0 + 1.5 * rng.normal())));
    p.n_friends = static_cast<std::int64_t>(std::llround(std::exp(5.5 + 1.0 * rng.normal())));
    p.account_created = created_lo + static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(created_hi - created_lo)));
    const double age_days = static_cast<double>(spec.periods[1].end - p.account_created) / 86400.0;
    const double activity = std::exp(std::log(3.0) + rng.normal());
    p.n_posts = static_cast<std::int64_t>(std::llround(activity * age_days));

    truth.users.push_back(std::move(u));
    profiles.push_back(std::move(p));
    // A tweet seed is placed in the user's first post below.
    if (!stance_in_tweet) stance_bio_seed[i].clear();
  }

  std::map<Stance, std::vector<std::size_t>> hubs_by_stance;
  std::vector<std::size_t> hubs;
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.n_hubs); ++i) {
    hubs.push_back(i);
    hubs_by_stance[truth.users[i].stance].push_back(i);
  }
  auto pick_hub = [&](std::size_t self) -> std::optional<std::size_t> {
    const auto& same = hubs_by_stance[truth.users[self].stance];
    const std::size_t h = (!same.empty() && rng.bernoulli(spec.homophily)) ? pick(rng, same) : pick(rng, hubs);
    if (h == self) return std::nullopt;
    return h;
  };

  // Posts.
  std::size_t post_counter = 0;
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    const UserTruth& u = truth.users[i];
    bool seed_pending = !stance_bio_seed[i].empty();
    for (int t = 0; t < 2; ++t) {
      if (!u.active[static_cast<std::size_t>(t)]) continue;
      const double p_def = t == 0 ? u.p_t0 : u.p_t1;
      const TimeRange& period = spec.periods[static_cast<std::size_t>(t)];
      const int n_posts = 1 + rng.poisson(spec.posts_per_period - 1.0);
      for (int k = 0; k < n_posts; ++k) {
        MicroPost post;
        post.post_id = std::to_string(1000000 + ++post_counter);
        post.author_id = u.user_id;
        post.timestamp = period.start + static_cast<Timestamp>(rng.below(static_cast<std::uint64_t>(period.end - period.start + 1)));
        const Stance flavor = rng.bernoulli(p_def) ? Stance::defense : Stance::opposition;

        std::vector<std::string> tokens{spec.keyword};
        const int n_neutral = rng.poisson(spec.neutral_tokens_per_post);
        for (int w = 0; w < n_neutral; ++w) tokens.push_back(neutral_word());
        const int n_stop = rng.poisson(spec.stopwords_per_post);
        for (int w = 0; w < n_stop && !stop_list.empty(); ++w) tokens.push_back(pick(rng, stop_list));
        for (const StanceTerm& st : spec.tweet_signal)
          if (rng.bernoulli(flavor == Stance::defense ? st.defense : st.opposition)) tokens.push_back(st.term);
        for (const DemographicTerm& d : spec.demographic_terms)
          if (d.scope == TermScope::tweet && rng.bernoulli(holds(u, d.attribute, d.value) ? d.rate : d.base_rate))
            tokens.push_back(d.term);
        if (seed_pending) {
          tokens.push_back(stance_bio_seed[i].front());
          seed_pending = false;
        }

        const double roll = rng.uniform();
        std::string prefix;
        if (roll < spec.retweet_rate + spec.mention_rate) {
          if (auto h = pick_hub(i)) {
            const UserProfile& target = profiles[*h];
            if (roll < spec.retweet_rate) {
              post.retweet_of = target.user_id;
              prefix = "RT @" + target.screen_name + ": ";
            } else {
              post.directed_at.push_back(Interaction{target.user_id, InteractionKind::mention});
              tokens.push_back("@" + target.screen_name);
            }
          }
        }
        // Keep multiword seeds contiguous: shuffle whole segments.
        rng.shuffle(tokens);
        post.text = prefix + join(tokens);
        truth.post_flavor.emplace(post.post_id, flavor);
        out.corpus.posts.push_back(std::move(post));
      }
    }
  }

  for (UserProfile& p : profiles) out.corpus.users.emplace(p.user_id, std::move(p));
  out.corpus.time_range = TimeRange{spec.periods[0].start, spec.periods[1].end};
  finalize_corpus(out.corpus);

  // Manual stance labels for users who never disclose their stance.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < truth.users.size(); ++i)
    if (!truth.users[i].reports_stance) candidates.push_back(i);
  rng.shuffle(candidates);
  candidates.resize(std::min(candidates.size(), spec.manual_stance_labels));
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t i : candidates)
    out.manual_labels += truth.users[i].user_id + "\tstance\t" + std::string(to_string(truth.users[i].stance)) + "\n";
  return out;
}

std::string serialize_truth(const GroundTruth& truth) {
  std::string out = "# reference_year " + std::to_string(truth.reference_year) + "\n";
  out +=
      "user\tstance\tgender\tcountry\tcohort\tage\tp_t0\tp_t1\tdelta\tactive_t0\tactive_t1\treports_gender\t"
      "reports_location\treports_age\treports_stance\thub\n";
  auto flag = [](bool b) { return b ? "1" : "0"; };
  for (const UserTruth& u : truth.users) {
    out += u.user_id + "\t" + std::string(to_string(u.stance)) + "\t" + std::string(to_string(u.gender)) + "\t" +
           u.country + "\t" + std::string(to_string(u.cohort)) + "\t" + std::to_string(u.age) + "\t" +
           hexfloat(u.p_t0) + "\t" + hexfloat(u.p_t1) + "\t" + hexfloat(u.delta) + "\t" + flag(u.active[0]) + "\t" +
           flag(u.active[1]) + "\t" + flag(u.reports_gender) + "\t" + flag(u.reports_location) + "\t" +
           flag(u.reports_age) + "\t" + flag(u.reports_stance) + "\t" + flag(u.hub) + "\n";
  }
  return out;
}

GroundTruth parse_truth(std::string_view tsv) {
  GroundTruth truth;
  std::size_t line_no = 0;
  bool header = false;
  for (const std::string& line : split(tsv, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (starts_with(line, "# reference_year ")) {
      truth.reference_year = static_cast<int>(parse_int(line.substr(17)));
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const std::vector<std::string> f = split(line, '\t');
    if (f.size() != 16) throw Error("truth line " + std::to_string(line_no) + ": expected 16 fields");
    UserTruth u;
    u.user_id = f[0];
    u.stance = stance_from_string(f[1]);
    u.gender = gender_from_string(f[2]);
    u.country = f[3];
    u.cohort = cohort_from_string(f[4]);
    u.age = static_cast<int>(parse_int(f[5]));
    u.p_t0 = parse_double(f[6]);
    u.p_t1 = parse_double(f[7]);
    u.delta = parse_double(f[8]);
    u.active = {f[9] == "1", f[10] == "1"};
    u.reports_gender = f[11] == "1";
    u.reports_location = f[12] == "1";
    u.reports_age = f[13] == "1";
    u.reports_stance = f[14] == "1";
    u.hub = f[15] == "1";
    truth.users.push_back(std::move(u));
  }
  std::sort(truth.users.begin(), truth.users.end(),
            [](const UserTruth& a, const UserTruth& b) { return a.user_id < b.user_id; });
  return truth;
}

void write_synth_output(const SynthOutput& out, const std::string& directory) {
  std::filesystem::create_directories(directory);
  save_corpus(out.corpus, directory + "/corpus.jsonl");
  write_file_atomic(directory + "/truth.tsv", serialize_truth(out.truth));
  write_file_atomic(directory + "/manual_labels.tsv", out.manual_labels);
}

}  // namespace stancelab

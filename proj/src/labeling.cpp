#include "stancelab/labeling.hpp"

#include <algorithm>

namespace stancelab {

std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

std::string_view to_string(AgeCohort c) {
  switch (c) {
    case AgeCohort::under_18: return "<18";
    case AgeCohort::from_18_to_29: return "18-29";
    case AgeCohort::from_30_to_39: return "30-39";
    case AgeCohort::over_40: return "40+";
  }
  return "40+";
}

std::string_view to_string(Stance s) { return s == Stance::defense ? "defense" : "opposition"; }

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::rule: return "rule";
    case Provenance::manual: return "manual";
    case Provenance::predicted: return "predicted";
  }
  return "rule";
}

Gender gender_from_string(std::string_view text) {
  if (text == "male") return Gender::male;
  if (text == "female") return Gender::female;
  throw Error("unknown gender '" + std::string(text) + "'");
}

AgeCohort cohort_from_string(std::string_view text) {
  for (AgeCohort c : kAllCohorts)
    if (to_string(c) == text) return c;
  throw Error("unknown age cohort '" + std::string(text) + "'");
}

Stance stance_from_string(std::string_view text) {
  if (text == "defense") return Stance::defense;
  if (text == "opposition") return Stance::opposition;
  throw Error("unknown stance '" + std::string(text) + "'");
}

Provenance provenance_from_string(std::string_view text) {
  if (text == "rule") return Provenance::rule;
  if (text == "manual") return Provenance::manual;
  if (text == "predicted") return Provenance::predicted;
  throw Error("unknown provenance '" + std::string(text) + "'");
}

AgeCohort cohort_of_age(int age) {
  if (age < 18) return AgeCohort::under_18;
  if (age < 30) return AgeCohort::from_18_to_29;
  if (age < 40) return AgeCohort::from_30_to_39;
  return AgeCohort::over_40;
}

PhrasePattern compile_phrase(std::string_view text) {
  PhrasePattern p;
  p.text = normalize_text(trim(text));
  for (const Token& t : tokenize(p.text)) p.surfaces.push_back(t.surface);
  if (p.surfaces.empty()) throw Error("pattern '" + std::string(text) + "' has no tokens");
  return p;
}

namespace {

std::string regex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

std::vector<std::string> surfaces_of(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.surface);
  return out;
}

bool pattern_hits(const PhrasePattern& p, const std::vector<std::string>& surfaces) {
  if (!p.multiword())
    return std::find(surfaces.begin(), surfaces.end(), p.surfaces.front()) != surfaces.end();
  return contains_sequence(surfaces, p.surfaces);
}

std::vector<std::pair<std::size_t, std::vector<std::string>>> tsv_rows(std::string_view text,
                                                                        std::size_t fields,
                                                                        const char* what) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t line_no = 0;
  for (std::string line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> f = split(line, '\t');
    if (f.size() != fields)
      throw Error(std::string(what) + " line " + std::to_string(line_no) + ": expected " +
                  std::to_string(fields) + " tab-separated fields");
    for (auto& x : f) x = std::string(trim(x));
    rows.emplace_back(line_no, std::move(f));
  }
  return rows;
}

}  // namespace

AgePattern compile_age_pattern(AgePattern::Kind kind, std::string_view tmpl) {
  const std::string norm = collapse_spaces(normalize_text(tmpl));
  const std::size_t slot = norm.find("{n}");
  if (slot == std::string::npos || norm.find("{n}", slot + 1) != std::string::npos)
    throw Error("age pattern '" + std::string(tmpl) + "' needs exactly one {N} placeholder");
  AgePattern p;
  p.kind = kind;
  p.source = std::string(tmpl);
  const std::string expr = "(^|[^0-9])" + regex_escape(norm.substr(0, slot)) + "([0-9]{1,4})" +
                           regex_escape(norm.substr(slot + 3)) + "(?![0-9])";
  try {
    p.regex = std::regex(expr, std::regex::ECMAScript | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw Error("age pattern '" + std::string(tmpl) + "' does not compile: " + e.what());
  }
  return p;
}

std::set<std::string> RuleSet::countries() const {
  std::set<std::string> out;
  for (const auto& [place, cs] : gazetteer) out.insert(cs.begin(), cs.end());
  return out;
}

void validate_rules(const RuleSet& rules) {
  for (Stance s : {Stance::defense, Stance::opposition}) {
    auto it = rules.stance_seeds.find(s);
    if (it == rules.stance_seeds.end() || (it->second.bio.empty() && it->second.tweet.empty()))
      throw Error("stance seeds must cover both stances; missing " + std::string(to_string(s)));
  }
  if (rules.stance_seeds.size() != 2) throw Error("stance seeds must have exactly two stances");
}

RuleSet parse_rules(std::string_view gazetteer_tsv, std::string_view names_tsv,
                    std::string_view patterns_tsv, std::string_view seeds_tsv) {
  RuleSet rules;
  for (const auto& [line, f] : tsv_rows(gazetteer_tsv, 2, "gazetteer"))
    rules.gazetteer[collapse_spaces(normalize_text(f[0]))].insert(f[1]);
  for (const auto& [line, f] : tsv_rows(names_tsv, 2, "names"))
    rules.name_genders[normalize_text(f[0])].insert(gender_from_string(f[1]));
  for (const auto& [line, f] : tsv_rows(patterns_tsv, 3, "patterns")) {
    try {
      if (f[0] == "gender")
        rules.gender_expressions.emplace_back(compile_phrase(f[2]), gender_from_string(f[1]));
      else if (f[0] == "age" && f[1] == "age")
        rules.age_patterns.push_back(compile_age_pattern(AgePattern::Kind::age, f[2]));
      else if (f[0] == "age" && f[1] == "birth_year")
        rules.age_patterns.push_back(compile_age_pattern(AgePattern::Kind::birth_year, f[2]));
      else
        throw Error("unknown attribute/value '" + f[0] + "/" + f[1] + "'");
    } catch (const Error& e) {
      throw Error("patterns line " + std::to_string(line) + ": " + e.what());
    }
  }
  for (const auto& [line, f] : tsv_rows(seeds_tsv, 3, "stance seeds")) {
    const Stance s = stance_from_string(f[0]);
    StanceSeeds& seeds = rules.stance_seeds[s];
    if (f[1] == "bio")
      seeds.bio.push_back(compile_phrase(f[2]));
    else if (f[1] == "tweet")
      seeds.tweet.push_back(compile_phrase(f[2]));
    else
      throw Error("stance seeds line " + std::to_string(line) + ": scope must be bio or tweet");
  }
  validate_rules(rules);
  return rules;
}

RuleSet load_rules(const std::string& gazetteer, const std::string& names,
                   const std::string& patterns, const std::string& seeds) {
  return parse_rules(read_file(gazetteer), read_file(names), read_file(patterns), read_file(seeds));
}

const RuleSet& default_rules() {
  static const RuleSet rules = [] {
    const DefaultRuleText& t = default_rule_text();
    return parse_rules(t.gazetteer, t.names, t.patterns, t.seeds);
  }();
  return rules;
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon = parse_lexicon(default_rule_text().lexicon);
  return lexicon;
}

const Stopwords& default_stopwords() {
  static const Stopwords stopwords = parse_stopwords(default_rule_text().stopwords);
  return stopwords;
}

std::optional<std::string> label_location(const UserProfile& profile, const RuleSet& rules) {
  if (!profile.location_text) return std::nullopt;
  const std::string text = collapse_spaces(normalize_text(*profile.location_text));
  if (text.empty()) return std::nullopt;
  std::set<std::string> countries;
  if (auto it = rules.gazetteer.find(text); it != rules.gazetteer.end()) {
    countries = it->second;
  } else {
    for (const std::string& part : split(text, ',')) {
      auto hit = rules.gazetteer.find(std::string(trim(part)));
      if (hit != rules.gazetteer.end()) countries.insert(hit->second.begin(), hit->second.end());
    }
  }
  if (countries.size() != 1) return std::nullopt;
  return *countries.begin();
}

std::optional<Gender> label_gender(const UserProfile& profile, const RuleSet& rules) {
  std::set<Gender> signals;
  for (const Token& t : tokenize(profile.full_name)) {
    if (t.kind != TokenKind::word) continue;
    auto it = rules.name_genders.find(t.surface);
    if (it != rules.name_genders.end() && it->second.size() == 1) signals.insert(*it->second.begin());
    break;  // first name only
  }
  if (profile.bio) {
    const std::vector<std::string> surfaces = surfaces_of(tokenize(*profile.bio));
    for (const auto& [pattern, gender] : rules.gender_expressions)
      if (pattern_hits(pattern, surfaces)) signals.insert(gender);
  }
  if (signals.size() != 1) return std::nullopt;
  return *signals.begin();
}

std::optional<AgeCohort> label_age(const UserProfile& profile, const RuleSet& rules,
                                   int reference_year) {
  if (!profile.bio) return std::nullopt;
  const std::string bio = collapse_spaces(normalize_text(*profile.bio));
  std::set<AgeCohort> cohorts;
  for (const AgePattern& p : rules.age_patterns) {
    for (auto it = std::sregex_iterator(bio.begin(), bio.end(), p.regex); it != std::sregex_iterator();
         ++it) {
      const int number = static_cast<int>(parse_int((*it)[2].str()));
      int age = number;
      if (p.kind == AgePattern::Kind::birth_year) {
        if (number < 1920 || number > 2010) continue;
        age = reference_year - number;
      }
      if (age < 10 || age > 100) continue;
      cohorts.insert(cohort_of_age(age));
    }
  }
  if (cohorts.size() != 1) return std::nullopt;
  return *cohorts.begin();
}

std::optional<Stance> label_stance(std::string_view user_bio,
                                   std::span<const std::vector<Token>> user_tweets,
                                   const std::map<Stance, StanceSeeds>& seeds) {
  std::set<Stance> hits;
  const std::vector<std::string> bio = surfaces_of(tokenize(user_bio));
  std::vector<std::vector<std::string>> tweets;
  tweets.reserve(user_tweets.size());
  for (const auto& t : user_tweets) tweets.push_back(surfaces_of(t));

  for (const auto& [stance, s] : seeds) {
    bool hit = std::any_of(s.bio.begin(), s.bio.end(),
                           [&](const PhrasePattern& p) { return pattern_hits(p, bio); });
    for (std::size_t i = 0; !hit && i < tweets.size(); ++i)
      hit = std::any_of(s.tweet.begin(), s.tweet.end(),
                        [&](const PhrasePattern& p) { return pattern_hits(p, tweets[i]); });
    if (hit) hits.insert(stance);
  }
  if (hits.size() != 1) return std::nullopt;
  return *hits.begin();
}

std::set<std::string> leakage_columns(const RuleSet& rules, std::span<const FeatureColumn> columns) {
  std::set<std::string> signal_terms;
  for (const auto& [stance, s] : rules.stance_seeds) {
    for (const auto& p : s.bio)
      if (!p.multiword()) signal_terms.insert(p.surfaces.front());
    for (const auto& p : s.tweet)
      if (!p.multiword()) signal_terms.insert(p.surfaces.front());
  }
  for (const auto& [p, g] : rules.gender_expressions)
    if (!p.multiword()) signal_terms.insert(p.surfaces.front());
  for (const auto& [place, cs] : rules.gazetteer)
    if (place.find(' ') == std::string::npos) signal_terms.insert(place);

  auto is_year_like = [](const std::string& t) {
    if (t.size() != 2 && t.size() != 4) return false;
    return std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
  };

  std::set<std::string> out;
  for (const FeatureColumn& c : columns) {
    if (c.block != Block::tweet_term && c.block != Block::bio_term) continue;
    const std::string term = column_term(c);
    if (term.empty()) continue;
    if (signal_terms.count(term) != 0 || is_year_like(term)) out.insert(c.identifier);
  }
  return out;
}

namespace {

template <typename T>
void put(std::optional<Label<T>>& slot, T value, Provenance p, double confidence) {
  if (p != Provenance::predicted) confidence = 1.0;
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw Error("label confidence outside [0,1]");
  slot = Label<T>{std::move(value), p, confidence};
}

template <typename T>
bool same(const std::optional<Label<T>>& a, const std::optional<Label<T>>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->value == b->value && a->provenance == b->provenance && a->confidence == b->confidence;
}

}  // namespace

void LabelSet::set_location(const UserId& u, std::string country, Provenance p, double c) {
  put(users_[u].location, std::move(country), p, c);
}
void LabelSet::set_gender(const UserId& u, Gender g, Provenance p, double c) {
  put(users_[u].gender, g, p, c);
}
void LabelSet::set_age(const UserId& u, AgeCohort a, Provenance p, double c) {
  put(users_[u].age_cohort, a, p, c);
}
void LabelSet::set_stance(const UserId& u, Stance s, Provenance p, double c) {
  put(users_[u].stance, s, p, c);
}

const UserLabels* LabelSet::find(const UserId& u) const {
  auto it = users_.find(u);
  return it == users_.end() ? nullptr : &it->second;
}

bool LabelSet::operator==(const LabelSet& other) const {
  if (users_.size() != other.users_.size()) return false;
  for (auto a = users_.begin(), b = other.users_.begin(); a != users_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (!same(a->second.location, b->second.location) || !same(a->second.gender, b->second.gender) ||
        !same(a->second.age_cohort, b->second.age_cohort) || !same(a->second.stance, b->second.stance))
      return false;
  }
  return true;
}

LabelSet label_corpus(const Corpus& corpus, const RuleSet& rules, int reference_year) {
  std::map<UserId, std::vector<std::vector<Token>>> tweets;
  for (const MicroPost& p : corpus.posts) tweets[p.author_id].push_back(tokenize(p.text));

  LabelSet labels;
  for (const auto& [id, profile] : corpus.users) {
    if (auto c = label_location(profile, rules)) labels.set_location(id, *c, Provenance::rule);
    if (auto g = label_gender(profile, rules)) labels.set_gender(id, *g, Provenance::rule);
    if (auto a = label_age(profile, rules, reference_year)) labels.set_age(id, *a, Provenance::rule);
    static const std::vector<std::vector<Token>> none;
    auto it = tweets.find(id);
    const auto& streams = it == tweets.end() ? none : it->second;
    if (auto s = label_stance(profile.bio.value_or(""), streams, rules.stance_seeds))
      labels.set_stance(id, *s, Provenance::rule);
  }
  return labels;
}

void import_manual_labels(LabelSet& labels, std::string_view tsv) {
  for (const auto& [line, f] : tsv_rows(tsv, 3, "manual labels")) {
    try {
      if (f[1] == "location")
        labels.set_location(f[0], f[2], Provenance::manual);
      else if (f[1] == "gender")
        labels.set_gender(f[0], gender_from_string(f[2]), Provenance::manual);
      else if (f[1] == "age")
        labels.set_age(f[0], cohort_from_string(f[2]), Provenance::manual);
      else if (f[1] == "stance")
        labels.set_stance(f[0], stance_from_string(f[2]), Provenance::manual);
      else
        throw Error("unknown attribute '" + f[1] + "'");
    } catch (const Error& e) {
      throw Error("manual labels line " + std::to_string(line) + ": " + e.what());
    }
  }
}

std::string serialize_labels(const LabelSet& labels) {
  std::string out = "user\tattribute\tvalue\tprovenance\tconfidence\n";
  auto row = [&](const UserId& u, std::string_view attr, std::string_view value, Provenance p,
                 double c) {
    out += u;
    out += '\t';
    out += attr;
    out += '\t';
    out += value;
    out += '\t';
    out += to_string(p);
    out += '\t';
    out += exact_decimal(c);
    out += '\n';
  };
  for (const auto& [u, l] : labels.users()) {
    if (l.location) row(u, "location", l.location->value, l.location->provenance, l.location->confidence);
    if (l.gender) row(u, "gender", to_string(l.gender->value), l.gender->provenance, l.gender->confidence);
    if (l.age_cohort)
      row(u, "age", to_string(l.age_cohort->value), l.age_cohort->provenance, l.age_cohort->confidence);
    if (l.stance) row(u, "stance", to_string(l.stance->value), l.stance->provenance, l.stance->confidence);
  }
  return out;
}

LabelSet parse_labels(std::string_view tsv) {
  LabelSet labels;
  bool header = true;
  for (const auto& [line, f] : tsv_rows(tsv, 5, "labels")) {
    if (header) {
      header = false;
      if (f[0] == "user") continue;
    }
    const Provenance p = provenance_from_string(f[3]);
    const double c = parse_double(f[4]);
    if (f[1] == "location")
      labels.set_location(f[0], f[2], p, c);
    else if (f[1] == "gender")
      labels.set_gender(f[0], gender_from_string(f[2]), p, c);
    else if (f[1] == "age")
      labels.set_age(f[0], cohort_from_string(f[2]), p, c);
    else if (f[1] == "stance")
      labels.set_stance(f[0], stance_from_string(f[2]), p, c);
    else
      throw Error("labels line " + std::to_string(line) + ": unknown attribute '" + f[1] + "'");
  }
  return labels;
}

}  // namespace stancelab

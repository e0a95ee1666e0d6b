#pragma once

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/corpus.hpp"
#include "stancelab/features.hpp"
#include "stancelab/textproc.hpp"

namespace stancelab {

enum class Gender { male, female };
enum class AgeCohort { under_18, from_18_to_29, from_30_to_39, over_40 };
enum class Stance { defense, opposition };
enum class Provenance { rule, manual, predicted };

std::string_view to_string(Gender g);
std::string_view to_string(AgeCohort c);
std::string_view to_string(Stance s);
std::string_view to_string(Provenance p);
Gender gender_from_string(std::string_view text);
AgeCohort cohort_from_string(std::string_view text);
Stance stance_from_string(std::string_view text);
Provenance provenance_from_string(std::string_view text);

inline constexpr AgeCohort kAllCohorts[] = {AgeCohort::under_18, AgeCohort::from_18_to_29,
                                            AgeCohort::from_30_to_39, AgeCohort::over_40};

/// Closed-open buckets [0,18), [18,30), [30,40), [40, inf).
AgeCohort cohort_of_age(int age);

/// A single-token or multi-token pattern matched against token streams.
struct PhrasePattern {
  std::string text;                  // normalized source text
  std::vector<std::string> surfaces; // token surfaces
  bool multiword() const { return surfaces.size() > 1; }
};
PhrasePattern compile_phrase(std::string_view text);

struct AgePattern {
  enum class Kind { age, birth_year };
  Kind kind = Kind::age;
  std::string source;  // template with a {N} placeholder
  std::regex regex;    // group 2 captures the number
};
AgePattern compile_age_pattern(AgePattern::Kind kind, std::string_view tmpl);

struct StanceSeeds {
  std::vector<PhrasePattern> bio;
  std::vector<PhrasePattern> tweet;
};

struct RuleSet {
  /// place (normalized) -> countries it names; more than one means ambiguous.
  std::map<std::string, std::set<std::string>> gazetteer;
  std::map<std::string, std::set<Gender>> name_genders;
  std::vector<std::pair<PhrasePattern, Gender>> gender_expressions;
  std::vector<AgePattern> age_patterns;
  std::map<Stance, StanceSeeds> stance_seeds;

  std::set<std::string> countries() const;
};

/// Validates the invariants: both stances seeded, patterns compiled.
void validate_rules(const RuleSet& rules);

RuleSet parse_rules(std::string_view gazetteer_tsv, std::string_view names_tsv,
                    std::string_view patterns_tsv, std::string_view seeds_tsv);
RuleSet load_rules(const std::string& gazetteer, const std::string& names,
                   const std::string& patterns, const std::string& seeds);

/// The rule files shipped under data/rules, compiled in.
struct DefaultRuleText {
  std::string_view gazetteer, names, patterns, seeds, lexicon, stopwords;
};
const DefaultRuleText& default_rule_text();
const RuleSet& default_rules();
const Lexicon& default_lexicon();
const Stopwords& default_stopwords();

std::optional<std::string> label_location(const UserProfile& profile, const RuleSet& rules);
std::optional<Gender> label_gender(const UserProfile& profile, const RuleSet& rules);
/// Reference year converts birth years into ages.
std::optional<AgeCohort> label_age(const UserProfile& profile, const RuleSet& rules,
                                   int reference_year);
std::optional<Stance> label_stance(std::string_view user_bio,
                                   std::span<const std::vector<Token>> user_tweets,
                                   const std::map<Stance, StanceSeeds>& seeds);

/// Term columns built from labeling signals plus bare 2- or 4-digit numbers.
std::set<std::string> leakage_columns(const RuleSet& rules,
                                      std::span<const FeatureColumn> columns);

template <typename T>
struct Label {
  T value{};
  Provenance provenance = Provenance::rule;
  double confidence = 1.0;
};

struct UserLabels {
  std::optional<Label<std::string>> location;
  std::optional<Label<Gender>> gender;
  std::optional<Label<AgeCohort>> age_cohort;
  std::optional<Label<Stance>> stance;
};

/// At most one label per attribute per user; rule and manual labels carry
/// confidence 1.
class LabelSet {
 public:
  void set_location(const UserId& u, std::string country, Provenance p, double confidence = 1.0);
  void set_gender(const UserId& u, Gender g, Provenance p, double confidence = 1.0);
  void set_age(const UserId& u, AgeCohort c, Provenance p, double confidence = 1.0);
  void set_stance(const UserId& u, Stance s, Provenance p, double confidence = 1.0);

  const std::map<UserId, UserLabels>& users() const { return users_; }
  const UserLabels* find(const UserId& u) const;

  bool operator==(const LabelSet& other) const;

 private:
  std::map<UserId, UserLabels> users_;
};

/// Applies every rule to every user in the corpus.
LabelSet label_corpus(const Corpus& corpus, const RuleSet& rules, int reference_year);

/// "user<TAB>attribute<TAB>value" rows, attribute in {location, gender, age, stance}.
void import_manual_labels(LabelSet& labels, std::string_view tsv);

std::string serialize_labels(const LabelSet& labels);
LabelSet parse_labels(std::string_view tsv);

}  // namespace stancelab

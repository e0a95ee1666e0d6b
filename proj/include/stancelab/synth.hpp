#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/corpus.hpp"
#include "stancelab/labeling.hpp"
#include "stancelab/textproc.hpp"

namespace stancelab {

/// A term whose inclusion probability depends on stance: per post (by the
/// post's flavor) for tweets, per user (by true stance) for bios and names.
struct StanceTerm {
  std::string term;
  double defense = 0.0;
  double opposition = 0.0;
};

/// A term tied to one demographic value: used at `rate` by users holding the
/// value and at `base_rate` by everyone else. Tweet scope is per post, bio
/// scope per user.
struct DemographicTerm {
  std::string term;
  std::string attribute;  // gender | country | cohort
  std::string value;
  double rate = 0.0;
  double base_rate = 0.0;
  TermScope scope = TermScope::tweet;
};

/// Additive shift of the turnaround for users holding one attribute value.
struct TurnaroundEffect {
  std::string attribute;  // gender | country | cohort
  std::string value;
  double size = 0.0;
};

struct SynthSpec {
  std::size_t n_users = 200;
  std::uint64_t rng_seed = 1;

  std::map<Stance, double> stance_weights{{Stance::defense, 0.5}, {Stance::opposition, 0.5}};
  /// Range of the first-period p(defense), drawn uniformly per user.
  std::map<Stance, std::array<double, 2>> p_defense{{Stance::defense, {0.8, 0.95}},
                                                   {Stance::opposition, {0.05, 0.2}}};

  std::array<TimeRange, 2> periods{};
  /// Share of users posting in both periods; the rest post in one.
  double both_periods_rate = 0.8;
  /// Mean posts per active period (at least one).
  double posts_per_period = 4.0;
  double neutral_tokens_per_post = 8.0;
  int neutral_vocabulary = 600;
  double neutral_zipf = 0.8;
  double stopwords_per_post = 2.0;
  double bio_neutral_words = 4.0;
  /// Probability that a bio carries one term of a lexicon category, per category.
  double lexicon_rate = 0.15;
  /// Term placed in every post so relevance filtering keeps it.
  std::string keyword = "aborto";

  std::vector<StanceTerm> tweet_signal;
  std::vector<StanceTerm> bio_signal;
  std::vector<StanceTerm> name_signal;
  std::vector<DemographicTerm> demographic_terms;

  std::map<std::string, double> gender{{"female", 0.5}, {"male", 0.5}};
  std::map<std::string, double> country{{"Argentina", 0.6}, {"Chile", 0.4}};
  std::map<std::string, double> cohort{{"<18", 0.1}, {"18-29", 0.4}, {"30-39", 0.3}, {"40+", 0.2}};

  /// Probability that a user discloses each attribute in a form the shipped
  /// rules recognize.
  double report_gender = 0.3;
  double report_location = 0.4;
  double report_age = 0.2;
  double report_stance = 0.3;
  /// Among stance reporters, the share that do it in a tweet instead of the bio.
  double stance_in_tweet = 0.4;

  double timezone_rate = 0.3;
  std::map<std::string, std::string> timezones{{"Argentina", "Buenos Aires"}, {"Chile", "Santiago"}};
  double url_rate = 0.3;

  int n_hubs = 40;
  double retweet_rate = 0.15;
  double mention_rate = 0.1;
  /// Chance that an interaction targets a hub sharing the author's stance.
  double homophily = 0.8;

  double turnaround_intercept = 0.0;
  double turnaround_noise = 0.01;
  std::vector<TurnaroundEffect> effects;

  /// Users without a stance self-report who receive a manual stance label.
  std::size_t manual_stance_labels = 0;
};

/// Reads a spec from JSON; unknown keys are an error.
SynthSpec parse_synth_spec(std::string_view json);
SynthSpec load_synth_spec(const std::string& path);
std::string serialize_synth_spec(const SynthSpec& spec);

/// Infeasible or inconsistent specs are fatal.
void validate(const SynthSpec& spec, const RuleSet& rules);

struct UserTruth {
  UserId user_id;
  Stance stance = Stance::defense;
  Gender gender = Gender::female;
  std::string country;
  AgeCohort cohort = AgeCohort::from_18_to_29;
  int age = 0;
  double p_t0 = 0.0, p_t1 = 0.0, delta = 0.0;
  std::array<bool, 2> active{};
  bool reports_gender = false, reports_location = false, reports_age = false, reports_stance = false;
  bool hub = false;
};

struct GroundTruth {
  std::vector<UserTruth> users;
  /// Flavor each post was drawn with.
  std::map<std::string, Stance> post_flavor;
  /// Year used to turn ages into birth years.
  int reference_year = 0;

  const UserTruth* find(const UserId& id) const;
};

struct SynthOutput {
  Corpus corpus;
  GroundTruth truth;
  /// "user<TAB>attribute<TAB>value" rows.
  std::string manual_labels;
};

SynthOutput generate(const SynthSpec& spec, const RuleSet& rules = default_rules(),
                     const Lexicon& lexicon = default_lexicon(), const Stopwords& stopwords = default_stopwords());

std::string serialize_truth(const GroundTruth& truth);
GroundTruth parse_truth(std::string_view tsv);

/// Writes corpus.jsonl, truth.tsv and manual_labels.tsv into a directory.
void write_synth_output(const SynthOutput& out, const std::string& directory);

}  // namespace stancelab

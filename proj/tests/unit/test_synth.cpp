#include <gtest/gtest.h>

#include <cmath>

#include "stancelab/synth.hpp"

using namespace stancelab;

namespace {

SynthSpec small_spec() {
  SynthSpec s = load_synth_spec(std::string(STANCELAB_SOURCE_DIR) + "/configs/demo_synth.json");
  s.n_users = 150;
  return s;
}

}  // namespace

TEST(Synth, SpecRoundTrip) {
  const SynthSpec s = small_spec();
  const SynthSpec back = parse_synth_spec(serialize_synth_spec(s));
  EXPECT_EQ(serialize_synth_spec(back), serialize_synth_spec(s));
  EXPECT_EQ(back.tweet_signal.size(), 8u);
  EXPECT_EQ(back.effects.size(), 1u);
}

TEST(Synth, StrictKeys) {
  EXPECT_THROW(parse_synth_spec(R"({"periods": [["2018-01-01","2018-02-01"],["2018-03-01","2018-04-01"]], "n_user": 3})"),
               Error);
  EXPECT_THROW(parse_synth_spec(R"({"n_users": 3})"), Error);
}

TEST(Synth, ValidationRejectsBadSpecs) {
  SynthSpec s = small_spec();
  s.effects.push_back({"cohort", "40+", 0.5});
  EXPECT_THROW(validate(s, default_rules()), Error);
  s = small_spec();
  s.country = {{"Argentina", 0.5}, {"Atlantis", 0.5}};
  EXPECT_THROW(validate(s, default_rules()), Error);
  s = small_spec();
  s.tweet_signal.push_back({"#seraley", 0.2, 0.1});
  EXPECT_THROW(validate(s, default_rules()), Error);
  s = small_spec();
  std::swap(s.periods[0], s.periods[1]);
  EXPECT_THROW(validate(s, default_rules()), Error);
  s = small_spec();
  s.gender = {{"female", 0.5}, {"male", 0.4}};
  EXPECT_THROW(validate(s, default_rules()), Error);
  EXPECT_NO_THROW(validate(small_spec(), default_rules()));
}

TEST(Synth, Deterministic) {
  const SynthOutput a = generate(small_spec());
  const SynthOutput b = generate(small_spec());
  EXPECT_EQ(serialize_corpus(a.corpus), serialize_corpus(b.corpus));
  EXPECT_EQ(serialize_truth(a.truth), serialize_truth(b.truth));
  SynthSpec other = small_spec();
  other.rng_seed = 99;
  EXPECT_NE(serialize_corpus(generate(other).corpus), serialize_corpus(a.corpus));
}

TEST(Synth, TruthRoundTripAndInvariants) {
  const SynthOutput out = generate(small_spec());
  const GroundTruth back = parse_truth(serialize_truth(out.truth));
  EXPECT_EQ(serialize_truth(back), serialize_truth(out.truth));
  ASSERT_EQ(out.truth.users.size(), 150u);
  for (const UserTruth& u : out.truth.users) {
    EXPECT_TRUE(u.active[0] || u.active[1]);
    EXPECT_DOUBLE_EQ(u.delta, u.p_t1 - u.p_t0);
    EXPECT_GE(u.p_t1, 0.0);
    EXPECT_LE(u.p_t1, 1.0);
    EXPECT_EQ(cohort_of_age(u.age), u.cohort);
  }
  for (const MicroPost& p : out.corpus.posts) {
    EXPECT_TRUE(out.truth.post_flavor.count(p.post_id));
    EXPECT_NE(p.text.find("aborto"), std::string::npos);
    const UserTruth* t = out.truth.find(p.author_id);
    ASSERT_NE(t, nullptr);
    const bool in0 = small_spec().periods[0].contains(p.timestamp);
    EXPECT_TRUE(in0 ? t->active[0] : t->active[1]);
  }
}

TEST(Synth, RulesRecoverEveryReport) {
  const SynthOutput out = generate(small_spec());
  const LabelSet labels = label_corpus(out.corpus, default_rules(), out.truth.reference_year);
  for (const UserTruth& t : out.truth.users) {
    const UserLabels* l = labels.find(t.user_id);
    auto has = [&](auto member) { return l != nullptr && (l->*member).has_value(); };
    EXPECT_EQ(has(&UserLabels::gender), t.reports_gender) << t.user_id;
    EXPECT_EQ(has(&UserLabels::location), t.reports_location) << t.user_id;
    EXPECT_EQ(has(&UserLabels::age_cohort), t.reports_age) << t.user_id;
    EXPECT_EQ(has(&UserLabels::stance), t.reports_stance) << t.user_id;
    if (t.reports_gender) {
      EXPECT_EQ(l->gender->value, t.gender);
    }
    if (t.reports_location) {
      EXPECT_EQ(l->location->value, t.country);
    }
    if (t.reports_age) {
      EXPECT_EQ(l->age_cohort->value, t.cohort);
    }
    if (t.reports_stance) {
      EXPECT_EQ(l->stance->value, t.stance);
    }
  }
}

TEST(Synth, ManualLabelsTargetNonReporters) {
  SynthSpec s = small_spec();
  s.manual_stance_labels = 10;
  const SynthOutput out = generate(s);
  LabelSet labels;
  import_manual_labels(labels, out.manual_labels);
  EXPECT_EQ(labels.users().size(), 10u);
  for (const auto& [id, l] : labels.users()) {
    const UserTruth* t = out.truth.find(id);
    ASSERT_NE(t, nullptr);
    EXPECT_FALSE(t->reports_stance);
    EXPECT_EQ(l.stance->value, t->stance);
  }
}

TEST(Synth, EmptySpecIsFatal) {
  SynthSpec s = small_spec();
  s.n_users = 0;
  EXPECT_THROW(validate(s, default_rules()), Error);
  EXPECT_THROW(generate(s), Error);
}

TEST(Synth, TweetSignalRatesMatchSpec) {
  SynthSpec s = small_spec();
  s.n_users = 2000;
  s.tweet_signal = {{"💚", 0.9, 0.01}};
  const SynthOutput out = generate(s);
  std::map<Stance, std::pair<int, int>> tally;
  for (const MicroPost& p : out.corpus.posts) {
    auto& [hits, all] = tally[out.truth.post_flavor.at(p.post_id)];
    ++all;
    hits += p.text.find("💚") != std::string::npos;
  }
  auto rate = [&](Stance st) { return static_cast<double>(tally[st].first) / tally[st].second; };
  EXPECT_NEAR(rate(Stance::defense), 0.9, 0.03);
  EXPECT_NEAR(rate(Stance::opposition), 0.01, 0.03);
}

TEST(Synth, TurnaroundGroupMeansMatchEffects) {
  const SynthSpec s = load_synth_spec(std::string(STANCELAB_SOURCE_DIR) + "/configs/turnaround_synth.json");
  const SynthOutput out = generate(s);
  auto contrast = [&](auto in_group) {
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    int n[2] = {0, 0};
    for (const UserTruth& u : out.truth.users) {
      const int k = in_group(u) ? 1 : 0;
      sum[k] += u.delta;
      sq[k] += u.delta * u.delta;
      ++n[k];
    }
    double diff = 0.0, var = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double m = sum[k] / n[k];
      var += (sq[k] / n[k] - m * m) / (n[k] - 1);
      diff += k ? m : -m;
    }
    return std::pair{diff, std::sqrt(var)};
  };
  const auto [male, se_m] = contrast([](const UserTruth& u) { return u.gender == Gender::male; });
  EXPECT_NEAR(male, -0.10, 3 * se_m);
  const auto [young, se_y] = contrast([](const UserTruth& u) { return u.cohort == AgeCohort::from_18_to_29; });
  EXPECT_NEAR(young, 0.25, 3 * se_y);
  const auto [chile, se_c] = contrast([](const UserTruth& u) { return u.country == "Chile"; });
  EXPECT_NEAR(chile, -0.15, 3 * se_c);
}

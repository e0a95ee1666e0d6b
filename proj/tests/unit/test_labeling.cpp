#include <gtest/gtest.h>

#include "stancelab/labeling.hpp"

using namespace stancelab;

namespace {

UserProfile user(const std::string& name, const std::string& bio, const std::string& location = "") {
  UserProfile p;
  p.user_id = "u";
  p.screen_name = "u";
  p.full_name = name;
  if (!bio.empty()) p.bio = bio;
  if (!location.empty()) p.location_text = location;
  return p;
}

}  // namespace

TEST(Labeling, Location) {
  const RuleSet& r = default_rules();
  EXPECT_EQ(label_location(user("x", "", "Buenos Aires, Argentina"), r), "Argentina");
  EXPECT_EQ(label_location(user("x", "", "Santiago de Chile"), r), "Chile");
  EXPECT_EQ(label_location(user("x", "", "san fernando"), r), std::nullopt);
  EXPECT_EQ(label_location(user("x", "", "planeta tierra"), r), std::nullopt);
}

TEST(Labeling, GenderFromNameAndPhrases) {
  const RuleSet& r = default_rules();
  EXPECT_EQ(label_gender(user("María López", ""), r), Gender::female);
  EXPECT_EQ(label_gender(user("Xyz", "orgulloso padre de dos"), r), Gender::male);
  EXPECT_EQ(label_gender(user("Xyz", "mamá de Juan"), r), Gender::female);
  EXPECT_EQ(label_gender(user("Xyz", "sin datos"), r), std::nullopt);
  // A female name with a male phrase is a conflict.
  EXPECT_EQ(label_gender(user("María", "soy hombre"), r), std::nullopt);
}

TEST(Labeling, AgeCohorts) {
  const RuleSet& r = default_rules();
  EXPECT_EQ(label_age(user("x", "tengo 25 y sueños"), r, 2018), AgeCohort::from_18_to_29);
  EXPECT_EQ(label_age(user("x", "nací en 1970"), r, 2018), AgeCohort::over_40);
  EXPECT_EQ(label_age(user("x", "17 años"), r, 2018), AgeCohort::under_18);
  EXPECT_EQ(label_age(user("x", "hincha desde 1990"), r, 2018), std::nullopt);
  EXPECT_EQ(cohort_of_age(18), AgeCohort::from_18_to_29);
  EXPECT_EQ(cohort_of_age(30), AgeCohort::from_30_to_39);
  EXPECT_EQ(cohort_of_age(40), AgeCohort::over_40);
}

TEST(Labeling, StanceSeeds) {
  const RuleSet& r = default_rules();
  const std::vector<std::vector<Token>> none;
  EXPECT_EQ(label_stance("feminista #AbortoLegal", none, r.stance_seeds), Stance::defense);
  EXPECT_EQ(label_stance("defiendo el derecho a la vida", none, r.stance_seeds), Stance::opposition);
  const std::vector<std::vector<Token>> tweets{tokenize("vamos #SeraLey")};
  EXPECT_EQ(label_stance("", tweets, r.stance_seeds), Stance::defense);
  // Seeds of both stances cancel out.
  EXPECT_EQ(label_stance("#provida", tweets, r.stance_seeds), std::nullopt);
}

TEST(Labeling, LeakageColumns) {
  const std::vector<FeatureColumn> cols{{"#seraley", Block::tweet_term, FeatureType::hashtag},
                                        {"profile:feminista", Block::bio_term, FeatureType::word},
                                        {"profile:1990", Block::bio_term, FeatureType::word},
                                        {"profile:25", Block::bio_term, FeatureType::word},
                                        {"clima", Block::tweet_term, FeatureType::word},
                                        {"profile:años", Block::bio_term, FeatureType::word}};
  const auto leak = leakage_columns(default_rules(), cols);
  EXPECT_TRUE(leak.count("#seraley"));
  EXPECT_TRUE(leak.count("profile:feminista"));
  EXPECT_TRUE(leak.count("profile:1990"));
  EXPECT_TRUE(leak.count("profile:25"));
  EXPECT_FALSE(leak.count("profile:años"));
  EXPECT_FALSE(leak.count("clima"));
}

TEST(Labeling, ManualLabelsAndRoundTrip) {
  LabelSet s;
  s.set_gender("a", Gender::female, Provenance::rule);
  import_manual_labels(s, "b\tstance\topposition\nc\tlocation\tChile\n");
  EXPECT_EQ(s.find("b")->stance->provenance, Provenance::manual);
  EXPECT_EQ(parse_labels(serialize_labels(s)), s);
  EXPECT_THROW(import_manual_labels(s, "b\tshoe\tsize\n"), Error);
}

TEST(Labeling, RuleFileValidation) {
  const DefaultRuleText& t = default_rule_text();
  EXPECT_NO_THROW(parse_rules(t.gazetteer, t.names, t.patterns, t.seeds));
  EXPECT_THROW(parse_rules(t.gazetteer, t.names, t.patterns, "defense\tbio\tfeminista\n"), Error);
  EXPECT_THROW(parse_rules(t.gazetteer, t.names, "age\tage\tsin numero\n", t.seeds), Error);
}

TEST(Labeling, CustomPatternFile) {
  const DefaultRuleText& t = default_rule_text();
  const RuleSet r = parse_rules(t.gazetteer, t.names, "gender\tmale\tpadre\nage\tage\t{N} añitos\n", t.seeds);
  EXPECT_EQ(label_gender(user("Xx22", "padre de dos"), r), Gender::male);
  EXPECT_EQ(label_age(user("x", "17 añitos"), r, 2018), AgeCohort::under_18);
  EXPECT_EQ(label_age(user("x", "18 añitos"), r, 2018), AgeCohort::from_18_to_29);
  EXPECT_EQ(label_age(user("x", "7 añitos"), r, 2018), std::nullopt);
}

TEST(Labeling, BioSeedAndTweetConflict) {
  const RuleSet& r = default_rules();
  const std::vector<std::vector<Token>> none;
  EXPECT_EQ(label_stance("#provida", none, r.stance_seeds), Stance::opposition);
  const std::vector<std::vector<Token>> both{tokenize("#seraley"), tokenize("#noesley")};
  EXPECT_EQ(label_stance("", both, r.stance_seeds), std::nullopt);
  EXPECT_EQ(label_location(user("x", "", "Narnia"), r), std::nullopt);
}

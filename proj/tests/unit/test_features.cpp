#include <gtest/gtest.h>

#include "stancelab/features.hpp"
#include "stancelab/labeling.hpp"

using namespace stancelab;

namespace {

Corpus corpus_with_hub() {
  Corpus c;
  auto add_user = [&](const std::string& id, const std::string& bio) {
    UserProfile p;
    p.user_id = id;
    p.screen_name = id;
    p.full_name = id + " 💚";
    p.bio = bio;
    p.url = "https://www.lanacion.com.ar/nota";
    p.timezone = "Buenos Aires";
    c.users.emplace(id, p);
  };
  add_user("hub", "estudiante de derecho");
  for (int i = 0; i < 6; ++i) add_user("u" + std::to_string(i), "docente 🌿🌿 estudiante");
  std::int64_t id = 0;
  for (int i = 0; i < 6; ++i) {
    MicroPost p;
    p.post_id = std::to_string(++id);
    p.author_id = "u" + std::to_string(i);
    p.timestamp = parse_date("2018-06-01") + i;
    p.text = "RT @hub: marea verde";
    p.retweet_of = "hub";
    c.posts.push_back(p);
  }
  MicroPost own;
  own.post_id = "100";
  own.author_id = "hub";
  own.timestamp = parse_date("2018-05-01");
  own.text = "marea verde";
  c.posts.push_back(own);
  finalize_corpus(c);
  return c;
}

}  // namespace

TEST(Features, BlocksAndThresholds) {
  const Corpus c = corpus_with_hub();
  FeaturizeOptions o;
  o.min_tweet_term = 7;
  o.min_bio_term = 7;
  o.matrix.edge_min_indegree = 6;
  const FeatureMatrix m = featurize(c, default_lexicon(), default_stopwords(), o);
  EXPECT_EQ(m.n_rows(), 7u);
  ASSERT_TRUE(m.find_column("marea"));
  ASSERT_TRUE(m.find_column("rt:hub"));
  ASSERT_TRUE(m.find_column("profile:estudiante"));
  EXPECT_FALSE(m.find_column("profile:docente"));
  EXPECT_TRUE(m.find_column("lexicon:education"));
  EXPECT_TRUE(m.find_column("home_page:lanacion.com.ar"));
  EXPECT_TRUE(m.find_column("timezone:Buenos_Aires"));
  ASSERT_TRUE(m.find_column("name:💚"));
  EXPECT_EQ(m.columns()[*m.find_column("name:💚")].type, FeatureType::emoji);
  const std::size_t u0 = *m.find_row("u0");
  EXPECT_EQ(m.at(u0, *m.find_column(std::string(kBioEmojiCount))), 2.0);
  EXPECT_EQ(m.at(u0, *m.find_column("rt:hub")), 1.0);

  o.matrix.edge_min_indegree = 7;
  EXPECT_FALSE(featurize(c, default_lexicon(), default_stopwords(), o).find_column("rt:hub"));
  o.count_retweets = false;
  EXPECT_FALSE(featurize(c, default_lexicon(), default_stopwords(), o).find_column("marea"));
}

TEST(Features, PeriodRowsArePosters) {
  const Corpus c = corpus_with_hub();
  FeaturizeOptions o;
  o.min_tweet_term = 1;
  o.min_bio_term = 1;
  const FeatureMatrix m =
      featurize(c, default_lexicon(), default_stopwords(), o, TimeRange{parse_date("2018-05-01"), parse_date_end("2018-05-31")});
  ASSERT_EQ(m.n_rows(), 1u);
  EXPECT_EQ(m.rows()[0], "hub");
  EXPECT_TRUE(m.period().has_value());
}

TEST(Features, MatrixRoundTripAndEdits) {
  const Corpus c = corpus_with_hub();
  FeaturizeOptions o;
  o.min_tweet_term = 1;
  o.min_bio_term = 1;
  o.matrix.edge_min_indegree = 1;
  const FeatureMatrix m = featurize(c, default_lexicon(), default_stopwords(), o);
  EXPECT_EQ(parse_matrix(serialize_matrix(m)), m);

  const FeatureMatrix d = drop_columns(m, {"marea"});
  EXPECT_EQ(d.n_cols(), m.n_cols() - 1);
  EXPECT_FALSE(d.find_column("marea"));

  const std::vector<std::size_t> pick{2, 0};
  const FeatureMatrix s = select_rows(m, pick);
  EXPECT_EQ(s.rows(), (std::vector<UserId>{m.rows()[2], m.rows()[0]}));
  EXPECT_EQ(s.dense()[0], m.dense()[2]);

  const auto [a, b] = align_rows(s, m);
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.n_rows(), 2u);
}

TEST(Features, InvalidMatrices) {
  EXPECT_THROW(FeatureMatrix({"a"}, {{"x", Block::tweet_term, FeatureType::network}}, {{}}), Error);
  EXPECT_THROW(FeatureMatrix({"a"}, {{"x", Block::tweet_term, FeatureType::word}, {"x", Block::tweet_term, FeatureType::word}}, {{}}),
               Error);
  EXPECT_THROW(FeatureMatrix({"a b"}, {}, {{}}), Error);
  const FeatureMatrix z({"a"}, {{"x", Block::tweet_term, FeatureType::word}}, {{{0, 0.0}}});
  EXPECT_EQ(z.nnz(), 0u);
  EXPECT_THROW(parse_matrix("#stancelab-matrix 2\n"), Error);
}

TEST(Features, ColumnTerm) {
  EXPECT_EQ(column_term({"profile:#provida", Block::bio_term, FeatureType::hashtag}), "#provida");
  EXPECT_EQ(column_term({"lexicon:family", Block::bio_term, FeatureType::lexicon_category}), "");
  EXPECT_EQ(column_term({"rt:x", Block::retweet_edge, FeatureType::network}), "");
}

namespace {

Corpus four_users() {
  Corpus c;
  for (const char* id : {"a", "b", "c", "d"}) {
    UserProfile p;
    p.user_id = id;
    p.screen_name = id;
    p.full_name = id;
    c.users.emplace(id, p);
  }
  c.users["a"].bio = "docente 💚";
  auto post = [&](const char* id, const char* author, const char* text, std::optional<UserId> rt = {}) {
    MicroPost p;
    p.post_id = id;
    p.author_id = author;
    p.timestamp = parse_date("2018-06-01");
    p.text = text;
    p.retweet_of = rt;
    c.posts.push_back(p);
  };
  post("1", "a", "aborto legal");
  post("2", "b", "aborto legal legal @c");
  post("3", "c", "RT @a: aborto legal", "a");
  post("4", "d", "aborto no");
  c.posts[1].directed_at.push_back({"c", InteractionKind::mention});
  finalize_corpus(c);
  return c;
}

}  // namespace

TEST(Features, FourUserDenseMatrix) {
  FeaturizeOptions o;
  o.min_tweet_term = 2;
  o.min_bio_term = 1;
  o.matrix.edge_min_indegree = 1;
  const FeatureMatrix m = featurize(four_users(), Lexicon{}, Stopwords{}, o);
  std::vector<std::string> ids;
  for (const FeatureColumn& col : m.columns()) ids.push_back(col.identifier);
  EXPECT_EQ(ids, (std::vector<std::string>{"aborto", "legal", "profile:docente", "profile:💚", std::string(kBioEmojiCount),
                                           "rt:a", "to:c"}));
  EXPECT_EQ(m.rows(), (std::vector<UserId>{"a", "b", "c", "d"}));
  const std::vector<std::vector<double>> expected{
      {1, 1, 1, 1, 1, 0, 0}, {1, 2, 0, 0, 0, 0, 1}, {1, 1, 0, 0, 0, 1, 0}, {1, 0, 0, 0, 0, 0, 0}};
  EXPECT_EQ(m.dense(), expected);
}

TEST(Features, LeakageDropAndPartialOverlap) {
  const Corpus c = corpus_with_hub();
  FeaturizeOptions o;
  o.min_tweet_term = 1;
  o.min_bio_term = 1;
  const FeatureMatrix m = featurize(c, default_lexicon(), default_stopwords(), o);
  const std::set<std::string> leak = leakage_columns(default_rules(), m.columns());
  const FeatureMatrix d = drop_columns(m, leak);
  for (const FeatureColumn& col : d.columns()) EXPECT_EQ(leak.count(col.identifier), 0u);
  EXPECT_EQ(drop_columns(m, {}), m);

  const std::vector<std::size_t> first{0, 1, 2}, later{1, 2, 3};
  const auto [a, b] = align_rows(select_rows(m, first), select_rows(m, later));
  EXPECT_EQ(a.rows(), (std::vector<UserId>{m.rows()[1], m.rows()[2]}));
  EXPECT_EQ(b.rows(), a.rows());
  const std::vector<std::size_t> none_a{0}, none_b{3};
  const auto [x, y] = align_rows(select_rows(m, none_a), select_rows(m, none_b));
  EXPECT_EQ(x.n_rows(), 0u);
  EXPECT_EQ(y.n_rows(), 0u);
}

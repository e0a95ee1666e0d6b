#include "stancelab/features.hpp"

#include <algorithm>
#include <unordered_map>

namespace stancelab {

std::string_view to_string(Block block) {
  switch (block) {
    case Block::tweet_term: return "tweet_term";
    case Block::bio_term: return "bio_term";
    case Block::profile_meta: return "profile_meta";
    case Block::retweet_edge: return "retweet_edge";
    case Block::directed_edge: return "directed_edge";
  }
  return "tweet_term";
}

std::string_view to_string(FeatureType type) {
  switch (type) {
    case FeatureType::emoji: return "emoji";
    case FeatureType::hashtag: return "hashtag";
    case FeatureType::mention: return "mention";
    case FeatureType::url: return "url";
    case FeatureType::word: return "word";
    case FeatureType::lexicon_category: return "lexicon_category";
    case FeatureType::meta: return "meta";
    case FeatureType::network: return "network";
  }
  return "word";
}

Block block_from_string(std::string_view t) {
  for (Block b : {Block::tweet_term, Block::bio_term, Block::profile_meta, Block::retweet_edge,
                  Block::directed_edge})
    if (to_string(b) == t) return b;
  throw Error("unknown block '" + std::string(t) + "'");
}

FeatureType feature_type_from_string(std::string_view t) {
  for (FeatureType f : {FeatureType::emoji, FeatureType::hashtag, FeatureType::mention,
                        FeatureType::url, FeatureType::word, FeatureType::lexicon_category,
                        FeatureType::meta, FeatureType::network})
    if (to_string(f) == t) return f;
  throw Error("unknown feature type '" + std::string(t) + "'");
}

FeatureType feature_type_of(TokenKind kind) {
  switch (kind) {
    case TokenKind::word: return FeatureType::word;
    case TokenKind::hashtag: return FeatureType::hashtag;
    case TokenKind::mention: return FeatureType::mention;
    case TokenKind::url: return FeatureType::url;
    case TokenKind::emoji: return FeatureType::emoji;
  }
  return FeatureType::word;
}

std::string column_term(const FeatureColumn& c) {
  if (c.block == Block::tweet_term) return c.identifier;
  if (c.block == Block::bio_term && c.type != FeatureType::lexicon_category &&
      starts_with(c.identifier, kBioPrefix))
    return c.identifier.substr(kBioPrefix.size());
  return {};
}

namespace {

bool block_accepts(Block b, FeatureType t) {
  const bool network = t == FeatureType::network;
  switch (b) {
    case Block::retweet_edge:
    case Block::directed_edge:
      return network;
    case Block::tweet_term:
      return !network && t != FeatureType::lexicon_category && t != FeatureType::meta;
    case Block::bio_term:
      return !network && t != FeatureType::meta;
    case Block::profile_meta:
      return t == FeatureType::meta || t == FeatureType::url || t == FeatureType::emoji;
  }
  return false;
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::vector<UserId> rows, std::vector<FeatureColumn> columns,
                             std::vector<std::vector<Cell>> cells, std::optional<TimeRange> period)
    : rows_(std::move(rows)), columns_(std::move(columns)), period_(period) {
  if (cells.size() != rows_.size()) throw Error("FeatureMatrix: cell rows do not match row count");
  auto has_space = [](std::string_view s) {
    return s.empty() || s.find_first_of(" \t\r\n") != std::string_view::npos;
  };
  for (const UserId& r : rows_)
    if (has_space(r)) throw Error("FeatureMatrix: row identifier '" + r + "' is empty or has whitespace");
  {
    std::set<std::string_view> ids;
    for (const FeatureColumn& c : columns_) {
      if (has_space(c.identifier))
        throw Error("FeatureMatrix: column identifier '" + c.identifier + "' is empty or has whitespace");
      if (!ids.insert(c.identifier).second)
        throw Error("FeatureMatrix: duplicate column identifier '" + c.identifier + "'");
      if (!block_accepts(c.block, c.type))
        throw Error("FeatureMatrix: column '" + c.identifier + "' has type " +
                    std::string(to_string(c.type)) + " inconsistent with block " +
                    std::string(to_string(c.block)));
    }
  }
  offsets_.assign(1, 0);
  for (auto& row : cells) {
    std::sort(row.begin(), row.end(), [](const Cell& a, const Cell& b) { return a.column < b.column; });
    for (std::size_t k = 0; k < row.size(); ++k) {
      const Cell& c = row[k];
      if (c.column >= columns_.size()) throw Error("FeatureMatrix: column index out of range");
      if (k > 0 && row[k - 1].column == c.column) throw Error("FeatureMatrix: duplicate cell");
      if (c.value < 0.0) throw Error("FeatureMatrix: negative cell value");
      if (c.value == 0.0) continue;
      col_index_.push_back(c.column);
      values_.push_back(c.value);
    }
    offsets_.push_back(values_.size());
  }
}

std::span<const std::uint32_t> FeatureMatrix::row_columns(std::size_t row) const {
  return {col_index_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

std::span<const double> FeatureMatrix::row_values(std::size_t row) const {
  return {values_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

double FeatureMatrix::at(std::size_t row, std::size_t column) const {
  const auto cols = row_columns(row);
  const auto it = std::lower_bound(cols.begin(), cols.end(), column);
  if (it == cols.end() || *it != column) return 0.0;
  return row_values(row)[static_cast<std::size_t>(it - cols.begin())];
}

std::optional<std::size_t> FeatureMatrix::find_row(const UserId& id) const {
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (rows_[i] == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> FeatureMatrix::find_column(std::string_view identifier) const {
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].identifier == identifier) return j;
  return std::nullopt;
}

std::vector<std::vector<double>> FeatureMatrix::dense() const {
  std::vector<std::vector<double>> out(n_rows(), std::vector<double>(n_cols(), 0.0));
  for (std::size_t i = 0; i < n_rows(); ++i) {
    const auto cols = row_columns(i);
    const auto vals = row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) out[i][cols[k]] = vals[k];
  }
  return out;
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = '_';
  return s;
}

struct BlockBuilder {
  Block block;
  // identifier -> (type, per-user value)
  std::map<std::string, std::pair<FeatureType, std::map<UserId, double>>> columns;

  void add(const std::string& id, FeatureType type, const UserId& user, double value) {
    auto& col = columns.try_emplace(id, type, std::map<UserId, double>{}).first->second;
    col.second[user] += value;
  }
};

void add_edge_block(BlockBuilder& b, const InteractionGraph& g, const std::set<UserId>& row_set,
                    bool retweets, std::string_view prefix, int min_indegree) {
  std::map<UserId, std::set<UserId>> sources;
  for (const Edge& e : g.edges) {
    if ((e.kind == InteractionKind::retweet) != retweets) continue;
    if (row_set.count(e.source) == 0) continue;
    sources[e.target].insert(e.source);
  }
  for (const Edge& e : g.edges) {
    if ((e.kind == InteractionKind::retweet) != retweets) continue;
    if (row_set.count(e.source) == 0) continue;
    if (static_cast<int>(sources[e.target].size()) < min_indegree) continue;
    b.add(std::string(prefix) + e.target, FeatureType::network, e.source,
          static_cast<double>(e.weight));
  }
}

}  // namespace

FeatureMatrix build_matrix(const MatrixInputs& in, const MatrixOptions& options) {
  if (!in.corpus || !in.tweet_counts || !in.bio_counts || !in.lexicon_counts || !in.graph)
    throw Error("build_matrix: missing input");
  const Corpus& corpus = *in.corpus;

  for (const UserId& u : in.graph->nodes)
    if (corpus.users.count(u) == 0)
      throw Error("build_matrix: graph node " + u + " is not a corpus user");

  std::set<UserId> row_set;
  if (in.period) {
    for (const MicroPost& p : corpus.posts)
      if (in.period->contains(p.timestamp)) row_set.insert(p.author_id);
  } else {
    for (const auto& [id, u] : corpus.users) row_set.insert(id);
  }

  BlockBuilder tweet{Block::tweet_term, {}}, bio{Block::bio_term, {}}, meta{Block::profile_meta, {}},
      rt{Block::retweet_edge, {}}, directed{Block::directed_edge, {}};

  for (const auto& [user, terms] : in.tweet_counts->counts) {
    if (row_set.count(user) == 0) continue;
    for (const auto& [term, count] : terms)
      tweet.add(term, feature_type_of(in.tweet_counts->vocabulary.at(term)), user, count);
  }
  for (const auto& [user, terms] : in.bio_counts->counts) {
    if (row_set.count(user) == 0) continue;
    for (const auto& [term, count] : terms)
      bio.add(std::string(kBioPrefix) + term, feature_type_of(in.bio_counts->vocabulary.at(term)),
              user, count);
  }
  for (const auto& [user, cats] : *in.lexicon_counts) {
    if (row_set.count(user) == 0) continue;
    for (const auto& [cat, count] : cats)
      if (count > 0)
        bio.add(std::string(kLexiconPrefix) + cat, FeatureType::lexicon_category, user, count);
  }

  for (const UserId& user : row_set) {
    const UserProfile& p = corpus.users.at(user);
    if (p.bio) {
      int emojis = 0;
      for (const Token& t : tokenize(*p.bio)) emojis += t.kind == TokenKind::emoji;
      if (emojis > 0) meta.add(std::string(kBioEmojiCount), FeatureType::meta, user, emojis);
    }
    if (p.url && !p.url->empty()) {
      const std::string domain = registrable_domain(*p.url);
      if (!domain.empty()) meta.columns.try_emplace("home_page:" + domain, FeatureType::url,
                                                    std::map<UserId, double>{});
      if (!domain.empty()) meta.columns.at("home_page:" + domain).second[user] = 1.0;
    }
    if (p.timezone && !p.timezone->empty()) {
      const std::string id = "timezone:" + sanitize(*p.timezone);
      meta.columns.try_emplace(id, FeatureType::meta, std::map<UserId, double>{});
      meta.columns.at(id).second[user] = 1.0;
    }
    for (const Token& t : tokenize(p.full_name)) {
      if (t.kind != TokenKind::emoji) continue;
      const std::string id = "name:" + t.surface;
      meta.columns.try_emplace(id, FeatureType::emoji, std::map<UserId, double>{});
      meta.columns.at(id).second[user] = 1.0;
    }
  }

  add_edge_block(rt, *in.graph, row_set, true, kRetweetPrefix, options.edge_min_indegree);
  add_edge_block(directed, *in.graph, row_set, false, kDirectedPrefix, options.edge_min_indegree);

  std::vector<UserId> rows(row_set.begin(), row_set.end());
  std::unordered_map<UserId, std::size_t> row_index;
  for (std::size_t i = 0; i < rows.size(); ++i) row_index.emplace(rows[i], i);

  std::vector<FeatureColumn> columns;
  std::vector<std::vector<Cell>> cells(rows.size());
  for (BlockBuilder* b : {&tweet, &bio, &meta, &rt, &directed}) {
    for (const auto& [id, col] : b->columns) {
      const auto index = static_cast<std::uint32_t>(columns.size());
      columns.push_back(FeatureColumn{id, b->block, col.first});
      for (const auto& [user, value] : col.second)
        if (value > 0.0) cells[row_index.at(user)].push_back(Cell{index, value});
    }
  }
  return FeatureMatrix(std::move(rows), std::move(columns), std::move(cells), in.period);
}

FeatureMatrix featurize(const Corpus& corpus, const Lexicon& lexicon, const Stopwords& stopwords,
                        const FeaturizeOptions& options, std::optional<TimeRange> period) {
  const Corpus scoped = period ? restrict_period(corpus, *period) : corpus;
  TermCountOptions tweet_opts;
  tweet_opts.count_retweets = options.count_retweets;
  const TermCounts tweet = term_counts(scoped, TermScope::tweet, options.min_tweet_term, stopwords, tweet_opts);
  // Bio terms are thresholded over the full population so both periods share them.
  const TermCounts bio = term_counts(corpus, TermScope::bio, options.min_bio_term, stopwords);
  std::map<UserId, std::vector<Token>> bio_tokens;
  for (const auto& [id, u] : scoped.users) bio_tokens[id] = u.bio ? tokenize(*u.bio) : std::vector<Token>{};
  const CategoryCounts lex = lexicon_counts(bio_tokens, lexicon);
  const InteractionGraph graph = build_interaction_graph(scoped);

  MatrixInputs in;
  in.corpus = &scoped;
  in.tweet_counts = &tweet;
  in.bio_counts = &bio;
  in.lexicon_counts = &lex;
  in.graph = &graph;
  in.period = period;
  return build_matrix(in, options.matrix);
}

FeatureMatrix drop_columns(const FeatureMatrix& m, const std::set<std::string>& drop) {
  std::vector<std::int64_t> remap(m.n_cols(), -1);
  std::vector<FeatureColumn> columns;
  for (std::size_t j = 0; j < m.n_cols(); ++j) {
    if (drop.count(m.columns()[j].identifier) != 0) continue;
    remap[j] = static_cast<std::int64_t>(columns.size());
    columns.push_back(m.columns()[j]);
  }
  std::vector<std::vector<Cell>> cells(m.n_rows());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    const auto cols = m.row_columns(i);
    const auto vals = m.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (remap[cols[k]] >= 0) cells[i].push_back(Cell{static_cast<std::uint32_t>(remap[cols[k]]), vals[k]});
  }
  return FeatureMatrix(m.rows(), std::move(columns), std::move(cells), m.period());
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
  std::vector<UserId> ids;
  std::vector<std::vector<Cell>> cells;
  for (std::size_t r : rows) {
    if (r >= m.n_rows()) throw Error("select_rows: row index out of range");
    ids.push_back(m.rows()[r]);
    std::vector<Cell> row;
    const auto cols = m.row_columns(r);
    const auto vals = m.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) row.push_back(Cell{cols[k], vals[k]});
    cells.push_back(std::move(row));
  }
  return FeatureMatrix(std::move(ids), m.columns(), std::move(cells), m.period());
}

std::pair<FeatureMatrix, FeatureMatrix> align_rows(const FeatureMatrix& a, const FeatureMatrix& b) {
  std::map<UserId, std::size_t> ia, ib;
  for (std::size_t i = 0; i < a.n_rows(); ++i) ia.emplace(a.rows()[i], i);
  for (std::size_t i = 0; i < b.n_rows(); ++i) ib.emplace(b.rows()[i], i);
  std::vector<std::size_t> ra, rb;
  for (const auto& [id, i] : ia) {
    auto it = ib.find(id);
    if (it == ib.end()) continue;
    ra.push_back(i);
    rb.push_back(it->second);
  }
  return {select_rows(a, ra), select_rows(b, rb)};
}

std::string serialize_matrix(const FeatureMatrix& m) {
  std::string out = "#stancelab-matrix 1\n";
  if (m.period())
    out += "#period " + std::to_string(m.period()->start) + " " + std::to_string(m.period()->end) + "\n";
  for (std::size_t i = 0; i < m.n_rows(); ++i) out += "#row " + std::to_string(i) + " " + m.rows()[i] + "\n";
  for (std::size_t j = 0; j < m.n_cols(); ++j) {
    const FeatureColumn& c = m.columns()[j];
    out += "#col " + std::to_string(j) + " " + c.identifier + " " + std::string(to_string(c.block)) +
           " " + std::string(to_string(c.type)) + "\n";
  }
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    const auto cols = m.row_columns(i);
    const auto vals = m.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      out += std::to_string(i) + " " + std::to_string(cols[k]) + " " + exact_decimal(vals[k]) + "\n";
  }
  return out;
}

FeatureMatrix parse_matrix(std::string_view text) {
  std::vector<UserId> rows;
  std::vector<FeatureColumn> columns;
  std::vector<std::vector<Cell>> cells;
  std::optional<TimeRange> period;
  bool versioned = false;
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    if (raw.empty()) continue;
    const std::vector<std::string> f = split(raw, ' ');
    auto fail = [&](const std::string& why) {
      return Error("matrix line " + std::to_string(line_no) + ": " + why);
    };
    if (f[0] == "#stancelab-matrix") {
      if (f.size() != 2 || f[1] != "1") throw fail("unsupported matrix version");
      versioned = true;
    } else if (f[0] == "#period") {
      if (f.size() != 3) throw fail("bad #period");
      period = TimeRange{parse_int(f[1]), parse_int(f[2])};
    } else if (f[0] == "#row") {
      if (f.size() != 3 || static_cast<std::size_t>(parse_int(f[1])) != rows.size()) throw fail("bad #row");
      rows.push_back(f[2]);
    } else if (f[0] == "#col") {
      if (f.size() != 5 || static_cast<std::size_t>(parse_int(f[1])) != columns.size()) throw fail("bad #col");
      columns.push_back(FeatureColumn{f[2], block_from_string(f[3]), feature_type_from_string(f[4])});
    } else {
      if (f.size() != 3) throw fail("expected 'row col value'");
      const auto r = static_cast<std::size_t>(parse_int(f[0]));
      const auto c = static_cast<std::uint32_t>(parse_int(f[1]));
      if (r >= rows.size()) throw fail("row index out of range");
      cells.resize(rows.size());
      cells[r].push_back(Cell{c, parse_double(f[2])});
    }
  }
  if (!versioned) throw Error("matrix: missing #stancelab-matrix header");
  cells.resize(rows.size());
  return FeatureMatrix(std::move(rows), std::move(columns), std::move(cells), period);
}

void save_matrix(const FeatureMatrix& m, const std::string& path) {
  write_file_atomic(path, serialize_matrix(m));
}

FeatureMatrix load_matrix(const std::string& path) { return parse_matrix(read_file(path)); }

}  // namespace stancelab

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stancelab/common.hpp"
#include "stancelab/corpus.hpp"
#include "stancelab/textproc.hpp"

namespace stancelab {

enum class Block { tweet_term, bio_term, profile_meta, retweet_edge, directed_edge };
enum class FeatureType { emoji, hashtag, mention, url, word, lexicon_category, meta, network };

std::string_view to_string(Block block);
std::string_view to_string(FeatureType type);
Block block_from_string(std::string_view text);
FeatureType feature_type_from_string(std::string_view text);
FeatureType feature_type_of(TokenKind kind);

struct FeatureColumn {
  std::string identifier;
  Block block = Block::tweet_term;
  FeatureType type = FeatureType::word;

  bool operator==(const FeatureColumn&) const = default;
};

/// Term a term-block column was built from ("profile:#provida" -> "#provida");
/// empty for meta and edge columns.
std::string column_term(const FeatureColumn& column);

inline constexpr std::string_view kBioPrefix = "profile:";
inline constexpr std::string_view kLexiconPrefix = "lexicon:";
inline constexpr std::string_view kRetweetPrefix = "rt:";
inline constexpr std::string_view kDirectedPrefix = "to:";
inline constexpr std::string_view kBioEmojiCount = "n_emojis_bio";

struct Cell {
  std::uint32_t column = 0;
  double value = 0.0;
  bool operator==(const Cell&) const = default;
};

/// Sparse user x feature matrix in row-compressed form. Only values > 0 are
/// stored; each row's cells are sorted by column index.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  /// Builds from per-row cell lists. Drops zeros, sorts and validates indices.
  FeatureMatrix(std::vector<UserId> rows, std::vector<FeatureColumn> columns,
                std::vector<std::vector<Cell>> cells,
                std::optional<TimeRange> period = std::nullopt);

  std::size_t n_rows() const { return rows_.size(); }
  std::size_t n_cols() const { return columns_.size(); }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<UserId>& rows() const { return rows_; }
  const std::vector<FeatureColumn>& columns() const { return columns_; }
  const std::optional<TimeRange>& period() const { return period_; }

  std::span<const std::uint32_t> row_columns(std::size_t row) const;
  std::span<const double> row_values(std::size_t row) const;
  double at(std::size_t row, std::size_t column) const;

  std::optional<std::size_t> find_row(const UserId& id) const;
  std::optional<std::size_t> find_column(std::string_view identifier) const;

  std::vector<std::vector<double>> dense() const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::vector<UserId> rows_;
  std::vector<FeatureColumn> columns_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> col_index_;
  std::vector<double> values_;
  std::optional<TimeRange> period_;
};

struct MatrixOptions {
  /// Edge columns exist only for targets reached by at least this many
  /// distinct source users within the edge block.
  int edge_min_indegree = 5;
};

struct MatrixInputs {
  const Corpus* corpus = nullptr;
  const TermCounts* tweet_counts = nullptr;
  const TermCounts* bio_counts = nullptr;
  const CategoryCounts* lexicon_counts = nullptr;
  const InteractionGraph* graph = nullptr;
  std::optional<TimeRange> period;
};

/// Concatenates the term, bio, profile-meta and edge blocks. With a period,
/// rows are the users who posted inside it and the inputs must already be
/// restricted to it.
FeatureMatrix build_matrix(const MatrixInputs& inputs, const MatrixOptions& options = {});

struct FeaturizeOptions {
  int min_tweet_term = 50;
  int min_bio_term = 10;
  bool count_retweets = true;
  MatrixOptions matrix;
};

/// Computes all inputs from the corpus and calls build_matrix.
FeatureMatrix featurize(const Corpus& corpus, const Lexicon& lexicon, const Stopwords& stopwords,
                        const FeaturizeOptions& options,
                        std::optional<TimeRange> period = std::nullopt);

FeatureMatrix drop_columns(const FeatureMatrix& matrix, const std::set<std::string>& drop);
FeatureMatrix select_rows(const FeatureMatrix& matrix, std::span<const std::size_t> rows);
std::pair<FeatureMatrix, FeatureMatrix> align_rows(const FeatureMatrix& a, const FeatureMatrix& b);

std::string serialize_matrix(const FeatureMatrix& matrix);
FeatureMatrix parse_matrix(std::string_view text);
void save_matrix(const FeatureMatrix& matrix, const std::string& path);
FeatureMatrix load_matrix(const std::string& path);

}  // namespace stancelab

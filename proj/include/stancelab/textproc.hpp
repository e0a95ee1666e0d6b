#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/common.hpp"

namespace stancelab {

struct Corpus;

enum class TokenKind { word, hashtag, mention, url, emoji };

std::string_view to_string(TokenKind kind);
TokenKind token_kind_from_string(std::string_view text);

struct Token {
  TokenKind kind = TokenKind::word;
  /// Lowercased NFC text; hashtags keep '#', mentions keep '@', URLs verbatim.
  std::string surface;
  /// Registrable domain for URLs; empty otherwise.
  std::string domain;

  /// The string a token is counted under (the domain for URLs).
  const std::string& term() const { return kind == TokenKind::url ? domain : surface; }
  bool operator==(const Token&) const = default;
};

/// Splits micro-post text into typed tokens. Pure and deterministic: words
/// are lowercased and NFC-normalized, punctuation is dropped, and every
/// hashtag, mention, URL and emoji grapheme cluster becomes one token.
std::vector<Token> tokenize(std::string_view text);

/// Lowercase + NFC, no tokenization. Used for rule and lexicon entries.
std::string normalize_text(std::string_view text);

/// "https://www.lanacion.com.ar/x" -> "lanacion.com.ar"
std::string registrable_domain(std::string_view url);

using Stopwords = std::set<std::string>;

/// category -> trigger terms (normalized).
struct Lexicon {
  std::map<std::string, std::set<std::string>> categories;
};

enum class TermScope { tweet, bio };

struct TermCounts {
  TermScope scope = TermScope::tweet;
  int min_count = 1;
  /// Retained terms and the token kind they came from.
  std::map<std::string, TokenKind> vocabulary;
  std::map<UserId, std::map<std::string, int>> counts;

  std::size_t total() const;
};

struct TermCountOptions {
  /// Count retweeted text toward the retweeter (tweet scope only).
  bool count_retweets = true;
  /// Optional window; posts outside it are skipped (tweet scope only).
  std::optional<TimeRange> period;
};

TermCounts term_counts(const Corpus& corpus, TermScope scope, int min_count,
                       const Stopwords& stopwords, const TermCountOptions& options = {});

using CategoryCounts = std::map<UserId, std::map<std::string, int>>;

/// Trigger hits per category per user. Every category is present for every
/// user (zeros included); a term in two categories increments both.
CategoryCounts lexicon_counts(const std::map<UserId, std::vector<Token>>& bio_tokens,
                              const Lexicon& lexicon);

Lexicon parse_lexicon(std::string_view text);
Lexicon load_lexicon(const std::string& path);
Stopwords parse_stopwords(std::string_view text);
Stopwords load_stopwords(const std::string& path);

}  // namespace stancelab

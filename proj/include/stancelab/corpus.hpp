#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stancelab/common.hpp"

namespace stancelab {

enum class InteractionKind { retweet, mention, reply, quote };

std::string_view to_string(InteractionKind kind);
InteractionKind interaction_kind_from_string(std::string_view text);

struct Interaction {
  UserId target;
  InteractionKind kind = InteractionKind::mention;
  bool operator==(const Interaction&) const = default;
};

struct MicroPost {
  std::string post_id;
  UserId author_id;
  Timestamp timestamp = 0;
  std::string text;
  std::optional<UserId> retweet_of;
  /// Mentions, reply and quote targets. A retweet is stored in retweet_of only.
  std::vector<Interaction> directed_at;

  bool operator==(const MicroPost&) const = default;
};

struct UserProfile {
  UserId user_id;
  std::string screen_name;
  std::string full_name;
  std::optional<std::string> location_text;
  std::optional<std::string> bio;
  std::optional<std::string> url;
  /// Profile time-zone name when the export carries one ("Santiago").
  std::optional<std::string> timezone;
  std::int64_t n_posts = 0;
  std::int64_t n_followers = 0;
  std::int64_t n_friends = 0;
  Timestamp account_created = 0;

  bool operator==(const UserProfile&) const = default;
};

/// Posts sorted by (timestamp, post_id); every author resolves in users.
struct Corpus {
  std::vector<MicroPost> posts;
  std::map<UserId, UserProfile> users;
  /// Unset only for an empty corpus loaded without an explicit range.
  std::optional<TimeRange> time_range;

  bool operator==(const Corpus&) const = default;
};

struct LoadOptions {
  std::optional<TimeRange> time_range;
  bool allow_self_retweet = false;
  /// Fraction of malformed lines above which loading fails.
  double max_malformed_fraction = 0.10;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t malformed = 0;
  std::size_t out_of_range = 0;
  std::vector<std::size_t> malformed_lines;  // 1-based line numbers
  std::vector<std::string> warnings;
};

Corpus load_corpus(const std::string& path, const LoadOptions& options = {},
                   LoadReport* report = nullptr);
Corpus parse_corpus(std::string_view content, const LoadOptions& options = {},
                    LoadReport* report = nullptr);
/// Line-delimited JSON, author profile embedded on each author's first post.
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

/// Sorts posts, recomputes the time range if unset, and validates invariants.
void finalize_corpus(Corpus& corpus);

/// A term or phrase compiled against the tokenizer.
struct TermPattern {
  std::vector<std::string> tokens;  // normalized token terms, '#' stripped
};
TermPattern compile_term(std::string_view term);
/// Token-sequence containment; hashtags match with and without '#'.
bool matches(const TermPattern& pattern, const std::vector<std::string>& post_terms);

Corpus filter_relevant(const Corpus& corpus, const std::vector<std::string>& include_terms,
                       const std::vector<std::string>& exclude_patterns);

struct Edge {
  UserId source;
  UserId target;
  InteractionKind kind = InteractionKind::mention;
  std::int64_t weight = 1;
  bool operator==(const Edge&) const = default;
};

struct InteractionGraph {
  std::set<UserId> nodes;
  /// Sorted by (source, target, kind).
  std::vector<Edge> edges;
};

InteractionGraph build_interaction_graph(const Corpus& corpus,
                                         std::optional<TimeRange> period = std::nullopt);

/// Largest weakly connected component; self loops ignored. Ties go to the
/// component holding the smallest user identifier.
std::set<UserId> largest_connected_component(const InteractionGraph& graph);

Corpus restrict_users(const Corpus& corpus, const std::set<UserId>& keep);
/// Posts inside the window; users without posts in it are dropped.
Corpus restrict_period(const Corpus& corpus, const TimeRange& period);

struct WeekCount {
  IsoWeek week;
  std::int64_t count = 0;
};

/// One entry per ISO week from the week of time_range.start to the week of
/// time_range.end, zero weeks included.
std::vector<WeekCount> weekly_volume(const Corpus& corpus);

std::vector<std::string> load_term_list(const std::string& path);
std::vector<std::string> parse_term_list(std::string_view text);

}  // namespace stancelab

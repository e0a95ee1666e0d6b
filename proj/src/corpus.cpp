#include "stancelab/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "stancelab/textproc.hpp"

namespace stancelab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::retweet: return "retweet";
    case InteractionKind::mention: return "mention";
    case InteractionKind::reply: return "reply";
    case InteractionKind::quote: return "quote";
  }
  return "mention";
}

InteractionKind interaction_kind_from_string(std::string_view text) {
  if (text == "retweet") return InteractionKind::retweet;
  if (text == "mention") return InteractionKind::mention;
  if (text == "reply") return InteractionKind::reply;
  if (text == "quote") return InteractionKind::quote;
  throw Error("unknown interaction kind '" + std::string(text) + "'");
}

namespace {

std::string id_field(const json& j, const char* key) {
  const json& v = j.at(key);
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.empty()) throw Error(std::string("empty identifier in '") + key + "'");
    if (s.find_first_of(" \t\r\n") != std::string::npos)
      throw Error(std::string("whitespace in identifier '") + key + "'");
    return s;
  }
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(std::string("field '") + key + "' must be a string or integer");
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

std::int64_t count_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return 0;
  const std::int64_t v = it->get<std::int64_t>();
  if (v < 0) throw Error(std::string("negative count in '") + key + "'");
  return v;
}

UserProfile parse_profile(const json& j, const UserId& author) {
  if (!j.is_object()) throw Error("author must be an object");
  UserProfile p;
  p.user_id = j.contains("user_id") ? id_field(j, "user_id") : author;
  if (p.user_id != author) throw Error("author.user_id does not match author_id");
  p.screen_name = j.value("screen_name", std::string());
  p.full_name = j.value("full_name", std::string());
  p.location_text = optional_string(j, "location");
  p.bio = optional_string(j, "bio");
  p.url = optional_string(j, "url");
  p.timezone = optional_string(j, "timezone");
  p.n_posts = count_field(j, "n_posts");
  p.n_followers = count_field(j, "n_followers");
  p.n_friends = count_field(j, "n_friends");
  p.account_created = j.value("account_created", Timestamp{0});
  return p;
}

MicroPost parse_post(const json& j, bool allow_self_retweet) {
  if (!j.is_object()) throw Error("record must be a JSON object");
  MicroPost post;
  post.post_id = id_field(j, "post_id");
  post.author_id = id_field(j, "author_id");
  const json& ts = j.at("timestamp");
  if (!ts.is_number_integer()) throw Error("timestamp must be an integer");
  post.timestamp = ts.get<Timestamp>();
  post.text = j.at("text").get<std::string>();
  if (auto it = j.find("retweet_of"); it != j.end() && !it->is_null())
    post.retweet_of = id_field(j, "retweet_of");
  if (auto it = j.find("directed_at"); it != j.end() && !it->is_null()) {
    for (const json& d : *it) {
      Interaction in;
      in.target = id_field(d, "user");
      in.kind = interaction_kind_from_string(d.at("kind").get<std::string>());
      if (in.kind == InteractionKind::retweet) {
        if (post.retweet_of && *post.retweet_of != in.target)
          throw Error("retweet target disagrees with retweet_of");
        post.retweet_of = in.target;
        continue;
      }
      post.directed_at.push_back(std::move(in));
    }
  }
  if (post.retweet_of && *post.retweet_of == post.author_id && !allow_self_retweet)
    throw Error("self retweet");
  return post;
}

}  // namespace

void finalize_corpus(Corpus& corpus) {
  std::stable_sort(corpus.posts.begin(), corpus.posts.end(),
                   [](const MicroPost& a, const MicroPost& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.post_id < b.post_id;
                   });
  for (const MicroPost& p : corpus.posts)
    if (corpus.users.count(p.author_id) == 0)
      throw Error("post " + p.post_id + " has unknown author " + p.author_id);
  if (!corpus.time_range && !corpus.posts.empty())
    corpus.time_range = TimeRange{corpus.posts.front().timestamp, corpus.posts.back().timestamp};
}

Corpus parse_corpus(std::string_view content, const LoadOptions& options, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};

  Corpus corpus;
  corpus.time_range = options.time_range;
  std::map<UserId, UserProfile> profiles;
  std::set<std::string> seen_ids;

  std::size_t begin = 0;
  std::size_t line_no = 0;
  while (begin < content.size()) {
    std::size_t end = content.find('\n', begin);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(begin, end - begin);
    begin = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    ++rep.lines;
    try {
      const json j = json::parse(line);
      MicroPost post = parse_post(j, options.allow_self_retweet);
      if (auto it = j.find("author"); it != j.end() && !it->is_null())
        profiles.try_emplace(post.author_id, parse_profile(*it, post.author_id));
      if (profiles.count(post.author_id) == 0)
        throw Error("first post of author " + post.author_id + " lacks a profile");
      if (!seen_ids.insert(post.post_id).second) throw Error("duplicate post_id " + post.post_id);
      if (options.time_range && !options.time_range->contains(post.timestamp)) {
        ++rep.out_of_range;
        continue;
      }
      corpus.posts.push_back(std::move(post));
    } catch (const std::exception&) {
      ++rep.malformed;
      if (rep.malformed_lines.size() < 10) rep.malformed_lines.push_back(line_no);
    }
  }

  if (rep.lines > 0 &&
      static_cast<double>(rep.malformed) > options.max_malformed_fraction * static_cast<double>(rep.lines)) {
    std::string msg = "corpus: " + std::to_string(rep.malformed) + " of " +
                      std::to_string(rep.lines) + " lines malformed; first offending lines:";
    for (std::size_t l : rep.malformed_lines) msg += " " + std::to_string(l);
    throw Error(msg);
  }

  for (const MicroPost& p : corpus.posts) corpus.users.try_emplace(p.author_id, profiles.at(p.author_id));
  finalize_corpus(corpus);

  std::map<UserId, Timestamp> earliest;
  for (const MicroPost& p : corpus.posts) earliest.try_emplace(p.author_id, p.timestamp);
  for (const auto& [id, t] : earliest)
    if (corpus.users.at(id).account_created > t)
      rep.warnings.push_back("user " + id + " created after their earliest post");
  return corpus;
}

Corpus load_corpus(const std::string& path, const LoadOptions& options, LoadReport* report) {
  return parse_corpus(read_file(path), options, report);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  std::set<UserId> emitted;
  for (const MicroPost& p : corpus.posts) {
    ordered_json j;
    j["post_id"] = p.post_id;
    j["author_id"] = p.author_id;
    j["timestamp"] = p.timestamp;
    j["text"] = p.text;
    j["retweet_of"] = p.retweet_of ? ordered_json(*p.retweet_of) : ordered_json(nullptr);
    ordered_json directed = ordered_json::array();
    for (const Interaction& in : p.directed_at)
      directed.push_back({{"user", in.target}, {"kind", std::string(to_string(in.kind))}});
    j["directed_at"] = directed;
    if (emitted.insert(p.author_id).second) {
      const UserProfile& u = corpus.users.at(p.author_id);
      ordered_json a;
      a["user_id"] = u.user_id;
      a["screen_name"] = u.screen_name;
      a["full_name"] = u.full_name;
      a["location"] = u.location_text ? ordered_json(*u.location_text) : ordered_json(nullptr);
      a["bio"] = u.bio ? ordered_json(*u.bio) : ordered_json(nullptr);
      a["url"] = u.url ? ordered_json(*u.url) : ordered_json(nullptr);
      a["timezone"] = u.timezone ? ordered_json(*u.timezone) : ordered_json(nullptr);
      a["n_posts"] = u.n_posts;
      a["n_followers"] = u.n_followers;
      a["n_friends"] = u.n_friends;
      a["account_created"] = u.account_created;
      j["author"] = a;
    }
    out += j.dump(-1, ' ', false, json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

namespace {

std::string match_term(const Token& t) {
  if (t.kind == TokenKind::hashtag) return t.surface.substr(1);
  return t.term();
}

std::vector<std::string> match_terms(std::string_view text) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(text)) out.push_back(match_term(t));
  return out;
}

}  // namespace

TermPattern compile_term(std::string_view term) {
  TermPattern p;
  p.tokens = match_terms(term);
  return p;
}

bool matches(const TermPattern& pattern, const std::vector<std::string>& post_terms) {
  if (pattern.tokens.empty() || pattern.tokens.size() > post_terms.size()) return false;
  return std::search(post_terms.begin(), post_terms.end(), pattern.tokens.begin(),
                     pattern.tokens.end()) != post_terms.end();
}

Corpus filter_relevant(const Corpus& corpus, const std::vector<std::string>& include_terms,
                       const std::vector<std::string>& exclude_patterns) {
  if (include_terms.empty()) throw Error("filter_relevant: include_terms must be non-empty");
  std::vector<TermPattern> include, exclude;
  for (const auto& t : include_terms) include.push_back(compile_term(t));
  for (const auto& t : exclude_patterns) exclude.push_back(compile_term(t));

  Corpus out;
  out.time_range = corpus.time_range;
  for (const MicroPost& p : corpus.posts) {
    const std::vector<std::string> terms = match_terms(p.text);
    const bool hit = std::any_of(include.begin(), include.end(),
                                 [&](const TermPattern& t) { return matches(t, terms); });
    if (!hit) continue;
    const bool excluded = std::any_of(exclude.begin(), exclude.end(),
                                      [&](const TermPattern& t) { return matches(t, terms); });
    if (excluded) continue;
    out.posts.push_back(p);
    out.users.try_emplace(p.author_id, corpus.users.at(p.author_id));
  }
  return out;
}

InteractionGraph build_interaction_graph(const Corpus& corpus, std::optional<TimeRange> period) {
  InteractionGraph g;
  std::map<std::tuple<UserId, UserId, InteractionKind>, std::int64_t> weights;
  for (const MicroPost& p : corpus.posts) {
    if (period && !period->contains(p.timestamp)) continue;
    g.nodes.insert(p.author_id);
    auto add = [&](const UserId& target, InteractionKind kind) {
      if (target == p.author_id || corpus.users.count(target) == 0) return;
      ++weights[{p.author_id, target, kind}];
    };
    if (p.retweet_of) add(*p.retweet_of, InteractionKind::retweet);
    for (const Interaction& in : p.directed_at) add(in.target, in.kind);
  }
  if (!period)
    for (const auto& [id, u] : corpus.users) g.nodes.insert(id);
  for (const auto& [key, w] : weights) {
    const auto& [s, t, k] = key;
    g.nodes.insert(t);
    g.edges.push_back(Edge{s, t, k, w});
  }
  return g;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent, size;
  explicit DisjointSets(std::size_t n) : parent(n), size(n, 1) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

}  // namespace

std::set<UserId> largest_connected_component(const InteractionGraph& graph) {
  if (graph.nodes.empty()) return {};
  std::vector<UserId> ids(graph.nodes.begin(), graph.nodes.end());
  std::unordered_map<UserId, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  DisjointSets ds(ids.size());
  for (const Edge& e : graph.edges) {
    if (e.source == e.target) continue;
    auto s = index.find(e.source), t = index.find(e.target);
    if (s == index.end() || t == index.end()) continue;
    ds.unite(s->second, t->second);
  }
  // ids are sorted, so the first node seen in a root's component is its minimum.
  std::size_t best_root = ds.find(0);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    const std::size_t r = ds.find(i);
    if (ds.size[r] > ds.size[best_root]) best_root = r;
  }
  std::set<UserId> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ds.find(i) == best_root) out.insert(ids[i]);
  return out;
}

Corpus restrict_users(const Corpus& corpus, const std::set<UserId>& keep) {
  Corpus out;
  out.time_range = corpus.time_range;
  for (const MicroPost& p : corpus.posts)
    if (keep.count(p.author_id) != 0) out.posts.push_back(p);
  for (const auto& [id, u] : corpus.users)
    if (keep.count(id) != 0) out.users.emplace(id, u);
  // Users kept but without posts are dropped from the user table too.
  std::set<UserId> authors;
  for (const MicroPost& p : out.posts) authors.insert(p.author_id);
  for (auto it = out.users.begin(); it != out.users.end();)
    it = authors.count(it->first) ? std::next(it) : out.users.erase(it);
  return out;
}

Corpus restrict_period(const Corpus& corpus, const TimeRange& period) {
  Corpus out;
  out.time_range = period;
  for (const MicroPost& p : corpus.posts)
    if (period.contains(p.timestamp)) {
      out.posts.push_back(p);
      out.users.try_emplace(p.author_id, corpus.users.at(p.author_id));
    }
  return out;
}

std::vector<WeekCount> weekly_volume(const Corpus& corpus) {
  std::vector<WeekCount> out;
  if (!corpus.time_range) return out;
  constexpr Timestamp kWeek = 7 * 86400;
  const Timestamp first = iso_week_start(corpus.time_range->start);
  const Timestamp last = iso_week_start(corpus.time_range->end);
  for (Timestamp w = first; w <= last; w += kWeek) out.push_back(WeekCount{iso_week(w), 0});
  for (const MicroPost& p : corpus.posts) {
    const Timestamp w = iso_week_start(p.timestamp);
    if (w < first || w > last) continue;
    ++out[static_cast<std::size_t>((w - first) / kWeek)].count;
  }
  return out;
}

std::vector<std::string> parse_term_list(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string& line : split(text, '\n')) {
    const std::string_view t = trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<std::string> load_term_list(const std::string& path) {
  return parse_term_list(read_file(path));
}

}  // namespace stancelab

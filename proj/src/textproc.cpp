#include "stancelab/textproc.hpp"

#include <memory>

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "stancelab/corpus.hpp"

namespace stancelab {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::word: return "word";
    case TokenKind::hashtag: return "hashtag";
    case TokenKind::mention: return "mention";
    case TokenKind::url: return "url";
    case TokenKind::emoji: return "emoji";
  }
  return "word";
}

TokenKind token_kind_from_string(std::string_view text) {
  if (text == "word") return TokenKind::word;
  if (text == "hashtag") return TokenKind::hashtag;
  if (text == "mention") return TokenKind::mention;
  if (text == "url") return TokenKind::url;
  if (text == "emoji") return TokenKind::emoji;
  throw Error("unknown token kind '" + std::string(text) + "'");
}

namespace {

const icu::Normalizer2& nfc() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    return n;
  }();
  return *instance;
}

icu::BreakIterator& grapheme_iterator() {
  thread_local std::unique_ptr<icu::BreakIterator> it = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> bi(
        icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status)) throw Error("ICU grapheme iterator unavailable");
    return bi;
  }();
  return *it;
}

icu::UnicodeString to_nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) return s;
  return out;
}

std::string lower_utf8(icu::UnicodeString s) {
  s.toLower(icu::Locale::getRoot());
  std::string out;
  to_nfc(s).toUTF8String(out);
  return out;
}

std::string utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

bool has(UChar32 c, UProperty p) { return u_hasBinaryProperty(c, p) != 0; }

bool is_mark(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0; }

bool is_word_char(UChar32 c) {
  return has(c, UCHAR_ALPHABETIC) || u_isdigit(c) || is_mark(c);
}

enum class ClusterClass { space, word, emoji, other };

struct Cluster {
  int32_t begin = 0;
  int32_t end = 0;
  UChar32 first = 0;
  ClusterClass cls = ClusterClass::other;
};

bool is_emoji_cluster(const icu::UnicodeString& s, int32_t begin, int32_t end) {
  const UChar32 first = s.char32At(begin);
  bool pictographic = false;
  bool presentation_selector = false;
  for (int32_t i = begin; i < end; i += U16_LENGTH(s.char32At(i))) {
    const UChar32 c = s.char32At(i);
    if (has(c, UCHAR_EXTENDED_PICTOGRAPHIC) || has(c, UCHAR_REGIONAL_INDICATOR) ||
        has(c, UCHAR_EMOJI_PRESENTATION))
      pictographic = true;
    if (c == 0xFE0F || c == 0x20E3) presentation_selector = true;
  }
  if (pictographic) return true;
  // Keycaps and text-default symbols forced to emoji presentation.
  return presentation_selector && has(first, UCHAR_EMOJI);
}

std::vector<Cluster> segment(const icu::UnicodeString& s) {
  std::vector<Cluster> out;
  icu::BreakIterator& bi = grapheme_iterator();
  bi.setText(s);
  int32_t begin = bi.first();
  for (int32_t end = bi.next(); end != icu::BreakIterator::DONE; begin = end, end = bi.next()) {
    Cluster c;
    c.begin = begin;
    c.end = end;
    c.first = s.char32At(begin);
    if (u_isUWhiteSpace(c.first))
      c.cls = ClusterClass::space;
    else if (is_emoji_cluster(s, begin, end))
      c.cls = ClusterClass::emoji;
    else if (is_word_char(c.first))
      c.cls = ClusterClass::word;
    else
      c.cls = ClusterClass::other;
    out.push_back(c);
  }
  return out;
}

bool starts_with_ci(const icu::UnicodeString& s, int32_t at, const char* prefix) {
  const icu::UnicodeString p(prefix, -1, US_INV);
  if (s.length() - at < p.length()) return false;
  return s.caseCompare(at, p.length(), p, U_FOLD_CASE_DEFAULT) == 0;
}

bool is_url_start(const icu::UnicodeString& s, int32_t at) {
  return starts_with_ci(s, at, "http://") || starts_with_ci(s, at, "https://") ||
         starts_with_ci(s, at, "www.");
}

bool is_trailing_url_punct(UChar32 c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case ')': case ']': case '"': case '\'': case 0x2026:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string registrable_domain(std::string_view url) {
  std::string host(url);
  for (std::string_view scheme : {"https://", "http://"}) {
    if (host.size() >= scheme.size()) {
      std::string head = host.substr(0, scheme.size());
      for (auto& ch : head) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (head == scheme) {
        host = host.substr(scheme.size());
        break;
      }
    }
  }
  const std::size_t cut = host.find_first_of("/?#:");
  if (cut != std::string::npos) host.resize(cut);
  for (auto& ch : host) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (starts_with(host, "www.")) host = host.substr(4);

  const std::vector<std::string> labels = split(host, '.');
  if (labels.size() <= 2) return host;
  static const std::set<std::string> second_level = {"ac", "co", "com", "edu", "gob", "gov",
                                                     "int", "mil", "net", "nom", "org"};
  const std::size_t n = labels.size();
  const std::size_t keep =
      (labels[n - 1].size() == 2 && second_level.count(labels[n - 2]) != 0) ? 3 : 2;
  std::string out;
  for (std::size_t i = n - keep; i < n; ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  return lower_utf8(to_nfc(icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())))));
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  if (text.empty()) return tokens;
  const icu::UnicodeString s = to_nfc(icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))));
  const std::vector<Cluster> clusters = segment(s);
  const std::size_t n = clusters.size();

  auto word_run_end = [&](std::size_t from, bool allow_underscore) {
    std::size_t j = from;
    while (j < n && (clusters[j].cls == ClusterClass::word ||
                     (allow_underscore && clusters[j].first == '_')))
      ++j;
    return j;
  };

  std::size_t i = 0;
  while (i < n) {
    const Cluster& c = clusters[i];
    const bool at_boundary = i == 0 || clusters[i - 1].cls != ClusterClass::word;

    if (at_boundary && c.cls != ClusterClass::space && is_url_start(s, c.begin)) {
      std::size_t j = i;
      while (j < n && clusters[j].cls != ClusterClass::space) ++j;
      while (j > i + 1 && is_trailing_url_punct(clusters[j - 1].first)) --j;
      Token t;
      t.kind = TokenKind::url;
      t.surface = utf8(s.tempSubStringBetween(c.begin, clusters[j - 1].end));
      t.domain = registrable_domain(t.surface);
      tokens.push_back(std::move(t));
      i = j;
      continue;
    }

    if ((c.first == '#' || c.first == '@') && i + 1 < n &&
        (clusters[i + 1].cls == ClusterClass::word || clusters[i + 1].first == '_')) {
      const std::size_t j = word_run_end(i + 1, true);
      Token t;
      t.kind = c.first == '#' ? TokenKind::hashtag : TokenKind::mention;
      t.surface = lower_utf8(s.tempSubStringBetween(c.begin, clusters[j - 1].end));
      tokens.push_back(std::move(t));
      i = j;
      continue;
    }

    if (c.cls == ClusterClass::emoji) {
      Token t;
      t.kind = TokenKind::emoji;
      t.surface = utf8(s.tempSubStringBetween(c.begin, c.end));
      tokens.push_back(std::move(t));
      ++i;
      continue;
    }

    if (c.cls == ClusterClass::word) {
      const std::size_t j = word_run_end(i, false);
      Token t;
      t.kind = TokenKind::word;
      t.surface = lower_utf8(s.tempSubStringBetween(c.begin, clusters[j - 1].end));
      tokens.push_back(std::move(t));
      i = j;
      continue;
    }
    ++i;
  }
  return tokens;
}

std::size_t TermCounts::total() const {
  std::size_t sum = 0;
  for (const auto& [user, terms] : counts)
    for (const auto& [term, count] : terms) sum += static_cast<std::size_t>(count);
  return sum;
}

TermCounts term_counts(const Corpus& corpus, TermScope scope, int min_count,
                       const Stopwords& stopwords, const TermCountOptions& options) {
  if (min_count < 1) throw Error("term_counts: min_count must be >= 1");
  TermCounts out;
  out.scope = scope;
  out.min_count = min_count;

  std::map<std::string, TokenKind> kinds;
  std::map<std::string, std::int64_t> frequency;
  auto add = [&](const UserId& user, const std::vector<Token>& tokens) {
    for (const Token& t : tokens) {
      if (t.kind == TokenKind::word && stopwords.count(t.surface) != 0) continue;
      const std::string& term = t.term();
      if (term.empty()) continue;
      ++out.counts[user][term];
      ++frequency[term];
      kinds.emplace(term, t.kind);
    }
  };

  if (scope == TermScope::tweet) {
    for (const MicroPost& post : corpus.posts) {
      if (!options.count_retweets && post.retweet_of) continue;
      if (options.period && !options.period->contains(post.timestamp)) continue;
      add(post.author_id, tokenize(post.text));
    }
  } else {
    for (const auto& [id, profile] : corpus.users)
      if (profile.bio) add(id, tokenize(*profile.bio));
  }

  for (const auto& [term, freq] : frequency)
    if (freq >= min_count) out.vocabulary.emplace(term, kinds.at(term));

  for (auto uit = out.counts.begin(); uit != out.counts.end();) {
    auto& terms = uit->second;
    for (auto tit = terms.begin(); tit != terms.end();) {
      if (out.vocabulary.count(tit->first) == 0)
        tit = terms.erase(tit);
      else
        ++tit;
    }
    if (terms.empty())
      uit = out.counts.erase(uit);
    else
      ++uit;
  }
  return out;
}

CategoryCounts lexicon_counts(const std::map<UserId, std::vector<Token>>& bio_tokens,
                              const Lexicon& lexicon) {
  CategoryCounts out;
  for (const auto& [user, tokens] : bio_tokens) {
    auto& row = out[user];
    for (const auto& [category, triggers] : lexicon.categories) {
      int hits = 0;
      for (const Token& t : tokens)
        if (triggers.count(t.term()) != 0) ++hits;
      row[category] = hits;
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(begin, end - begin));
    begin = end + 1;
  }
  return out;
}

}  // namespace

Lexicon parse_lexicon(std::string_view text) {
  Lexicon lex;
  std::size_t line_no = 0;
  for (std::string_view line : lines_of(text)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw Error("lexicon line " + std::to_string(line_no) + ": expected category<TAB>term");
    const std::string category(trim(line.substr(0, tab)));
    const std::string term = normalize_text(trim(line.substr(tab + 1)));
    if (category.empty() || term.empty())
      throw Error("lexicon line " + std::to_string(line_no) + ": empty category or term");
    lex.categories[category].insert(term);
  }
  return lex;
}

Lexicon load_lexicon(const std::string& path) { return parse_lexicon(read_file(path)); }

Stopwords parse_stopwords(std::string_view text) {
  Stopwords out;
  for (std::string_view line : lines_of(text)) {
    const std::string_view t = trim(line);
    if (!t.empty()) out.insert(normalize_text(t));
  }
  return out;
}

Stopwords load_stopwords(const std::string& path) { return parse_stopwords(read_file(path)); }

}  // namespace stancelab

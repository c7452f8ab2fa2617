#include "pcig/prompt_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pcig/error.hpp"
#include "pcig/llm_client.hpp"

namespace pcig {

using json = nlohmann::json;

namespace {

using WordSet = std::set<std::string, std::less<>>;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const WordSet kDeterminers = {"a",     "an",   "the",   "this",    "these",   "those", "some", "his",
                              "her",   "its",  "their", "my",      "your",    "our",   "several",
                              "many",  "few",  "each",  "every",   "another", "any",   "no"};
const WordSet kAux = {"is", "are", "was", "were", "be", "been", "being", "am"};
const WordSet kConjunctions = {"and", "or", "but", "while", "plus"};
const WordSet kSkip = {"that",  "which", "who",  "whom", "whose", "where", "there", "here",  "very",
                       "also",  "together", "both", "all",  "just", "only", "then",  "as",    "of",
                       "not",   "other", "from", "for",  "to",   "&",    "so",    "such",  "than"};
const WordSet kPronouns = {"it", "them", "they", "him", "itself", "themselves"};
// Verbs that link two objects when they follow a noun phrase.
const WordSet kRelationVerbs = {
    "wearing",  "wears",    "wear",     "holding",  "holds",    "hold",     "riding",   "rides",
    "ride",     "carrying", "carries",  "eating",   "eats",     "drinking", "playing",  "plays",
    "chasing",  "chases",   "sitting",  "sits",     "standing", "stands",   "lying",    "lies",
    "laying",   "walking",  "walks",    "running",  "runs",     "jumping",  "flying",   "flies",
    "swimming", "hanging",  "hangs",    "leaning",  "looking",  "watching", "parked",   "placed",
    "perched",  "resting",  "sleeping", "climbing", "pulling",  "pushing",  "throwing", "catching",
    "kicking",  "driving",  "crossing", "feeding",  "hugging",  "petting",  "using",    "has",
    "have",     "having",   "covered",  "filled",   "surrounded", "facing", "floating", "grazing",
    "sits",     "stacked",  "topped",   "decorated"};
// "'X' written on Y": the cue governs the preceding phrase.
const WordSet kPostfixTextCues = {"written", "printed", "painted", "engraved", "inscribed", "stitched",
                                  "embroidered"};
// "a sign saying X": the cue governs the following phrase.
const WordSet kPrefixTextCues = {"saying", "says", "reads", "reading", "labeled", "labelled", "titled",
                                 "spelling", "spells"};
const WordSet kIngNouns = {"building", "ceiling", "painting", "clothing", "evening",  "morning", "ring",
                           "king",     "string",  "wing",     "thing",    "spring",   "pudding", "icing",
                           "frosting", "swing",   "sibling",  "wedding",  "bedding",  "railing", "awning",
                           "earring",  "sling",   "something", "nothing", "anything", "everything",
                           "lighting", "landing", "stuffing", "dumpling", "duckling", "seedling"};

const std::map<std::string, int, std::less<>> kNumberWords = {
    {"one", 1},       {"two", 2},       {"three", 3},     {"four", 4},      {"five", 5},
    {"six", 6},       {"seven", 7},     {"eight", 8},     {"nine", 9},      {"ten", 10},
    {"eleven", 11},   {"twelve", 12},   {"thirteen", 13}, {"fourteen", 14}, {"fifteen", 15},
    {"sixteen", 16},  {"seventeen", 17}, {"eighteen", 18}, {"nineteen", 19}, {"twenty", 20}};

struct Phrase {
  std::vector<std::string> words;
  std::string predicate;
};

std::vector<Phrase> make_phrases(std::initializer_list<std::pair<const char*, const char*>> rows) {
  std::vector<Phrase> out;
  for (const auto& [surface, predicate] : rows) {
    Phrase p;
    std::istringstream in(surface);
    for (std::string w; in >> w;) p.words.push_back(w);
    p.predicate = predicate;
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Phrase& a, const Phrase& b) { return a.words.size() > b.words.size(); });
  return out;
}

const std::vector<Phrase>& prepositions() {
  static const std::vector<Phrase> table = make_phrases({
      {"to the left of", "left of"},
      {"to the left side of", "left of"},
      {"on the left of", "left of"},
      {"on the left side of", "left of"},
      {"left of", "left of"},
      {"to the right of", "right of"},
      {"to the right side of", "right of"},
      {"on the right of", "right of"},
      {"on the right side of", "right of"},
      {"right of", "right of"},
      {"in front of", "in front of"},
      {"on top of", "on top of"},
      {"in the background of", "in background of"},
      {"in the foreground of", "in foreground of"},
      {"in the middle of", "in"},
      {"in the center of", "in"},
      {"in the centre of", "in"},
      {"at the center of", "in"},
      {"inside of", "inside of"},
      {"next to", "next to"},
      {"close to", "close to"},
      {"atop", "on top of"},
      {"on", "on"},
      {"onto", "on"},
      {"upon", "on"},
      {"in", "in"},
      {"into", "in"},
      {"inside", "inside"},
      {"within", "within"},
      {"under", "under"},
      {"underneath", "underneath"},
      {"beneath", "beneath"},
      {"below", "below"},
      {"above", "above"},
      {"over", "over"},
      {"behind", "behind"},
      {"beside", "beside"},
      {"near", "near"},
      {"by", "by"},
      {"at", "at"},
      {"along", "along"},
      {"across", "across"},
      {"around", "around"},
      {"against", "against"},
      {"among", "among"},
      {"between", "between"},
      {"through", "through"},
      {"outside", "outside"},
  });
  return table;
}

// Scene-level placements with no explicit landmark.
const std::vector<Phrase>& locatives() {
  static const std::vector<Phrase> table = make_phrases({
      {"in the background", "in background of"},
      {"in the foreground", "in foreground of"},
      {"in the distance", "in background of"},
  });
  return table;
}

enum class TokenKind { kWord, kQuote, kPunct };

struct Token {
  TokenKind kind = TokenKind::kWord;
  std::string text;
  std::string lower;
  bool sentence_initial = false;
  bool capitalized = false;
  bool gazetteer = false;
};

std::string normalize_quotes(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80) {
      const auto c = static_cast<unsigned char>(text[i + 2]);
      if (c == 0x9C || c == 0x9D) {
        out += '"';
        i += 3;
        continue;
      }
      if (c == 0x98 || c == 0x99) {
        out += '\'';
        i += 3;
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80 || c == '-';
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_terminator(const Token& t) {
  return t.kind == TokenKind::kPunct && (t.text == "." || t.text == "!" || t.text == "?" || t.text == ";");
}

std::vector<Token> tokenize(std::string_view raw) {
  const std::string s = normalize_quotes(raw);
  const std::size_t n = s.size();
  std::vector<Token> toks;
  auto push = [&](TokenKind kind, std::string text) {
    Token t;
    t.kind = kind;
    t.lower = lower(text);
    t.text = std::move(text);
    toks.push_back(std::move(t));
  };
  std::size_t i = 0;
  while (i < n) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '"') {
      const std::size_t close = s.find('"', i + 1);
      if (close == std::string::npos) {
        ++i;
        continue;
      }
      std::string inner = trim(std::string_view(s).substr(i + 1, close - i - 1));
      if (!inner.empty()) push(TokenKind::kQuote, std::move(inner));
      i = close + 1;
      continue;
    }
    if (c == '\'') {
      const bool word_start = i == 0 || !is_word_char(s[i - 1]);
      std::size_t close = std::string::npos;
      if (word_start) {
        for (std::size_t j = i + 2; j < n; ++j) {
          if (s[j] == '\'' && (j + 1 == n || !is_alnum(s[j + 1]))) {
            close = j;
            break;
          }
        }
      }
      if (close != std::string::npos) {
        std::string inner = trim(std::string_view(s).substr(i + 1, close - i - 1));
        if (!inner.empty()) push(TokenKind::kQuote, std::move(inner));
        i = close + 1;
      } else {
        ++i;
      }
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n && (is_word_char(s[j]) || (s[j] == '\'' && j > i && j + 1 < n && is_alnum(s[j + 1])))) ++j;
      std::string word = s.substr(i, j - i);
      const auto first = word.find_first_not_of('-');
      const auto last = word.find_last_not_of('-');
      if (first != std::string::npos) push(TokenKind::kWord, word.substr(first, last - first + 1));
      i = j;
      continue;
    }
    push(TokenKind::kPunct, std::string(1, c));
    ++i;
  }

  bool at_start = true;
  for (auto& t : toks) {
    if (t.kind == TokenKind::kPunct) {
      if (is_terminator(t)) at_start = true;
      continue;
    }
    t.sentence_initial = at_start;
    at_start = false;
    t.capitalized = t.kind == TokenKind::kWord && std::isupper(static_cast<unsigned char>(t.text[0]));
  }
  return toks;
}

void merge_gazetteer(std::vector<Token>& toks, const Gazetteer& gazetteer) {
  if (gazetteer.size() == 0) return;
  std::vector<Token> out;
  for (std::size_t i = 0; i < toks.size();) {
    if (toks[i].kind != TokenKind::kWord) {
      out.push_back(std::move(toks[i++]));
      continue;
    }
    std::vector<std::string> words;
    for (std::size_t j = i; j < toks.size() && toks[j].kind == TokenKind::kWord; ++j) words.push_back(toks[j].lower);
    const std::size_t len = gazetteer.match(words, 0);
    if (len == 0) {
      out.push_back(std::move(toks[i++]));
      continue;
    }
    Token merged = toks[i];
    for (std::size_t j = i + 1; j < i + len; ++j) {
      merged.text += " " + toks[j].text;
      merged.lower += " " + toks[j].lower;
    }
    merged.gazetteer = true;
    out.push_back(std::move(merged));
    i += len;
  }
  toks = std::move(out);
}

std::optional<int> parse_count(const Token& t) {
  if (t.kind != TokenKind::kWord) return std::nullopt;
  if (auto it = kNumberWords.find(t.lower); it != kNumberWords.end()) return it->second;
  if (t.lower.empty() || !std::all_of(t.lower.begin(), t.lower.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  int value = 0;
  const auto res = std::from_chars(t.lower.data(), t.lower.data() + t.lower.size(), value);
  if (res.ec == std::errc::result_out_of_range) return std::numeric_limits<int>::max();
  if (value <= 0) return std::nullopt;
  return value;
}

std::string strip_article(std::string_view caption) {
  std::string s = trim(caption);
  for (std::string_view article : {"a ", "an ", "the "}) {
    if (s.size() > article.size() && lower(s.substr(0, article.size())) == article) {
      return trim(std::string_view(s).substr(article.size()));
    }
  }
  return s;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ParsedPrompt run() {
    std::size_t k = 0;
    while (k < toks_.size()) step(k);
    end_sentence();

    std::stable_sort(relations_.begin(), relations_.end(), [](const ParsedRelation& a, const ParsedRelation& b) {
      return std::pair(a.subject, a.object) < std::pair(b.subject, b.object);
    });
    for (auto& r : relations_) {
      if (std::find(out_.relations.begin(), out_.relations.end(), r) == out_.relations.end()) {
        out_.relations.push_back(std::move(r));
      }
    }
    return std::move(out_);
  }

 private:
  const Token* at(std::size_t k) const { return k < toks_.size() ? &toks_[k] : nullptr; }

  bool word_is(std::size_t k, std::string_view w) const {
    const Token* t = at(k);
    return t && t->kind == TokenKind::kWord && !t->gazetteer && t->lower == w;
  }

  bool in_set(std::size_t k, const WordSet& set) const {
    const Token* t = at(k);
    return t && t->kind == TokenKind::kWord && !t->gazetteer && set.contains(t->lower);
  }

  std::optional<std::pair<std::string, std::size_t>> match(std::size_t k, const std::vector<Phrase>& table) const {
    for (const auto& p : table) {
      bool ok = true;
      for (std::size_t i = 0; i < p.words.size() && ok; ++i) ok = word_is(k + i, p.words[i]);
      if (ok) return std::pair(p.predicate, p.words.size());
    }
    return std::nullopt;
  }

  std::optional<std::pair<std::string, std::size_t>> match_locative(std::size_t k) const {
    auto loc = match(k, locatives());
    if (loc && word_is(k + loc->second, "of")) return std::nullopt;
    return loc;
  }

  bool ing_verb(std::size_t k) const {
    const Token* t = at(k);
    if (!t || t->kind != TokenKind::kWord || t->gazetteer) return false;
    if (t->lower.size() <= 4 || !t->lower.ends_with("ing") || kIngNouns.contains(t->lower)) return false;
    const Token* next = at(k + 1);
    if (!next) return false;
    return next->kind == TokenKind::kQuote || in_set(k + 1, kDeterminers) || in_set(k + 1, kPronouns) ||
           parse_count(*next).has_value();
  }

  bool is_content(std::size_t k, bool nonempty) const {
    const Token* t = at(k);
    if (!t || t->kind != TokenKind::kWord) return false;
    if (t->gazetteer) return true;
    const std::string& w = t->lower;
    if (kDeterminers.contains(w) || kAux.contains(w) || kConjunctions.contains(w) || kSkip.contains(w) ||
        kPronouns.contains(w) || w == "with" || parse_count(*t)) {
      return false;
    }
    if (match(k, prepositions()) || match_locative(k)) return false;
    if (nonempty && (kRelationVerbs.contains(w) || kPostfixTextCues.contains(w) || kPrefixTextCues.contains(w) ||
                     ing_verb(k))) {
      return false;
    }
    return true;
  }

  int add_mention(Mention m) {
    out_.mentions.push_back(std::move(m));
    return static_cast<int>(out_.mentions.size()) - 1;
  }

  int parse_np(std::size_t& k) {
    std::size_t j = k;
    std::string article;
    std::optional<int> count;
    if (in_set(j, kDeterminers)) {
      if (toks_[j].lower == "a" || toks_[j].lower == "an") article = toks_[j].lower;
      ++j;
    }
    if (const Token* t = at(j); t && !t->gazetteer) {
      if (auto c = parse_count(*t)) {
        count = c;
        ++j;
      }
    }
    if (const Token* t = at(j); t && t->kind == TokenKind::kQuote) {
      Mention m;
      m.caption = t->text;
      m.head = t->text;
      m.quoted = true;
      m.text = t->text;
      k = j + 1;
      return add_mention(std::move(m));
    }
    std::vector<std::size_t> content;
    while (is_content(j, !content.empty())) {
      content.push_back(j++);
      if (word_is(j, "of") && is_content(j + 1, false)) content.push_back(j++);
    }
    k = j;
    if (content.empty()) return -1;

    Mention m;
    std::string surface;
    int run = 0;
    int best_run = 0;
    for (std::size_t idx : content) {
      const Token& t = toks_[idx];
      if (!surface.empty()) surface += ' ';
      surface += t.text;
      m.gazetteer = m.gazetteer || t.gazetteer;
      if (t.lower == "of") continue;
      run = (t.capitalized && !t.sentence_initial) ? run + 1 : 0;
      best_run = std::max(best_run, run);
    }
    m.capitalized_run = best_run >= 2;
    m.head = toks_[content.back()].text;
    if (count) {
      m.count = count;
      m.caption = surface;
      m.group_hint = lower(surface);
    } else {
      m.caption = article.empty() ? surface : article + " " + surface;
    }
    return add_mention(std::move(m));
  }

  void relate(int s, const std::string& predicate, int o) {
    if (s < 0 || o < 0 || s == o) return;
    const std::string p = normalize_predicate(predicate);
    if (p.empty()) return;
    relations_.push_back({s, p, o});
  }

  void drop_member(int m) { std::erase(with_members_, m); }

  void flush_with() {
    for (int m : with_members_) relate(m, "on", with_host_);
    with_members_.clear();
    with_host_ = -1;
  }

  void end_sentence() {
    flush_with();
    first_ = -1;
    last_ = -1;
    pending_.reset();
    aux_.clear();
  }

  void start_relation(const std::string& predicate) {
    if (last_ < 0) {
      pending_.reset();
    } else {
      pending_ = std::pair(last_, aux_.empty() ? predicate : aux_ + " " + predicate);
      drop_member(last_);
    }
    aux_.clear();
  }

  void np_event(int m, bool pronoun) {
    if (m < 0) return;
    if (!pronoun && first_ < 0) first_ = m;
    if (pending_) {
      relate(pending_->first, pending_->second, m);
      pending_.reset();
    } else if (with_host_ >= 0 && !pronoun && m != with_host_) {
      with_members_.push_back(m);
    }
    last_ = m;
    aux_.clear();
  }

  void step(std::size_t& k) {
    const Token& t = toks_[k];
    if (t.kind == TokenKind::kPunct) {
      if (is_terminator(t)) {
        end_sentence();
      } else if (t.text == ",") {
        pending_.reset();
        aux_.clear();
      }
      ++k;
      return;
    }
    if (t.kind == TokenKind::kQuote || t.gazetteer) {
      np_event(parse_np(k), false);
      return;
    }
    const std::string& w = t.lower;
    if (w == "with") {
      flush_with();
      with_host_ = last_;
      pending_.reset();
      aux_.clear();
      ++k;
      return;
    }
    if (kConjunctions.contains(w)) {
      aux_.clear();
      ++k;
      return;
    }
    const auto prep = match(k, prepositions());
    const auto loc = match_locative(k);
    if (loc && (!prep || prep->second <= loc->second)) {
      locative(loc->first);
      k += loc->second;
      return;
    }
    if (prep) {
      start_relation(prep->first);
      k += prep->second;
      return;
    }
    if (kAux.contains(w)) {
      aux_ = w;
      ++k;
      // Bare copula ("the sky is blue"): the adjectives are not objects.
      if (is_content(k, false) && !in_set(k, kRelationVerbs) && !ing_verb(k) && !in_set(k, kPostfixTextCues)) {
        while (is_content(k, true)) ++k;
        aux_.clear();
      }
      return;
    }
    if (kPronouns.contains(w)) {
      np_event(first_ >= 0 ? first_ : last_, true);
      ++k;
      return;
    }
    if (kPrefixTextCues.contains(w) && last_ >= 0) {
      const int host = last_;
      ++k;
      const int m = parse_np(k);
      if (m >= 0) {
        auto& mention = out_.mentions[static_cast<std::size_t>(m)];
        mention.text_cue = true;
        if (!mention.text) mention.text = strip_article(mention.caption);
        relate(m, "written on", host);
      }
      return;
    }
    if (kPostfixTextCues.contains(w) && last_ >= 0) {
      auto& mention = out_.mentions[static_cast<std::size_t>(last_)];
      mention.text_cue = true;
      if (!mention.text) mention.text = strip_article(mention.caption);
      ++k;
      if (const auto p = match(k, prepositions())) {
        start_relation(w + " " + p->first);
        k += p->second;
      } else {
        start_relation(w);
      }
      return;
    }
    if ((kRelationVerbs.contains(w) || ing_verb(k)) && last_ >= 0) {
      std::string predicate = w;
      ++k;
      if (const auto p = match(k, prepositions())) {
        predicate += " " + p->first;
        k += p->second;
      } else if (word_is(k, "with")) {
        predicate += " with";
        ++k;
      }
      start_relation(predicate);
      return;
    }
    const std::size_t before = k;
    np_event(parse_np(k), false);
    if (k == before) ++k;
  }

  void locative(const std::string& predicate) {
    pending_.reset();
    aux_.clear();
    const int s = last_;
    if (s < 0) return;
    const bool member = std::find(with_members_.begin(), with_members_.end(), s) != with_members_.end();
    const int o = member ? with_host_ : first_;
    drop_member(s);
    relate(s, predicate, o);
  }

  std::vector<Token> toks_;
  ParsedPrompt out_;
  std::vector<ParsedRelation> relations_;
  int first_ = -1;
  int last_ = -1;
  int with_host_ = -1;
  std::vector<int> with_members_;
  std::optional<std::pair<int, std::string>> pending_;
  std::string aux_;
};

std::string base_group_key(const Mention& m, ObjectCategory category) {
  std::string key;
  if (m.count && !m.group_hint.empty()) {
    key = m.group_hint;
  } else if (category == ObjectCategory::kText) {
    key = lower(trim(m.text.value_or(m.caption)));
  } else {
    key = lower(strip_article(m.caption));
  }
  return key.empty() ? std::string("object") : key;
}

std::vector<std::string> dedupe_keys(std::vector<std::string> keys) {
  std::set<std::string> used;
  for (auto& key : keys) {
    if (used.contains(key)) {
      for (int suffix = 2;; ++suffix) {
        std::string candidate = key + "-" + std::to_string(suffix);
        if (!used.contains(candidate)) {
          key = std::move(candidate);
          break;
        }
      }
    }
    used.insert(key);
  }
  return keys;
}

std::vector<std::string> full_keys(std::span<const Mention> mentions) {
  std::vector<std::string> keys;
  for (const auto& m : mentions) keys.push_back(base_group_key(m, classify_object(m)));
  return dedupe_keys(std::move(keys));
}

std::string chunk_caption(const Mention& m) { return m.quoted ? m.caption : m.head; }

std::vector<std::string> chunk_keys(std::span<const Mention> mentions) {
  std::vector<std::string> keys;
  for (const auto& m : mentions) keys.push_back(lower(chunk_caption(m)));
  return dedupe_keys(std::move(keys));
}

const Gazetteer& gazetteer_of(const AnalysisOptions& options) {
  return options.gazetteer ? *options.gazetteer : Gazetteer::builtin();
}

const std::string& checked_text(const PromptSpec& prompt) {
  if (trim(prompt.raw_text).empty()) throw Error(ErrorCode::kInvalidPrompt, "prompt text is empty", prompt.id);
  const std::string& text = prompt.analysis_text();
  if (trim(text).empty()) throw Error(ErrorCode::kInvalidPrompt, "augmented prompt text is empty", prompt.id);
  return text;
}

[[noreturn]] void no_objects(const PromptSpec& prompt) {
  throw Error(ErrorCode::kNoObjectsFound, "no noun phrase found in \"" + prompt.analysis_text() + "\"", prompt.id);
}

std::optional<std::string> check_objects_doc(const json& doc) {
  if (!doc.is_object() || !doc.contains("objects") || !doc["objects"].is_array()) {
    return "expected {\"objects\": [...]}";
  }
  const auto& objects = doc["objects"];
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const std::string where = "/objects/" + std::to_string(i);
    if (!o.is_object()) return where + " is not an object";
    if (!o.contains("caption") || !o["caption"].is_string() || trim(o["caption"].get<std::string>()).empty()) {
      return where + "/caption must be a non-empty string";
    }
    if (!o.contains("category") || !o["category"].is_string() ||
        !parse_category(o["category"].get<std::string>())) {
      return where + "/category must be GO, TEXT or PN";
    }
    if (o.contains("count") && !o["count"].is_null() &&
        (!o["count"].is_number_integer() || o["count"].get<std::int64_t>() < 1)) {
      return where + "/count must be a positive integer";
    }
    if (o.contains("text") && !o["text"].is_null() && !o["text"].is_string()) return where + "/text must be a string";
  }
  return std::nullopt;
}

std::optional<std::string> check_triples_doc(const json& doc) {
  if (!doc.is_object() || !doc.contains("triples") || !doc["triples"].is_array()) {
    return "expected {\"triples\": [...]}";
  }
  const auto& triples = doc["triples"];
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    const std::string where = "/triples/" + std::to_string(i);
    if (!t.is_object()) return where + " is not an object";
    for (const char* key : {"subject", "object"}) {
      if (!t.contains(key) || !(t[key].is_string() || t[key].is_number_integer())) {
        return where + "/" + key + " must be a caption or an object index";
      }
    }
    if (!t.contains("predicate") || !t["predicate"].is_string()) return where + "/predicate must be a string";
  }
  return std::nullopt;
}

std::vector<Mention> llm_mentions(LlmClient& client, const std::string& text) {
  const json doc = client.complete_json("object_extraction.v1", {{"prompt", text}}, check_objects_doc);
  std::vector<Mention> mentions;
  for (const auto& o : doc["objects"]) {
    Mention m;
    m.caption = trim(o["caption"].get<std::string>());
    const auto space = m.caption.find_last_of(' ');
    m.head = space == std::string::npos ? m.caption : m.caption.substr(space + 1);
    m.declared = parse_category(o["category"].get<std::string>());
    if (o.contains("count") && o["count"].is_number_integer()) {
      const auto c = o["count"].get<std::int64_t>();
      m.count = static_cast<int>(std::min<std::int64_t>(c, std::numeric_limits<int>::max()));
    }
    if (o.contains("text") && o["text"].is_string() && !trim(o["text"].get<std::string>()).empty()) {
      m.text = trim(o["text"].get<std::string>());
    }
    mentions.push_back(std::move(m));
  }
  return mentions;
}

std::string object_listing(std::span<const SceneObject> objects) {
  std::string out;
  for (const auto& o : objects) {
    out += std::to_string(o.object_id) + ": " + o.caption;
    if (o.text_payload) out += " (text: \"" + *o.text_payload + "\")";
    out += "\n";
  }
  return out;
}

void push_triples(std::vector<RelationTriple>& out, std::span<const int> subjects, const std::string& predicate,
                  std::span<const int> objects) {
  for (int s : subjects) {
    for (int o : objects) {
      if (s == o) continue;
      RelationTriple t{s, predicate, o};
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
    }
  }
}

void warn(std::vector<Diagnostic>* warnings, std::string code, std::string message) {
  if (warnings) warnings->push_back({std::move(code), Severity::kWarning, std::move(message), {}});
}

std::vector<RelationTriple> llm_triples(LlmClient& client, const std::string& template_id, const std::string& text,
                                        std::span<const SceneObject> objects, std::vector<Diagnostic>* warnings) {
  const json doc = client.complete_json(template_id, {{"prompt", text}, {"objects", object_listing(objects)}},
                                        check_triples_doc);
  const int n = static_cast<int>(objects.size());
  auto resolve = [&](const json& endpoint) -> std::vector<int> {
    if (endpoint.is_number_integer()) {
      const auto id = endpoint.get<std::int64_t>();
      if (id >= 0 && id < n) return {static_cast<int>(id)};
      return {};
    }
    return resolve_mention(endpoint.get<std::string>(), objects);
  };
  std::vector<RelationTriple> out;
  for (const auto& t : doc["triples"]) {
    const std::string predicate = normalize_predicate(t["predicate"].get<std::string>());
    const auto subjects = resolve(t["subject"]);
    const auto targets = resolve(t["object"]);
    if (predicate.empty() || subjects.empty() || targets.empty()) {
      warn(warnings, "TRIPLE_ENDPOINT_UNRESOLVED", "dropped triple " + t.dump());
      continue;
    }
    push_triples(out, subjects, predicate, targets);
  }
  return out;
}

std::vector<RelationTriple> fallback_triples(const std::string& text, std::span<const SceneObject> objects,
                                             std::vector<Diagnostic>* warnings, const Gazetteer& gazetteer) {
  const ParsedPrompt parsed = parse_prompt(text, gazetteer);
  const auto fkeys = full_keys(parsed.mentions);
  const auto ckeys = chunk_keys(parsed.mentions);
  auto by_key = [&](const std::string& key) {
    std::vector<int> ids;
    for (const auto& o : objects) {
      if (o.group_key == key) ids.push_back(o.object_id);
    }
    return ids;
  };
  auto resolve = [&](int m) {
    auto ids = by_key(fkeys[static_cast<std::size_t>(m)]);
    if (ids.empty()) ids = by_key(ckeys[static_cast<std::size_t>(m)]);
    if (ids.empty()) ids = resolve_mention(parsed.mentions[static_cast<std::size_t>(m)].caption, objects);
    return ids;
  };
  std::vector<RelationTriple> out;
  for (const auto& r : parsed.relations) {
    const auto subjects = resolve(r.subject);
    const auto targets = resolve(r.object);
    if (subjects.empty() || targets.empty()) {
      warn(warnings, "TRIPLE_ENDPOINT_UNRESOLVED",
           "dropped (" + parsed.mentions[static_cast<std::size_t>(r.subject)].caption + ", " + r.predicate + ", " +
               parsed.mentions[static_cast<std::size_t>(r.object)].caption + ")");
      continue;
    }
    push_triples(out, subjects, r.predicate, targets);
  }
  return out;
}

bool contains_words(std::string_view hay, std::string_view needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    const bool left = pos == 0 || hay[pos - 1] == ' ';
    const std::size_t end = pos + needle.size();
    const bool right = end == hay.size() || hay[end] == ' ';
    if (left && right) return true;
  }
  return false;
}

std::string mention_norm(std::string_view text) { return normalize_predicate(lower(strip_article(text))); }

}  // namespace

std::string_view analysis_mode_name(AnalysisMode mode) {
  switch (mode) {
    case AnalysisMode::kFull: return "full";
    case AnalysisMode::kNoObjectExtraction: return "no_object_extraction";
    case AnalysisMode::kNoKg: return "no_kg";
  }
  return "full";
}

std::optional<AnalysisMode> parse_analysis_mode(std::string_view name) {
  for (auto mode : {AnalysisMode::kFull, AnalysisMode::kNoObjectExtraction, AnalysisMode::kNoKg}) {
    if (analysis_mode_name(mode) == name) return mode;
  }
  return std::nullopt;
}

std::string_view analysis_source_name(AnalysisSource source) {
  return source == AnalysisSource::kLlm ? "llm" : "fallback";
}

ObjectCategory classify_object(const Mention& m) {
  if (m.quoted || m.text_cue || m.declared == ObjectCategory::kText) return ObjectCategory::kText;
  if (m.gazetteer || m.capitalized_run || m.declared == ObjectCategory::kPN) return ObjectCategory::kPN;
  return ObjectCategory::kGO;
}

std::string singularize(std::string_view phrase) {
  static const std::map<std::string, std::string, std::less<>> irregular = {
      {"men", "man"},       {"women", "woman"},   {"children", "child"}, {"people", "person"},
      {"mice", "mouse"},    {"geese", "goose"},   {"feet", "foot"},      {"teeth", "tooth"},
      {"oxen", "ox"},       {"dice", "die"},      {"leaves", "leaf"},    {"wolves", "wolf"},
      {"knives", "knife"},  {"wives", "wife"},    {"lives", "life"},     {"halves", "half"},
      {"shelves", "shelf"}, {"loaves", "loaf"},   {"calves", "calf"},    {"scarves", "scarf"},
      {"thieves", "thief"}, {"elves", "elf"},     {"potatoes", "potato"}, {"tomatoes", "tomato"},
      {"heroes", "hero"},   {"echoes", "echo"},   {"cacti", "cactus"},   {"fungi", "fungus"}};
  static const WordSet invariant = {"sheep",  "fish",  "deer",    "series", "species", "moose",  "aircraft",
                                    "glasses", "pants", "jeans",  "shorts", "scissors", "clothes", "news",
                                    "bison",  "salmon", "trout", "buffalo"};
  std::string s = trim(phrase);
  const auto space = s.find_last_of(' ');
  const std::string prefix = space == std::string::npos ? "" : s.substr(0, space + 1);
  std::string word = space == std::string::npos ? s : s.substr(space + 1);
  const std::string lw = lower(word);

  auto keep_case = [&](std::string replacement) {
    if (!word.empty() && std::isupper(static_cast<unsigned char>(word[0]))) {
      replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
    }
    return replacement;
  };
  if (auto it = irregular.find(lw); it != irregular.end()) return prefix + keep_case(it->second);
  if (invariant.contains(lw) || lw.size() <= 2) return s;
  if (lw.ends_with("ies") && lw.size() > 4) return prefix + word.substr(0, word.size() - 3) + "y";
  for (std::string_view suffix : {"ches", "shes", "sses", "xes", "zzes"}) {
    if (lw.ends_with(suffix)) return prefix + word.substr(0, word.size() - 2);
  }
  if (lw.ends_with("s") && !lw.ends_with("ss") && !lw.ends_with("us") && !lw.ends_with("is")) {
    return prefix + word.substr(0, word.size() - 1);
  }
  return s;
}

std::vector<SceneObject> expand_counts(std::span<const Mention> mentions, int max_count) {
  const auto keys = full_keys(mentions);
  std::vector<SceneObject> out;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const Mention& m = mentions[i];
    const ObjectCategory category = classify_object(m);
    const int k = std::max(1, m.count.value_or(1));
    if (k > max_count) {
      throw Error(ErrorCode::kCountOverflow,
                  "'" + m.caption + "' asks for " + std::to_string(k) + " instances (cap " +
                      std::to_string(max_count) + ")");
    }
    std::string caption = m.count ? singularize(strip_article(m.caption)) : trim(m.caption);
    if (caption.empty()) caption = m.head;
    for (int idx = 0; idx < k; ++idx) {
      SceneObject o;
      o.object_id = static_cast<int>(out.size());
      o.caption = caption;
      o.category = category;
      o.group_key = keys[i];
      o.instance_index = idx;
      if (category == ObjectCategory::kText) {
        o.text_payload = trim(m.text.value_or(strip_article(m.caption)));
        if (o.text_payload->empty()) o.text_payload = caption;
      }
      if (category == ObjectCategory::kPN) {
        std::string key = slugify(strip_article(m.caption));
        o.pn_key = key.empty() ? std::string("entity") : key;
      }
      out.push_back(std::move(o));
    }
  }
  return out;
}

std::string_view builtin_gazetteer_text() {
  return R"(# Known proper-noun entities, matched case-insensitively as whole words.
golden state warriors
los angeles lakers
chicago bulls
boston celtics
new york yankees
real madrid
manchester united
fc barcelona
coca-cola
pepsi
starbucks
mcdonald's
nike
adidas
google
microsoft
eiffel tower
statue of liberty
big ben
golden gate bridge
taj mahal
mount fuji
great wall of china
sydney opera house
times square
leaning tower of pisa
mona lisa
mickey mouse
hello kitty
spider-man
batman
superman
pikachu
harry potter
darth vader
stephen curry
lebron james
michael jordan
albert einstein
barack obama
leonardo da vinci
van gogh
new york
paris
tokyo
london
)";
}

Gazetteer Gazetteer::parse(std::string_view text) {
  Gazetteer g;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string entry;
    std::size_t count = 0;
    for (std::string w; words >> w; ++count) entry += (entry.empty() ? "" : " ") + lower(w);
    if (count == 0) continue;
    g.entries_.insert(entry);
    g.max_words_ = std::max(g.max_words_, count);
  }
  return g;
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read gazetteer", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const Gazetteer& Gazetteer::builtin() {
  static const Gazetteer g = parse(builtin_gazetteer_text());
  return g;
}

bool Gazetteer::contains(std::string_view phrase) const {
  std::istringstream words{std::string(phrase)};
  std::string entry;
  for (std::string w; words >> w;) entry += (entry.empty() ? "" : " ") + lower(w);
  return entries_.contains(entry);
}

std::size_t Gazetteer::match(std::span<const std::string> lower_words, std::size_t pos) const {
  if (pos >= lower_words.size()) return 0;
  const std::size_t longest = std::min(max_words_, lower_words.size() - pos);
  for (std::size_t len = longest; len >= 1; --len) {
    std::string entry = lower_words[pos];
    for (std::size_t i = 1; i < len; ++i) entry += " " + lower_words[pos + i];
    if (entries_.contains(entry)) return len;
  }
  return 0;
}

ParsedPrompt parse_prompt(std::string_view text, const Gazetteer& gazetteer) {
  auto toks = tokenize(text);
  merge_gazetteer(toks, gazetteer);
  return Parser(std::move(toks)).run();
}

std::vector<int> resolve_mention(std::string_view text, std::span<const SceneObject> objects) {
  const std::string t = mention_norm(text);
  if (t.empty()) return {};
  const std::string t_single = singularize(t);

  int best = -1;
  std::size_t best_len = 0;
  for (const auto& o : objects) {
    const std::string c = mention_norm(o.caption);
    const bool exact = c == t || c == t_single || o.group_key == t ||
                       (o.text_payload && mention_norm(*o.text_payload) == t);
    if (exact) {
      best = o.object_id;
      break;
    }
  }
  if (best < 0) {
    for (const auto& o : objects) {
      const std::string c = mention_norm(o.caption);
      if (c.empty()) continue;
      const bool hit = contains_words(t, c) || contains_words(c, t) || contains_words(t_single, c) ||
                       contains_words(c, t_single);
      if (hit && c.size() > best_len) {
        best = o.object_id;
        best_len = c.size();
      }
    }
  }
  if (best < 0) return {};
  std::vector<int> ids;
  const std::string& group = objects[static_cast<std::size_t>(best)].group_key;
  for (const auto& o : objects) {
    if (o.group_key == group) ids.push_back(o.object_id);
  }
  return ids;
}

std::vector<SceneObject> extract_objects(const PromptSpec& prompt, LlmClient* client, const AnalysisOptions& options) {
  const std::string& text = checked_text(prompt);
  const auto mentions = client ? llm_mentions(*client, text) : parse_prompt(text, gazetteer_of(options)).mentions;
  if (mentions.empty()) no_objects(prompt);
  return expand_counts(mentions, options.max_count);
}

std::vector<RelationTriple> extract_triples(const PromptSpec& prompt, std::span<const SceneObject> objects,
                                            LlmClient* client, std::vector<Diagnostic>* warnings,
                                            const AnalysisOptions& options) {
  const std::string& text = checked_text(prompt);
  if (objects.empty()) throw Error(ErrorCode::kNoObjectsFound, "no objects to relate", prompt.id);
  if (client) return llm_triples(*client, "relation_extraction.v1", text, objects, warnings);
  return fallback_triples(text, objects, warnings, gazetteer_of(options));
}

std::vector<SceneObject> noun_chunks(const PromptSpec& prompt, const AnalysisOptions& options) {
  const std::string& text = checked_text(prompt);
  const auto parsed = parse_prompt(text, gazetteer_of(options));
  const auto keys = chunk_keys(parsed.mentions);
  std::vector<SceneObject> out;
  for (std::size_t i = 0; i < parsed.mentions.size(); ++i) {
    SceneObject o;
    o.object_id = static_cast<int>(i);
    o.caption = chunk_caption(parsed.mentions[i]);
    o.group_key = keys[i];
    out.push_back(std::move(o));
  }
  return out;
}

AnalysisResult analyze(const PromptSpec& prompt, LlmClient* client, AnalysisMode mode, const AnalysisOptions& options) {
  AnalysisResult result;
  result.source = client ? AnalysisSource::kLlm : AnalysisSource::kFallback;
  switch (mode) {
    case AnalysisMode::kFull:
      result.objects = extract_objects(prompt, client, options);
      result.triples = extract_triples(prompt, result.objects, client, &result.diagnostics, options);
      break;
    case AnalysisMode::kNoKg:
      result.objects = extract_objects(prompt, client, options);
      break;
    case AnalysisMode::kNoObjectExtraction:
      result.objects = noun_chunks(prompt, options);
      if (result.objects.empty()) no_objects(prompt);
      if (client) {
        result.triples = llm_triples(*client, "relation_only.v1", prompt.analysis_text(), result.objects,
                                     &result.diagnostics);
      } else {
        result.triples = fallback_triples(prompt.analysis_text(), result.objects, &result.diagnostics,
                                          gazetteer_of(options));
      }
      break;
  }
  sort_diagnostics(result.diagnostics);
  return result;
}

}  // namespace pcig

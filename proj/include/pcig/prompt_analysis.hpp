#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcig/scene_model.hpp"

namespace pcig {

class LlmClient;

enum class AnalysisMode { kFull, kNoObjectExtraction, kNoKg };
std::string_view analysis_mode_name(AnalysisMode mode);
std::optional<AnalysisMode> parse_analysis_mode(std::string_view name);

enum class AnalysisSource { kLlm, kFallback };
std::string_view analysis_source_name(AnalysisSource source);

// Raw extraction record before classification and count expansion.
struct Mention {
  std::string caption;  // "a"/"an" kept, "the" dropped
  std::string head;     // last word of the phrase, surface form
  std::string group_hint;  // lowercased surface of a counted mention ("giraffes")
  std::optional<int> count;
  bool quoted = false;
  bool text_cue = false;
  bool gazetteer = false;
  bool capitalized_run = false;
  std::optional<std::string> text;
  std::optional<ObjectCategory> declared;  // category stated by an LLM extraction

  bool operator==(const Mention&) const = default;
};

ObjectCategory classify_object(const Mention& mention);

// k copies per counted mention, captions singularized; throws kCountOverflow past max_count.
std::vector<SceneObject> expand_counts(std::span<const Mention> mentions, int max_count = 20);

std::string singularize(std::string_view phrase);

// Known proper-noun entities, one lowercase phrase per line.
class Gazetteer {
 public:
  Gazetteer() = default;
  static Gazetteer parse(std::string_view text);
  static Gazetteer load(const std::filesystem::path& path);
  static const Gazetteer& builtin();

  bool contains(std::string_view phrase) const;
  // Word count of the longest entry starting at lower_words[pos]; 0 if none.
  std::size_t match(std::span<const std::string> lower_words, std::size_t pos) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::set<std::string, std::less<>> entries_;
  std::size_t max_words_ = 0;
};

std::string_view builtin_gazetteer_text();

struct ParsedRelation {
  int subject = 0;  // mention indices
  std::string predicate;
  int object = 0;

  bool operator==(const ParsedRelation&) const = default;
};

struct ParsedPrompt {
  std::vector<Mention> mentions;
  std::vector<ParsedRelation> relations;
};

// The rule-based fallback grammar. Total on any input.
ParsedPrompt parse_prompt(std::string_view text, const Gazetteer& gazetteer = Gazetteer::builtin());

struct AnalysisOptions {
  const Gazetteer* gazetteer = nullptr;  // builtin when null
  int max_count = 20;
};

struct AnalysisResult {
  std::vector<SceneObject> objects;
  std::vector<RelationTriple> triples;
  AnalysisSource source = AnalysisSource::kFallback;
  std::vector<Diagnostic> diagnostics;
};

// client == nullptr selects the fallback parser.
std::vector<SceneObject> extract_objects(const PromptSpec& prompt, LlmClient* client,
                                         const AnalysisOptions& options = {});

std::vector<RelationTriple> extract_triples(const PromptSpec& prompt, std::span<const SceneObject> objects,
                                            LlmClient* client, std::vector<Diagnostic>* warnings = nullptr,
                                            const AnalysisOptions& options = {});

// Head nouns only: no attributes, counts or categories.
std::vector<SceneObject> noun_chunks(const PromptSpec& prompt, const AnalysisOptions& options = {});

AnalysisResult analyze(const PromptSpec& prompt, LlmClient* client, AnalysisMode mode,
                       const AnalysisOptions& options = {});

// Objects a free-text mention refers to: exact caption, then longest caption
// containment, widened to the whole group. Empty when nothing matches.
std::vector<int> resolve_mention(std::string_view text, std::span<const SceneObject> objects);

}  // namespace pcig

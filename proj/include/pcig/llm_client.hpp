#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace pcig {

using TemplateVars = std::map<std::string, std::string>;

struct LlmConfig {
  std::string endpoint;  // base URL of an OpenAI-style chat-completion service
  std::string model = "gpt-4-turbo";
  double temperature = 0.0;
  int max_retries = 2;
  // USD per 1k tokens.
  double prompt_price_per_1k = 0.01;
  double completion_price_per_1k = 0.03;
  std::string api_key;
  int timeout_seconds = 120;
};

struct LlmUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct LlmReply {
  std::string text;
  LlmUsage usage;
};

struct LlmCall {
  std::string template_id;
  TemplateVars variables;
  std::string rendered_prompt;
};

class LlmTransport {
 public:
  virtual ~LlmTransport() = default;
  virtual LlmReply send(const LlmCall& call, const LlmConfig& config) = 0;
};

// Content hash of (template_id, variables); names the recorded response file.
std::string fixture_key(std::string_view template_id, const TemplateVars& variables);

// Replays `<dir>/<fixture_key>.json` documents:
//   {"template_id": ..., "variables": {...}, "response": "...", "usage": {...}}
class FixtureTransport : public LlmTransport {
 public:
  explicit FixtureTransport(std::filesystem::path dir);
  LlmReply send(const LlmCall& call, const LlmConfig& config) override;

  std::filesystem::path path_for(const LlmCall& call) const;

 private:
  std::filesystem::path dir_;
};

// POSTs to <endpoint>/v1/chat/completions (or the endpoint itself when it
// already names the completions path).
class HttpTransport : public LlmTransport {
 public:
  LlmReply send(const LlmCall& call, const LlmConfig& config) override;
};

// Forwards to another transport and writes every reply as a fixture file.
class RecordingTransport : public LlmTransport {
 public:
  RecordingTransport(std::shared_ptr<LlmTransport> inner, std::filesystem::path dir);
  LlmReply send(const LlmCall& call, const LlmConfig& config) override;

 private:
  std::shared_ptr<LlmTransport> inner_;
  std::filesystem::path dir_;
};

// Plain-text templates with {{name}} placeholders, one file per id
// (`<dir>/<template_id>.txt`).
class TemplateStore {
 public:
  TemplateStore() = default;
  static TemplateStore load(const std::filesystem::path& dir);

  void add(std::string id, std::string text);
  bool contains(const std::string& id) const { return templates_.contains(id); }
  std::string render(const std::string& id, const TemplateVars& vars) const;

 private:
  std::map<std::string, std::string> templates_;
};

std::string render_template(std::string_view text, const TemplateVars& vars);

// Strips prose or code fences around the outermost JSON value and closes
// unbalanced brackets/quotes. Returns nullopt when nothing parses.
std::optional<nlohmann::json> repair_json(std::string_view raw);

// Safe for concurrent use: transports are stateless per call and the cost
// accumulator is atomic.
class LlmClient {
 public:
  // Returns an error description when the document does not have the expected shape.
  using StructureCheck = std::function<std::optional<std::string>(const nlohmann::json&)>;

  LlmClient(std::shared_ptr<LlmTransport> transport, TemplateStore templates, LlmConfig config);

  std::string complete(const std::string& template_id, const TemplateVars& vars);

  // Parse, one repair pass, then up to max_retries further calls (each adds an
  // "attempt" variable). Throws kLlmProtocolError when every attempt fails.
  nlohmann::json complete_json(const std::string& template_id, const TemplateVars& vars,
                               const StructureCheck& check);

  double cost_usd() const;
  std::int64_t calls() const { return calls_.load(); }
  const LlmConfig& config() const { return config_; }

 private:
  std::shared_ptr<LlmTransport> transport_;
  TemplateStore templates_;
  LlmConfig config_;
  std::atomic<std::int64_t> cost_micro_usd_{0};
  std::atomic<std::int64_t> calls_{0};
};

}  // namespace pcig

#include "pcig/llm_client.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <httplib.h>

#include "pcig/error.hpp"
#include "pcig/net_util.hpp"
#include "pcig/scene_model.hpp"

namespace pcig {

using json = nlohmann::json;

namespace {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

}  // namespace

std::string fixture_key(std::string_view template_id, const TemplateVars& variables) {
  const json doc = {{"template_id", template_id}, {"variables", variables}};
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return hex;
}

FixtureTransport::FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path FixtureTransport::path_for(const LlmCall& call) const {
  return dir_ / (fixture_key(call.template_id, call.variables) + ".json");
}

LlmReply FixtureTransport::send(const LlmCall& call, const LlmConfig&) {
  const auto path = path_for(call);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kLlmTransportError,
                "no recorded response for template '" + call.template_id + "'", path.string());
  }
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kLlmTransportError, std::string("fixture is not JSON: ") + e.what(), path.string());
  }
  if (!doc.contains("response") || !doc["response"].is_string()) {
    throw Error(ErrorCode::kLlmTransportError, "fixture lacks a 'response' string", path.string());
  }
  LlmReply reply;
  reply.text = doc["response"].get<std::string>();
  if (doc.contains("usage") && doc["usage"].is_object()) {
    reply.usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
    reply.usage.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
  } else {
    reply.usage.prompt_tokens = estimate_tokens(call.rendered_prompt);
    reply.usage.completion_tokens = estimate_tokens(reply.text);
  }
  return reply;
}

LlmReply HttpTransport::send(const LlmCall& call, const LlmConfig& config) {
  if (config.endpoint.empty()) {
    throw Error(ErrorCode::kLlmTransportError, "no LLM endpoint configured (set PCIG_LLM_ENDPOINT)");
  }
  const Endpoint ep = parse_endpoint(config.endpoint);
  std::string path = ep.path;
  if (!path.ends_with("/chat/completions")) {
    while (path.ends_with("/")) path.pop_back();
    path += "/v1/chat/completions";
  }
  const json body = {
      {"model", config.model},
      {"temperature", config.temperature},
      {"messages",
       json::array({{{"role", "system"},
                     {"content", "You plan image layouts. Reply with one JSON document and nothing else."}},
                    {{"role", "user"}, {"content", call.rendered_prompt}}})}};

  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kLlmTransportError,
                "request failed: " + httplib::to_string(res.error()), config.endpoint);
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kLlmTransportError, "HTTP status " + std::to_string(res->status),
                config.endpoint);
  }
  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kLlmTransportError, std::string("response is not JSON: ") + e.what(),
                config.endpoint);
  }
  LlmReply reply;
  try {
    reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kLlmTransportError, "response lacks choices[0].message.content",
                config.endpoint);
  }
  if (doc.contains("usage") && doc["usage"].is_object()) {
    reply.usage.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
    reply.usage.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
  } else {
    reply.usage.prompt_tokens = estimate_tokens(call.rendered_prompt);
    reply.usage.completion_tokens = estimate_tokens(reply.text);
  }
  return reply;
}

RecordingTransport::RecordingTransport(std::shared_ptr<LlmTransport> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {}

LlmReply RecordingTransport::send(const LlmCall& call, const LlmConfig& config) {
  LlmReply reply = inner_->send(call, config);
  std::filesystem::create_directories(dir_);
  const json doc = {{"template_id", call.template_id},
                    {"variables", call.variables},
                    {"response", reply.text},
                    {"usage",
                     {{"prompt_tokens", reply.usage.prompt_tokens},
                      {"completion_tokens", reply.usage.completion_tokens}}}};
  const auto path = dir_ / (fixture_key(call.template_id, call.variables) + ".json");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write fixture", path.string());
  out << doc.dump(2) << '\n';
  return reply;
}

// ---------------------------------------------------------------------------

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  TemplateStore store;
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kConfigError, "template directory not found", dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) store.add(f.stem().string(), read_file(f));
  return store;
}

void TemplateStore::add(std::string id, std::string text) { templates_[std::move(id)] = std::move(text); }

std::string TemplateStore::render(const std::string& id, const TemplateVars& vars) const {
  const auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::kConfigError, "unknown template '" + id + "'");
  return render_template(it->second, vars);
}

std::string render_template(std::string_view text, const TemplateVars& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::kConfigError, "unterminated placeholder in template");
    }
    out.append(text.substr(pos, open - pos));
    const std::string name = trim(text.substr(open + 2, close - open - 2));
    const auto it = vars.find(name);
    if (it == vars.end()) throw Error(ErrorCode::kConfigError, "template variable '" + name + "' not supplied");
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

std::optional<json> repair_json(std::string_view raw) {
  auto try_parse = [](std::string_view s) -> std::optional<json> {
    json doc = json::parse(s, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    return doc;
  };
  if (auto doc = try_parse(raw)) return doc;

  const std::size_t start = raw.find_first_of("{[");
  if (start == std::string_view::npos) return std::nullopt;

  std::string text;
  std::vector<char> stack;
  bool in_string = false, escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    text.push_back(c);
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') stack.push_back('}');
    else if (c == '[') stack.push_back(']');
    else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::nullopt;
      stack.pop_back();
      if (stack.empty()) break;  // end of the outermost value; drop trailing prose
    }
  }
  if (in_string) text.push_back('"');
  while (!stack.empty()) {
    while (!text.empty() && (std::isspace(static_cast<unsigned char>(text.back())) || text.back() == ',')) {
      text.pop_back();
    }
    text.push_back(stack.back());
    stack.pop_back();
  }
  return try_parse(text);
}

// ---------------------------------------------------------------------------

LlmClient::LlmClient(std::shared_ptr<LlmTransport> transport, TemplateStore templates, LlmConfig config)
    : transport_(std::move(transport)), templates_(std::move(templates)), config_(std::move(config)) {
  if (!transport_) throw Error(ErrorCode::kConfigError, "LLM client needs a transport");
  if (config_.max_retries < 0) throw Error(ErrorCode::kConfigError, "max_retries must be >= 0");
}

std::string LlmClient::complete(const std::string& template_id, const TemplateVars& vars) {
  LlmCall call{template_id, vars, templates_.render(template_id, vars)};
  const LlmReply reply = transport_->send(call, config_);
  calls_.fetch_add(1);
  const double usd = (static_cast<double>(reply.usage.prompt_tokens) * config_.prompt_price_per_1k +
                      static_cast<double>(reply.usage.completion_tokens) * config_.completion_price_per_1k) /
                     1000.0;
  cost_micro_usd_.fetch_add(std::max<std::int64_t>(0, std::llround(usd * 1e6)));
  return reply.text;
}

json LlmClient::complete_json(const std::string& template_id, const TemplateVars& vars,
                              const StructureCheck& check) {
  std::string last_problem;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    TemplateVars v = vars;
    if (attempt > 0) v["attempt"] = std::to_string(attempt);
    const std::string raw = complete(template_id, v);
    auto doc = repair_json(raw);
    if (!doc) {
      last_problem = "response is not JSON";
      continue;
    }
    if (auto problem = check ? check(*doc) : std::nullopt) {
      last_problem = *problem;
      continue;
    }
    return *doc;
  }
  throw Error(ErrorCode::kLlmProtocolError,
              "template '" + template_id + "' gave no usable response after " +
                  std::to_string(config_.max_retries + 1) + " attempt(s): " + last_problem);
}

double LlmClient::cost_usd() const { return static_cast<double>(cost_micro_usd_.load()) / 1e6; }

}  // namespace pcig

#include "pcig/pn_resolver.hpp"

#include <mutex>

#include <httplib.h>
#include <json.hpp>

#include "pcig/net_util.hpp"
#include "pcig/scene_model.hpp"

namespace pcig {

FixtureImageResolver::FixtureImageResolver(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<std::string> FixtureImageResolver::resolve(const std::string& pn_key) {
  if (!is_valid_pn_key(pn_key)) return std::nullopt;
  for (const char* ext : {".png", ".jpg", ".jpeg", ".webp"}) {
    const auto path = dir_ / (pn_key + ext);
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) return path.lexically_normal().generic_string();
  }
  return std::nullopt;
}

SearchImageResolver::SearchImageResolver(std::string endpoint, int timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {}

std::optional<std::string> SearchImageResolver::resolve(const std::string& pn_key) {
  std::string words = pn_key;
  for (char& c : words) {
    if (c == '-') c = ' ';
  }
  const Endpoint ep = parse_endpoint(endpoint_);
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  const std::string path = (ep.path.empty() ? std::string("/") : ep.path) + "?q=" + percent_encode(words);
  const auto res = client.Get(path);
  if (!res || res->status != 200) return std::nullopt;
  const auto doc = nlohmann::json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  if (doc.contains("url") && doc["url"].is_string()) return doc["url"].get<std::string>();
  if (doc.contains("results") && doc["results"].is_array()) {
    for (const auto& r : doc["results"]) {
      if (r.is_object() && r.contains("url") && r["url"].is_string()) return r["url"].get<std::string>();
    }
  }
  return std::nullopt;
}

CachingResolver::CachingResolver(std::shared_ptr<PnImageResolver> inner) : inner_(std::move(inner)) {}

std::optional<std::string> CachingResolver::resolve(const std::string& pn_key) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(pn_key); it != cache_.end()) return it->second;
  }
  fetches_.fetch_add(1);
  auto ref = inner_->resolve(pn_key);
  if (ref) {
    std::unique_lock lock(mutex_);
    cache_.try_emplace(pn_key, *ref);
    return cache_.at(pn_key);
  }
  return std::nullopt;
}

ChainResolver::ChainResolver(std::vector<std::shared_ptr<PnImageResolver>> chain) : chain_(std::move(chain)) {}

std::optional<std::string> ChainResolver::resolve(const std::string& pn_key) {
  for (const auto& r : chain_) {
    if (auto ref = r->resolve(pn_key)) return ref;
  }
  return std::nullopt;
}

}  // namespace pcig

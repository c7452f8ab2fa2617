#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace pcig {

// Maps a proper-noun slug to a representative image (local path or URL).
class PnImageResolver {
 public:
  virtual ~PnImageResolver() = default;
  virtual std::optional<std::string> resolve(const std::string& pn_key) = 0;
};

// `<dir>/<pn_key>.{png,jpg,jpeg,webp}`.
class FixtureImageResolver : public PnImageResolver {
 public:
  explicit FixtureImageResolver(std::filesystem::path dir);
  std::optional<std::string> resolve(const std::string& pn_key) override;

 private:
  std::filesystem::path dir_;
};

// GET <endpoint>?q=<words>; expects {"results": [{"url": ...}, ...]} or {"url": ...}.
class SearchImageResolver : public PnImageResolver {
 public:
  explicit SearchImageResolver(std::string endpoint, int timeout_seconds = 20);
  std::optional<std::string> resolve(const std::string& pn_key) override;

 private:
  std::string endpoint_;
  int timeout_seconds_;
};

// Concurrent readers, exclusive writers; only hits are cached.
class CachingResolver : public PnImageResolver {
 public:
  explicit CachingResolver(std::shared_ptr<PnImageResolver> inner);
  std::optional<std::string> resolve(const std::string& pn_key) override;

  std::int64_t fetches() const { return fetches_.load(); }

 private:
  std::shared_ptr<PnImageResolver> inner_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::string> cache_;
  std::atomic<std::int64_t> fetches_{0};
};

// Tries each resolver in order.
class ChainResolver : public PnImageResolver {
 public:
  explicit ChainResolver(std::vector<std::shared_ptr<PnImageResolver>> chain);
  std::optional<std::string> resolve(const std::string& pn_key) override;

 private:
  std::vector<std::shared_ptr<PnImageResolver>> chain_;
};

}  // namespace pcig

#include "pcig/paths.hpp"

#include <cstdlib>

namespace pcig {

namespace {

std::filesystem::path from_env(const char* name, const char* fallback) {
  const char* value = std::getenv(name);
  return (value && *value) ? std::filesystem::path(value) : std::filesystem::path(fallback);
}

}  // namespace

std::filesystem::path data_dir() { return from_env("PCIG_DATA_DIR", PCIG_DATA_DIR); }

std::filesystem::path template_dir() { return from_env("PCIG_TEMPLATE_DIR", PCIG_TEMPLATE_DIR); }

}  // namespace pcig

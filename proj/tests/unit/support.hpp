#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

#include "pcig/llm_client.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return PCIG_SOURCE_DIR; }

inline constexpr const char* kJersey =
    "A blue basketball jersey with the Golden State Warriors logo and 'Stephen Curry' written on it.";
inline constexpr const char* kGiraffes = "Six giraffes in a grassy plain with trees in the background.";

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pcig_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Replies by template id; a list is consumed one entry per call and the last
// entry repeats. Records every call.
class ScriptedTransport : public pcig::LlmTransport {
 public:
  explicit ScriptedTransport(std::map<std::string, std::vector<std::string>> replies)
      : replies_(std::move(replies)) {}

  pcig::LlmReply send(const pcig::LlmCall& call, const pcig::LlmConfig&) override {
    std::lock_guard lock(mutex_);
    calls.push_back(call);
    auto& queue = replies_.at(call.template_id);
    auto& used = used_[call.template_id];
    pcig::LlmReply r;
    r.text = queue[std::min(used, queue.size() - 1)];
    ++used;
    r.usage = {1000, 500};
    return r;
  }

  std::vector<pcig::LlmCall> calls;

 private:
  std::mutex mutex_;
  std::map<std::string, std::vector<std::string>> replies_;
  std::map<std::string, std::size_t> used_;
};

inline pcig::TemplateStore templates() { return pcig::TemplateStore::load(source_dir() / "templates"); }

// httplib server on an ephemeral loopback port for the lifetime of the object.
class LocalServer {
 public:
  explicit LocalServer(const std::function<void(httplib::Server&)>& routes) {
    routes(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

// Port that nothing listens on: bound once, then released.
inline std::string dead_url() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof(addr);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return "http://127.0.0.1:" + std::to_string(ntohs(addr.sin_port));
}

}  // namespace testing

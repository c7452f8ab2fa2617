#include "pcig/net_util.hpp"

#include <cctype>

#include "pcig/error.hpp"
#include "pcig/scene_model.hpp"

namespace pcig {

Endpoint parse_endpoint(std::string_view url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::kConfigError, "endpoint must start with http:// or https://", std::string(url));
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kConfigError, "unsupported scheme '" + std::string(scheme) + "'", std::string(url));
  }
  const std::size_t host_begin = scheme_end + 3;
  const std::size_t slash = url.find('/', host_begin);
  const std::string_view host = url.substr(host_begin, slash == std::string_view::npos ? url.npos : slash - host_begin);
  if (host.empty()) throw Error(ErrorCode::kConfigError, "endpoint has no host", std::string(url));
  Endpoint ep;
  ep.scheme_host_port = std::string(url.substr(0, host_begin)) + std::string(host);
  if (slash != std::string_view::npos) ep.path = std::string(url.substr(slash));
  while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  return ep;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string header_param(std::string_view header, std::string_view key) {
  const std::string lowered = lower(header);
  const std::string needle = std::string(key) + "=";
  std::size_t pos = 0;
  while ((pos = lowered.find(needle, pos)) != std::string::npos) {
    if (pos == 0 || lowered[pos - 1] == ';' || lowered[pos - 1] == ' ') break;
    pos += needle.size();
  }
  if (pos == std::string::npos) return {};
  std::size_t begin = pos + needle.size();
  if (begin < header.size() && header[begin] == '"') {
    const std::size_t end = header.find('"', begin + 1);
    return std::string(header.substr(begin + 1, end == std::string_view::npos ? header.npos : end - begin - 1));
  }
  const std::size_t end = header.find(';', begin);
  return trim(header.substr(begin, end == std::string_view::npos ? header.npos : end - begin));
}

}  // namespace

std::string MultipartPart::content_type() const {
  const auto it = headers.find("content-type");
  return it == headers.end() ? std::string() : lower(trim(it->second.substr(0, it->second.find(';'))));
}

std::string MultipartPart::name() const {
  const auto it = headers.find("content-disposition");
  return it == headers.end() ? std::string() : header_param(it->second, "name");
}

std::vector<MultipartPart> parse_multipart(std::string_view content_type, std::string_view body) {
  const std::string boundary = header_param(content_type, "boundary");
  if (boundary.empty()) throw Error(ErrorCode::kBackendUnavailable, "multipart response without boundary");
  const std::string delim = "--" + boundary;
  std::vector<MultipartPart> parts;
  std::size_t pos = body.find(delim);
  while (pos != std::string_view::npos) {
    pos += delim.size();
    if (body.substr(pos, 2) == "--") break;
    if (body.substr(pos, 2) == "\r\n") pos += 2;
    const std::size_t next = body.find("\r\n" + delim, pos);
    if (next == std::string_view::npos) break;
    const std::string_view chunk = body.substr(pos, next - pos);
    const std::size_t split = chunk.find("\r\n\r\n");
    MultipartPart part;
    const std::string_view head = split == std::string_view::npos ? std::string_view{} : chunk.substr(0, split);
    part.body = std::string(split == std::string_view::npos ? chunk : chunk.substr(split + 4));
    std::size_t line_start = 0;
    while (line_start < head.size()) {
      std::size_t line_end = head.find("\r\n", line_start);
      if (line_end == std::string_view::npos) line_end = head.size();
      const std::string_view line = head.substr(line_start, line_end - line_start);
      if (const auto colon = line.find(':'); colon != std::string_view::npos) {
        part.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
      }
      line_start = line_end + 2;
    }
    parts.push_back(std::move(part));
    pos = next + 2;
  }
  return parts;
}

std::string percent_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

}  // namespace pcig

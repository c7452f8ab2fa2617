#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pcig {

struct Endpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "" or "/prefix"
};

// Throws kConfigError for URLs without an http(s) scheme or host.
Endpoint parse_endpoint(std::string_view url);

struct MultipartPart {
  std::map<std::string, std::string> headers;  // lowercase names
  std::string body;

  std::string content_type() const;
  std::string name() const;  // from Content-Disposition
};

// Splits a multipart body using the boundary from `content_type`.
std::vector<MultipartPart> parse_multipart(std::string_view content_type, std::string_view body);

std::string percent_encode(std::string_view text);

}  // namespace pcig

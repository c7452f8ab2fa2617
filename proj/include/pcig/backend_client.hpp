#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcig/dispatch.hpp"

namespace pcig {

struct BackendResponse {
  std::string png;
  nlohmann::json regions;  // {"canvas": ..., "regions": [{object_id, route, box_px}]}
};

// POST <endpoint>/generate with the request JSON; the reply is multipart with
// an image/png part and an application/json region manifest. Any transport or
// protocol failure is kBackendUnavailable carrying endpoint and HTTP status.
BackendResponse post_generate(const std::string& endpoint, const BackendRequest& request, int timeout_seconds = 300);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

// Schematic stand-in for the image backend: outlined GO boxes, shaded TEXT
// boxes, PN boxes filled with their fixture image (or a tint when the
// reference is not a local PNG). Deterministic in the request and fixtures.
BackendResponse render_mock(const BackendRequest& request);

nlohmann::json region_manifest(const BackendRequest& request);

// 8-bit RGB.
std::string encode_png(int width, int height, const std::vector<std::uint8_t>& rgb);
std::optional<RgbImage> decode_png_file(const std::string& path);

}  // namespace pcig

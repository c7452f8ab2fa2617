#include "pcig/backend_client.hpp"

#include <array>
#include <cstdint>

#include <httplib.h>
#include <png.h>

#include "pcig/error.hpp"
#include "pcig/net_util.hpp"

namespace pcig {

using json = nlohmann::json;

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr std::array<Rgb, 8> kPalette = {{{31, 119, 180},
                                          {255, 127, 14},
                                          {44, 160, 44},
                                          {214, 39, 40},
                                          {148, 103, 189},
                                          {140, 86, 75},
                                          {227, 119, 194},
                                          {23, 190, 207}}};

Rgb key_color(const std::string& key) {
  std::uint32_t h = 2166136261u;
  for (char c : key) h = (h ^ static_cast<std::uint8_t>(c)) * 16777619u;
  return {static_cast<std::uint8_t>(80 + h % 150), static_cast<std::uint8_t>(80 + (h >> 8) % 150),
          static_cast<std::uint8_t>(80 + (h >> 16) % 150)};
}

Rgb lighten(Rgb c) {
  for (auto& v : c) v = static_cast<std::uint8_t>(v + (255 - v) * 3 / 5);
  return c;
}

struct Canvas {
  int w;
  int h;
  std::vector<std::uint8_t> rgb;

  void fill(int x0, int y0, int x1, int y1, Rgb c) {
    x0 = std::clamp(x0, 0, w);
    x1 = std::clamp(x1, 0, w);
    y0 = std::clamp(y0, 0, h);
    y1 = std::clamp(y1, 0, h);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        auto* p = &rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)) * 3];
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
      }
    }
  }

  // Nearest-neighbour scaling into the box.
  void paste(const PixelBox& b, const RgbImage& img) {
    if (b.w <= 0 || b.h <= 0 || img.width <= 0 || img.height <= 0) return;
    for (int y = std::max(0, b.y); y < std::min(h, b.y + b.h); ++y) {
      const auto sy = static_cast<std::size_t>(static_cast<std::int64_t>(y - b.y) * img.height / b.h);
      for (int x = std::max(0, b.x); x < std::min(w, b.x + b.w); ++x) {
        const auto sx = static_cast<std::size_t>(static_cast<std::int64_t>(x - b.x) * img.width / b.w);
        const auto* src = &img.rgb[(sy * static_cast<std::size_t>(img.width) + sx) * 3];
        auto* dst = &rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)) * 3];
        dst[0] = src[0];
        dst[1] = src[1];
        dst[2] = src[2];
      }
    }
  }

  void outline(const PixelBox& b, int t, Rgb c) {
    fill(b.x, b.y, b.x + b.w, b.y + t, c);
    fill(b.x, b.y + b.h - t, b.x + b.w, b.y + b.h, c);
    fill(b.x, b.y, b.x + t, b.y + b.h, c);
    fill(b.x + b.w - t, b.y, b.x + b.w, b.y + b.h, c);
  }
};

}  // namespace

std::string encode_png(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw Error(ErrorCode::kConfigError, "pixel buffer does not match image size");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, std::string("png encoding failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, std::string("png encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::optional<RgbImage> decode_png_file(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) return std::nullopt;
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    return std::nullopt;
  }
  return out;
}

json region_manifest(const BackendRequest& request) {
  json regions = json::array();
  for (const auto& item : request.items) {
    const PixelBox px = to_pixels(item.box, request.canvas_width_px, request.canvas_height_px);
    regions.push_back({{"object_id", item.object_id},
                       {"route", route_name(item.route)},
                       {"box_px", {{"x", px.x}, {"y", px.y}, {"w", px.w}, {"h", px.h}}}});
  }
  return {{"canvas", {{"width", request.canvas_width_px}, {"height", request.canvas_height_px}}},
          {"regions", std::move(regions)}};
}

BackendResponse render_mock(const BackendRequest& request) {
  constexpr int kMaxSide = 8192;
  const int w = request.canvas_width_px;
  const int h = request.canvas_height_px;
  if (w <= 0 || h <= 0 || w > kMaxSide || h > kMaxSide) {
    throw Error(ErrorCode::kConfigError, "mock canvas must be between 1 and 8192 px per side");
  }
  Canvas canvas{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 244)};
  const int thickness = std::max(1, std::min(w, h) / 256);
  for (std::size_t i = 0; i < request.items.size(); ++i) {
    const auto& item = request.items[i];
    const PixelBox px = to_pixels(item.box, w, h);
    switch (item.route) {
      case DispatchRoute::kLayoutBackend:
        canvas.outline(px, thickness, kPalette[i % kPalette.size()]);
        break;
      case DispatchRoute::kTextModule:
        canvas.fill(px.x, px.y, px.x + px.w, px.y + px.h, {255, 243, 176});
        canvas.outline(px, thickness, {120, 90, 0});
        break;
      case DispatchRoute::kPnComposite: {
        const Rgb c = key_color(item.pn_key.value_or(item.caption));
        const auto picture = item.image_ref ? decode_png_file(*item.image_ref) : std::nullopt;
        if (picture) {
          canvas.paste(px, *picture);
        } else {
          canvas.fill(px.x, px.y, px.x + px.w, px.y + px.h, lighten(c));
        }
        canvas.outline(px, thickness, c);
        break;
      }
    }
  }
  return {encode_png(w, h, canvas.rgb), region_manifest(request)};
}

BackendResponse post_generate(const std::string& endpoint, const BackendRequest& request, int timeout_seconds) {
  Endpoint ep;
  try {
    ep = parse_endpoint(endpoint);
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendUnavailable, e.what(), endpoint);
  }
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  client.set_write_timeout(timeout_seconds);
  const std::string url = endpoint + "/generate";
  const auto res = client.Post(ep.path + "/generate", serialize_request(request), "application/json");
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable, "POST failed: " + httplib::to_string(res.error()), url);
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable, "HTTP status " + std::to_string(res->status), url);
  }
  const auto parts = parse_multipart(res->get_header_value("Content-Type"), res->body);
  BackendResponse out;
  bool have_png = false;
  bool have_regions = false;
  for (const auto& part : parts) {
    const std::string type = part.content_type();
    if (!have_png && (type.starts_with("image/png") || part.name() == "image")) {
      out.png = part.body;
      have_png = true;
    } else if (!have_regions && (type.starts_with("application/json") || part.name() == "manifest")) {
      out.regions = json::parse(part.body, nullptr, false);
      have_regions = !out.regions.is_discarded();
    }
  }
  if (!have_png || !have_regions) {
    throw Error(ErrorCode::kBackendUnavailable, "reply lacks an image/png part or a JSON manifest part", url);
  }
  return out;
}

}  // namespace pcig

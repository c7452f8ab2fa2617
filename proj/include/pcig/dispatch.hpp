#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pcig/scene_model.hpp"

namespace pcig {

class PnImageResolver;

inline constexpr std::string_view kRequestSchemaVersion = "pcig-request/1";

enum class DispatchRoute { kLayoutBackend, kTextModule, kPnComposite };
std::string_view route_name(DispatchRoute route);
std::optional<DispatchRoute> parse_route(std::string_view name);

// GO -> layout_backend, TEXT -> text_module, PN -> pn_composite. Without the
// text module, TEXT objects travel as ordinary captions.
DispatchRoute route_for(ObjectCategory category, bool text_module = true);

struct DispatchItem {
  int object_id = 0;
  DispatchRoute route = DispatchRoute::kLayoutBackend;
  std::string caption;
  BoundingBox box;
  std::optional<std::string> text_payload;  // text_module
  std::optional<std::string> pn_key;        // pn_composite
  std::optional<std::string> image_ref;     // pn_composite

  bool operator==(const DispatchItem&) const = default;
};

struct BackendRequest {
  std::string prompt;
  std::string prompt_id;
  int canvas_width_px = 512;
  int canvas_height_px = 512;
  std::vector<DispatchItem> items;
  nlohmann::json params = nlohmann::json::object();  // passed through untouched
  bool text_module = true;
  std::string mode = "full";
  std::string schema_version{kRequestSchemaVersion};

  bool operator==(const BackendRequest&) const = default;
};

struct DispatchOptions {
  bool text_module = true;
  std::string mode = "full";
  nlohmann::json params = nlohmann::json::object();
};

// One item per object in object order. Throws kInvalidPlan for plans that do
// not validate and kPnResolutionFailed naming every unresolved pn_key.
BackendRequest dispatch_plan(const ScenePlan& plan, PnImageResolver* resolver, const DispatchOptions& options = {});

nlohmann::json request_to_json(const BackendRequest& request);
BackendRequest request_from_json(const nlohmann::json& doc);
std::string serialize_request(const BackendRequest& request);

struct PixelBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const PixelBox&) const = default;
};

// round(fraction * canvas) per coordinate.
PixelBox to_pixels(const BoundingBox& box, int width_px, int height_px);

}  // namespace pcig

#include "pcig/dispatch.hpp"

#include <cmath>

#include "pcig/error.hpp"
#include "pcig/plan_io.hpp"
#include "pcig/pn_resolver.hpp"

namespace pcig {

using json = nlohmann::json;

std::string_view route_name(DispatchRoute route) {
  switch (route) {
    case DispatchRoute::kLayoutBackend: return "layout_backend";
    case DispatchRoute::kTextModule: return "text_module";
    case DispatchRoute::kPnComposite: return "pn_composite";
  }
  return "layout_backend";
}

std::optional<DispatchRoute> parse_route(std::string_view name) {
  for (auto r : {DispatchRoute::kLayoutBackend, DispatchRoute::kTextModule, DispatchRoute::kPnComposite}) {
    if (route_name(r) == name) return r;
  }
  return std::nullopt;
}

DispatchRoute route_for(ObjectCategory category, bool text_module) {
  switch (category) {
    case ObjectCategory::kGO: return DispatchRoute::kLayoutBackend;
    case ObjectCategory::kText: return text_module ? DispatchRoute::kTextModule : DispatchRoute::kLayoutBackend;
    case ObjectCategory::kPN: return DispatchRoute::kPnComposite;
  }
  return DispatchRoute::kLayoutBackend;
}

PixelBox to_pixels(const BoundingBox& box, int width_px, int height_px) {
  auto px = [](double f, int size) { return static_cast<int>(std::lround(f * size)); };
  return {px(box.x, width_px), px(box.y, height_px), px(box.w, width_px), px(box.h, height_px)};
}

BackendRequest dispatch_plan(const ScenePlan& plan, PnImageResolver* resolver, const DispatchOptions& options) {
  if (const auto diagnostics = validate_plan(plan); !diagnostics.empty()) {
    throw Error(ErrorCode::kInvalidPlan, "cannot dispatch an invalid plan: " + diagnostics.front().code + " (" +
                                             diagnostics.front().message + ")");
  }
  BackendRequest request;
  request.prompt = plan.prompt.raw_text;
  request.prompt_id = plan.prompt.id;
  request.canvas_width_px = plan.canvas_width_px;
  request.canvas_height_px = plan.canvas_height_px;
  request.params = options.params.is_null() ? json::object() : options.params;
  request.text_module = options.text_module;
  request.mode = options.mode;

  std::vector<std::string> unresolved;
  for (const auto& o : plan.objects) {
    DispatchItem item;
    item.object_id = o.object_id;
    item.route = route_for(o.category, options.text_module);
    item.caption = o.caption;
    item.box = plan.boxes.at(o.object_id);
    if (item.route == DispatchRoute::kTextModule) item.text_payload = o.text_payload;
    if (item.route == DispatchRoute::kPnComposite) {
      item.pn_key = o.pn_key;
      item.image_ref = resolver ? resolver->resolve(*o.pn_key) : std::nullopt;
      if (!item.image_ref && std::find(unresolved.begin(), unresolved.end(), *o.pn_key) == unresolved.end()) {
        unresolved.push_back(*o.pn_key);
      }
    }
    request.items.push_back(std::move(item));
  }
  if (!unresolved.empty()) {
    std::string keys;
    for (const auto& k : unresolved) keys += (keys.empty() ? "" : ", ") + k;
    throw Error(ErrorCode::kPnResolutionFailed, "no image found for pn_key(s): " + keys, plan.prompt.id);
  }
  return request;
}

json request_to_json(const BackendRequest& request) {
  json items = json::array();
  for (const auto& item : request.items) {
    const PixelBox px = to_pixels(item.box, request.canvas_width_px, request.canvas_height_px);
    json j = {{"object_id", item.object_id},
              {"route", route_name(item.route)},
              {"caption", item.caption},
              {"box", {{"x", item.box.x}, {"y", item.box.y}, {"w", item.box.w}, {"h", item.box.h}}},
              {"box_px", {{"x", px.x}, {"y", px.y}, {"w", px.w}, {"h", px.h}}}};
    if (item.text_payload) j["text"] = *item.text_payload;
    if (item.pn_key) j["pn_key"] = *item.pn_key;
    if (item.image_ref) j["image_ref"] = *item.image_ref;
    items.push_back(std::move(j));
  }
  return {{"schema_version", request.schema_version},
          {"prompt", {{"id", request.prompt_id}, {"text", request.prompt}}},
          {"canvas", {{"width", request.canvas_width_px}, {"height", request.canvas_height_px}}},
          {"items", std::move(items)},
          {"params", request.params},
          {"ablation", {{"mode", request.mode}, {"text_module", request.text_module}}}};
}

std::string serialize_request(const BackendRequest& request) { return canonical_dump(request_to_json(request)); }

namespace {

[[noreturn]] void bad(const std::string& message, const std::string& path) {
  throw Error(ErrorCode::kMalformedRequest, message, path);
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) bad("expected an object", path.empty() ? "/" : path);
  const auto it = obj.find(key);
  if (it == obj.end()) bad(std::string("missing field '") + key + "'", path + "/" + key);
  return *it;
}

std::string str(const json& obj, const char* key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_string()) bad("expected a string", path + "/" + key);
  return v.get<std::string>();
}

int integer(const json& obj, const char* key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_number_integer()) bad("expected an integer", path + "/" + key);
  return v.get<int>();
}

double number(const json& obj, const char* key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_number()) bad("expected a number", path + "/" + key);
  return v.get<double>();
}

}  // namespace

BackendRequest request_from_json(const json& doc) {
  BackendRequest r;
  r.schema_version = str(doc, "schema_version", "");
  if (r.schema_version != kRequestSchemaVersion) {
    throw Error(ErrorCode::kSchemaVersionMismatch, "unsupported request schema '" + r.schema_version + "'",
                "/schema_version");
  }
  const auto& prompt = field(doc, "prompt", "");
  r.prompt_id = str(prompt, "id", "/prompt");
  r.prompt = str(prompt, "text", "/prompt");
  const auto& canvas = field(doc, "canvas", "");
  r.canvas_width_px = integer(canvas, "width", "/canvas");
  r.canvas_height_px = integer(canvas, "height", "/canvas");
  const auto& items = field(doc, "items", "");
  if (!items.is_array()) bad("expected an array", "/items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string path = "/items/" + std::to_string(i);
    const auto& j = items[i];
    DispatchItem item;
    item.object_id = integer(j, "object_id", path);
    const auto route = parse_route(str(j, "route", path));
    if (!route) bad("unknown route", path + "/route");
    item.route = *route;
    item.caption = str(j, "caption", path);
    const auto& box = field(j, "box", path);
    item.box = {number(box, "x", path + "/box"), number(box, "y", path + "/box"), number(box, "w", path + "/box"),
                number(box, "h", path + "/box")};
    if (j.contains("text")) item.text_payload = str(j, "text", path);
    if (j.contains("pn_key")) item.pn_key = str(j, "pn_key", path);
    if (j.contains("image_ref")) item.image_ref = str(j, "image_ref", path);
    r.items.push_back(std::move(item));
  }
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) bad("expected an object", "/params");
    r.params = doc["params"];
  }
  if (doc.contains("ablation")) {
    const auto& ablation = doc["ablation"];
    r.mode = str(ablation, "mode", "/ablation");
    const auto& tm = field(ablation, "text_module", "/ablation");
    if (!tm.is_boolean()) bad("expected a boolean", "/ablation/text_module");
    r.text_module = tm.get<bool>();
  }
  return r;
}

}  // namespace pcig

#include "pcig/plan_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pcig/error.hpp"

namespace pcig {

using json = nlohmann::json;

namespace {

void format_double(double v, std::string& out) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
  out.append(buf, res.ptr);
}

void dump_value(const json& v, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        out += json(it.key()).dump();
        out += ": ";
        dump_value(it.value(), indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump_value(v[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float:
      format_double(v.get<double>(), out);
      return;
    default:
      out += v.dump(-1, ' ', false, json::error_handler_t::strict);
      return;
  }
}

[[noreturn]] void malformed(const std::string& message, const std::string& path) {
  throw Error(ErrorCode::kMalformedPlan, message, path);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) malformed(std::string("missing field '") + key + "'", path + "/" + key);
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) malformed("expected a string", path + "/" + key);
  return v.get<std::string>();
}

int get_int(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer()) malformed("expected an integer", path + "/" + key);
  const auto value = v.get<std::int64_t>();
  if (value < std::numeric_limits<int>::min() || value > std::numeric_limits<int>::max()) {
    malformed("integer out of range", path + "/" + key);
  }
  return static_cast<int>(value);
}

double get_number(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) malformed("expected a number", path + "/" + key);
  return v.get<double>();
}

std::optional<std::string> get_optional_string(const json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) malformed("expected a string", path + "/" + key);
  return it->get<std::string>();
}

void expect_object(const json& v, const std::string& path) {
  if (!v.is_object()) malformed("expected an object", path.empty() ? "/" : path);
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) malformed("unexpected field '" + it.key() + "'", path + "/" + it.key());
  }
}

}  // namespace

std::string canonical_dump(const json& value) {
  std::string out;
  dump_value(value, 0, out);
  out += "\n";
  return out;
}

json plan_to_json(const ScenePlan& plan) {
  json prompt = {{"raw_text", plan.prompt.raw_text}, {"id", plan.prompt.id}};
  if (plan.prompt.augmented_text) prompt["augmented_text"] = *plan.prompt.augmented_text;

  json objects = json::array();
  for (const auto& o : plan.objects) {
    json obj = {{"object_id", o.object_id},
                {"caption", o.caption},
                {"category", category_name(o.category)},
                {"group_key", o.group_key},
                {"instance_index", o.instance_index}};
    if (o.text_payload) obj["text_payload"] = *o.text_payload;
    if (o.pn_key) obj["pn_key"] = *o.pn_key;
    objects.push_back(std::move(obj));
  }
  json triples = json::array();
  for (const auto& t : plan.triples) {
    triples.push_back({{"subject_id", t.subject_id}, {"predicate", t.predicate}, {"object_id", t.object_id}});
  }
  json boxes = json::object();
  for (const auto& [id, b] : plan.boxes) {
    boxes[std::to_string(id)] = {{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
  }
  return {{"schema_version", plan.schema_version},
          {"prompt", std::move(prompt)},
          {"canvas", {{"width", plan.canvas_width_px}, {"height", plan.canvas_height_px}}},
          {"objects", std::move(objects)},
          {"triples", std::move(triples)},
          {"anchor_id", plan.anchor_id},
          {"boxes", std::move(boxes)}};
}

std::string serialize_plan(const ScenePlan& plan) {
  const auto diagnostics = validate_plan(plan);
  if (!diagnostics.empty()) {
    std::string message = "plan fails validation:";
    for (std::size_t i = 0; i < diagnostics.size() && i < 5; ++i) {
      message += " " + diagnostics[i].code + " (" + diagnostics[i].message + ");";
    }
    throw Error(ErrorCode::kInvalidPlan, message);
  }
  return canonical_dump(plan_to_json(plan));
}

ScenePlan plan_from_json(const json& doc) {
  expect_object(doc, "");
  reject_unknown(doc, {"schema_version", "prompt", "canvas", "objects", "triples", "anchor_id", "boxes"}, "");

  ScenePlan plan;
  plan.schema_version = get_string(doc, "schema_version", "");
  if (plan.schema_version != kPlanSchemaVersion) {
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "unsupported schema_version '" + plan.schema_version + "' (expected '" +
                    std::string(kPlanSchemaVersion) + "')",
                "/schema_version");
  }

  const auto& prompt = require(doc, "prompt", "");
  expect_object(prompt, "/prompt");
  reject_unknown(prompt, {"raw_text", "augmented_text", "id"}, "/prompt");
  plan.prompt.raw_text = get_string(prompt, "raw_text", "/prompt");
  plan.prompt.id = get_string(prompt, "id", "/prompt");
  plan.prompt.augmented_text = get_optional_string(prompt, "augmented_text", "/prompt");

  const auto& canvas = require(doc, "canvas", "");
  expect_object(canvas, "/canvas");
  reject_unknown(canvas, {"width", "height"}, "/canvas");
  plan.canvas_width_px = get_int(canvas, "width", "/canvas");
  plan.canvas_height_px = get_int(canvas, "height", "/canvas");

  const auto& objects = require(doc, "objects", "");
  if (!objects.is_array()) malformed("expected an array", "/objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string path = "/objects/" + std::to_string(i);
    const auto& o = objects[i];
    expect_object(o, path);
    reject_unknown(o, {"object_id", "caption", "category", "group_key", "instance_index", "text_payload", "pn_key"},
                   path);
    SceneObject obj;
    obj.object_id = get_int(o, "object_id", path);
    obj.caption = get_string(o, "caption", path);
    const auto category = parse_category(get_string(o, "category", path));
    if (!category) malformed("category must be GO, TEXT or PN", path + "/category");
    obj.category = *category;
    obj.group_key = get_string(o, "group_key", path);
    obj.instance_index = get_int(o, "instance_index", path);
    obj.text_payload = get_optional_string(o, "text_payload", path);
    obj.pn_key = get_optional_string(o, "pn_key", path);
    plan.objects.push_back(std::move(obj));
  }

  const auto& triples = require(doc, "triples", "");
  if (!triples.is_array()) malformed("expected an array", "/triples");
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const std::string path = "/triples/" + std::to_string(i);
    const auto& t = triples[i];
    expect_object(t, path);
    reject_unknown(t, {"subject_id", "predicate", "object_id"}, path);
    plan.triples.push_back({get_int(t, "subject_id", path), get_string(t, "predicate", path),
                            get_int(t, "object_id", path)});
  }

  plan.anchor_id = get_int(doc, "anchor_id", "");

  const auto& boxes = require(doc, "boxes", "");
  expect_object(boxes, "/boxes");
  for (auto it = boxes.begin(); it != boxes.end(); ++it) {
    const std::string path = "/boxes/" + it.key();
    const std::string& key = it.key();
    int id = 0;
    const auto res = std::from_chars(key.data(), key.data() + key.size(), id);
    if (key.empty() || res.ec != std::errc() || res.ptr != key.data() + key.size() || id < 0 ||
        std::to_string(id) != key) {
      malformed("box keys must be decimal object ids", path);
    }
    expect_object(it.value(), path);
    reject_unknown(it.value(), {"x", "y", "w", "h"}, path);
    plan.boxes[id] = {get_number(it.value(), "x", path), get_number(it.value(), "y", path),
                      get_number(it.value(), "w", path), get_number(it.value(), "h", path)};
  }
  return plan;
}

ScenePlan parse_plan(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedPlan, std::string("not valid JSON: ") + e.what(),
                "byte " + std::to_string(e.byte));
  }
  return plan_from_json(doc);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write file", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed", path.string());
}

ScenePlan read_plan_file(const std::filesystem::path& path) { return parse_plan(read_text_file(path)); }

// ---------------------------------------------------------------------------

namespace {

void add(std::vector<Diagnostic>& out, std::string code, std::string message, std::vector<int> ids = {}) {
  out.push_back({std::move(code), Severity::kError, std::move(message), std::move(ids)});
}

bool finite_box(const BoundingBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h);
}

}  // namespace

std::vector<Diagnostic> validate_plan(const ScenePlan& plan, const PredicateTable& table,
                                      double near_threshold) {
  std::vector<Diagnostic> out;
  const int n = static_cast<int>(plan.objects.size());

  if (plan.schema_version != kPlanSchemaVersion) {
    add(out, "SCHEMA_VERSION", "schema_version is '" + plan.schema_version + "'");
  }
  if (trim(plan.prompt.raw_text).empty()) add(out, "EMPTY_PROMPT", "prompt raw_text is blank");
  if (plan.canvas_width_px <= 0 || plan.canvas_height_px <= 0) {
    add(out, "INVALID_CANVAS", "canvas dimensions must be positive");
  }
  if (n == 0) add(out, "NO_OBJECTS", "plan has no objects");

  std::map<std::string, int> group_sizes;
  for (const auto& o : plan.objects) group_sizes[o.group_key] += 1;
  std::set<std::pair<std::string, int>> seen_instances;

  for (int i = 0; i < n; ++i) {
    const auto& o = plan.objects[static_cast<std::size_t>(i)];
    if (o.object_id != i) {
      add(out, "OBJECT_ID_MISMATCH", "object at position " + std::to_string(i) + " has id " +
                                         std::to_string(o.object_id), {i});
    }
    if (trim(o.caption).empty()) add(out, "EMPTY_CAPTION", "caption is blank", {i});
    const bool has_text = o.text_payload && !trim(*o.text_payload).empty();
    if (o.category == ObjectCategory::kText && !has_text) {
      add(out, "TEXT_PAYLOAD_MISSING", "TEXT object needs a non-empty text_payload", {i});
    }
    if (o.category != ObjectCategory::kText && o.text_payload) {
      add(out, "TEXT_PAYLOAD_UNEXPECTED", "only TEXT objects carry a text_payload", {i});
    }
    if (o.category == ObjectCategory::kPN) {
      if (!o.pn_key) add(out, "PN_KEY_MISSING", "PN object needs a pn_key", {i});
      else if (!is_valid_pn_key(*o.pn_key)) add(out, "PN_KEY_INVALID", "pn_key must match [a-z0-9-]+", {i});
    } else if (o.pn_key) {
      add(out, "PN_KEY_UNEXPECTED", "only PN objects carry a pn_key", {i});
    }
    if (o.group_key.empty()) add(out, "EMPTY_GROUP_KEY", "group_key is empty", {i});
    if (o.instance_index < 0 || o.instance_index >= group_sizes[o.group_key]) {
      add(out, "GROUP_INDEX_OUT_OF_RANGE",
          "instance_index " + std::to_string(o.instance_index) + " outside group '" + o.group_key + "'", {i});
    }
    if (!seen_instances.insert({o.group_key, o.instance_index}).second) {
      add(out, "GROUP_INDEX_DUPLICATE",
          "duplicate instance " + std::to_string(o.instance_index) + " in group '" + o.group_key + "'", {i});
    }
  }

  for (std::size_t k = 0; k < plan.triples.size(); ++k) {
    const auto& t = plan.triples[k];
    const std::string where = "triple " + std::to_string(k);
    const bool s_ok = t.subject_id >= 0 && t.subject_id < n;
    const bool o_ok = t.object_id >= 0 && t.object_id < n;
    if (!s_ok || !o_ok) {
      std::vector<int> ids;
      if (s_ok) ids.push_back(t.subject_id);
      if (o_ok) ids.push_back(t.object_id);
      add(out, "TRIPLE_DANGLING", where + " references a missing object", ids);
      continue;
    }
    if (t.subject_id == t.object_id) add(out, "TRIPLE_SELF_LOOP", where + " relates an object to itself", {t.subject_id});
    if (!is_normalized_predicate(t.predicate)) {
      add(out, "PREDICATE_INVALID", where + " predicate '" + t.predicate + "' is not normalized",
          {t.subject_id, t.object_id});
    }
  }

  if (n > 0 && (plan.anchor_id < 0 || plan.anchor_id >= n)) {
    add(out, "ANCHOR_INVALID", "anchor_id " + std::to_string(plan.anchor_id) + " is not an object");
  }

  for (int i = 0; i < n; ++i) {
    if (!plan.boxes.contains(i)) add(out, "BOX_MISSING", "object has no bounding box", {i});
  }
  for (const auto& [id, b] : plan.boxes) {
    if (id < 0 || id >= n) {
      add(out, "BOX_ORPHAN", "box " + std::to_string(id) + " has no object");
      continue;
    }
    if (!finite_box(b) || b.x < 0.0 || b.y < 0.0 || b.x > 1.0 || b.y > 1.0 || b.w > 1.0 || b.h > 1.0 ||
        b.x + b.w > 1.0 + kCanvasEpsilon || b.y + b.h > 1.0 + kCanvasEpsilon) {
      add(out, "BOX_OUT_OF_CANVAS", "box leaves the canvas", {id});
    }
    if (finite_box(b) && (b.w < kMinBoxFraction - kCanvasEpsilon || b.h < kMinBoxFraction - kCanvasEpsilon)) {
      add(out, "BOX_TOO_SMALL", "box side below the 0.01 minimum", {id});
    }
  }

  for (const auto& t : plan.triples) {
    if (t.subject_id < 0 || t.subject_id >= n || t.object_id < 0 || t.object_id >= n) continue;
    if (t.subject_id == t.object_id) continue;
    const auto rule = table.find(t.predicate);
    if (!rule) continue;
    LayoutConstraint c;
    c.kind = rule->kind;
    c.a = rule->swap ? t.object_id : t.subject_id;
    c.b = rule->swap ? t.subject_id : t.object_id;
    if (!plan.boxes.contains(c.a) || !plan.boxes.contains(c.b)) continue;
    if (!relation_satisfied(c, plan.boxes, near_threshold)) {
      add(out, "RELATION_UNSATISFIED",
          "'" + t.predicate + "' requires " + std::string(constraint_kind_name(c.kind)) + "(" +
              std::to_string(c.a) + ", " + std::to_string(c.b) + ")",
          {std::min(c.a, c.b), std::max(c.a, c.b)});
    }
  }

  sort_diagnostics(out);
  return out;
}

}  // namespace pcig

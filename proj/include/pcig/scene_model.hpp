#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcig {

inline constexpr std::string_view kPlanSchemaVersion = "pcig-plan/1";

// Box coordinates live on a fixed grid of 1e-6 canvas fractions so that the
// six-digit plan encoding is lossless.
inline constexpr std::int64_t kUnitsPerCanvas = 1'000'000;
inline constexpr double kMinBoxFraction = 0.01;
inline constexpr double kCanvasEpsilon = 1e-9;

struct PromptSpec {
  std::string raw_text;
  std::optional<std::string> augmented_text;
  std::string id;

  // Text fed to analysis: the augmented variant when present.
  const std::string& analysis_text() const { return augmented_text ? *augmented_text : raw_text; }

  bool operator==(const PromptSpec&) const = default;
};

enum class ObjectCategory { kGO, kText, kPN };

std::string_view category_name(ObjectCategory category);
std::optional<ObjectCategory> parse_category(std::string_view name);

struct SceneObject {
  int object_id = 0;
  std::string caption;
  ObjectCategory category = ObjectCategory::kGO;
  std::string group_key;
  int instance_index = 0;
  std::optional<std::string> text_payload;
  std::optional<std::string> pn_key;

  bool operator==(const SceneObject&) const = default;
};

struct RelationTriple {
  int subject_id = 0;
  std::string predicate;
  int object_id = 0;

  bool operator==(const RelationTriple&) const = default;
};

// Normalized [x, y, w, h] with origin at the top-left corner of the canvas.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }
  double area() const { return w * h; }

  bool operator==(const BoundingBox&) const = default;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double iou(const BoundingBox& a, const BoundingBox& b);

// Integer box on the 1e-6 grid; the layout solver works exclusively in these.
struct BoxUnits {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 0;
  std::int64_t h = 0;

  bool operator==(const BoxUnits&) const = default;
};

BoundingBox to_fraction(const BoxUnits& box);
BoxUnits to_units(const BoundingBox& box);
std::int64_t to_units(double fraction);

struct ScenePlan {
  PromptSpec prompt;
  int canvas_width_px = 512;
  int canvas_height_px = 512;
  std::vector<SceneObject> objects;
  std::vector<RelationTriple> triples;
  int anchor_id = 0;
  std::map<int, BoundingBox> boxes;
  std::string schema_version{kPlanSchemaVersion};

  bool operator==(const ScenePlan&) const = default;
};

enum class Severity { kError, kWarning };

struct Diagnostic {
  std::string code;
  Severity severity = Severity::kError;
  std::string message;
  std::vector<int> object_ids;

  bool operator==(const Diagnostic&) const = default;
};

std::string_view severity_name(Severity severity);

// Orders by (first object id, code, message); plan-level findings sort first.
void sort_diagnostics(std::vector<Diagnostic>& diagnostics);

// Lowercase, single-space separated, no leading/trailing blanks.
std::string normalize_predicate(std::string_view text);
bool is_normalized_predicate(std::string_view text);
bool is_valid_pn_key(std::string_view key);
std::string slugify(std::string_view text);
std::string trim(std::string_view text);

}  // namespace pcig

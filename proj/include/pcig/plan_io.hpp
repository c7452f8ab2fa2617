#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pcig/layout.hpp"
#include "pcig/scene_model.hpp"

namespace pcig {

// Sorted keys, two-space indent, floating-point numbers with exactly six
// fractional digits, trailing newline. Byte-stable across runs and platforms.
std::string canonical_dump(const nlohmann::json& value);

nlohmann::json plan_to_json(const ScenePlan& plan);

// Throws kInvalidPlan (listing the first diagnostics) unless validate_plan is clean.
std::string serialize_plan(const ScenePlan& plan);

// Structural decoding only; run validate_plan for semantic checks. Throws
// kSchemaVersionMismatch or kMalformedPlan with a JSON pointer to the field.
ScenePlan parse_plan(std::string_view bytes);
ScenePlan plan_from_json(const nlohmann::json& doc);

ScenePlan read_plan_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_text_file(const std::filesystem::path& path);

// Empty iff every plan invariant holds and every triple whose predicate has an
// explicit table entry is geometrically satisfied. Sorted by (object id, code).
std::vector<Diagnostic> validate_plan(const ScenePlan& plan,
                                      const PredicateTable& table = PredicateTable::builtin(),
                                      double near_threshold = 0.35);

}  // namespace pcig

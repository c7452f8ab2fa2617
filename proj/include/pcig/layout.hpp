#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcig/scene_graph.hpp"
#include "pcig/scene_model.hpp"

namespace pcig {

class LlmClient;

enum class ConstraintKind { kLeftOf, kRightOf, kAbove, kBelow, kInside, kOverlap, kNear };

std::string_view constraint_kind_name(ConstraintKind kind);
std::optional<ConstraintKind> parse_constraint_kind(std::string_view name);
// left_of / right_of / above / below / inside.
bool is_directional(ConstraintKind kind);

struct LayoutConstraint {
  ConstraintKind kind = ConstraintKind::kNear;
  int a = 0;
  int b = 0;
  RelationTriple derived_from;

  bool operator==(const LayoutConstraint&) const = default;
};

// predicate -> constraint kind. `swap` means the triple's object becomes the
// constraint's first argument (e.g. "wearing": the garment overlaps the wearer).
struct PredicateRule {
  ConstraintKind kind = ConstraintKind::kNear;
  bool swap = false;

  bool operator==(const PredicateRule&) const = default;
};

class PredicateTable {
 public:
  PredicateTable() = default;

  // Tab-separated lines: predicate, kind, optional "swap". '#' starts a comment.
  static PredicateTable parse(std::string_view text, std::string_view origin = "<memory>");
  static PredicateTable load(const std::filesystem::path& path);
  // Identical to data/predicates.tsv.
  static const PredicateTable& builtin();

  // Exact entry, then the entry with a leading auxiliary ("is", "are") removed.
  std::optional<PredicateRule> find(std::string_view predicate) const;
  // Total: unknown predicates map to `near`.
  PredicateRule rule_for(std::string_view predicate) const;

  const std::map<std::string, PredicateRule>& entries() const { return entries_; }

  bool operator==(const PredicateTable&) const = default;

 private:
  std::map<std::string, PredicateRule> entries_;
};

std::string_view builtin_predicate_table_text();

std::vector<LayoutConstraint> predicates_to_constraints(std::span<const RelationTriple> triples,
                                                        const PredicateTable& table);

struct LayoutConfig {
  double anchor_center_x = 0.5;
  double anchor_center_y = 0.55;
  double anchor_size = 0.45;
  double sibling_size = 0.22;
  double text_height = 0.08;
  double text_char_width = 0.04;
  double text_min_width = 0.10;
  double text_max_width = 0.90;
  int max_push_iterations = 200;
  double overlap_iou_threshold = 0.05;
  double near_threshold = 0.35;
  std::uint64_t rng_seed = 0;

  // Throws kConfigError.
  void validate() const;
};

// Geometric meaning of each constraint kind on normalized boxes.
bool relation_satisfied(const LayoutConstraint& constraint, const std::map<int, BoundingBox>& boxes,
                        double near_threshold = 0.35);
bool relation_satisfied(ConstraintKind kind, const BoundingBox& a, const BoundingBox& b,
                        double near_threshold = 0.35);

// Rejects directional cycles and inside cycles with kLayoutInfeasible.
void check_constraint_consistency(std::span<const LayoutConstraint> constraints, int object_count);

enum class LayoutSource { kSolver, kLlm, kSolverFallback };
std::string_view layout_source_name(LayoutSource source);

struct LayoutResult {
  std::map<int, BoundingBox> boxes;
  std::vector<Diagnostic> diagnostics;
  LayoutSource source = LayoutSource::kSolver;
  bool converged = true;
  int iterations = 0;
};

// Deterministic anchor-centered solver. Every constraint holds in the output;
// residual unintended overlaps are reported as a LAYOUT_BEST_EFFORT warning.
LayoutResult solve_layout(const SceneGraph& graph, std::span<const SceneObject> objects,
                          std::span<const LayoutConstraint> constraints,
                          const LayoutConfig& config);

struct LlmLayoutRequest {
  const PromptSpec* prompt = nullptr;
  std::span<const SceneObject> objects;
  const SceneGraph* graph = nullptr;
  std::span<const LayoutConstraint> constraints;
  LayoutConfig config;
  int canvas_width_px = 512;
  int canvas_height_px = 512;
  // layout.v1 when relations are available, layout_no_kg.v1 otherwise.
  bool use_relations = true;
};

// Boxes proposed by the language model; any structural or geometric problem
// routes to solve_layout and the result records which path produced it.
LayoutResult llm_layout(const LlmLayoutRequest& request, LlmClient& client);

// Parses {"boxes": {"<id>": {x,y,w,h}}, "canvas": {...}?}, converting pixels when
// a canvas is echoed and clamping into the canvas on the 1e-6 grid.
std::map<int, BoundingBox> parse_layout_response(const std::string& json_text);

// SVG with one rectangle and caption per object.
std::string render_layout_svg(std::span<const SceneObject> objects,
                              const std::map<int, BoundingBox>& boxes, int width_px,
                              int height_px);

}  // namespace pcig

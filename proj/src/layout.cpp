#include "pcig/layout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pcig/error.hpp"
#include "pcig/kernels.hpp"
#include "pcig/llm_client.hpp"

namespace pcig {

using json = nlohmann::json;

std::string_view constraint_kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kLeftOf: return "left_of";
    case ConstraintKind::kRightOf: return "right_of";
    case ConstraintKind::kAbove: return "above";
    case ConstraintKind::kBelow: return "below";
    case ConstraintKind::kInside: return "inside";
    case ConstraintKind::kOverlap: return "overlap";
    case ConstraintKind::kNear: return "near";
  }
  return "near";
}

std::optional<ConstraintKind> parse_constraint_kind(std::string_view name) {
  static constexpr std::array kinds = {ConstraintKind::kLeftOf, ConstraintKind::kRightOf,
                                       ConstraintKind::kAbove,  ConstraintKind::kBelow,
                                       ConstraintKind::kInside, ConstraintKind::kOverlap,
                                       ConstraintKind::kNear};
  for (auto k : kinds) {
    if (constraint_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

bool is_directional(ConstraintKind kind) {
  return kind != ConstraintKind::kOverlap && kind != ConstraintKind::kNear;
}

std::string_view layout_source_name(LayoutSource source) {
  switch (source) {
    case LayoutSource::kSolver: return "solver";
    case LayoutSource::kLlm: return "llm";
    case LayoutSource::kSolverFallback: return "solver_fallback";
  }
  return "solver";
}

// ---------------------------------------------------------------------------
// Predicate table

std::string_view builtin_predicate_table_text() {
  return R"(# predicate	constraint	[swap]
# Lookup is exact on the normalized predicate, then retried without a leading
# "is"/"are". Anything else maps to near.
on	inside
on top of	inside
in	inside
inside	inside
inside of	inside
within	inside
written on	inside
printed on	inside
painted on	inside
engraved on	inside
sitting on	inside
standing on	inside
lying on	inside
sitting in	inside
standing in	inside
parked in	inside
wearing	overlap	swap
wears	overlap	swap
holding	overlap
holds	overlap
carrying	overlap
riding	overlap
rides	overlap
behind	overlap
in front of	overlap
under	below
underneath	below
beneath	below
below	below
above	above
over	above
left of	left_of
to the left of	left_of
on the left of	left_of
right of	right_of
to the right of	right_of
on the right of	right_of
next to	near
beside	near
near	near
by	near
close to	near
in background of	above
in foreground of	below
in the background of	above
in the foreground of	below
)";
}

PredicateTable PredicateTable::parse(std::string_view text, std::string_view origin) {
  PredicateTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(trim(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start)));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(ErrorCode::kConfigError, "expected 'predicate<TAB>kind[<TAB>swap]'", where);
    }
    const auto kind = parse_constraint_kind(fields[1]);
    if (!kind) throw Error(ErrorCode::kConfigError, "unknown constraint kind '" + fields[1] + "'", where);
    bool swap = false;
    if (fields.size() == 3) {
      if (fields[2] != "swap") throw Error(ErrorCode::kConfigError, "third column must be 'swap'", where);
      swap = true;
    }
    const std::string key = normalize_predicate(fields[0]);
    if (key.empty()) throw Error(ErrorCode::kConfigError, "empty predicate", where);
    table.entries_[key] = PredicateRule{*kind, swap};
    if (end == text.size()) break;
  }
  return table;
}

PredicateTable PredicateTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open predicate table", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const PredicateTable& PredicateTable::builtin() {
  static const PredicateTable table = parse(builtin_predicate_table_text(), "<builtin>");
  return table;
}

std::optional<PredicateRule> PredicateTable::find(std::string_view predicate) const {
  const std::string key = normalize_predicate(predicate);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  for (std::string_view aux : {"is ", "are "}) {
    if (key.starts_with(aux)) {
      if (auto it = entries_.find(key.substr(aux.size())); it != entries_.end()) return it->second;
    }
  }
  return std::nullopt;
}

PredicateRule PredicateTable::rule_for(std::string_view predicate) const {
  return find(predicate).value_or(PredicateRule{ConstraintKind::kNear, false});
}

std::vector<LayoutConstraint> predicates_to_constraints(std::span<const RelationTriple> triples,
                                                        const PredicateTable& table) {
  std::vector<LayoutConstraint> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    const auto rule = table.rule_for(t.predicate);
    LayoutConstraint c;
    c.kind = rule.kind;
    c.a = rule.swap ? t.object_id : t.subject_id;
    c.b = rule.swap ? t.subject_id : t.object_id;
    c.derived_from = t;
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry

bool relation_satisfied(ConstraintKind kind, const BoundingBox& a, const BoundingBox& b,
                        double near_threshold) {
  switch (kind) {
    case ConstraintKind::kLeftOf: return a.center_x() < b.center_x();
    case ConstraintKind::kRightOf: return a.center_x() > b.center_x();
    case ConstraintKind::kAbove: return a.center_y() < b.center_y();
    case ConstraintKind::kBelow: return a.center_y() > b.center_y();
    case ConstraintKind::kInside:
      return a.x >= b.x - kCanvasEpsilon && a.y >= b.y - kCanvasEpsilon &&
             a.x + a.w <= b.x + b.w + kCanvasEpsilon && a.y + a.h <= b.y + b.h + kCanvasEpsilon;
    case ConstraintKind::kOverlap: return iou(a, b) > 0.0;
    case ConstraintKind::kNear:
      return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y()) <=
             near_threshold + kCanvasEpsilon;
  }
  return false;
}

bool relation_satisfied(const LayoutConstraint& constraint, const std::map<int, BoundingBox>& boxes,
                        double near_threshold) {
  const auto a = boxes.find(constraint.a);
  const auto b = boxes.find(constraint.b);
  if (a == boxes.end() || b == boxes.end()) return false;
  return relation_satisfied(constraint.kind, a->second, b->second, near_threshold);
}

void LayoutConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kConfigError, std::string(name) + " must lie in (0, 1]");
    }
  };
  fraction(anchor_size, "anchor_size");
  fraction(sibling_size, "sibling_size");
  fraction(text_height, "text_height");
  fraction(text_char_width, "text_char_width");
  fraction(text_min_width, "text_min_width");
  fraction(text_max_width, "text_max_width");
  fraction(overlap_iou_threshold, "overlap_iou_threshold");
  fraction(anchor_center_x, "anchor_center_x");
  fraction(anchor_center_y, "anchor_center_y");
  if (text_min_width > text_max_width) {
    throw Error(ErrorCode::kConfigError, "text_min_width exceeds text_max_width");
  }
  if (!(near_threshold > 0.0 && near_threshold <= std::sqrt(2.0))) {
    throw Error(ErrorCode::kConfigError, "near_threshold must lie in (0, sqrt(2)]");
  }
  if (max_push_iterations < 1) throw Error(ErrorCode::kConfigError, "max_push_iterations must be >= 1");
}

// ---------------------------------------------------------------------------
// Consistency

namespace {

bool has_cycle(int n, const std::vector<std::vector<int>>& succ) {
  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 open, 2 done
  std::function<bool(int)> visit = [&](int v) {
    state[static_cast<std::size_t>(v)] = 1;
    for (int w : succ[static_cast<std::size_t>(v)]) {
      const int s = state[static_cast<std::size_t>(w)];
      if (s == 1) return true;
      if (s == 0 && visit(w)) return true;
    }
    state[static_cast<std::size_t>(v)] = 2;
    return false;
  };
  for (int v = 0; v < n; ++v) {
    if (state[static_cast<std::size_t>(v)] == 0 && visit(v)) return true;
  }
  return false;
}

}  // namespace

void check_constraint_consistency(std::span<const LayoutConstraint> constraints, int object_count) {
  const auto n = static_cast<std::size_t>(object_count);
  std::vector<std::vector<int>> x_order(n), y_order(n), inside(n);
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const auto& c = constraints[k];
    if (c.a < 0 || c.b < 0 || c.a >= object_count || c.b >= object_count) {
      throw Error(ErrorCode::kDanglingEdge, "constraint references a missing object",
                  "/constraints/" + std::to_string(k));
    }
    if (c.a == c.b) {
      throw Error(ErrorCode::kLayoutInfeasible, "constraint relates an object to itself",
                  "/constraints/" + std::to_string(k));
    }
    const auto a = static_cast<std::size_t>(c.a);
    const auto b = static_cast<std::size_t>(c.b);
    switch (c.kind) {
      case ConstraintKind::kLeftOf: x_order[a].push_back(c.b); break;
      case ConstraintKind::kRightOf: x_order[b].push_back(c.a); break;
      case ConstraintKind::kAbove: y_order[a].push_back(c.b); break;
      case ConstraintKind::kBelow: y_order[b].push_back(c.a); break;
      case ConstraintKind::kInside: inside[a].push_back(c.b); break;
      default: break;
    }
  }
  if (has_cycle(object_count, x_order)) {
    throw Error(ErrorCode::kLayoutInfeasible, "contradictory horizontal constraints (left_of/right_of cycle)");
  }
  if (has_cycle(object_count, y_order)) {
    throw Error(ErrorCode::kLayoutInfeasible, "contradictory vertical constraints (above/below cycle)");
  }
  if (has_cycle(object_count, inside)) {
    throw Error(ErrorCode::kLayoutInfeasible, "containment cycle among inside constraints");
  }
}

// ---------------------------------------------------------------------------
// Solver

namespace {

constexpr std::int64_t kU = kUnitsPerCanvas;
constexpr std::int64_t kMinUnits = 10'000;
constexpr std::int64_t kOrderMargin = 1'000;
constexpr std::int64_t kOverlapMargin = 1'000;
constexpr std::int64_t kGap = 20'000;
constexpr std::int64_t kPushSlack = 500;
constexpr int kStallIterations = 8;
constexpr double kMinProgress = 1e-3;
constexpr std::size_t kRelocateNodes = 6;
constexpr int kRelocateGrid = 9;
// Children sit in a uniform grid filling 90% of the container, cells 15% larger
// than the largest child.
constexpr std::int64_t kInnerNum = 90;
constexpr std::int64_t kInnerDen = 100;
constexpr std::int64_t kSpacingNum = 115;
constexpr std::int64_t kSpacingDen = 100;
constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

struct Size {
  std::int64_t w = 0;
  std::int64_t h = 0;
};

struct Grid {
  int cols = 1;
  int rows = 1;
};

Size grid_requirement(const Grid& g, std::int64_t cell_w, std::int64_t cell_h) {
  return {ceil_div(g.cols * cell_w * kSpacingNum * kInnerDen, kSpacingDen * kInnerNum),
          ceil_div(g.rows * cell_h * kSpacingNum * kInnerDen, kSpacingDen * kInnerNum)};
}

Grid choose_grid(int count, std::int64_t cell_w, std::int64_t cell_h) {
  Grid best{count, 1};
  std::int64_t best_score = kInf;
  for (int cols = 1; cols <= count; ++cols) {
    const Grid g{cols, (count + cols - 1) / cols};
    const Size req = grid_requirement(g, cell_w, cell_h);
    const std::int64_t score = std::max(req.w, req.h);
    if (score < best_score) {
      best = g;
      best_score = score;
    }
  }
  return best;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

// x_to - x_from <= weight
struct DiffEdge {
  int from = 0;
  int to = 0;
  std::int64_t weight = 0;
};

// One axis of the layout: a system of difference constraints over left edges
// (node n is the canvas origin). Feasible iff the constraint graph has no
// negative cycle; `upper`/`lower` bound every feasible solution.
class AxisSystem {
 public:
  AxisSystem(int n, std::vector<DiffEdge> edges) : n_(n), edges_(std::move(edges)) {
    upper_ = shortest_from_origin(false);
    if (!upper_.empty()) {
      const auto rev = shortest_from_origin(true);
      lower_.resize(rev.size());
      for (std::size_t i = 0; i < rev.size(); ++i) lower_[i] = -rev[i];
    }
  }

  bool feasible() const { return !upper_.empty(); }

  // Least feasible point above `preferred` clamped into [lower, upper].
  std::vector<std::int64_t> project(std::span<const std::int64_t> preferred) const {
    std::vector<std::int64_t> x(static_cast<std::size_t>(n_) + 1, 0);
    for (int i = 0; i < n_; ++i) {
      const auto k = static_cast<std::size_t>(i);
      x[k] = std::clamp(preferred[k], lower_[k], upper_[k]);
    }
    const int origin = n_;
    for (int round = 0; round <= n_ + 1; ++round) {
      bool changed = false;
      for (const auto& e : edges_) {
        auto& from = x[static_cast<std::size_t>(e.from)];
        const auto to = x[static_cast<std::size_t>(e.to)];
        if (to - from > e.weight && e.from != origin) {
          from = to - e.weight;
          changed = true;
        }
      }
      if (!changed) break;
    }
    x.pop_back();
    return x;
  }

 private:
  std::vector<std::int64_t> shortest_from_origin(bool reversed) const {
    const std::size_t count = static_cast<std::size_t>(n_) + 1;
    std::vector<std::int64_t> dist(count, kInf);
    dist[static_cast<std::size_t>(n_)] = 0;
    for (std::size_t round = 0; round <= count; ++round) {
      bool changed = false;
      for (const auto& e : edges_) {
        const auto u = static_cast<std::size_t>(reversed ? e.to : e.from);
        const auto v = static_cast<std::size_t>(reversed ? e.from : e.to);
        if (dist[u] == kInf) continue;
        if (dist[u] + e.weight < dist[v]) {
          dist[v] = dist[u] + e.weight;
          changed = true;
        }
      }
      if (!changed) return dist;
      if (round == count) break;
    }
    return {};  // negative cycle
  }

  int n_;
  std::vector<DiffEdge> edges_;
  std::vector<std::int64_t> upper_;
  std::vector<std::int64_t> lower_;
};

enum class Axis { kX, kY };

class Solver {
 public:
  Solver(const SceneGraph& graph, std::span<const SceneObject> objects,
         std::span<const LayoutConstraint> constraints, const LayoutConfig& config)
      : objects_(objects), constraints_(constraints), config_(config),
        n_(static_cast<int>(objects.size())), rng_(config.rng_seed) {
    anchor_ = select_anchor(graph);
  }

  LayoutResult run() {
    build_hierarchy();
    compute_sizes();
    build_systems();
    place_preferred();
    return push_apart();
  }

 private:
  std::size_t idx(int i) const { return static_cast<std::size_t>(i); }

  void build_hierarchy() {
    parents_.assign(idx(n_), {});
    children_.assign(idx(n_), {});
    for (const auto& c : constraints_) {
      if (c.kind != ConstraintKind::kInside) continue;
      parents_[idx(c.a)].push_back(c.b);
      children_[idx(c.b)].push_back(c.a);
    }
    for (auto* lists : {&parents_, &children_}) {
      for (auto& l : *lists) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
      }
    }
    primary_children_.assign(idx(n_), {});
    for (int i = 0; i < n_; ++i) {
      if (!parents_[idx(i)].empty()) primary_children_[idx(parents_[idx(i)].front())].push_back(i);
    }
    // children before parents
    std::vector<char> seen(idx(n_), 0);
    std::function<void(int)> visit = [&](int v) {
      seen[idx(v)] = 1;
      for (int c : children_[idx(v)]) {
        if (!seen[idx(c)]) visit(c);
      }
      bottom_up_.push_back(v);
    };
    for (int i = 0; i < n_; ++i) {
      if (!seen[idx(i)]) visit(i);
    }
    descendants_.assign(idx(n_), {});
    for (int v : bottom_up_) {
      std::set<int> acc;
      for (int c : children_[idx(v)]) {
        acc.insert(c);
        acc.insert(descendants_[idx(c)].begin(), descendants_[idx(c)].end());
      }
      descendants_[idx(v)].assign(acc.begin(), acc.end());
    }
    root_.assign(idx(n_), -1);
    for (int i = 0; i < n_; ++i) {
      int r = i;
      while (!parents_[idx(r)].empty()) r = parents_[idx(r)].front();
      root_[idx(i)] = r;
    }
  }

  Size base_size(int i) const {
    if (i == anchor_) {
      const auto s = to_units(config_.anchor_size);
      return {s, s};
    }
    const auto& obj = objects_[idx(i)];
    if (obj.category == ObjectCategory::kText) {
      const std::size_t chars = utf8_length(obj.text_payload.value_or(obj.caption));
      const double width = std::clamp(config_.text_char_width * static_cast<double>(chars),
                                      config_.text_min_width, config_.text_max_width);
      return {to_units(width), to_units(config_.text_height)};
    }
    const auto s = to_units(config_.sibling_size);
    return {s, s};
  }

  void compute_sizes() {
    size_.resize(idx(n_));
    grid_.assign(idx(n_), Grid{});
    for (int i = 0; i < n_; ++i) size_[idx(i)] = base_size(i);

    for (int v : bottom_up_) {
      const auto& kids = children_[idx(v)];
      if (kids.empty()) continue;
      std::int64_t cell_w = 0, cell_h = 0;
      for (int c : kids) {
        cell_w = std::max(cell_w, size_[idx(c)].w);
        cell_h = std::max(cell_h, size_[idx(c)].h);
      }
      const Grid g = choose_grid(static_cast<int>(kids.size()), cell_w, cell_h);
      grid_[idx(v)] = g;
      const Size req = grid_requirement(g, cell_w, cell_h);
      auto& s = size_[idx(v)];
      s.w = std::min(kU, std::max(s.w, req.w));
      s.h = std::min(kU, std::max(s.h, req.h));
    }

    for (auto it = bottom_up_.rbegin(); it != bottom_up_.rend(); ++it) {
      const int v = *it;
      const auto& kids = children_[idx(v)];
      if (kids.empty()) continue;
      const Grid g = grid_[idx(v)];
      const Size s = size_[idx(v)];
      const std::int64_t max_w = floor_div(s.w * kInnerNum * kSpacingDen, kInnerDen * g.cols * kSpacingNum);
      const std::int64_t max_h = floor_div(s.h * kInnerNum * kSpacingDen, kInnerDen * g.rows * kSpacingNum);
      for (int c : kids) {
        auto& cs = size_[idx(c)];
        cs.w = std::min(std::max(std::min(cs.w, max_w), kMinUnits), s.w);
        cs.h = std::min(std::max(std::min(cs.h, max_h), kMinUnits), s.h);
      }
    }
  }

  std::int64_t extent(int i, Axis axis) const {
    return axis == Axis::kX ? size_[idx(i)].w : size_[idx(i)].h;
  }

  AxisSystem build_axis(Axis axis) const {
    std::vector<DiffEdge> edges;
    const int origin = n_;
    for (int i = 0; i < n_; ++i) {
      edges.push_back({origin, i, kU - extent(i, axis)});
      edges.push_back({i, origin, 0});
    }
    const std::int64_t near_axis = static_cast<std::int64_t>(
        std::floor(config_.near_threshold / std::sqrt(2.0) * static_cast<double>(kU))) - 1;
    // a precedes b by at least kOrderMargin between centers
    auto order = [&](int a, int b) {
      const std::int64_t wa = extent(a, axis), wb = extent(b, axis);
      edges.push_back({b, a, floor_div(wb - wa - 2 * kOrderMargin, 2)});
    };
    for (const auto& c : constraints_) {
      const int a = c.a, b = c.b;
      const std::int64_t wa = extent(a, axis), wb = extent(b, axis);
      switch (c.kind) {
        case ConstraintKind::kLeftOf:
          if (axis == Axis::kX) order(a, b);
          break;
        case ConstraintKind::kRightOf:
          if (axis == Axis::kX) order(b, a);
          break;
        case ConstraintKind::kAbove:
          if (axis == Axis::kY) order(a, b);
          break;
        case ConstraintKind::kBelow:
          if (axis == Axis::kY) order(b, a);
          break;
        case ConstraintKind::kInside:
          edges.push_back({a, b, 0});
          edges.push_back({b, a, wb - wa});
          break;
        case ConstraintKind::kOverlap:
          edges.push_back({b, a, wb - kOverlapMargin});
          edges.push_back({a, b, wa - kOverlapMargin});
          break;
        case ConstraintKind::kNear:
          edges.push_back({b, a, floor_div(wb - wa + 2 * near_axis, 2)});
          edges.push_back({a, b, floor_div(wa - wb + 2 * near_axis, 2)});
          break;
      }
    }
    return AxisSystem(n_, std::move(edges));
  }

  void build_systems() {
    x_system_.emplace(build_axis(Axis::kX));
    y_system_.emplace(build_axis(Axis::kY));
    if (!x_system_->feasible() || !y_system_->feasible()) {
      throw Error(ErrorCode::kLayoutInfeasible,
                  std::string("constraints cannot hold simultaneously at the required box sizes (") +
                      (x_system_->feasible() ? "vertical" : "horizontal") + " axis)");
    }
  }

  static ConstraintKind inverse(ConstraintKind kind) {
    switch (kind) {
      case ConstraintKind::kLeftOf: return ConstraintKind::kRightOf;
      case ConstraintKind::kRightOf: return ConstraintKind::kLeftOf;
      case ConstraintKind::kAbove: return ConstraintKind::kBelow;
      case ConstraintKind::kBelow: return ConstraintKind::kAbove;
      default: return kind;
    }
  }

  // Deterministic ring of 8 compass slots around `around`.
  std::pair<std::int64_t, std::int64_t> spiral_slot(int around, int node, int slot) const {
    static constexpr std::array<std::array<int, 2>, 8> kDirs = {
        {{1, 0}, {-1, 0}, {0, -1}, {0, 1}, {1, -1}, {-1, -1}, {1, 1}, {-1, 1}}};
    const auto& d = kDirs[static_cast<std::size_t>(slot % 8)];
    const std::int64_t ring = slot / 8 + 1;
    const std::int64_t step_x = (size_[idx(around)].w + size_[idx(node)].w) / 2 + kGap;
    const std::int64_t step_y = (size_[idx(around)].h + size_[idx(node)].h) / 2 + kGap;
    return {cx_[idx(around)] + d[0] * ring * step_x, cy_[idx(around)] + d[1] * ring * step_y};
  }

  void place_relative(int node, int from, ConstraintKind rel) {
    const auto& sq = size_[idx(from)];
    const auto& sn = size_[idx(node)];
    std::int64_t cx = cx_[idx(from)], cy = cy_[idx(from)];
    switch (rel) {
      case ConstraintKind::kLeftOf: cx -= (sq.w + sn.w) / 2 + kGap; break;
      case ConstraintKind::kRightOf: cx += (sq.w + sn.w) / 2 + kGap; break;
      case ConstraintKind::kAbove: cy -= (sq.h + sn.h) / 2 + kGap; break;
      case ConstraintKind::kBelow: cy += (sq.h + sn.h) / 2 + kGap; break;
      case ConstraintKind::kOverlap: cy += sq.h / 4; break;
      case ConstraintKind::kInside: break;
      case ConstraintKind::kNear: {
        const auto slot = spiral_slot(from, node, ring_count_[idx(from)]++);
        cx = slot.first;
        cy = slot.second;
        break;
      }
    }
    cx_[idx(node)] = cx;
    cy_[idx(node)] = cy;
  }

  void place_preferred() {
    cx_.assign(idx(n_), 0);
    cy_.assign(idx(n_), 0);
    ring_count_.assign(idx(n_), 0);
    std::vector<char> placed(idx(n_), 0);

    struct Link {
      int other;
      ConstraintKind rel;  // other REL this
    };
    std::vector<std::vector<Link>> links(idx(n_));
    for (const auto& c : constraints_) {
      const int ra = root_[idx(c.a)], rb = root_[idx(c.b)];
      if (ra == rb) continue;
      links[idx(rb)].push_back({ra, c.kind});
      links[idx(ra)].push_back({rb, inverse(c.kind)});
    }

    const int start = root_[idx(anchor_)];
    cx_[idx(start)] = to_units(config_.anchor_center_x);
    cy_[idx(start)] = to_units(config_.anchor_center_y);
    placed[idx(start)] = 1;
    std::vector<int> queue{start};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int q = queue[head];
      for (const auto& link : links[idx(q)]) {
        if (placed[idx(link.other)]) continue;
        place_relative(link.other, q, link.rel);
        placed[idx(link.other)] = 1;
        queue.push_back(link.other);
      }
    }
    for (int i = 0; i < n_; ++i) {
      if (root_[idx(i)] != i || placed[idx(i)]) continue;
      const auto slot = spiral_slot(start, i, ring_count_[idx(start)]++);
      cx_[idx(i)] = slot.first;
      cy_[idx(i)] = slot.second;
      placed[idx(i)] = 1;
    }
    // Nested objects fill their container's grid, parents first.
    for (auto it = bottom_up_.rbegin(); it != bottom_up_.rend(); ++it) {
      const int p = *it;
      const auto& kids = primary_children_[idx(p)];
      if (kids.empty()) continue;
      const Grid g = grid_[idx(p)];
      const std::int64_t inner_w = size_[idx(p)].w * kInnerNum / kInnerDen;
      const std::int64_t inner_h = size_[idx(p)].h * kInnerNum / kInnerDen;
      const std::int64_t left = cx_[idx(p)] - inner_w / 2;
      const std::int64_t top = cy_[idx(p)] - inner_h / 2;
      const std::int64_t cell_w = inner_w / g.cols;
      const std::int64_t cell_h = inner_h / g.rows;
      for (std::size_t t = 0; t < kids.size(); ++t) {
        const auto col = static_cast<std::int64_t>(t) % g.cols;
        const auto row = static_cast<std::int64_t>(t) / g.cols;
        cx_[idx(kids[t])] = left + col * cell_w + cell_w / 2;
        cy_[idx(kids[t])] = top + row * cell_h + cell_h / 2;
      }
    }
  }

  std::vector<BoxUnits> project(std::span<const std::int64_t> px, std::span<const std::int64_t> py) const {
    const auto xs = x_system_->project(px);
    const auto ys = y_system_->project(py);
    std::vector<BoxUnits> boxes(idx(n_));
    for (int i = 0; i < n_; ++i) {
      boxes[idx(i)] = {xs[idx(i)], ys[idx(i)], size_[idx(i)].w, size_[idx(i)].h};
    }
    return boxes;
  }

  std::vector<std::uint8_t> intended_overlaps() const {
    const auto n = idx(n_);
    std::vector<std::uint8_t> ignore(n * n, 0);
    auto mark = [&](int a, int b) {
      ignore[idx(a) * n + idx(b)] = 1;
      ignore[idx(b) * n + idx(a)] = 1;
    };
    for (const auto& c : constraints_) {
      if (c.kind == ConstraintKind::kInside || c.kind == ConstraintKind::kOverlap) mark(c.a, c.b);
    }
    for (int v = 0; v < n_; ++v) {
      for (int d : descendants_[idx(v)]) mark(v, d);
    }
    return ignore;
  }

  std::vector<kernels::OverlapPair> offenders(std::span<const BoxUnits> boxes,
                                              std::span<const std::uint8_t> ignore) const {
    if (boxes.size() >= kernels::kParallelBoxThreshold) {
      return kernels::overlapping_pairs_parallel(boxes, ignore, config_.overlap_iou_threshold);
    }
    return kernels::overlapping_pairs_serial(boxes, ignore, config_.overlap_iou_threshold);
  }

  static double pair_score(const std::vector<kernels::OverlapPair>& pairs) {
    double s = 0.0;
    for (const auto& p : pairs) s += p.iou;
    return s;
  }

  // Tries each of the worst offenders (with its nested objects) at a grid of
  // canvas positions; returns the best projected layout if it beats `from`.
  std::optional<std::vector<BoxUnits>> relocate(const std::vector<BoxUnits>& from,
                                                const std::vector<kernels::OverlapPair>& pairs,
                                                std::span<const std::uint8_t> ignore) const {
    std::map<int, double> weight;
    for (const auto& p : pairs) {
      weight[p.i] += p.iou;
      weight[p.j] += p.iou;
    }
    std::vector<std::pair<double, int>> order;
    for (const auto& [v, w] : weight) order.emplace_back(-w, v);
    std::sort(order.begin(), order.end());
    if (order.size() > kRelocateNodes) order.resize(kRelocateNodes);

    std::size_t best_count = pairs.size();
    double best_score = pair_score(pairs);
    std::optional<std::vector<BoxUnits>> best;
    std::vector<std::int64_t> nx(idx(n_)), ny(idx(n_));
    for (const auto& entry : order) {
      const int v = entry.second;
      const auto& bv = from[idx(v)];
      for (int gy = 0; gy < kRelocateGrid; ++gy) {
        for (int gx = 0; gx < kRelocateGrid; ++gx) {
          const std::int64_t tx = (kU - bv.w) * gx / (kRelocateGrid - 1);
          const std::int64_t ty = (kU - bv.h) * gy / (kRelocateGrid - 1);
          for (int i = 0; i < n_; ++i) {
            nx[idx(i)] = from[idx(i)].x;
            ny[idx(i)] = from[idx(i)].y;
          }
          nx[idx(v)] = tx;
          ny[idx(v)] = ty;
          for (int d : descendants_[idx(v)]) {
            nx[idx(d)] += tx - bv.x;
            ny[idx(d)] += ty - bv.y;
          }
          auto candidate = project(nx, ny);
          const auto found = offenders(candidate, ignore);
          const double s = pair_score(found);
          if (found.size() < best_count || (found.size() == best_count && s < best_score - 1e-12)) {
            best_count = found.size();
            best_score = s;
            best = std::move(candidate);
          }
        }
      }
    }
    return best;
  }

  LayoutResult push_apart() {
    std::vector<std::int64_t> px(idx(n_)), py(idx(n_));
    for (int i = 0; i < n_; ++i) {
      px[idx(i)] = cx_[idx(i)] - size_[idx(i)].w / 2;
      py[idx(i)] = cy_[idx(i)] - size_[idx(i)].h / 2;
    }
    auto boxes = project(px, py);
    const auto ignore = intended_overlaps();

    auto current = offenders(boxes, ignore);
    auto best_boxes = boxes;
    auto best_pairs = current;
    double best_score = pair_score(current);
    int iterations = 0;
    const std::int64_t jitter_span = to_units(config_.sibling_size) / 2;

    int since_best = 0;
    while (!current.empty() && iterations < config_.max_push_iterations) {
      ++iterations;
      if (since_best >= kStallIterations) {
        // Local pushes are cycling; move one offender somewhere else entirely.
        auto moved = relocate(best_boxes, best_pairs, ignore);
        if (!moved) break;
        boxes = std::move(*moved);
        current = offenders(boxes, ignore);
        best_boxes = boxes;
        best_pairs = current;
        best_score = pair_score(current);
        since_best = 0;
        continue;
      }
      std::vector<std::int64_t> dx(idx(n_), 0), dy(idx(n_), 0);
      for (const auto& pair : current) {
        const auto& a = boxes[idx(pair.i)];
        const auto& b = boxes[idx(pair.j)];
        const std::int64_t ox = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
        const std::int64_t oy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
        const bool along_x = ox <= oy;
        const std::int64_t ca = along_x ? 2 * a.x + a.w : 2 * a.y + a.h;
        const std::int64_t cb = along_x ? 2 * b.x + b.w : 2 * b.y + b.h;
        int sign = ca < cb ? -1 : (ca > cb ? 1 : ((rng_() & 1U) ? 1 : -1));
        const std::int64_t amount = (along_x ? ox : oy) / 2 + kPushSlack;
        auto& d = along_x ? dx : dy;
        d[idx(pair.i)] += sign * amount;
        d[idx(pair.j)] -= sign * amount;
      }
      std::vector<std::int64_t> nx(idx(n_)), ny(idx(n_));
      for (int i = 0; i < n_; ++i) {
        nx[idx(i)] = boxes[idx(i)].x;
        ny[idx(i)] = boxes[idx(i)].y;
      }
      for (int v = 0; v < n_; ++v) {
        if (dx[idx(v)] == 0 && dy[idx(v)] == 0) continue;
        nx[idx(v)] += dx[idx(v)];
        ny[idx(v)] += dy[idx(v)];
        for (int d : descendants_[idx(v)]) {
          nx[idx(d)] += dx[idx(v)];
          ny[idx(d)] += dy[idx(v)];
        }
      }
      auto next = project(nx, ny);
      if (next == boxes) {
        // Stalled against the constraints: jitter the offenders.
        std::set<int> involved;
        for (const auto& pair : current) {
          involved.insert(pair.i);
          involved.insert(pair.j);
        }
        for (int v : involved) {
          nx[idx(v)] += static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(2 * jitter_span + 1)) - jitter_span;
          ny[idx(v)] += static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(2 * jitter_span + 1)) - jitter_span;
        }
        next = project(nx, ny);
      }
      boxes = std::move(next);
      current = offenders(boxes, ignore);
      const double s = pair_score(current);
      const bool fewer = current.size() < best_pairs.size();
      if (fewer || (current.size() == best_pairs.size() && s < best_score)) {
        since_best = fewer || s < best_score - kMinProgress ? 0 : since_best + 1;
        best_boxes = boxes;
        best_pairs = current;
        best_score = s;
      } else {
        ++since_best;
      }
    }

    LayoutResult result;
    result.iterations = iterations;
    result.converged = best_pairs.empty();
    for (int i = 0; i < n_; ++i) result.boxes[i] = to_fraction(best_boxes[idx(i)]);
    if (!result.converged) {
      std::set<int> ids;
      for (const auto& p : best_pairs) {
        ids.insert(p.i);
        ids.insert(p.j);
      }
      Diagnostic d;
      d.code = "LAYOUT_BEST_EFFORT";
      d.severity = Severity::kWarning;
      d.message = std::to_string(best_pairs.size()) + " unintended overlap(s) above IoU " +
                  std::to_string(config_.overlap_iou_threshold) + " after " +
                  std::to_string(iterations) + " push-apart iterations";
      d.object_ids.assign(ids.begin(), ids.end());
      result.diagnostics.push_back(std::move(d));
    }
    return result;
  }

  std::span<const SceneObject> objects_;
  std::span<const LayoutConstraint> constraints_;
  const LayoutConfig& config_;
  int n_;
  int anchor_ = 0;
  std::mt19937_64 rng_;

  std::vector<std::vector<int>> parents_, children_, primary_children_, descendants_;
  std::vector<int> bottom_up_, root_;
  std::vector<Size> size_;
  std::vector<Grid> grid_;
  std::vector<std::int64_t> cx_, cy_;
  std::vector<int> ring_count_;
  std::optional<AxisSystem> x_system_, y_system_;
};

}  // namespace

LayoutResult solve_layout(const SceneGraph& graph, std::span<const SceneObject> objects,
                          std::span<const LayoutConstraint> constraints,
                          const LayoutConfig& config) {
  config.validate();
  if (objects.empty()) throw Error(ErrorCode::kEmptyGraph, "no objects to lay out");
  if (graph.node_count() != objects.size()) {
    throw Error(ErrorCode::kDanglingEdge, "graph and object list disagree on node count");
  }
  check_constraint_consistency(constraints, static_cast<int>(objects.size()));
  Solver solver(graph, objects, constraints, config);
  return solver.run();
}

// ---------------------------------------------------------------------------
// LLM-proposed layout

namespace {

std::optional<std::string> check_layout_document(const json& doc) {
  if (!doc.is_object()) return "response is not a JSON object";
  const auto boxes = doc.find("boxes");
  if (boxes == doc.end() || !boxes->is_object()) return "missing 'boxes' object";
  for (const auto& [key, box] : boxes->items()) {
    if (key.empty() || key.size() > 9 ||
        !std::all_of(key.begin(), key.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return "box key '" + key + "' is not an object id";
    }
    if (!box.is_object()) return "box '" + key + "' is not an object";
    for (const char* f : {"x", "y", "w", "h"}) {
      if (!box.contains(f) || !box[f].is_number()) return "box '" + key + "' lacks numeric '" + f + "'";
    }
  }
  if (const auto canvas = doc.find("canvas"); canvas != doc.end()) {
    if (!canvas->is_object() || !canvas->contains("width") || !canvas->contains("height") ||
        !(*canvas)["width"].is_number() || !(*canvas)["height"].is_number() ||
        (*canvas)["width"].get<double>() <= 0 || (*canvas)["height"].get<double>() <= 0) {
      return "'canvas' must carry positive width and height";
    }
  }
  return std::nullopt;
}

std::map<int, BoundingBox> boxes_from_document(const json& doc) {
  double sx = 1.0, sy = 1.0;
  if (const auto canvas = doc.find("canvas"); canvas != doc.end()) {
    sx = (*canvas)["width"].get<double>();
    sy = (*canvas)["height"].get<double>();
  }
  std::map<int, BoundingBox> out;
  for (const auto& [key, box] : doc["boxes"].items()) {
    const int id = std::stoi(key);
    const double fx = box["x"].get<double>() / sx, fy = box["y"].get<double>() / sy;
    const double fw = box["w"].get<double>() / sx, fh = box["h"].get<double>() / sy;
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(fw) || !std::isfinite(fh)) {
      throw Error(ErrorCode::kLlmProtocolError, "non-finite box coordinate", "/boxes/" + key);
    }
    BoxUnits u;
    u.w = std::clamp(to_units(std::clamp(fw, 0.0, 1.0)), kMinUnits, kU);
    u.h = std::clamp(to_units(std::clamp(fh, 0.0, 1.0)), kMinUnits, kU);
    u.x = std::clamp(to_units(std::clamp(fx, 0.0, 1.0)), std::int64_t{0}, kU - u.w);
    u.y = std::clamp(to_units(std::clamp(fy, 0.0, 1.0)), std::int64_t{0}, kU - u.h);
    out[id] = to_fraction(u);
  }
  return out;
}

}  // namespace

std::map<int, BoundingBox> parse_layout_response(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kLlmProtocolError, std::string("layout response is not JSON: ") + e.what());
  }
  if (auto problem = check_layout_document(doc)) throw Error(ErrorCode::kLlmProtocolError, *problem);
  return boxes_from_document(doc);
}

LayoutResult llm_layout(const LlmLayoutRequest& request, LlmClient& client) {
  request.config.validate();
  const auto n = static_cast<int>(request.objects.size());
  std::string rejection;
  try {
    json objects = json::array();
    for (const auto& o : request.objects) {
      objects.push_back({{"id", o.object_id}, {"caption", o.caption}, {"category", category_name(o.category)}});
    }
    TemplateVars vars{{"prompt", request.prompt ? request.prompt->analysis_text() : std::string()},
                      {"objects", objects.dump()},
                      {"canvas", std::to_string(request.canvas_width_px) + "x" +
                                     std::to_string(request.canvas_height_px)}};
    std::string template_id = "layout_no_kg.v1";
    if (request.use_relations && request.graph != nullptr) {
      json triples = json::array();
      for (const auto& e : request.graph->edges()) {
        triples.push_back({{"subject", e.subject_id}, {"predicate", e.predicate}, {"object", e.object_id}});
      }
      vars["triples"] = triples.dump();
      vars["anchor"] = std::to_string(select_anchor(*request.graph));
      template_id = "layout.v1";
    }
    const json doc = client.complete_json(template_id, vars, check_layout_document);
    auto boxes = boxes_from_document(doc);

    for (int i = 0; i < n && rejection.empty(); ++i) {
      if (!boxes.contains(i)) rejection = "no box for object " + std::to_string(i);
    }
    for (const auto& [id, box] : boxes) {
      if (rejection.empty() && (id < 0 || id >= n)) rejection = "box for unknown object " + std::to_string(id);
    }
    for (const auto& c : request.constraints) {
      if (!rejection.empty()) break;
      if (!relation_satisfied(c, boxes, request.config.near_threshold)) {
        rejection = "proposed boxes violate " + std::string(constraint_kind_name(c.kind)) + "(" +
                    std::to_string(c.a) + ", " + std::to_string(c.b) + ")";
      }
    }
    if (rejection.empty()) {
      LayoutResult result;
      result.boxes = std::move(boxes);
      result.source = LayoutSource::kLlm;
      return result;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kLlmProtocolError && e.code() != ErrorCode::kLlmTransportError) throw;
    rejection = e.what();
  }

  if (request.graph == nullptr) throw Error(ErrorCode::kLlmProtocolError, "no graph for fallback layout");
  LayoutResult result = solve_layout(*request.graph, request.objects, request.constraints, request.config);
  result.source = LayoutSource::kSolverFallback;
  Diagnostic d;
  d.code = "LLM_LAYOUT_REJECTED";
  d.severity = Severity::kWarning;
  d.message = rejection;
  result.diagnostics.insert(result.diagnostics.begin(), std::move(d));
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string_view category_color(ObjectCategory c) {
  switch (c) {
    case ObjectCategory::kGO: return "#1f77b4";
    case ObjectCategory::kText: return "#d62728";
    case ObjectCategory::kPN: return "#2ca02c";
  }
  return "#000000";
}

}  // namespace

std::string render_layout_svg(std::span<const SceneObject> objects,
                              const std::map<int, BoundingBox>& boxes, int width_px,
                              int height_px) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px << "\" height=\""
     << height_px << "\" viewBox=\"0 0 " << width_px << ' ' << height_px << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << width_px << "\" height=\"" << height_px
     << "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
  for (const auto& obj : objects) {
    const auto it = boxes.find(obj.object_id);
    if (it == boxes.end()) continue;
    const auto& b = it->second;
    const long x = std::lround(b.x * width_px), y = std::lround(b.y * height_px);
    const long w = std::lround(b.w * width_px), h = std::lround(b.h * height_px);
    const auto color = category_color(obj.category);
    os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "  <text x=\"" << x + 3 << "\" y=\"" << y + 14 << "\" font-size=\"12\" fill=\"" << color
       << "\">" << obj.object_id << ": " << xml_escape(obj.caption) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pcig

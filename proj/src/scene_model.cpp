#include "pcig/scene_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <tuple>

namespace pcig {

std::string_view category_name(ObjectCategory category) {
  switch (category) {
    case ObjectCategory::kGO: return "GO";
    case ObjectCategory::kText: return "TEXT";
    case ObjectCategory::kPN: return "PN";
  }
  return "GO";
}

std::optional<ObjectCategory> parse_category(std::string_view name) {
  if (name == "GO") return ObjectCategory::kGO;
  if (name == "TEXT") return ObjectCategory::kText;
  if (name == "PN") return ObjectCategory::kPN;
  return std::nullopt;
}

std::string_view severity_name(Severity severity) {
  return severity == Severity::kError ? "error" : "warning";
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  return ix * iy;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::int64_t to_units(double fraction) {
  return static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(kUnitsPerCanvas)));
}

BoundingBox to_fraction(const BoxUnits& box) {
  const auto scale = static_cast<double>(kUnitsPerCanvas);
  return {static_cast<double>(box.x) / scale, static_cast<double>(box.y) / scale,
          static_cast<double>(box.w) / scale, static_cast<double>(box.h) / scale};
}

BoxUnits to_units(const BoundingBox& box) {
  return {to_units(box.x), to_units(box.y), to_units(box.w), to_units(box.h)};
}

void sort_diagnostics(std::vector<Diagnostic>& diagnostics) {
  std::stable_sort(diagnostics.begin(), diagnostics.end(),
                   [&](const Diagnostic& a, const Diagnostic& b) {
                     const int fa = a.object_ids.empty() ? -1 : a.object_ids.front();
                     const int fb = b.object_ids.empty() ? -1 : b.object_ids.front();
                     return std::tie(fa, a.code, a.message) < std::tie(fb, b.code, b.message);
                   });
}

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t begin = 0;
  while (begin < text.size() && is_space(static_cast<unsigned char>(text[begin]))) ++begin;
  std::size_t end = text.size();
  while (end > begin && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string normalize_predicate(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c) || raw == '_') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool is_normalized_predicate(std::string_view text) {
  return !text.empty() && normalize_predicate(text) == text;
}

bool is_valid_pn_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

std::string slugify(std::string_view text) {
  std::string out;
  bool pending_dash = false;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) && c < 0x80) {
      if (pending_dash && !out.empty()) out.push_back('-');
      pending_dash = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (raw != '\'') {
      pending_dash = true;
    }
  }
  return out;
}

}  // namespace pcig

#include <doctest.h>

#include "pcig/error.hpp"
#include "pcig/scene_model.hpp"

using namespace pcig;

TEST_CASE("category names round-trip") {
  for (auto c : {ObjectCategory::kGO, ObjectCategory::kText, ObjectCategory::kPN}) {
    CHECK(parse_category(category_name(c)) == c);
  }
  CHECK_FALSE(parse_category("go").has_value());
  CHECK(category_name(ObjectCategory::kText) == "TEXT");
}

TEST_CASE("iou on hand-computed boxes") {
  const BoundingBox a{0.0, 0.0, 0.5, 0.5};
  const BoundingBox b{0.25, 0.25, 0.5, 0.5};
  // intersection 0.0625, union 0.4375
  CHECK(iou(a, b) == doctest::Approx(0.0625 / 0.4375));
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, BoundingBox{0.5, 0.0, 0.5, 0.5}) == 0.0);  // touching edges
  CHECK(intersection_area(a, BoundingBox{0.6, 0.6, 0.1, 0.1}) == 0.0);
}

TEST_CASE("grid conversion") {
  CHECK(to_units(0.5) == 500'000);
  CHECK(to_units(0.1234565) == 123'457);
  const BoxUnits u{1, 2, 10'000, 999'999};
  CHECK(to_units(to_fraction(u)) == u);
  CHECK(to_fraction(BoxUnits{0, 0, kUnitsPerCanvas, kUnitsPerCanvas}) == BoundingBox{0, 0, 1, 1});
}

TEST_CASE("predicate normalization") {
  CHECK(normalize_predicate("  In  The_Background  of ") == "in the background of");
  CHECK(is_normalized_predicate("written on"));
  CHECK_FALSE(is_normalized_predicate("Written on"));
  CHECK_FALSE(is_normalized_predicate("written  on"));
  CHECK_FALSE(is_normalized_predicate(""));
}

TEST_CASE("slugs and pn keys") {
  CHECK(slugify("Golden State Warriors logo") == "golden-state-warriors-logo");
  CHECK(slugify("McDonald's  (US)") == "mcdonalds-us");
  CHECK(is_valid_pn_key("eiffel-tower"));
  CHECK_FALSE(is_valid_pn_key("Eiffel Tower"));
  CHECK_FALSE(is_valid_pn_key(""));
}

TEST_CASE("diagnostics sort plan-level first, then by object and code") {
  std::vector<Diagnostic> d = {
      {"B", Severity::kError, "", {2}}, {"A", Severity::kError, "", {2}}, {"Z", Severity::kError, "", {}}};
  sort_diagnostics(d);
  CHECK(d[0].code == "Z");
  CHECK(d[1].code == "A");
  CHECK(d[2].code == "B");
}

TEST_CASE("errors carry code and location") {
  const Error e(ErrorCode::kMalformedPlan, "expected an integer", "/anchor_id");
  CHECK(e.code() == ErrorCode::kMalformedPlan);
  CHECK(e.where() == "/anchor_id");
  CHECK(std::string(e.what()) == "MALFORMED_PLAN: expected an integer (at /anchor_id)");
  CHECK(error_code_name(ErrorCode::kPnResolutionFailed) == "PN_RESOLUTION_FAILED");
}

TEST_CASE("prompt analysis text prefers the augmented variant") {
  PromptSpec p{"raw", std::nullopt, "id"};
  CHECK(p.analysis_text() == "raw");
  p.augmented_text = "augmented";
  CHECK(p.analysis_text() == "augmented");
}

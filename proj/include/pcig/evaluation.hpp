#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcig/scene_model.hpp"

namespace pcig {

// Prompt risk category of an exemplar; OH_AH is scored as "OH".
enum class HallucinationClass { kOhAh, kTh, kFh, kTfh };
inline constexpr std::array<HallucinationClass, 4> kHallucinationClasses = {
    HallucinationClass::kOhAh, HallucinationClass::kTh, HallucinationClass::kFh, HallucinationClass::kTfh};

std::string_view class_name(HallucinationClass c);   // OH_AH, TH, FH, TFH
std::string_view class_label(HallucinationClass c);  // OH, TH, FH, TFH
std::optional<HallucinationClass> parse_class(std::string_view name);

enum class Verdict { kHallucinatory, kNonHallucinatory };
std::string_view verdict_name(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view name);

struct ExemplarRecord {
  std::string id;
  PromptSpec prompt;
  HallucinationClass hallucination_class = HallucinationClass::kOhAh;
  std::optional<Verdict> verdict;
  std::string generator_tag;
};

struct VerdictRecord {
  std::string id;
  Verdict verdict = Verdict::kHallucinatory;
  std::string generator_tag;
  std::size_t line = 0;
};

// JSON lines: {"id", "prompt", "class", "augmented_text"?, "generator_tag"?, "verdict"?}.
// Throws kMalformedRecord (with line number) or kDuplicateId.
std::vector<ExemplarRecord> load_benchmark(const std::filesystem::path& path);
std::vector<ExemplarRecord> parse_benchmark(std::string_view text, std::string_view origin = "<benchmark>");

// JSON lines: {"id", "verdict", "generator_tag"?}.
std::vector<VerdictRecord> load_verdicts(const std::filesystem::path& path);
std::vector<VerdictRecord> parse_verdicts(std::string_view text, std::string_view origin = "<verdicts>");

// Copies each verdict onto its record; a verdict for an unknown id is kMalformedRecord.
std::vector<ExemplarRecord> attach_verdicts(std::vector<ExemplarRecord> records, std::span<const VerdictRecord> verdicts);

std::array<std::int64_t, 4> class_totals(std::span<const ExemplarRecord> records);

struct ClassScore {
  std::int64_t passed = 0;  // judged non-hallucinatory
  std::int64_t total = 0;
  // Accuracy in hundredths of a percent, rounded half-up; empty when total = 0.
  std::optional<std::int64_t> accuracy_bp() const;

  bool operator==(const ClassScore&) const = default;
};

struct EvalReport {
  std::string tag;
  std::array<ClassScore, 4> classes;
  ClassScore overall;

  bool operator==(const EvalReport&) const = default;
};

// round-half-up(10000 * passed / total), exact in integers.
std::int64_t percent_bp(std::int64_t passed, std::int64_t total);
std::string format_bp(std::int64_t bp);        // 8955 -> "89.55"
std::string format_delta_bp(std::int64_t bp);  // -73 -> "-0.73", 0 -> "+0.00"

// Throws kMissingVerdict listing the ids without a verdict.
EvalReport compute_report(std::span<const ExemplarRecord> records, std::string tag = "");

std::string report_text(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);

struct ReportComparison {
  std::vector<EvalReport> reports;
  // deltas[i][k] = accuracy of report i minus report 0 on the displayed
  // (rounded) values; k = OH, TH, FH, TFH, overall.
  std::vector<std::array<std::optional<std::int64_t>, 5>> deltas;
};

ReportComparison compare_reports(std::vector<EvalReport> reports);
std::string comparison_text(const ReportComparison& comparison);
nlohmann::json comparison_to_json(const ReportComparison& comparison);

// Verdict source backed by an HTTP hallucination detector: POST <endpoint>/judge
// as multipart form (id, prompt, image) answered by {"verdict": "..."}.
class DetectorClient {
 public:
  explicit DetectorClient(std::string endpoint, int timeout_seconds = 120);
  Verdict judge(const ExemplarRecord& record, const std::string& png_bytes) const;

 private:
  std::string endpoint_;
  int timeout_seconds_;
};

}  // namespace pcig

#include "pcig/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <httplib.h>

#include "pcig/error.hpp"
#include "pcig/kernels.hpp"
#include "pcig/net_util.hpp"
#include "pcig/plan_io.hpp"

namespace pcig {

using json = nlohmann::json;

std::string_view class_name(HallucinationClass c) {
  switch (c) {
    case HallucinationClass::kOhAh: return "OH_AH";
    case HallucinationClass::kTh: return "TH";
    case HallucinationClass::kFh: return "FH";
    case HallucinationClass::kTfh: return "TFH";
  }
  return "OH_AH";
}

std::string_view class_label(HallucinationClass c) {
  return c == HallucinationClass::kOhAh ? std::string_view("OH") : class_name(c);
}

std::optional<HallucinationClass> parse_class(std::string_view name) {
  for (auto c : kHallucinationClasses) {
    if (class_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view verdict_name(Verdict v) {
  return v == Verdict::kHallucinatory ? "hallucinatory" : "non_hallucinatory";
}

std::optional<Verdict> parse_verdict(std::string_view name) {
  if (name == "hallucinatory") return Verdict::kHallucinatory;
  if (name == "non_hallucinatory") return Verdict::kNonHallucinatory;
  return std::nullopt;
}

namespace {

struct Line {
  std::size_t number;
  json doc;
};

// Non-blank lines parsed as JSON objects; at least one is required.
std::vector<Line> json_lines(std::string_view text, std::string_view origin) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++number;
    if (line.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(number);
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::kMalformedRecord, "line is not valid JSON", where);
    if (!doc.is_object()) throw Error(ErrorCode::kMalformedRecord, "line is not a JSON object", where);
    out.push_back({number, std::move(doc)});
  }
  if (out.empty()) throw Error(ErrorCode::kMalformedRecord, "file contains no records", std::string(origin));
  return out;
}

std::string required_string(const json& doc, const char* key, const std::string& where) {
  if (!doc.contains(key) || !doc[key].is_string() || trim(doc[key].get<std::string>()).empty()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("field '") + key + "' must be a non-empty string", where);
  }
  return doc[key].get<std::string>();
}

std::string optional_string(const json& doc, const char* key, const std::string& where) {
  if (!doc.contains(key) || doc[key].is_null()) return {};
  if (!doc[key].is_string()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("field '") + key + "' must be a string", where);
  }
  return doc[key].get<std::string>();
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string optional_bp(const std::optional<std::int64_t>& bp) { return bp ? format_bp(*bp) : std::string("n/a"); }

json score_json(const ClassScore& s) {
  json j = {{"passed", s.passed}, {"total", s.total}};
  if (const auto bp = s.accuracy_bp()) {
    j["accuracy"] = format_bp(*bp);
    j["accuracy_bp"] = *bp;
  } else {
    j["accuracy"] = nullptr;
    j["accuracy_bp"] = nullptr;
  }
  return j;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::vector<ExemplarRecord> parse_benchmark(std::string_view text, std::string_view origin) {
  std::vector<ExemplarRecord> out;
  std::map<std::string, std::size_t> seen;
  for (const auto& [number, doc] : json_lines(text, origin)) {
    const std::string where = std::string(origin) + ":" + std::to_string(number);
    ExemplarRecord r;
    r.id = required_string(doc, "id", where);
    r.prompt.id = r.id;
    r.prompt.raw_text = required_string(doc, "prompt", where);
    if (const auto aug = optional_string(doc, "augmented_text", where); !aug.empty()) r.prompt.augmented_text = aug;
    const char* class_key = doc.contains("class") ? "class" : "hallucination_class";
    const auto cls = parse_class(required_string(doc, class_key, where));
    if (!cls) throw Error(ErrorCode::kMalformedRecord, "class must be OH_AH, TH, FH or TFH", where);
    r.hallucination_class = *cls;
    r.generator_tag = optional_string(doc, "generator_tag", where);
    if (const auto v = optional_string(doc, "verdict", where); !v.empty()) {
      r.verdict = parse_verdict(v);
      if (!r.verdict) throw Error(ErrorCode::kMalformedRecord, "verdict must be hallucinatory or non_hallucinatory", where);
    }
    if (const auto [it, fresh] = seen.emplace(r.id, number); !fresh) {
      throw Error(ErrorCode::kDuplicateId,
                  "id '" + r.id + "' already defined on line " + std::to_string(it->second), where);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExemplarRecord> load_benchmark(const std::filesystem::path& path) {
  return parse_benchmark(read_all(path), path.string());
}

std::vector<VerdictRecord> parse_verdicts(std::string_view text, std::string_view origin) {
  std::vector<VerdictRecord> out;
  std::map<std::string, std::size_t> seen;
  for (const auto& [number, doc] : json_lines(text, origin)) {
    const std::string where = std::string(origin) + ":" + std::to_string(number);
    VerdictRecord v;
    v.id = required_string(doc, "id", where);
    const auto verdict = parse_verdict(required_string(doc, "verdict", where));
    if (!verdict) throw Error(ErrorCode::kMalformedRecord, "verdict must be hallucinatory or non_hallucinatory", where);
    v.verdict = *verdict;
    v.generator_tag = optional_string(doc, "generator_tag", where);
    v.line = number;
    if (const auto [it, fresh] = seen.emplace(v.id, number); !fresh) {
      throw Error(ErrorCode::kDuplicateId,
                  "verdict for '" + v.id + "' already given on line " + std::to_string(it->second), where);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<VerdictRecord> load_verdicts(const std::filesystem::path& path) {
  return parse_verdicts(read_all(path), path.string());
}

std::vector<ExemplarRecord> attach_verdicts(std::vector<ExemplarRecord> records,
                                            std::span<const VerdictRecord> verdicts) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].id, i);
  for (const auto& v : verdicts) {
    const auto it = index.find(v.id);
    if (it == index.end()) {
      throw Error(ErrorCode::kMalformedRecord, "verdict for unknown id '" + v.id + "'",
                  "line " + std::to_string(v.line));
    }
    auto& r = records[it->second];
    r.verdict = v.verdict;
    if (!v.generator_tag.empty()) r.generator_tag = v.generator_tag;
  }
  return records;
}

std::array<std::int64_t, 4> class_totals(std::span<const ExemplarRecord> records) {
  std::array<std::int64_t, 4> totals{};
  for (const auto& r : records) totals[static_cast<std::size_t>(r.hallucination_class)] += 1;
  return totals;
}

std::int64_t percent_bp(std::int64_t passed, std::int64_t total) {
  if (total <= 0) throw Error(ErrorCode::kConfigError, "accuracy of an empty class");
  return (2 * passed * 10000 + total) / (2 * total);
}

std::optional<std::int64_t> ClassScore::accuracy_bp() const {
  if (total == 0) return std::nullopt;
  return percent_bp(passed, total);
}

std::string format_bp(std::int64_t bp) {
  const bool negative = bp < 0;
  const std::int64_t a = negative ? -bp : bp;
  std::string frac = std::to_string(a % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return (negative ? "-" : "") + std::to_string(a / 100) + "." + frac;
}

std::string format_delta_bp(std::int64_t bp) { return (bp < 0 ? "" : "+") + format_bp(bp); }

EvalReport compute_report(std::span<const ExemplarRecord> records, std::string tag) {
  std::vector<std::string> missing;
  std::vector<std::uint8_t> classes(records.size());
  std::vector<std::uint8_t> passed(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.verdict) {
      missing.push_back(r.id);
      continue;
    }
    classes[i] = static_cast<std::uint8_t>(r.hallucination_class);
    passed[i] = *r.verdict == Verdict::kNonHallucinatory ? 1 : 0;
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) ids += ", ... (" + std::to_string(missing.size()) + " total)";
    throw Error(ErrorCode::kMissingVerdict, "records without a verdict: " + ids);
  }
  const auto tally = records.size() >= kernels::kParallelRecordThreshold ? kernels::tally_parallel(classes, passed)
                                                                        : kernels::tally_serial(classes, passed);
  EvalReport report;
  report.tag = std::move(tag);
  for (std::size_t k = 0; k < 4; ++k) {
    report.classes[k] = {tally.passed[k], tally.total[k]};
    report.overall.passed += tally.passed[k];
    report.overall.total += tally.total[k];
  }
  return report;
}

std::string report_text(const EvalReport& report) {
  std::ostringstream out;
  if (!report.tag.empty()) out << "report: " << report.tag << "\n";
  out << pad_right("class", 9) << pad_left("correct", 8) << pad_left("total", 8) << pad_left("acc.", 9) << "\n";
  auto row = [&](const std::string& label, const ClassScore& s) {
    out << pad_right(label, 9) << pad_left(std::to_string(s.passed), 8) << pad_left(std::to_string(s.total), 8)
        << pad_left(optional_bp(s.accuracy_bp()), 9) << "\n";
  };
  for (auto c : kHallucinationClasses) row(std::string(class_label(c)), report.classes[static_cast<std::size_t>(c)]);
  row("overall", report.overall);
  return out.str();
}

json report_to_json(const EvalReport& report) {
  json classes = json::object();
  for (auto c : kHallucinationClasses) {
    classes[std::string(class_label(c))] = score_json(report.classes[static_cast<std::size_t>(c)]);
  }
  return {{"tag", report.tag}, {"classes", std::move(classes)}, {"overall", score_json(report.overall)}};
}

ReportComparison compare_reports(std::vector<EvalReport> reports) {
  ReportComparison out;
  out.reports = std::move(reports);
  if (out.reports.empty()) return out;
  auto column = [](const EvalReport& r, std::size_t k) {
    return k < 4 ? r.classes[k].accuracy_bp() : r.overall.accuracy_bp();
  };
  for (const auto& r : out.reports) {
    std::array<std::optional<std::int64_t>, 5> d;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto base = column(out.reports.front(), k);
      const auto mine = column(r, k);
      if (base && mine) d[k] = *mine - *base;
    }
    out.deltas.push_back(d);
  }
  return out;
}

std::string comparison_text(const ReportComparison& cmp) {
  std::size_t tag_width = 6;
  for (const auto& r : cmp.reports) tag_width = std::max(tag_width, r.tag.size() + 2);
  std::ostringstream out;
  out << pad_right("tag", tag_width);
  for (const char* h : {"OH acc.", "TH acc.", "FH acc.", "TFH acc.", "overall"}) out << pad_left(h, 10);
  out << "\n";
  for (std::size_t i = 0; i < cmp.reports.size(); ++i) {
    const auto& r = cmp.reports[i];
    out << pad_right(r.tag, tag_width);
    for (std::size_t k = 0; k < 4; ++k) out << pad_left(optional_bp(r.classes[k].accuracy_bp()), 10);
    out << pad_left(optional_bp(r.overall.accuracy_bp()), 10) << "\n";
    if (i == 0) continue;
    out << pad_right("  delta", tag_width);
    for (const auto& d : cmp.deltas[i]) out << pad_left(d ? format_delta_bp(*d) : std::string("n/a"), 10);
    out << "\n";
  }
  return out.str();
}

json comparison_to_json(const ReportComparison& cmp) {
  static const std::array<const char*, 5> keys = {"OH", "TH", "FH", "TFH", "overall"};
  json rows = json::array();
  for (std::size_t i = 0; i < cmp.reports.size(); ++i) {
    json deltas = json::object();
    for (std::size_t k = 0; k < 5; ++k) {
      const auto& d = cmp.deltas[i][k];
      deltas[keys[k]] = d ? json(format_delta_bp(*d)) : json(nullptr);
    }
    rows.push_back({{"report", report_to_json(cmp.reports[i])}, {"delta_vs_first", std::move(deltas)}});
  }
  return {{"baseline", cmp.reports.empty() ? std::string() : cmp.reports.front().tag}, {"rows", std::move(rows)}};
}

DetectorClient::DetectorClient(std::string endpoint, int timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {}

Verdict DetectorClient::judge(const ExemplarRecord& record, const std::string& png_bytes) const {
  const Endpoint ep = parse_endpoint(endpoint_);
  const std::string url = endpoint_ + "/judge";
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  httplib::MultipartFormDataItems form = {
      {"id", record.id, "", ""},
      {"prompt", record.prompt.raw_text, "", ""},
      {"image", png_bytes, record.id + ".png", "image/png"},
  };
  const auto res = client.Post(ep.path + "/judge", form);
  if (!res) throw Error(ErrorCode::kBackendUnavailable, "detector unreachable: " + httplib::to_string(res.error()), url);
  if (res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable, "detector HTTP status " + std::to_string(res->status), url);
  }
  const json doc = json::parse(res->body, nullptr, false);
  if (doc.is_object() && doc.contains("verdict") && doc["verdict"].is_string()) {
    if (const auto v = parse_verdict(doc["verdict"].get<std::string>())) return *v;
  }
  throw Error(ErrorCode::kMalformedRecord, "detector reply lacks a valid verdict", url);
}

}  // namespace pcig

#include <doctest.h>

#include <algorithm>
#include <random>

#include "pcig/error.hpp"
#include "pcig/evaluation.hpp"
#include "support.hpp"

using namespace pcig;
using json = nlohmann::json;

namespace {

std::filesystem::path eval_dir() { return testing::source_dir() / "tests" / "fixtures" / "eval"; }

EvalReport fixture_report(const std::string& tag) {
  auto records = load_benchmark(eval_dir() / "benchmark.jsonl");
  const auto verdicts = load_verdicts(eval_dir() / ("verdicts_" + tag + ".jsonl"));
  return compute_report(attach_verdicts(std::move(records), verdicts), tag);
}

std::vector<std::string> row(const EvalReport& r) {
  std::vector<std::string> out;
  for (const auto& c : r.classes) out.push_back(format_bp(*c.accuracy_bp()));
  out.push_back(format_bp(*r.overall.accuracy_bp()));
  return out;
}

// k is the half-up rounding of 10000 p / t iff (2k - 1) t <= 20000 p < (2k + 1) t.
bool is_half_up_bp(std::int64_t k, std::int64_t p, std::int64_t t) {
  return (2 * k - 1) * t <= 20000 * p && 20000 * p < (2 * k + 1) * t;
}

Error error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("no error");
  return Error(ErrorCode::kConfigError, "");
}

}  // namespace

TEST_CASE("benchmark fixture has 137 / 63 / 18 / 2 exemplars per class") {
  const auto records = load_benchmark(eval_dir() / "benchmark.jsonl");
  CHECK(records.size() == 220);
  CHECK(class_totals(records) == std::array<std::int64_t, 4>{137, 63, 18, 2});
}

TEST_CASE("derivable table rows") {
  CHECK(row(fixture_report("pcig")) == std::vector<std::string>{"94.89", "82.54", "77.78", "50.00", "89.55"});
  CHECK(row(fixture_report("gligen")) == std::vector<std::string>{"88.32", "7.94", "22.22", "0.00", "59.09"});
  CHECK(row(fixture_report("instancediffusion")) ==
        std::vector<std::string>{"95.62", "9.52", "22.22", "0.00", "64.09"});
  const auto text = fixture_report("gligen_text");
  CHECK(format_bp(*text.classes[0].accuracy_bp()) == "89.05");
  CHECK(format_bp(*text.classes[1].accuracy_bp()) == "76.19");
}

TEST_CASE("comparison deltas") {
  auto cmp = compare_reports({fixture_report("instancediffusion"), fixture_report("pcig")});
  REQUIRE(cmp.deltas.size() == 2);
  std::vector<std::string> d;
  for (const auto& v : cmp.deltas[1]) d.push_back(format_delta_bp(*v));
  CHECK(d == std::vector<std::string>{"-0.73", "+73.02", "+55.56", "+50.00", "+25.46"});
  for (const auto& v : cmp.deltas[0]) CHECK(*v == 0);

  cmp = compare_reports({fixture_report("gligen"), fixture_report("gligen_text")});
  CHECK(format_delta_bp(*cmp.deltas[1][0]) == "+0.73");
  CHECK(format_delta_bp(*cmp.deltas[1][1]) == "+68.25");
  CHECK(comparison_text(cmp).find("+68.25") != std::string::npos);
  CHECK(comparison_to_json(cmp).is_object());
}

TEST_CASE("all non-hallucinatory scores 100.00") {
  auto records = load_benchmark(eval_dir() / "benchmark.jsonl");
  for (auto& r : records) r.verdict = Verdict::kNonHallucinatory;
  for (const auto& s : row(compute_report(records))) CHECK(s == "100.00");
}

TEST_CASE("formatting") {
  CHECK(format_bp(8955) == "89.55");
  CHECK(format_bp(0) == "0.00");
  CHECK(format_bp(10000) == "100.00");
  CHECK(format_bp(5) == "0.05");
  CHECK(format_delta_bp(-73) == "-0.73");
  CHECK(format_delta_bp(0) == "+0.00");
  CHECK(format_delta_bp(6825) == "+68.25");
  CHECK(percent_bp(1, 8) == 1250);
  CHECK(percent_bp(1, 3) == 3333);
  CHECK(percent_bp(2, 3) == 6667);
  CHECK(percent_bp(1, 16) == 625);
  CHECK(percent_bp(1, 32) == 313);  // 312.5 rounds up
}

TEST_CASE("random verdict sets against an exact-rational oracle") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 400)(rng);
    std::vector<ExemplarRecord> records(static_cast<std::size_t>(n));
    std::array<std::int64_t, 4> pass{}, total{};
    for (int i = 0; i < n; ++i) {
      auto& r = records[static_cast<std::size_t>(i)];
      r.id = "r" + std::to_string(i);
      r.prompt.raw_text = "p";
      const int c = std::uniform_int_distribution<int>(0, 3)(rng);
      r.hallucination_class = static_cast<HallucinationClass>(c);
      const bool ok = std::bernoulli_distribution(0.6)(rng);
      r.verdict = ok ? Verdict::kNonHallucinatory : Verdict::kHallucinatory;
      total[c] += 1;
      pass[c] += ok;
    }
    const auto report = compute_report(records);
    for (int c = 0; c < 4; ++c) {
      CHECK(report.classes[c].passed == pass[c]);
      CHECK(report.classes[c].total == total[c]);
      if (total[c] == 0) {
        CHECK_FALSE(report.classes[c].accuracy_bp());
      } else {
        CHECK(is_half_up_bp(*report.classes[c].accuracy_bp(), pass[c], total[c]));
      }
    }
    const std::int64_t all_pass = pass[0] + pass[1] + pass[2] + pass[3];
    CHECK(is_half_up_bp(*report.overall.accuracy_bp(), all_pass, n));
    std::shuffle(records.begin(), records.end(), rng);
    CHECK(compute_report(records) == report);
  }
}

TEST_CASE("large inputs take the parallel path with identical results") {
  std::mt19937_64 rng(9);
  std::vector<ExemplarRecord> records(200000);
  std::int64_t pass = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].id = std::to_string(i);
    records[i].hallucination_class = static_cast<HallucinationClass>(i % 4);
    const bool ok = rng() % 3 != 0;
    records[i].verdict = ok ? Verdict::kNonHallucinatory : Verdict::kHallucinatory;
    pass += ok;
  }
  const auto report = compute_report(records);
  CHECK(report.overall.passed == pass);
  CHECK(report.overall.total == 200000);
}

TEST_CASE("record errors") {
  auto e = error_of([] { parse_benchmark("\n\n", "b.jsonl"); });
  CHECK(e.code() == ErrorCode::kMalformedRecord);
  e = error_of([] {
    parse_benchmark(R"({"id": "a", "prompt": "x", "class": "TH"})"
                    "\n\n"
                    R"({"id": "a", "prompt": "y", "class": "FH"})",
                    "b.jsonl");
  });
  CHECK(e.code() == ErrorCode::kDuplicateId);
  CHECK(e.where() == "b.jsonl:3");
  e = error_of([] { parse_benchmark(R"({"id": "a", "prompt": "x", "class": "XX"})", "b.jsonl"); });
  CHECK(e.code() == ErrorCode::kMalformedRecord);
  CHECK(e.where() == "b.jsonl:1");
  e = error_of([] { parse_benchmark("{\"id\": \"a\", \"prompt\": \"x\", \"class\": \"TH\"}\n{oops", "b.jsonl"); });
  CHECK(e.where() == "b.jsonl:2");
  e = error_of([] { parse_benchmark(R"({"id": "", "prompt": "x", "class": "TH"})"); });
  CHECK(e.code() == ErrorCode::kMalformedRecord);
  e = error_of([] { parse_verdicts(R"({"id": "a", "verdict": "maybe"})"); });
  CHECK(e.code() == ErrorCode::kMalformedRecord);
  e = error_of([] { parse_verdicts("{\"id\": \"a\", \"verdict\": \"hallucinatory\"}\n{\"id\": \"a\", \"verdict\": \"hallucinatory\"}"); });
  CHECK(e.code() == ErrorCode::kDuplicateId);

  auto records = parse_benchmark("{\"id\": \"a\", \"prompt\": \"x\", \"class\": \"TH\"}\n"
                                 "{\"id\": \"b\", \"prompt\": \"y\", \"class\": \"OH_AH\"}");
  e = error_of([&] { compute_report(records); });
  CHECK(e.code() == ErrorCode::kMissingVerdict);
  CHECK(std::string(e.what()).find("a, b") != std::string::npos);
  const auto v = parse_verdicts(R"({"id": "zz", "verdict": "hallucinatory"})");
  e = error_of([&] { attach_verdicts(records, v); });
  CHECK(e.code() == ErrorCode::kMalformedRecord);
  CHECK_THROWS_WITH(load_benchmark("/nonexistent/b.jsonl"), doctest::Contains("IO_ERROR"));
}

TEST_CASE("inline verdicts and report output") {
  const auto records = parse_benchmark(
      R"({"id": "a", "prompt": "x", "class": "TH", "verdict": "non_hallucinatory", "generator_tag": "g"})");
  const auto report = compute_report(records, "g");
  CHECK(report.classes[1].passed == 1);
  CHECK_FALSE(report.classes[0].accuracy_bp());
  const auto doc = report_to_json(report);
  CHECK(doc.dump().find("100") != std::string::npos);
  CHECK(report_text(report).find("100.00") != std::string::npos);
}

TEST_CASE("detector client") {
  std::string got_id, got_type;
  std::size_t got_size = 0;
  testing::LocalServer server([&](httplib::Server& s) {
    s.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
      got_id = req.get_file_value("id").content;
      const auto image = req.get_file_value("image");
      got_type = image.content_type;
      got_size = image.content.size();
      if (got_id == "bad") {
        res.set_content(R"({"verdict": "unsure"})", "application/json");
      } else if (got_id == "err") {
        res.status = 503;
      } else {
        res.set_content(R"({"verdict": "non_hallucinatory"})", "application/json");
      }
    });
  });
  DetectorClient d(server.url(), 5);
  ExemplarRecord r;
  r.id = "x1";
  r.prompt.raw_text = "a cat";
  CHECK(d.judge(r, std::string(64, 'p')) == Verdict::kNonHallucinatory);
  CHECK(got_id == "x1");
  CHECK(got_type == "image/png");
  CHECK(got_size == 64);
  r.id = "bad";
  CHECK_THROWS_WITH(d.judge(r, "p"), doctest::Contains("MALFORMED_RECORD"));
  r.id = "err";
  CHECK_THROWS_WITH(d.judge(r, "p"), doctest::Contains("503"));
}

#include <doctest.h>

#include <fstream>

#include "pcig/error.hpp"
#include "pcig/llm_client.hpp"
#include "pcig/orchestration.hpp"
#include "pcig/plan_io.hpp"
#include "pcig/pn_resolver.hpp"
#include "support.hpp"

using namespace pcig;
using json = nlohmann::json;

namespace {

std::filesystem::path golden(const std::string& name) { return testing::source_dir() / "tests" / "golden" / name; }

FixtureImageResolver fixtures() { return FixtureImageResolver(testing::source_dir() / "data" / "pn_images"); }

std::unique_ptr<LlmClient> replay_client(const std::string& scenario) {
  auto transport =
      std::make_shared<FixtureTransport>(testing::source_dir() / "tests" / "fixtures" / "llm" / scenario);
  return std::make_unique<LlmClient>(transport, testing::templates(), LlmConfig{});
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("a single object") {
  const auto r = plan_prompt({"a red apple", std::nullopt, "apple"}, PipelineConfig{}, nullptr);
  REQUIRE(r.plan.objects.size() == 1);
  CHECK(r.plan.objects[0].category == ObjectCategory::kGO);
  CHECK(r.plan.triples.empty());
  CHECK(r.plan.anchor_id == 0);
  CHECK(validate_plan(r.plan).empty());
}

TEST_CASE("offline plans match the goldens byte for byte") {
  const auto jersey = plan_prompt({testing::kJersey, std::nullopt, "jersey"}, PipelineConfig{}, nullptr);
  CHECK(serialize_plan(jersey.plan) == read_text_file(golden("jersey.plan.json")));
  const auto giraffes = plan_prompt({testing::kGiraffes, std::nullopt, "giraffes"}, PipelineConfig{}, nullptr);
  CHECK(serialize_plan(giraffes.plan) == read_text_file(golden("giraffes.plan.json")));
  CHECK(giraffes.analysis_source == AnalysisSource::kFallback);
  CHECK(giraffes.layout_source == LayoutSource::kSolver);
}

TEST_CASE("recorded LLM responses replay deterministically") {
  auto c1 = replay_client("giraffe_good");
  auto c2 = replay_client("giraffe_good");
  const PromptSpec p{testing::kGiraffes, std::nullopt, "giraffes"};
  const auto a = plan_prompt(p, PipelineConfig{}, c1.get());
  const auto b = plan_prompt(p, PipelineConfig{}, c2.get());
  CHECK(serialize_plan(a.plan) == serialize_plan(b.plan));
  CHECK(a.analysis_source == AnalysisSource::kLlm);
  CHECK(a.layout_source == LayoutSource::kLlm);
  CHECK(c1->calls() == 3);
  CHECK(a.plan.objects.size() == 8);

  auto c3 = replay_client("giraffe_missing_box");
  const auto fb = plan_prompt(p, PipelineConfig{}, c3.get());
  CHECK(fb.layout_source == LayoutSource::kSolverFallback);
  CHECK(validate_plan(fb.plan).empty());
}

TEST_CASE("no objects is reported with the prompt") {
  try {
    plan_prompt({"!!! ???", std::nullopt, "empty"}, PipelineConfig{}, nullptr);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoObjectsFound);
    CHECK(std::string(e.what()).find("!!! ???") != std::string::npos);
  }
}

TEST_CASE("run_pipeline with the mock backend") {
  testing::TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path();
  opts.mock = true;
  auto resolver = fixtures();
  const auto m = run_pipeline({testing::kJersey, std::nullopt, "jersey"}, opts, nullptr, &resolver);
  for (const char* f : {"plan.json", "request.json", "image.png", "manifest.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(m.backend == "mock");
  CHECK(m.regions["regions"].size() == 3);
  CHECK(read_text_file(dir / "plan.json") == read_text_file(golden("jersey.plan.json")));
  const auto manifest = json::parse(read_text_file(dir / "manifest.json"));
  CHECK(manifest == manifest_to_json(m));
  CHECK_FALSE(manifest_to_json(m, false).dump().find("_ms") != std::string::npos);
}

TEST_CASE("run_pipeline without any backend") {
  testing::TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path();
  auto resolver = fixtures();
  CHECK_THROWS_WITH(run_pipeline({"a red apple", std::nullopt, "a"}, opts, nullptr, &resolver),
                    doctest::Contains("BACKEND_UNAVAILABLE"));
  opts.backend_endpoint = testing::dead_url();
  opts.backend_timeout_seconds = 2;
  CHECK_THROWS_WITH(run_pipeline({"a red apple", std::nullopt, "a"}, opts, nullptr, &resolver),
                    doctest::Contains("BACKEND_UNAVAILABLE"));
}

TEST_CASE("batches keep input order and do not depend on job count") {
  const std::vector<PromptSpec> prompts = {
      {"a red apple", std::nullopt, "p1"},
      {testing::kJersey, std::nullopt, "p2"},
      {"!!!", std::nullopt, "p3"},
      {testing::kGiraffes, std::nullopt, "p4"},
      {"a cat sitting on a chair next to a lamp", std::nullopt, "p5"},
  };
  auto resolver = fixtures();
  auto run = [&](int jobs) {
    testing::TempDir dir;
    RunOptions opts;
    opts.out_dir = dir.path();
    opts.mock = true;
    const auto entries = run_batch(prompts, opts, [] { return std::unique_ptr<LlmClient>(); }, &resolver, jobs);
    std::vector<std::string> plans;
    for (const auto& p : prompts) {
      const auto f = dir / (safe_id(p.id) + "/plan.json");
      plans.push_back(std::filesystem::exists(f) ? read_text_file(f) : "");
    }
    return std::make_pair(batch_to_json(entries, false), plans);
  };
  const auto serial = run(1);
  const auto parallel = run(4);
  CHECK(serial == parallel);
  const auto& doc = serial.first;
  const auto& list = doc["runs"];
  REQUIRE(list.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(list[i]["prompt_id"] == prompts[i].id);
  CHECK(serial.second[2].empty());
  CHECK(doc.dump().find("NO_OBJECTS_FOUND") != std::string::npos);
}

TEST_CASE("prompt files") {
  testing::TempDir dir;
  write(dir / "a.jsonl",
        "{\"id\": \"x\", \"prompt\": \"a cat\"}\n\n# note\n{\"id\": \"y\", \"raw_text\": \"a dog\", "
        "\"augmented_text\": \"a brown dog\"}\n");
  auto p = load_prompts(dir / "a.jsonl");
  REQUIRE(p.size() == 2);
  CHECK(p[1].id == "y");
  CHECK(p[1].augmented_text == "a brown dog");
  CHECK(p[1].analysis_text() == "a brown dog");

  write(dir / "b.txt", "a cat\n\na dog on a mat\n");
  p = load_prompts(dir / "b.txt");
  REQUIRE(p.size() == 2);
  CHECK(p[0].raw_text == "a cat");
  CHECK(p[0].id != p[1].id);

  write(dir / "c.jsonl", "{\"id\": \"x\", \"prompt\": \"a\"}\n{\"id\": \"x\", \"prompt\": \"b\"}\n");
  CHECK_THROWS_WITH(load_prompts(dir / "c.jsonl"), doctest::Contains("INVALID_PROMPT"));
  CHECK(safe_id("a/b c") != "a/b c");
  CHECK(safe_id("a/b c").find('/') == std::string::npos);
}

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcig/dispatch.hpp"
#include "pcig/layout.hpp"
#include "pcig/prompt_analysis.hpp"
#include "pcig/scene_model.hpp"

namespace pcig {

class LlmClient;
class PnImageResolver;

struct PipelineConfig {
  AnalysisMode mode = AnalysisMode::kFull;
  bool text_module = true;
  // With a client, boxes come from the language model (solver on rejection).
  bool llm_layout = true;
  LayoutConfig layout;
  int canvas_width_px = 512;
  int canvas_height_px = 512;
  AnalysisOptions analysis;
  const PredicateTable* predicates = nullptr;  // builtin when null
};

struct PlanningResult {
  ScenePlan plan;
  std::vector<Diagnostic> diagnostics;  // warnings only
  AnalysisSource analysis_source = AnalysisSource::kFallback;
  LayoutSource layout_source = LayoutSource::kSolver;
};

// analyze -> build_graph -> select_anchor -> layout -> validate_plan.
// Throws kInvalidPlan if the composed plan does not validate.
PlanningResult plan_prompt(const PromptSpec& prompt, const PipelineConfig& config, LlmClient* client);

struct RunOptions {
  PipelineConfig pipeline;
  std::filesystem::path out_dir;
  std::optional<std::string> backend_endpoint;
  bool mock = false;
  nlohmann::json params = nlohmann::json::object();
  int backend_timeout_seconds = 300;
};

struct RunManifest {
  std::string prompt_id;
  std::filesystem::path out_dir;
  std::string plan_file = "plan.json";
  std::string request_file = "request.json";
  std::string image_file = "image.png";
  std::string backend;  // "mock" or the endpoint
  double plan_ms = 0.0;
  double dispatch_ms = 0.0;
  double render_ms = 0.0;
  double total_ms = 0.0;
  std::int64_t llm_calls = 0;
  double llm_cost_usd = 0.0;
  AnalysisSource analysis_source = AnalysisSource::kFallback;
  LayoutSource layout_source = LayoutSource::kSolver;
  std::vector<Diagnostic> diagnostics;
  nlohmann::json regions;
};

nlohmann::json manifest_to_json(const RunManifest& manifest, bool include_timing = true);

// Writes plan.json, request.json, image.png and manifest.json under out_dir.
// Throws kBackendUnavailable when neither mock nor a reachable endpoint is given.
RunManifest run_pipeline(const PromptSpec& prompt, const RunOptions& options, LlmClient* client,
                         PnImageResolver* resolver);

// JSON-lines records ({"id", "prompt" | "raw_text", "augmented_text"?}) or one
// plain prompt per line; blank lines and '#' comments skipped. Ids must be unique.
std::vector<PromptSpec> load_prompts(const std::filesystem::path& path);

struct BatchEntry {
  std::string prompt_id;
  std::optional<RunManifest> manifest;
  std::optional<std::string> error_code;
  std::string error_message;
};

using ClientFactory = std::function<std::unique_ptr<LlmClient>()>;

// Each prompt runs in out_dir/<id>/ with its own client; `jobs` > 1 runs
// prompts concurrently. Results keep input order; failures are recorded, not thrown.
std::vector<BatchEntry> run_batch(const std::vector<PromptSpec>& prompts, const RunOptions& options,
                                  const ClientFactory& make_client, PnImageResolver* resolver, int jobs = 1);

nlohmann::json batch_to_json(const std::vector<BatchEntry>& entries, bool include_timing = true);

// Directory-safe form of a prompt id.
std::string safe_id(const std::string& id);

}  // namespace pcig

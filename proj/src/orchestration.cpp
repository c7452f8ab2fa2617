#include "pcig/orchestration.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <set>

#include <omp.h>

#include "pcig/backend_client.hpp"
#include "pcig/error.hpp"
#include "pcig/llm_client.hpp"
#include "pcig/plan_io.hpp"
#include "pcig/scene_graph.hpp"

namespace pcig {

using json = nlohmann::json;

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

json diagnostics_json(const std::vector<Diagnostic>& diagnostics) {
  json out = json::array();
  for (const auto& d : diagnostics) {
    out.push_back({{"code", d.code},
                   {"severity", severity_name(d.severity)},
                   {"message", d.message},
                   {"object_ids", d.object_ids}});
  }
  return out;
}

}  // namespace

PlanningResult plan_prompt(const PromptSpec& prompt, const PipelineConfig& config, LlmClient* client) {
  config.layout.validate();
  if (config.canvas_width_px <= 0 || config.canvas_height_px <= 0) {
    throw Error(ErrorCode::kConfigError, "canvas dimensions must be positive");
  }
  const PredicateTable& table = config.predicates ? *config.predicates : PredicateTable::builtin();

  PlanningResult result;
  AnalysisResult analysis = analyze(prompt, client, config.mode, config.analysis);
  result.analysis_source = analysis.source;
  result.diagnostics = analysis.diagnostics;

  const SceneGraph graph = build_graph(analysis.objects, analysis.triples);
  const int anchor = select_anchor(graph);
  const auto constraints = predicates_to_constraints(analysis.triples, table);

  LayoutResult layout;
  if (client && config.llm_layout) {
    LlmLayoutRequest request;
    request.prompt = &prompt;
    request.objects = analysis.objects;
    request.graph = &graph;
    request.constraints = constraints;
    request.config = config.layout;
    request.canvas_width_px = config.canvas_width_px;
    request.canvas_height_px = config.canvas_height_px;
    request.use_relations = config.mode != AnalysisMode::kNoKg;
    layout = llm_layout(request, *client);
  } else {
    layout = solve_layout(graph, analysis.objects, constraints, config.layout);
  }
  result.layout_source = layout.source;
  result.diagnostics.insert(result.diagnostics.end(), layout.diagnostics.begin(), layout.diagnostics.end());

  ScenePlan& plan = result.plan;
  plan.prompt = prompt;
  plan.canvas_width_px = config.canvas_width_px;
  plan.canvas_height_px = config.canvas_height_px;
  plan.objects = std::move(analysis.objects);
  plan.triples = std::move(analysis.triples);
  plan.anchor_id = anchor;
  plan.boxes = std::move(layout.boxes);

  if (const auto problems = validate_plan(plan, table, config.layout.near_threshold); !problems.empty()) {
    std::string message = "composed plan fails validation:";
    for (std::size_t i = 0; i < problems.size() && i < 5; ++i) message += " " + problems[i].code + ";";
    throw Error(ErrorCode::kInvalidPlan, message, prompt.id);
  }
  sort_diagnostics(result.diagnostics);
  return result;
}

json manifest_to_json(const RunManifest& m, bool include_timing) {
  json out = {{"prompt_id", m.prompt_id},
              {"files", {{"plan", m.plan_file}, {"request", m.request_file}, {"image", m.image_file}}},
              {"backend", m.backend},
              {"analysis_source", analysis_source_name(m.analysis_source)},
              {"layout_source", layout_source_name(m.layout_source)},
              {"llm", {{"calls", m.llm_calls}, {"cost_usd", m.llm_cost_usd}}},
              {"diagnostics", diagnostics_json(m.diagnostics)},
              {"regions", m.regions}};
  if (include_timing) {
    out["timing_ms"] = {{"plan", m.plan_ms}, {"dispatch", m.dispatch_ms}, {"render", m.render_ms}, {"total", m.total_ms}};
  }
  return out;
}

RunManifest run_pipeline(const PromptSpec& prompt, const RunOptions& options, LlmClient* client,
                         PnImageResolver* resolver) {
  if (!options.mock && (!options.backend_endpoint || options.backend_endpoint->empty())) {
    throw Error(ErrorCode::kBackendUnavailable, "no backend endpoint configured; pass one or use mock rendering");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t calls_before = client ? client->calls() : 0;
  const double cost_before = client ? client->cost_usd() : 0.0;

  RunManifest m;
  m.prompt_id = prompt.id;
  m.out_dir = options.out_dir;
  m.backend = options.mock ? std::string("mock") : *options.backend_endpoint;

  auto t = std::chrono::steady_clock::now();
  const PlanningResult planned = plan_prompt(prompt, options.pipeline, client);
  m.plan_ms = elapsed_ms(t);
  m.analysis_source = planned.analysis_source;
  m.layout_source = planned.layout_source;
  m.diagnostics = planned.diagnostics;
  write_text_file(options.out_dir / m.plan_file, serialize_plan(planned.plan));

  t = std::chrono::steady_clock::now();
  DispatchOptions dispatch;
  dispatch.text_module = options.pipeline.text_module;
  dispatch.mode = std::string(analysis_mode_name(options.pipeline.mode));
  dispatch.params = options.params;
  const BackendRequest request = dispatch_plan(planned.plan, resolver, dispatch);
  m.dispatch_ms = elapsed_ms(t);
  write_text_file(options.out_dir / m.request_file, serialize_request(request));

  t = std::chrono::steady_clock::now();
  const BackendResponse response = options.mock
                                       ? render_mock(request)
                                       : post_generate(*options.backend_endpoint, request, options.backend_timeout_seconds);
  m.render_ms = elapsed_ms(t);
  write_text_file(options.out_dir / m.image_file, response.png);
  m.regions = response.regions;

  if (client) {
    m.llm_calls = client->calls() - calls_before;
    m.llm_cost_usd = client->cost_usd() - cost_before;
  }
  m.total_ms = elapsed_ms(start);
  write_text_file(options.out_dir / "manifest.json", canonical_dump(manifest_to_json(m)));
  return m;
}

std::string safe_id(const std::string& id) {
  const bool ok = !id.empty() && id != "." && id != ".." && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
  if (ok) return id;
  const std::string slug = slugify(id);
  return slug.empty() ? std::string("prompt") : slug;
}

std::vector<PromptSpec> load_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read prompt file", path.string());
  std::vector<PromptSpec> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text.starts_with('#')) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    PromptSpec p;
    if (text.starts_with('{')) {
      const json doc = json::parse(text, nullptr, false);
      if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::kInvalidPrompt, "not a JSON object", where);
      const char* key = doc.contains("prompt") ? "prompt" : "raw_text";
      if (!doc.contains(key) || !doc[key].is_string()) {
        throw Error(ErrorCode::kInvalidPrompt, "record needs a string 'prompt'", where);
      }
      p.raw_text = doc[key].get<std::string>();
      if (doc.contains("augmented_text") && doc["augmented_text"].is_string()) {
        p.augmented_text = doc["augmented_text"].get<std::string>();
      }
      if (doc.contains("id") && doc["id"].is_string()) p.id = doc["id"].get<std::string>();
    } else {
      p.raw_text = text;
    }
    if (p.id.empty()) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "p%04zu", out.size() + 1);
      p.id = buf;
    }
    if (trim(p.raw_text).empty()) throw Error(ErrorCode::kInvalidPrompt, "empty prompt", where);
    if (!ids.insert(p.id).second) throw Error(ErrorCode::kInvalidPrompt, "duplicate prompt id '" + p.id + "'", where);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<BatchEntry> run_batch(const std::vector<PromptSpec>& prompts, const RunOptions& options,
                                  const ClientFactory& make_client, PnImageResolver* resolver, int jobs) {
  std::vector<BatchEntry> entries(prompts.size());
  std::set<std::string> dirs;
  for (const auto& p : prompts) {
    if (!dirs.insert(safe_id(p.id)).second) {
      throw Error(ErrorCode::kInvalidPrompt, "prompt ids collide as directory names", p.id);
    }
  }
  const long n = static_cast<long>(prompts.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, jobs)) if (jobs > 1)
  for (long i = 0; i < n; ++i) {
    const auto& prompt = prompts[static_cast<std::size_t>(i)];
    BatchEntry& entry = entries[static_cast<std::size_t>(i)];
    entry.prompt_id = prompt.id;
    try {
      RunOptions local = options;
      local.out_dir = options.out_dir / safe_id(prompt.id);
      std::unique_ptr<LlmClient> client = make_client ? make_client() : nullptr;
      entry.manifest = run_pipeline(prompt, local, client.get(), resolver);
    } catch (const Error& e) {
      entry.error_code = std::string(error_code_name(e.code()));
      entry.error_message = e.what();
    } catch (const std::exception& e) {
      entry.error_code = "INTERNAL";
      entry.error_message = e.what();
    }
  }
  return entries;
}

json batch_to_json(const std::vector<BatchEntry>& entries, bool include_timing) {
  json runs = json::array();
  for (const auto& e : entries) {
    json j = {{"prompt_id", e.prompt_id}, {"dir", safe_id(e.prompt_id)}};
    if (e.manifest) {
      j["status"] = "ok";
      j["manifest"] = manifest_to_json(*e.manifest, include_timing);
    } else {
      j["status"] = "error";
      j["error"] = {{"code", e.error_code.value_or("")}, {"message", e.error_message}};
    }
    runs.push_back(std::move(j));
  }
  return {{"runs", std::move(runs)}};
}

}  // namespace pcig

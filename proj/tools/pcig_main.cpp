// pcig: plan, dispatch, run and evaluate prompt-consistent scene plans.

#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcig/backend_client.hpp"
#include "pcig/dispatch.hpp"
#include "pcig/error.hpp"
#include "pcig/evaluation.hpp"
#include "pcig/llm_client.hpp"
#include "pcig/orchestration.hpp"
#include "pcig/paths.hpp"
#include "pcig/plan_io.hpp"
#include "pcig/pn_resolver.hpp"
#include "pcig/scene_graph.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string env_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

struct Options {
  std::string prompt;
  std::string augmented;
  std::string id = "prompt";
  std::string batch;
  std::string mode = "full";
  bool no_text_module = false;
  bool offline = false;
  bool mock = false;
  std::uint64_t seed = 0;
  std::string canvas = "512x512";
  std::string out;
  std::string backend = env_or("PCIG_BACKEND_URL");
  int jobs = 1;
  std::string llm_fixtures;
  std::string record_fixtures;
  std::string templates;
  std::string pn_dir;
  std::string predicates;
  std::string gazetteer;
  bool no_llm_layout = false;
  std::string svg;
  std::string dot;
  std::string params;
  std::string plan_file;
};

// Loaded tables must outlive every PipelineConfig that points at them.
struct Tables {
  std::optional<pcig::PredicateTable> predicates;
  std::optional<pcig::Gazetteer> gazetteer;
};

pcig::AnalysisMode parse_mode(std::string name) {
  for (auto& c : name) {
    if (c == '-') c = '_';
  }
  const auto mode = pcig::parse_analysis_mode(name);
  if (!mode) throw pcig::Error(pcig::ErrorCode::kConfigError, "unknown mode '" + name + "'");
  return *mode;
}

std::pair<int, int> parse_canvas(const std::string& text) {
  const auto x = text.find_first_of("xX");
  int w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    std::size_t used = 0;
    w = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("width");
    h = std::stoi(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument("height");
  } catch (const std::exception&) {
    throw pcig::Error(pcig::ErrorCode::kConfigError, "canvas must look like 512x512", text);
  }
  if (w <= 0 || h <= 0 || w > 8192 || h > 8192) {
    throw pcig::Error(pcig::ErrorCode::kConfigError, "canvas sides must be in 1..8192", text);
  }
  return {w, h};
}

pcig::PipelineConfig pipeline_config(const Options& o, Tables& tables) {
  pcig::PipelineConfig cfg;
  cfg.mode = parse_mode(o.mode);
  cfg.text_module = !o.no_text_module;
  cfg.llm_layout = !o.no_llm_layout;
  cfg.layout.rng_seed = o.seed;
  std::tie(cfg.canvas_width_px, cfg.canvas_height_px) = parse_canvas(o.canvas);
  if (!o.predicates.empty()) {
    tables.predicates = pcig::PredicateTable::load(o.predicates);
    cfg.predicates = &*tables.predicates;
  }
  if (!o.gazetteer.empty()) {
    tables.gazetteer = pcig::Gazetteer::load(o.gazetteer);
    cfg.analysis.gazetteer = &*tables.gazetteer;
  }
  return cfg;
}

// Fixtures win; a live endpoint is used unless --offline; otherwise the
// rule-based parser and the solver run without a client.
pcig::ClientFactory client_factory(const Options& o) {
  const fs::path tdir = o.templates.empty() ? pcig::template_dir() : fs::path(o.templates);
  pcig::LlmConfig config;
  config.endpoint = env_or("PCIG_LLM_ENDPOINT");
  config.api_key = env_or("PCIG_LLM_API_KEY", env_or("OPENAI_API_KEY"));
  config.model = env_or("PCIG_LLM_MODEL", config.model);

  std::shared_ptr<pcig::LlmTransport> transport;
  if (!o.llm_fixtures.empty()) {
    transport = std::make_shared<pcig::FixtureTransport>(o.llm_fixtures);
  } else if (!o.offline && !config.endpoint.empty()) {
    transport = std::make_shared<pcig::HttpTransport>();
    if (!o.record_fixtures.empty()) {
      transport = std::make_shared<pcig::RecordingTransport>(transport, o.record_fixtures);
    }
  } else {
    return {};
  }
  auto templates = std::make_shared<pcig::TemplateStore>(pcig::TemplateStore::load(tdir));
  return [transport, templates, config] {
    return std::make_unique<pcig::LlmClient>(transport, *templates, config);
  };
}

std::unique_ptr<pcig::PnImageResolver> make_resolver(const Options& o) {
  std::vector<std::shared_ptr<pcig::PnImageResolver>> chain;
  chain.push_back(std::make_shared<pcig::FixtureImageResolver>(
      o.pn_dir.empty() ? pcig::data_dir() / "pn_images" : fs::path(o.pn_dir)));
  const std::string search = env_or("PCIG_SEARCH_ENDPOINT");
  if (!o.offline && !search.empty()) chain.push_back(std::make_shared<pcig::SearchImageResolver>(search));
  return std::make_unique<pcig::CachingResolver>(std::make_shared<pcig::ChainResolver>(std::move(chain)));
}

std::vector<pcig::PromptSpec> prompts_from(const Options& o) {
  if (!o.batch.empty() && !o.prompt.empty()) {
    throw pcig::Error(pcig::ErrorCode::kConfigError, "--prompt and --batch are mutually exclusive");
  }
  if (!o.batch.empty()) return pcig::load_prompts(o.batch);
  if (o.prompt.empty()) throw pcig::Error(pcig::ErrorCode::kConfigError, "give --prompt or --batch");
  pcig::PromptSpec p;
  p.raw_text = o.prompt;
  if (!o.augmented.empty()) p.augmented_text = o.augmented;
  p.id = o.id;
  return {p};
}

json params_from(const Options& o) {
  if (o.params.empty()) return json::object();
  json doc = json::parse(o.params, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw pcig::Error(pcig::ErrorCode::kConfigError, "--params must be a JSON object");
  }
  return doc;
}

void emit(const Options& o, const fs::path& file, const std::string& bytes) {
  if (o.out.empty()) std::cout << bytes;
  else pcig::write_text_file(fs::path(o.out) / file, bytes);
}

void print_warnings(const std::vector<pcig::Diagnostic>& diagnostics, const std::string& id) {
  for (const auto& d : diagnostics) std::cerr << "warning [" << id << "] " << d.code << ": " << d.message << '\n';
}

int cmd_plan(const Options& o) {
  Tables tables;
  const auto cfg = pipeline_config(o, tables);
  const auto prompts = prompts_from(o);
  const auto factory = client_factory(o);
  if (prompts.size() > 1 && o.out.empty()) {
    throw pcig::Error(pcig::ErrorCode::kConfigError, "--batch needs --out");
  }
  for (const auto& p : prompts) {
    auto client = factory ? factory() : nullptr;
    const auto result = pcig::plan_prompt(p, cfg, client.get());
    print_warnings(result.diagnostics, p.id);
    const fs::path sub = prompts.size() > 1 ? fs::path(pcig::safe_id(p.id)) : fs::path();
    emit(o, sub / "plan.json", pcig::serialize_plan(result.plan));
    if (!o.svg.empty() || !o.dot.empty()) {
      const fs::path base = prompts.size() > 1 ? fs::path(o.out) / sub : fs::path();
      if (!o.svg.empty()) {
        pcig::write_text_file(base / o.svg, pcig::render_layout_svg(result.plan.objects, result.plan.boxes,
                                                                    result.plan.canvas_width_px,
                                                                    result.plan.canvas_height_px));
      }
      if (!o.dot.empty()) {
        const auto graph = pcig::build_graph(result.plan.objects, result.plan.triples);
        pcig::write_text_file(base / o.dot, pcig::to_dot(graph, result.plan.objects));
      }
    }
  }
  return 0;
}

int cmd_dispatch(const Options& o) {
  pcig::ScenePlan plan;
  if (!o.plan_file.empty()) {
    plan = pcig::read_plan_file(o.plan_file);
  } else {
    Tables tables;
    const auto cfg = pipeline_config(o, tables);
    const auto prompts = prompts_from(o);
    if (prompts.size() != 1) throw pcig::Error(pcig::ErrorCode::kConfigError, "dispatch takes one prompt");
    const auto factory = client_factory(o);
    auto client = factory ? factory() : nullptr;
    plan = pcig::plan_prompt(prompts.front(), cfg, client.get()).plan;
  }
  pcig::DispatchOptions d;
  d.text_module = !o.no_text_module;
  d.mode = std::string(pcig::analysis_mode_name(parse_mode(o.mode)));
  d.params = params_from(o);
  const auto resolver = make_resolver(o);
  emit(o, "request.json", pcig::serialize_request(pcig::dispatch_plan(plan, resolver.get(), d)));
  return 0;
}

int cmd_run(const Options& o) {
  Tables tables;
  pcig::RunOptions run;
  run.pipeline = pipeline_config(o, tables);
  run.out_dir = o.out.empty() ? fs::path("pcig_out") : fs::path(o.out);
  run.mock = o.mock;
  if (!o.backend.empty()) run.backend_endpoint = o.backend;
  run.params = params_from(o);
  const auto prompts = prompts_from(o);
  const auto factory = client_factory(o);
  const auto resolver = make_resolver(o);

  if (o.batch.empty()) {
    auto client = factory ? factory() : nullptr;
    const auto m = pcig::run_pipeline(prompts.front(), run, client.get(), resolver.get());
    print_warnings(m.diagnostics, m.prompt_id);
    std::cout << pcig::canonical_dump(pcig::manifest_to_json(m));
    return 0;
  }
  const auto entries = pcig::run_batch(prompts, run, factory, resolver.get(), o.jobs);
  const std::string summary = pcig::canonical_dump(pcig::batch_to_json(entries));
  pcig::write_text_file(run.out_dir / "batch.json", summary);
  std::cout << summary;
  int failed = 0;
  for (const auto& e : entries) {
    if (!e.manifest) {
      ++failed;
      std::cerr << "error [" << e.prompt_id << "] " << e.error_message << '\n';
    }
  }
  return failed ? 1 : 0;
}

int cmd_eval(const std::string& benchmark, const std::vector<std::string>& verdict_args, bool as_json) {
  const auto records = pcig::load_benchmark(benchmark);
  std::vector<pcig::EvalReport> reports;
  if (verdict_args.empty()) {
    reports.push_back(pcig::compute_report(records));
  }
  for (const auto& arg : verdict_args) {
    std::string tag, file = arg;
    if (const auto eq = arg.find('='); eq != std::string::npos && !fs::exists(arg)) {
      tag = arg.substr(0, eq);
      file = arg.substr(eq + 1);
    }
    if (tag.empty()) tag = fs::path(file).stem().string();
    const auto verdicts = pcig::load_verdicts(file);
    reports.push_back(pcig::compute_report(pcig::attach_verdicts(records, verdicts), tag));
  }
  if (reports.size() == 1) {
    std::cout << (as_json ? pcig::canonical_dump(pcig::report_to_json(reports.front()))
                          : pcig::report_text(reports.front()));
    return 0;
  }
  const auto cmp = pcig::compare_reports(std::move(reports));
  std::cout << (as_json ? pcig::canonical_dump(pcig::comparison_to_json(cmp)) : pcig::comparison_text(cmp));
  return 0;
}

int cmd_validate(const std::string& file) {
  const auto plan = pcig::read_plan_file(file);
  const auto problems = pcig::validate_plan(plan);
  for (const auto& d : problems) {
    std::cout << d.code << ": " << d.message;
    if (!d.object_ids.empty()) {
      std::cout << " (objects";
      for (int id : d.object_ids) std::cout << ' ' << id;
      std::cout << ')';
    }
    std::cout << '\n';
  }
  if (problems.empty()) std::cout << "ok\n";
  return problems.empty() ? 0 : 1;
}

void add_prompt_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--prompt", o.prompt, "Prompt text");
  cmd->add_option("--augmented", o.augmented, "Augmented prompt used for analysis");
  cmd->add_option("--id", o.id, "Prompt id");
  cmd->add_option("--mode", o.mode, "full | no-kg | no-object-extraction");
  cmd->add_flag("--no-text-module", o.no_text_module, "Route TEXT objects as ordinary captions");
  cmd->add_flag("--offline", o.offline, "Never contact the LLM or search endpoints");
  cmd->add_option("--seed", o.seed, "Layout seed");
  cmd->add_option("--canvas", o.canvas, "Canvas size WxH");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--llm-fixtures", o.llm_fixtures, "Replay recorded LLM responses from DIR");
  cmd->add_option("--record-fixtures", o.record_fixtures, "Record live LLM responses into DIR");
  cmd->add_option("--templates", o.templates, "Prompt template directory");
  cmd->add_option("--pn-dir", o.pn_dir, "Proper-noun image directory");
  cmd->add_option("--predicates", o.predicates, "Predicate table (TSV)");
  cmd->add_option("--gazetteer", o.gazetteer, "Proper-noun gazetteer");
  cmd->add_flag("--no-llm-layout", o.no_llm_layout, "Use the solver even when an LLM is configured");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-consistent scene planning"};
  app.require_subcommand(1);
  Options o;

  auto* plan = app.add_subcommand("plan", "Analyze a prompt and write its scene plan");
  add_prompt_flags(plan, o);
  plan->add_option("--batch", o.batch, "Prompt file (JSON lines or one prompt per line)");
  plan->add_option("--svg", o.svg, "Also write an SVG of the layout");
  plan->add_option("--dot", o.dot, "Also write the scene graph as DOT");

  auto* dispatch = app.add_subcommand("dispatch", "Turn a plan into a backend request");
  add_prompt_flags(dispatch, o);
  dispatch->add_option("--plan", o.plan_file, "Existing plan.json instead of --prompt");
  dispatch->add_option("--params", o.params, "JSON object passed through to the backend");

  auto* run = app.add_subcommand("run", "Plan, dispatch and render");
  add_prompt_flags(run, o);
  run->add_option("--batch", o.batch, "Prompt file (JSON lines or one prompt per line)");
  run->add_flag("--mock", o.mock, "Render a schematic image locally");
  run->add_option("--backend", o.backend, "Image backend URL (default $PCIG_BACKEND_URL)");
  run->add_option("--jobs", o.jobs, "Concurrent prompts in batch mode")->check(CLI::PositiveNumber);
  run->add_option("--params", o.params, "JSON object passed through to the backend");

  std::string benchmark;
  std::vector<std::string> verdicts;
  bool eval_json = false;
  auto* eval = app.add_subcommand("eval", "Per-class hallucination accuracy");
  eval->add_option("--benchmark", benchmark, "Benchmark records (JSON lines)")->required();
  eval->add_option("--verdicts", verdicts, "[TAG=]FILE verdicts; repeat to compare");
  eval->add_flag("--json", eval_json, "JSON output");

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Check a plan file against every invariant");
  validate->add_option("plan", validate_file, "plan.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(o);
    if (*dispatch) return cmd_dispatch(o);
    if (*run) return cmd_run(o);
    if (*eval) return cmd_eval(benchmark, verdicts, eval_json);
    if (*validate) return cmd_validate(validate_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include "halspan/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>

#include <spdlog/spdlog.h>

#include "halspan/hashing.hpp"
#include "halspan/io.hpp"
#include "halspan/mapping.hpp"
#include "halspan/prompts.hpp"

namespace halspan {

namespace {

std::vector<SoftSpan> unit_soft(const SpanSet& hard) {
  std::vector<SoftSpan> soft;
  soft.reserve(hard.spans().size());
  for (const auto& s : hard.spans()) soft.emplace_back(s, 1.0);
  return soft;
}

std::vector<Extraction> as_extractions(const Detection& d) {
  if (const auto* spans = std::get_if<ExtractedSpans>(&d.result)) return spans->items;
  std::vector<Extraction> out;
  if (const auto* facts = std::get_if<FalseFacts>(&d.result)) {
    for (const auto& f : facts->facts) out.push_back({f, 1.0});
  }
  return out;
}

std::vector<std::string> as_facts(const Detection& d) {
  if (const auto* facts = std::get_if<FalseFacts>(&d.result)) return facts->facts;
  std::vector<std::string> out;
  if (const auto* spans = std::get_if<ExtractedSpans>(&d.result)) {
    for (const auto& e : spans->items) out.push_back(e.text);
  }
  return out;
}

std::optional<ContextBundle> retrieve(const Instance& inst, const PipelineContext& ctx,
                                      InstanceOutcome& outcome) {
  if (ctx.context_mode == ContextMode::kNone) return std::nullopt;
  try {
    if (ctx.context_mode == ContextMode::kFromQuestion) {
      return context_from_question(inst, *ctx.search, ctx.translator, ctx.retrieval, ctx.decoding);
    }
    return context_from_claims(inst, *ctx.search, *ctx.llm, ctx.translator, ctx.retrieval,
                               ctx.decoding);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEmptyResult) throw;
    outcome.context_free = true;
    outcome.warnings.push_back("EmptyResult: no passages retrieved; ran without context");
    return std::nullopt;
  }
}

Detection detect(const Instance& inst, const ContextBundle* context, const PipelineContext& ctx) {
  switch (ctx.detector) {
    case DetectorKind::kDirect: {
      // A supplied prompt was tuned for the configured mode; a context-free
      // fallback uses the stock context-free prompt instead.
      const bool prompt_fits = (context != nullptr) == (ctx.context_mode != ContextMode::kNone);
      return detect_direct(context, inst, *ctx.llm, prompt_fits ? ctx.prompt : nullptr,
                           ctx.decoding);
    }
    case DetectorKind::kKnowledgeGraph:
      return detect_kg(context, inst, *ctx.llm, ctx.decoding);
    case DetectorKind::kMinRevision:
      return detect_min_revision(context, inst, *ctx.llm, ctx.decoding);
  }
  throw Error(ErrorKind::kConfigError, "unknown detector");
}

SpanMapping map_detection(const Instance& inst, const Detection& d, const PipelineContext& ctx,
                          std::vector<std::string>& raw_outputs) {
  switch (ctx.mapper) {
    case MapperKind::kSubstring: {
      const auto extractions = as_extractions(d);
      return map_substring(inst.answer, extractions);
    }
    case MapperKind::kFactToSpan: {
      const auto facts = as_facts(d);
      if (facts.empty()) return {SpanSet(inst.answer_length()), {}, {}};
      return map_facts_to_spans(inst.answer, facts, *ctx.llm, ctx.decoding, &raw_outputs);
    }
    case MapperKind::kEditDistance: {
      const auto* corrected = std::get_if<CorrectedAnswer>(&d.result);
      if (!corrected) {
        throw Error(ErrorKind::kConfigError, "edit_distance mapping needs a corrected answer");
      }
      auto hard = map_edit_distance(inst.answer, corrected->text);
      auto soft = unit_soft(hard);
      return {std::move(hard), std::move(soft), {}};
    }
  }
  throw Error(ErrorKind::kConfigError, "unknown mapper");
}

void record_failure(InstanceOutcome& outcome, const Instance& inst, std::string stage,
                    const std::exception& e, std::vector<std::string> raw) {
  FailureRecord f;
  f.id = inst.id;
  f.stage = std::move(stage);
  f.raw_outputs = std::move(raw);
  if (const auto* llm_error = dynamic_cast<const LlmOutputError*>(&e)) {
    f.kind = llm_error->kind();
    f.message = llm_error->detail();
    f.raw_outputs.insert(f.raw_outputs.end(), llm_error->raw_outputs().begin(),
                         llm_error->raw_outputs().end());
  } else if (const auto* error = dynamic_cast<const Error*>(&e)) {
    f.kind = error->kind();
    f.message = error->detail();
  } else {
    f.kind = ErrorKind::kPrecondition;
    f.message = e.what();
  }
  outcome.failure = std::move(f);
  outcome.prediction = Prediction::empty(inst.id, inst.answer_length());
}

}  // namespace

PipelineContext PipelineContext::from(const RunConfig& config, BackendSet& backends,
                                      const ExtractionPrompt* prompt) {
  PipelineContext ctx;
  ctx.context_mode = config.context_mode;
  ctx.detector = config.detector;
  ctx.mapper = config.mapper_kind();
  ctx.retrieval = config.retrieval;
  ctx.decoding = config.decoding;
  ctx.search = backends.search();
  ctx.llm = &backends.llm();
  ctx.translator = backends.translator();
  ctx.prompt = prompt;
  return ctx;
}

InstanceOutcome run_instance(const Instance& inst, const PipelineContext& ctx) {
  InstanceOutcome outcome;
  outcome.prediction = Prediction::empty(inst.id, inst.answer_length());

  std::optional<ContextBundle> context;
  try {
    context = retrieve(inst, ctx, outcome);
  } catch (const std::exception& e) {
    record_failure(outcome, inst, "retrieval", e, {});
    return outcome;
  }

  Detection detection;
  try {
    detection = detect(inst, context ? &*context : nullptr, ctx);
  } catch (const std::exception& e) {
    record_failure(outcome, inst, "detection", e, {});
    return outcome;
  }
  for (auto& w : detection.warnings) outcome.warnings.push_back(std::move(w));

  std::vector<std::string> mapping_raw;
  try {
    auto mapped = map_detection(inst, detection, ctx, mapping_raw);
    outcome.prediction.hard = std::move(mapped.hard);
    outcome.prediction.soft = std::move(mapped.soft);
    for (auto& w : mapped.warnings) outcome.warnings.push_back(std::move(w));
  } catch (const std::exception& e) {
    auto raw = detection.raw_outputs;
    raw.insert(raw.end(), mapping_raw.begin(), mapping_raw.end());
    record_failure(outcome, inst, "mapping", e, std::move(raw));
  }
  return outcome;
}

std::size_t CorpusRun::failures() const {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(),
                                                [](const auto& o) { return o.failure.has_value(); }));
}

std::size_t CorpusRun::warnings() const {
  std::size_t n = 0;
  for (const auto& o : outcomes) n += o.warnings.size();
  return n;
}

std::size_t CorpusRun::context_free() const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.context_free; }));
}

std::vector<Prediction> CorpusRun::predictions() const {
  std::vector<Prediction> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back(o.prediction);
  return out;
}

CorpusRun run_corpus(std::span<const Instance> instances, const PipelineContext& ctx,
                     std::size_t parallelism) {
  CorpusRun run;
  run.outcomes.resize(instances.size());
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
  const int threads = static_cast<int>(std::max<std::size_t>(parallelism, 1));
  // run_instance never throws for per-instance problems; anything else (e.g.
  // bad_alloc) must still not escape the parallel region.
  std::exception_ptr fatal;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      run.outcomes[static_cast<std::size_t>(i)] =
          run_instance(instances[static_cast<std::size_t>(i)], ctx);
    } catch (...) {
#pragma omp critical(halspan_run_corpus)
      if (!fatal) fatal = std::current_exception();
    }
  }
  if (fatal) std::rethrow_exception(fatal);
  return run;
}

std::vector<Instance> filter_languages(std::vector<Instance> instances,
                                       const std::vector<std::string>& languages) {
  if (languages.empty()) return instances;
  std::erase_if(instances, [&](const Instance& inst) {
    return std::find(languages.begin(), languages.end(), inst.lang) == languages.end();
  });
  return instances;
}

nlohmann::ordered_json to_json(const FailureRecord& failure) {
  nlohmann::ordered_json j;
  j["id"] = failure.id;
  j["stage"] = failure.stage;
  j["kind"] = to_string(failure.kind);
  j["message"] = failure.message;
  j["raw_outputs"] = failure.raw_outputs;
  return j;
}

DetectPaths DetectPaths::beside(const std::filesystem::path& predictions) {
  return {predictions, std::filesystem::path(predictions.string() + ".errors.jsonl"),
          std::filesystem::path(predictions.string() + ".manifest.json")};
}

nlohmann::ordered_json build_manifest(const RunConfig& config, const BackendSet& backends,
                                      const std::filesystem::path& input, const CorpusRun& run,
                                      const std::string& predictions_jsonl,
                                      const ExtractionPrompt* prompt) {
  nlohmann::ordered_json m;
  m["tool"] = "halspan";
  m["config"] = config.snapshot();

  auto& templates = m["prompts"] = nlohmann::ordered_json::array();
  for (const auto& t : prompts::all()) {
    templates.push_back({{"name", t.name}, {"version", t.version}, {"digest", t.digest()}});
  }
  m["prompt_override_sha256"] =
      prompt ? nlohmann::ordered_json(sha256_hex(to_json(*prompt).dump())) : nullptr;
  m["backends"] = backends.identities();

  std::string input_bytes;
  try {
    input_bytes = io::read_file(input);
  } catch (const Error&) {
  }
  m["input"] = {{"path", input.string()},
                {"sha256", sha256_hex(input_bytes)},
                {"instances", run.outcomes.size()}};

  const auto stats = backends.cache().stats();
  m["cache"] = {{"hits", stats.hits}, {"misses", stats.misses}, {"corrupt", stats.corrupt}};

  m["results"] = {{"predictions", run.outcomes.size()},
                  {"failures", run.failures()},
                  {"warnings", run.warnings()},
                  {"context_free_fallbacks", run.context_free()},
                  {"predictions_sha256", sha256_hex(predictions_jsonl)}};
  return m;
}

DetectSummary run_detect(const RunConfig& config, const std::filesystem::path& input) {
  config.validate();
  std::optional<ExtractionPrompt> prompt;
  if (config.prompt_file) prompt = load_prompt_asset(*config.prompt_file);

  auto instances = filter_languages(read_jsonl(input, config.fields), config.languages);
  BackendSet backends(config);
  const auto ctx = PipelineContext::from(config, backends, prompt ? &*prompt : nullptr);
  const auto run = run_corpus(instances, ctx, config.parallelism);

  const auto preds = run.predictions();
  const auto jsonl = to_jsonl(preds);
  std::string errors;
  for (const auto& o : run.outcomes) {
    if (o.failure) errors += to_json(*o.failure).dump() + "\n";
    for (const auto& w : o.warnings) spdlog::debug("{}: {}", o.prediction.id, w);
  }

  DetectSummary summary;
  summary.paths = DetectPaths::beside(config.output);
  summary.instances = run.outcomes.size();
  summary.failures = run.failures();
  io::atomic_write(summary.paths.predictions, jsonl);
  io::atomic_write(summary.paths.errors, errors);
  const auto manifest = build_manifest(config, backends, input, run, jsonl,
                                       prompt ? &*prompt : nullptr);
  io::atomic_write(summary.paths.manifest, manifest.dump(2) + "\n");
  return summary;
}

}  // namespace halspan

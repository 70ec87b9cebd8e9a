#include "halspan/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "halspan/error.hpp"
#include "halspan/hashing.hpp"
#include "halspan/io.hpp"
#include "halspan/llm_json.hpp"
#include "halspan/prompts.hpp"
#include "halspan/utf8.hpp"

namespace halspan {

namespace {

constexpr std::string_view kProposalSchema = R"({"instructions": ["string", ...]})";

// Partial Fisher-Yates on raw engine output, so the sample does not depend on
// the standard library's distribution implementations.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

nlohmann::ordered_json demo_json(const Demo& d) {
  return {{"instance_id", d.instance_id}, {"question", d.question}, {"answer", d.answer},
          {"context_digest", d.context_digest}, {"span_texts", d.span_texts}};
}

Demo demo_from_json(const nlohmann::json& j) {
  return {j.at("instance_id").get<std::string>(), j.at("question").get<std::string>(),
          j.at("answer").get<std::string>(), j.at("context_digest").get<std::string>(),
          j.at("span_texts").get<std::vector<std::string>>()};
}

std::string context_digest(const Instance& inst, const PipelineContext& ctx) {
  if (ctx.context_mode == ContextMode::kNone || !ctx.search) return {};
  try {
    const auto bundle =
        ctx.context_mode == ContextMode::kFromQuestion
            ? context_from_question(inst, *ctx.search, ctx.translator, ctx.retrieval, ctx.decoding)
            : context_from_claims(inst, *ctx.search, *ctx.llm, ctx.translator, ctx.retrieval,
                                  ctx.decoding);
    return sha256_hex(bundle.text()).substr(0, 16);
  } catch (const Error& e) {
    spdlog::debug("no context digest for demo {}: {}", inst.id, e.what());
    return {};
  }
}

double evaluate_on_fold(const PromptCandidate& candidate, std::size_t fold,
                        std::span<const Instance> instances, const PipelineContext& base,
                        const OptimizeOptions& options) {
  const auto prompt = candidate.prompt_for_fold(fold);
  auto ctx = base;
  ctx.prompt = &prompt;
  const auto run = run_corpus(instances, ctx, options.parallelism);
  const auto preds = run.predictions();
  return objective_value(evaluate_corpus(preds, instances, options.metric), options.objective);
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kIou: return "iou";
    case Objective::kCorr: return "corr";
    case Objective::kMaxIou: return "max_iou";
    case Objective::kIouCorr: return "iou+corr";
  }
  return "?";
}

Objective parse_objective(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "iou") return Objective::kIou;
  if (lower == "corr") return Objective::kCorr;
  if (lower == "max_iou" || lower == "maxiou") return Objective::kMaxIou;
  if (lower == "iou+corr") return Objective::kIouCorr;
  throw Error(ErrorKind::kConfigError, "unknown objective '" + std::string(name) +
                                           "' (expected iou, corr, max_iou or iou+corr)");
}

double objective_value(const MetricReport& report, Objective objective) {
  switch (objective) {
    case Objective::kIou: return report.mean_iou;
    case Objective::kCorr: return report.mean_corr;
    case Objective::kMaxIou:
      if (!report.mean_max_iou) {
        throw Error(ErrorKind::kPrecondition,
                    "the max_iou objective needs annotator label sets in the data");
      }
      return *report.mean_max_iou;
    case Objective::kIouCorr: return (report.mean_iou + report.mean_corr) / 2.0;
  }
  return 0.0;
}

std::array<std::vector<Instance>, 2> split_folds(std::span<const Instance> instances) {
  std::array<std::vector<Instance>, 2> folds;
  for (const auto& inst : instances) {
    const auto digest = sha256_hex(inst.id);
    const int last = std::stoi(digest.substr(digest.size() - 1), nullptr, 16);
    folds[static_cast<std::size_t>(last % 2)].push_back(inst);
  }
  if (folds[0].empty() || folds[1].empty()) {
    throw Error(ErrorKind::kPrecondition,
                "2-fold split left a fold empty; the optimizer needs more instances");
  }
  return folds;
}

Demo make_demo(const Instance& inst, std::string context_digest) {
  if (!inst.gold_hard) {
    throw Error(ErrorKind::kMissingLabels, "demo instance '" + inst.id + "' has no hard labels");
  }
  Demo d{inst.id, inst.question, inst.answer, std::move(context_digest), {}};
  for (const auto& s : inst.gold_hard->spans()) {
    d.span_texts.push_back(utf8::slice(inst.answer, s.start(), s.end()));
  }
  return d;
}

ExtractionPrompt PromptCandidate::prompt_for_fold(std::size_t fold) const {
  return {instruction, demos.at(fold)};
}

ExtractionPrompt PromptCandidate::merged() const {
  ExtractionPrompt p{instruction, demos[0]};
  for (const auto& d : demos[1]) {
    if (std::find(p.demos.begin(), p.demos.end(), d) == p.demos.end()) p.demos.push_back(d);
  }
  return p;
}

std::string PromptCandidate::content_id() const {
  nlohmann::ordered_json j;
  j["instruction"] = instruction;
  j["demos"] = {nlohmann::ordered_json::array(), nlohmann::ordered_json::array()};
  for (std::size_t f = 0; f < 2; ++f) {
    for (const auto& d : demos[f]) j["demos"][f].push_back(demo_json(d));
  }
  return sha256_hex(j.dump()).substr(0, 16);
}

nlohmann::ordered_json to_json(const PromptCandidate& c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["instruction"] = c.instruction;
  j["demos"] = {nlohmann::ordered_json::array(), nlohmann::ordered_json::array()};
  for (std::size_t f = 0; f < 2; ++f) {
    for (const auto& d : c.demos[f]) j["demos"][f].push_back(demo_json(d));
  }
  return j;
}

PromptCandidate candidate_from_json(const nlohmann::json& j) {
  PromptCandidate c;
  c.id = j.at("id").get<std::string>();
  c.instruction = j.at("instruction").get<std::string>();
  for (std::size_t f = 0; f < 2; ++f) {
    for (const auto& d : j.at("demos").at(f)) c.demos[f].push_back(demo_from_json(d));
  }
  return c;
}

std::vector<PromptCandidate> propose_candidates(const std::string& seed_instruction,
                                                LlmBackend& llm,
                                                const std::array<std::vector<Demo>, 2>& pools,
                                                const ProposalOptions& options,
                                                const DecodingParams& params) {
  if (options.k < 1) throw Error(ErrorKind::kPrecondition, "k must be at least 1");
  LlmRequest request;
  request.params = params;
  request.user = render(prompts::get("instruction_proposal").text,
                        {{"count", std::to_string(options.k)}, {"instruction", seed_instruction}});
  const auto reply = complete_json(llm, request, kProposalSchema, [](const nlohmann::json& v) {
    const auto& list = v.at("instructions");
    if (!list.is_array() || list.empty()) throw std::runtime_error("no instructions");
    for (const auto& s : list) {
      if (!s.is_string() || s.get<std::string>().empty()) throw std::runtime_error("bad entry");
    }
  });

  std::vector<std::string> rewrites;
  for (const auto& s : reply.value.at("instructions")) {
    auto text = s.get<std::string>();
    if (std::find(rewrites.begin(), rewrites.end(), text) == rewrites.end()) {
      rewrites.push_back(std::move(text));
    }
    if (rewrites.size() == options.k) break;
  }

  std::mt19937_64 rng(options.seed);
  std::vector<std::array<std::vector<Demo>, 2>> subsets;
  for (std::size_t s = 0; s < options.demo_subsets; ++s) {
    std::array<std::vector<Demo>, 2> subset;
    for (std::size_t f = 0; f < 2; ++f) {
      for (auto i : sample_indices(pools[f].size(), options.demos_per_subset, rng)) {
        subset[f].push_back(pools[f][i]);
      }
    }
    subsets.push_back(std::move(subset));
  }
  if (subsets.empty()) subsets.emplace_back();

  std::vector<PromptCandidate> out;
  std::unordered_set<std::string> seen;
  for (const auto& text : rewrites) {
    for (const auto& subset : subsets) {
      PromptCandidate c{{}, text, subset};
      c.id = c.content_id();
      if (seen.insert(c.id).second) out.push_back(std::move(c));
    }
  }
  return out;
}

const PromptCandidate& OptimizationRun::candidate(const std::string& id) const {
  for (const auto& c : pool) {
    if (c.id == id) return c;
  }
  throw Error(ErrorKind::kPrecondition, "trace names unknown candidate " + id);
}

const PromptCandidate& OptimizationRun::best_candidate() const {
  if (!best) throw Error(ErrorKind::kPrecondition, "no candidate has been evaluated");
  return candidate(trace.at(*best).candidate);
}

nlohmann::ordered_json OptimizationRun::to_json() const {
  nlohmann::ordered_json j;
  j["objective"] = halspan::to_string(objective);
  j["budget"] = budget;
  j["proposal"] = {{"k", proposal.k},
                   {"demo_subsets", proposal.demo_subsets},
                   {"demos_per_subset", proposal.demos_per_subset},
                   {"seed", proposal.seed}};
  j["folds"] = folds;
  j["pool"] = nlohmann::ordered_json::array();
  for (const auto& c : pool) j["pool"].push_back(halspan::to_json(c));
  j["order"] = order;
  j["trace"] = nlohmann::ordered_json::array();
  for (const auto& e : trace) {
    j["trace"].push_back(
        {{"candidate", e.candidate}, {"fold_scores", e.fold_scores}, {"score", e.score}});
  }
  if (best) {
    j["best"] = {{"candidate", trace[*best].candidate}, {"score", trace[*best].score}};
  } else {
    j["best"] = nullptr;
  }
  return j;
}

OptimizationRun OptimizationRun::from_json(const nlohmann::json& j) {
  OptimizationRun run;
  try {
    run.objective = parse_objective(j.at("objective").get<std::string>());
    run.budget = j.at("budget").get<std::size_t>();
    const auto& p = j.at("proposal");
    run.proposal = {p.at("k").get<std::size_t>(), p.at("demo_subsets").get<std::size_t>(),
                    p.at("demos_per_subset").get<std::size_t>(), p.at("seed").get<std::uint64_t>()};
    run.folds = j.at("folds").get<std::array<std::vector<std::string>, 2>>();
    for (const auto& c : j.at("pool")) run.pool.push_back(candidate_from_json(c));
    run.order = j.at("order").get<std::vector<std::string>>();
    for (const auto& e : j.at("trace")) {
      run.trace.push_back({e.at("candidate").get<std::string>(),
                           e.at("fold_scores").get<std::array<double, 2>>(),
                           e.at("score").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, std::string("malformed optimizer trace: ") + e.what());
  }
  for (std::size_t i = 0; i < run.trace.size(); ++i) {
    if (!run.best || run.trace[i].score > run.trace[*run.best].score) run.best = i;
  }
  return run;
}

OptimizationRun optimize(std::span<const Instance> dataset, const PipelineContext& ctx,
                         const std::string& seed_instruction, LlmBackend& proposer,
                         const OptimizeOptions& options) {
  if (ctx.detector != DetectorKind::kDirect) {
    throw Error(ErrorKind::kConfigError, "prompt optimization applies to the direct detector");
  }
  if (options.budget < 1) throw Error(ErrorKind::kPrecondition, "budget must be at least 1");
  for (const auto& inst : dataset) {
    if (!inst.gold_hard) {
      throw Error(ErrorKind::kMissingLabels, "instance '" + inst.id + "' has no gold labels");
    }
  }
  const auto folds = split_folds(dataset);

  OptimizationRun run;
  const bool resuming = options.resume && options.trace_path &&
                        std::filesystem::exists(*options.trace_path);
  if (resuming) {
    run = OptimizationRun::from_json(nlohmann::json::parse(io::read_file(*options.trace_path)));
    if (run.objective != options.objective || run.proposal.seed != options.proposal.seed) {
      throw Error(ErrorKind::kConfigError,
                  "trace " + options.trace_path->string() +
                      " was written with a different objective or seed");
    }
    for (std::size_t f = 0; f < 2; ++f) {
      std::vector<std::string> ids;
      for (const auto& inst : folds[f]) ids.push_back(inst.id);
      if (ids != run.folds[f]) {
        throw Error(ErrorKind::kConfigError, "trace folds do not match the dataset");
      }
    }
    run.budget = options.budget;
    spdlog::info("resuming optimization: {} of {} evaluations done", run.trace.size(),
                 std::min(run.budget, run.order.size()));
  } else {
    run.objective = options.objective;
    run.budget = options.budget;
    run.proposal = options.proposal;
    for (std::size_t f = 0; f < 2; ++f) {
      for (const auto& inst : folds[f]) run.folds[f].push_back(inst.id);
    }

    // Demos shown while evaluating fold f come from the other fold.
    std::array<std::vector<Demo>, 2> pools;
    for (std::size_t f = 0; f < 2; ++f) {
      for (const auto& inst : folds[1 - f]) pools[f].push_back(make_demo(inst, context_digest(inst, ctx)));
    }

    PromptCandidate seed{{}, seed_instruction, {}};
    seed.id = seed.content_id();
    run.pool.push_back(seed);
    for (auto& c : propose_candidates(seed_instruction, proposer, pools, options.proposal,
                                      ctx.decoding)) {
      if (c.id != seed.id) run.pool.push_back(std::move(c));
    }

    std::vector<std::size_t> rest(run.pool.size() - 1);
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = i + 1;
    std::mt19937_64 rng(options.proposal.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto picked = sample_indices(rest.size(), rest.size(), rng);
    run.order.push_back(run.pool[0].id);
    for (auto i : picked) run.order.push_back(run.pool[rest[i]].id);
  }

  const auto limit = std::min(run.budget, run.order.size());
  for (std::size_t step = run.trace.size(); step < limit; ++step) {
    const auto& candidate = run.candidate(run.order[step]);
    TraceEntry entry{candidate.id, {}, 0.0};
    for (std::size_t f = 0; f < 2; ++f) {
      entry.fold_scores[f] = evaluate_on_fold(candidate, f, folds[f], ctx, options);
    }
    entry.score = (entry.fold_scores[0] + entry.fold_scores[1]) / 2.0;
    run.trace.push_back(entry);
    if (!run.best || entry.score > run.trace[*run.best].score) run.best = run.trace.size() - 1;
    spdlog::info("candidate {} ({}/{}): {} = {:.4f} [{:.4f}, {:.4f}]", candidate.id, step + 1,
                 limit, to_string(run.objective), entry.score, entry.fold_scores[0],
                 entry.fold_scores[1]);
    if (options.trace_path) io::atomic_write(*options.trace_path, run.to_json().dump(2) + "\n");
  }
  if (options.trace_path) io::atomic_write(*options.trace_path, run.to_json().dump(2) + "\n");
  return run;
}

}  // namespace halspan

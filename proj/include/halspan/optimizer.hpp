#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "halspan/dataset.hpp"
#include "halspan/detectors.hpp"
#include "halspan/llm.hpp"
#include "halspan/metrics.hpp"
#include "halspan/pipeline.hpp"

namespace halspan {

enum class Objective { kIou, kCorr, kMaxIou, kIouCorr };

std::string_view to_string(Objective objective);
/// Accepts "iou", "corr", "max_iou", "iou+corr" (case-insensitive).
Objective parse_objective(std::string_view name);
/// IoU+Corr is the unweighted mean of the two. MaxIoU throws
/// Error(kPrecondition) when no instance carries annotator sets.
double objective_value(const MetricReport& report, Objective objective);

/// Instances split by the parity of sha256(id). Both folds must be
/// non-empty.
std::array<std::vector<Instance>, 2> split_folds(std::span<const Instance> instances);

/// A gold-labelled instance as a few-shot demonstration.
Demo make_demo(const Instance& inst, std::string context_digest = {});

/// An instruction plus, for each evaluation fold, demos drawn from the other
/// fold.
struct PromptCandidate {
  std::string id;
  std::string instruction;
  std::array<std::vector<Demo>, 2> demos;

  ExtractionPrompt prompt_for_fold(std::size_t fold) const;
  /// Deployable prompt: the instruction with the demos of both folds.
  ExtractionPrompt merged() const;
  /// Content hash of instruction and demos.
  std::string content_id() const;
};

nlohmann::ordered_json to_json(const PromptCandidate& candidate);
PromptCandidate candidate_from_json(const nlohmann::json& j);

struct ProposalOptions {
  /// Instruction rewrites requested from the model.
  std::size_t k = 4;
  /// Demo subsets per rewrite; 0 proposes demo-free candidates only.
  std::size_t demo_subsets = 2;
  std::size_t demos_per_subset = 3;
  std::uint64_t seed = 0;
};

/// `pools[f]` holds the demos allowed when evaluating fold f. Returns the
/// cross product of unique rewrites and sampled demo subsets, deduplicated
/// by content id. Throws LlmOutputError(kLlmParseError).
std::vector<PromptCandidate> propose_candidates(const std::string& seed_instruction,
                                                LlmBackend& llm,
                                                const std::array<std::vector<Demo>, 2>& pools,
                                                const ProposalOptions& options,
                                                const DecodingParams& params = {});

struct TraceEntry {
  std::string candidate;
  std::array<double, 2> fold_scores{};
  double score = 0.0;
};

struct OptimizationRun {
  Objective objective = Objective::kIou;
  std::size_t budget = 0;
  ProposalOptions proposal;
  std::array<std::vector<std::string>, 2> folds;
  /// Candidate pool, seed instruction first.
  std::vector<PromptCandidate> pool;
  /// Candidate ids in evaluation order (seed first, then a seeded shuffle).
  std::vector<std::string> order;
  std::vector<TraceEntry> trace;
  std::optional<std::size_t> best;  // index into trace

  const PromptCandidate& candidate(const std::string& id) const;
  const PromptCandidate& best_candidate() const;
  nlohmann::ordered_json to_json() const;
  static OptimizationRun from_json(const nlohmann::json& j);
};

struct OptimizeOptions {
  Objective objective = Objective::kIou;
  std::size_t budget = 8;
  ProposalOptions proposal;
  std::size_t parallelism = 1;
  MetricOptions metric;
  /// Persisted after every evaluation when set.
  std::optional<std::filesystem::path> trace_path;
  /// Continue from an existing trace at trace_path.
  bool resume = false;
};

/// Scores every candidate on each held-out fold through the full
/// detect -> map -> metric path and keeps the best mean (earliest wins
/// ties). `ctx` must use the direct detector; `proposer` writes the rewrites.
OptimizationRun optimize(std::span<const Instance> dataset, const PipelineContext& ctx,
                         const std::string& seed_instruction, LlmBackend& proposer,
                         const OptimizeOptions& options);

}  // namespace halspan

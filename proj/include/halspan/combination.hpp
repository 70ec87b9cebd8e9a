#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "halspan/dataset.hpp"
#include "halspan/metrics.hpp"

namespace halspan {

/// One member system's hard labels, keyed by instance id.
struct SystemOutput {
  std::string tag;
  std::unordered_map<std::string, SpanSet> hard;
  /// The member's own soft labels, used only when scoring the member alone.
  std::unordered_map<std::string, std::vector<SoftSpan>> soft;

  static SystemOutput from_predictions(std::string tag, std::span<const Prediction> preds);
};

/// Treats each member as an annotator: a character's probability is the
/// fraction of members covering it, soft spans are maximal runs of equal
/// non-zero probability, and hard labels are the characters covered by
/// strictly more than half of the members. Throws
/// Error(kFewerThanTwoSystems) or Error(kInstanceMismatch).
Prediction combine(std::span<const SpanSet> members, const Instance& inst);

/// combine() for every instance, in instance order. Runs under OpenMP;
/// combine_corpus_serial() is the reference loop.
std::vector<Prediction> combine_corpus(std::span<const SystemOutput> systems,
                                       std::span<const Instance> instances);
std::vector<Prediction> combine_corpus_serial(std::span<const SystemOutput> systems,
                                              std::span<const Instance> instances);

struct CombinationReport {
  /// One row per member, in input order, then "combined".
  std::vector<std::pair<std::string, MetricReport>> rows;
};

CombinationReport combination_report(std::span<const SystemOutput> systems,
                                     std::span<const Instance> golds,
                                     const MetricOptions& options = {});
std::string format_comparison_table(const CombinationReport& report);
nlohmann::ordered_json to_json(const CombinationReport& report);

}  // namespace halspan

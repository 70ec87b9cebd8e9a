#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "halspan/dataset.hpp"
#include "halspan/span.hpp"

namespace halspan {

/// Score given when prediction and gold are both empty. The exactly-one-empty
/// case always scores 0.
enum class EmptyIouPolicy { kOne, kZero };

struct MetricOptions {
  EmptyIouPolicy both_empty = EmptyIouPolicy::kOne;
};

double iou(const SpanSet& pred, const SpanSet& gold, const MetricOptions& options = {});

/// max_i iou(pred, annotations[i]). Throws Error(kNoAnnotations) on an
/// empty list.
double max_iou(const SpanSet& pred, std::span<const SpanSet> annotations,
               const MetricOptions& options = {});

/// Per-character probabilities: each soft span's prob over its characters,
/// 0 elsewhere.
std::vector<double> soft_label_vector(std::span<const SoftSpan> soft, std::size_t text_len);

/// Spearman rank correlation with average ranks for ties. Both inputs
/// constant gives 1, exactly one constant gives 0.
double spearman(std::span<const double> pred, std::span<const double> gold);

struct InstanceMetrics {
  std::string id;
  double iou = 0.0;
  double corr = 0.0;
  std::optional<double> max_iou;
};

struct MetricReport {
  std::vector<InstanceMetrics> per_instance;
  double mean_iou = 0.0;
  double mean_corr = 0.0;
  /// Mean over the instances that carry annotator sets; absent if none do.
  std::optional<double> mean_max_iou;
  MetricOptions options;
};

/// Scores one prediction against its gold instance. Gold soft labels default
/// to the hard labels at probability 1 when the record has none.
InstanceMetrics evaluate_instance(const Prediction& pred, const Instance& gold,
                                  const MetricOptions& options = {});

/// Corpus driver; per-instance work runs under OpenMP and is reduced in gold
/// order, so the result is identical to evaluate_corpus_serial().
MetricReport evaluate_corpus(std::span<const Prediction> preds, std::span<const Instance> golds,
                             const MetricOptions& options = {});
MetricReport evaluate_corpus_serial(std::span<const Prediction> preds,
                                    std::span<const Instance> golds,
                                    const MetricOptions& options = {});

/// Report JSON; `metadata.conventions` documents the degenerate-case rules.
nlohmann::ordered_json to_json(const MetricReport& report);
std::string format_table(const MetricReport& report);

}  // namespace halspan

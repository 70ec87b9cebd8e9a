#include "halspan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <omp.h>

#include "halspan/error.hpp"

namespace halspan {

double iou(const SpanSet& pred, const SpanSet& gold, const MetricOptions& options) {
  const std::size_t uni = union_count(pred, gold);
  if (uni == 0) return options.both_empty == EmptyIouPolicy::kOne ? 1.0 : 0.0;
  return static_cast<double>(intersect_count(pred, gold)) / static_cast<double>(uni);
}

double max_iou(const SpanSet& pred, std::span<const SpanSet> annotations,
               const MetricOptions& options) {
  if (annotations.empty()) throw Error(ErrorKind::kNoAnnotations, "no annotator span sets");
  double best = 0.0;
  for (const auto& ann : annotations) best = std::max(best, iou(pred, ann, options));
  return best;
}

std::vector<double> soft_label_vector(std::span<const SoftSpan> soft, std::size_t text_len) {
  std::vector<double> probs(text_len, 0.0);
  for (const auto& s : soft) {
    if (s.span().end() > text_len) {
      throw Error(ErrorKind::kOffsetOutOfBounds,
                  "soft span ends at " + std::to_string(s.span().end()) + " past length " +
                      std::to_string(text_len));
    }
    for (std::size_t i = s.span().start(); i < s.span().end(); ++i) probs[i] = s.prob();
  }
  return probs;
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // ranks are 1-based; a tie group [i, j] shares the mean of i+1..j+1
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

bool is_constant(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

double spearman(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size()) {
    throw Error(ErrorKind::kLengthMismatch, "soft label vectors of length " +
                                                std::to_string(pred.size()) + " and " +
                                                std::to_string(gold.size()));
  }
  if (pred.empty()) throw Error(ErrorKind::kEmptyText, "soft label vectors are empty");
  const bool pred_const = is_constant(pred);
  const bool gold_const = is_constant(gold);
  if (pred_const && gold_const) return 1.0;
  if (pred_const || gold_const) return 0.0;

  const auto rp = average_ranks(pred);
  const auto rg = average_ranks(gold);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  double cov = 0.0;
  double vp = 0.0;
  double vg = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double dp = rp[i] - mp;
    const double dg = rg[i] - mg;
    cov += dp * dg;
    vp += dp * dp;
    vg += dg * dg;
  }
  return std::clamp(cov / std::sqrt(vp * vg), -1.0, 1.0);
}

InstanceMetrics evaluate_instance(const Prediction& pred, const Instance& gold,
                                  const MetricOptions& options) {
  if (!gold.gold_hard) {
    throw Error(ErrorKind::kMissingLabels, "gold record '" + gold.id + "' has no hard labels");
  }
  const std::size_t len = gold.answer_length();
  const SpanSet hard = pred.hard.with_text_len(len);
  const SpanSet gold_hard = gold.gold_hard->with_text_len(len);

  InstanceMetrics m;
  m.id = gold.id;
  m.iou = iou(hard, gold_hard, options);

  const auto pred_soft = soft_label_vector(pred.soft, len);
  std::vector<double> gold_soft;
  if (gold.gold_soft) {
    gold_soft = soft_label_vector(*gold.gold_soft, len);
  } else {
    gold_soft.assign(len, 0.0);
    for (const auto& s : gold_hard.spans()) {
      std::fill(gold_soft.begin() + static_cast<std::ptrdiff_t>(s.start()),
                gold_soft.begin() + static_cast<std::ptrdiff_t>(s.end()), 1.0);
    }
  }
  m.corr = spearman(pred_soft, gold_soft);

  if (gold.annotator_sets && !gold.annotator_sets->empty()) {
    m.max_iou = max_iou(hard, *gold.annotator_sets, options);
  }
  return m;
}

namespace {

// Pairs every gold instance with its prediction; fails listing all offenders.
std::vector<const Prediction*> align(std::span<const Prediction> preds,
                                     std::span<const Instance> golds) {
  std::unordered_map<std::string, const Prediction*> by_id;
  std::vector<std::string> duplicates;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.id, &p).second) duplicates.push_back(p.id);
  }
  std::vector<const Prediction*> aligned;
  aligned.reserve(golds.size());
  std::vector<std::string> missing;
  std::unordered_map<std::string, bool> gold_ids;
  for (const auto& g : golds) {
    gold_ids.emplace(g.id, true);
    auto it = by_id.find(g.id);
    if (it == by_id.end()) {
      missing.push_back(g.id);
      aligned.push_back(nullptr);
    } else {
      aligned.push_back(it->second);
    }
  }
  std::vector<std::string> extra;
  for (const auto& p : preds) {
    if (!gold_ids.contains(p.id)) extra.push_back(p.id);
  }
  if (!missing.empty() || !extra.empty() || !duplicates.empty()) {
    std::string msg = "prediction and gold ids differ;";
    auto list = [&](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + label + ":";
      for (const auto& id : ids) msg += " " + id;
      msg += ";";
    };
    list("missing predictions", missing);
    list("unknown predictions", extra);
    list("duplicate predictions", duplicates);
    throw Error(ErrorKind::kMissingInstance, msg);
  }
  return aligned;
}

MetricReport reduce(std::vector<InstanceMetrics> per_instance, const MetricOptions& options) {
  MetricReport report;
  report.options = options;
  double sum_iou = 0.0;
  double sum_corr = 0.0;
  double sum_max = 0.0;
  std::size_t n_max = 0;
  for (const auto& m : per_instance) {
    sum_iou += m.iou;
    sum_corr += m.corr;
    if (m.max_iou) {
      sum_max += *m.max_iou;
      ++n_max;
    }
  }
  if (!per_instance.empty()) {
    const auto n = static_cast<double>(per_instance.size());
    report.mean_iou = sum_iou / n;
    report.mean_corr = sum_corr / n;
  }
  if (n_max > 0) report.mean_max_iou = sum_max / static_cast<double>(n_max);
  report.per_instance = std::move(per_instance);
  return report;
}

}  // namespace

MetricReport evaluate_corpus_serial(std::span<const Prediction> preds,
                                    std::span<const Instance> golds,
                                    const MetricOptions& options) {
  const auto aligned = align(preds, golds);
  std::vector<InstanceMetrics> per_instance;
  per_instance.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) {
    per_instance.push_back(evaluate_instance(*aligned[i], golds[i], options));
  }
  return reduce(std::move(per_instance), options);
}

MetricReport evaluate_corpus(std::span<const Prediction> preds, std::span<const Instance> golds,
                             const MetricOptions& options) {
  const auto aligned = align(preds, golds);
  const auto n = static_cast<std::ptrdiff_t>(golds.size());
  std::vector<InstanceMetrics> per_instance(golds.size());
  std::vector<std::exception_ptr> errors(golds.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      per_instance[i] = evaluate_instance(*aligned[i], golds[i], options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return reduce(std::move(per_instance), options);
}

nlohmann::ordered_json to_json(const MetricReport& report) {
  using ojson = nlohmann::ordered_json;
  ojson conventions;
  conventions["iou_both_empty"] =
      report.options.both_empty == EmptyIouPolicy::kOne ? 1.0 : 0.0;
  conventions["iou_one_empty"] = 0.0;
  conventions["spearman_both_constant"] = 1.0;
  conventions["spearman_one_constant"] = 0.0;
  conventions["spearman_ties"] = "average_rank";
  conventions["gold_soft_fallback"] = "hard labels at probability 1";
  conventions["max_iou_scope"] = "instances with annotator sets";

  ojson out;
  out["metadata"]["conventions"] = std::move(conventions);
  out["metadata"]["instances"] = report.per_instance.size();
  out["mean_iou"] = report.mean_iou;
  out["mean_corr"] = report.mean_corr;
  out["mean_max_iou"] = report.mean_max_iou ? ojson(*report.mean_max_iou) : ojson(nullptr);
  ojson rows = ojson::array();
  for (const auto& m : report.per_instance) {
    ojson row;
    row["id"] = m.id;
    row["iou"] = m.iou;
    row["corr"] = m.corr;
    row["max_iou"] = m.max_iou ? ojson(*m.max_iou) : ojson(nullptr);
    rows.push_back(std::move(row));
  }
  out["per_instance"] = std::move(rows);
  return out;
}

std::string format_table(const MetricReport& report) {
  std::size_t width = 8;
  for (const auto& m : report.per_instance) width = std::max(width, m.id.size());
  std::ostringstream out;
  char buf[128];
  auto row = [&](const std::string& id, double a, double b, const std::optional<double>& c) {
    out << id << std::string(width - std::min(width, id.size()) + 2, ' ');
    std::snprintf(buf, sizeof buf, "%8.4f  %8.4f  ", a, b);
    out << buf;
    if (c) {
      std::snprintf(buf, sizeof buf, "%8.4f", *c);
      out << buf;
    } else {
      out << "       -";
    }
    out << '\n';
  };
  std::snprintf(buf, sizeof buf, "%8s  %8s  %8s\n", "IoU", "Corr", "MaxIoU");
  out << "id" << std::string(width, ' ') << buf;
  for (const auto& m : report.per_instance) row(m.id, m.iou, m.corr, m.max_iou);
  out << std::string(width + 32, '-') << '\n';
  row("mean", report.mean_iou, report.mean_corr, report.mean_max_iou);
  return out.str();
}

}  // namespace halspan

#include "halspan/combination.hpp"

#include <cstdio>
#include <sstream>

#include <omp.h>

#include "halspan/error.hpp"

namespace halspan {

SystemOutput SystemOutput::from_predictions(std::string tag, std::span<const Prediction> preds) {
  SystemOutput out;
  out.tag = std::move(tag);
  for (const auto& p : preds) {
    if (!out.hard.emplace(p.id, p.hard).second) {
      throw Error(ErrorKind::kInstanceMismatch,
                  "system '" + out.tag + "' has two predictions for '" + p.id + "'");
    }
    out.soft.emplace(p.id, p.soft);
  }
  return out;
}

Prediction combine(std::span<const SpanSet> members, const Instance& inst) {
  if (members.size() < 2) {
    throw Error(ErrorKind::kFewerThanTwoSystems,
                "combination needs at least two systems, got " + std::to_string(members.size()));
  }
  const std::size_t len = inst.answer_length();
  // difference array over character coverage
  std::vector<int> delta(len + 1, 0);
  for (const auto& m : members) {
    if (m.text_len() != len) {
      throw Error(ErrorKind::kInstanceMismatch,
                  "member labels for '" + inst.id + "' cover " + std::to_string(m.text_len()) +
                      " characters, answer has " + std::to_string(len));
    }
    for (const auto& s : m.spans()) {
      ++delta[s.start()];
      --delta[s.end()];
    }
  }

  const auto n = static_cast<int>(members.size());
  Prediction out = Prediction::empty(inst.id, len);
  std::vector<CharSpan> hard;
  int count = 0;
  std::size_t run_start = 0;
  int run_count = 0;
  auto close_run = [&](std::size_t end) {
    if (run_count == 0 || end == run_start) return;
    CharSpan span(run_start, end);
    out.soft.emplace_back(span, static_cast<double>(run_count) / n);
    if (2 * run_count > n) hard.push_back(span);
  };
  for (std::size_t i = 0; i < len; ++i) {
    count += delta[i];
    if (count != run_count) {
      close_run(i);
      run_start = i;
      run_count = count;
    }
  }
  close_run(len);
  out.hard = SpanSet::normalize(std::move(hard), len);
  return out;
}

namespace {

std::vector<SpanSet> gather(std::span<const SystemOutput> systems, const Instance& inst) {
  std::vector<SpanSet> members;
  members.reserve(systems.size());
  for (const auto& s : systems) {
    auto it = s.hard.find(inst.id);
    if (it == s.hard.end()) {
      throw Error(ErrorKind::kInstanceMismatch,
                  "system '" + s.tag + "' has no prediction for '" + inst.id + "'");
    }
    members.push_back(it->second.with_text_len(inst.answer_length()));
  }
  return members;
}

void check_coverage(std::span<const SystemOutput> systems, std::span<const Instance> instances) {
  if (systems.size() < 2) {
    throw Error(ErrorKind::kFewerThanTwoSystems,
                "combination needs at least two systems, got " + std::to_string(systems.size()));
  }
  for (const auto& s : systems) {
    if (s.hard.size() != instances.size()) {
      throw Error(ErrorKind::kInstanceMismatch,
                  "system '" + s.tag + "' covers " + std::to_string(s.hard.size()) +
                      " instances, expected " + std::to_string(instances.size()));
    }
  }
}

}  // namespace

std::vector<Prediction> combine_corpus_serial(std::span<const SystemOutput> systems,
                                              std::span<const Instance> instances) {
  check_coverage(systems, instances);
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(combine(gather(systems, inst), inst));
  return out;
}

std::vector<Prediction> combine_corpus(std::span<const SystemOutput> systems,
                                       std::span<const Instance> instances) {
  check_coverage(systems, instances);
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
  std::vector<Prediction> out(instances.size());
  std::vector<std::exception_ptr> errors(instances.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = combine(gather(systems, instances[i]), instances[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

CombinationReport combination_report(std::span<const SystemOutput> systems,
                                     std::span<const Instance> golds,
                                     const MetricOptions& options) {
  CombinationReport report;
  for (const auto& s : systems) {
    std::vector<Prediction> preds;
    preds.reserve(golds.size());
    for (const auto& g : golds) {
      auto it = s.hard.find(g.id);
      if (it == s.hard.end()) {
        throw Error(ErrorKind::kMissingInstance,
                    "system '" + s.tag + "' has no prediction for '" + g.id + "'");
      }
      Prediction p = Prediction::empty(g.id, g.answer_length());
      p.hard = it->second.with_text_len(g.answer_length());
      if (auto soft = s.soft.find(g.id); soft != s.soft.end()) {
        p.soft = soft->second;
      } else {
        for (const auto& span : p.hard.spans()) p.soft.emplace_back(span, 1.0);
      }
      preds.push_back(std::move(p));
    }
    report.rows.emplace_back(s.tag, evaluate_corpus(preds, golds, options));
  }
  const auto combined = combine_corpus(systems, golds);
  report.rows.emplace_back("combined", evaluate_corpus(combined, golds, options));
  return report;
}

std::string format_comparison_table(const CombinationReport& report) {
  std::size_t width = 6;
  for (const auto& [tag, _] : report.rows) width = std::max(width, tag.size());
  std::ostringstream out;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%8s  %8s  %8s\n", "IoU", "Corr", "MaxIoU");
  out << "system" << std::string(width - 6 + 2, ' ') << buf;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const auto& [tag, m] = report.rows[r];
    if (r + 1 == report.rows.size()) out << std::string(width + 32, '-') << '\n';
    out << tag << std::string(width - tag.size() + 2, ' ');
    std::snprintf(buf, sizeof buf, "%8.4f  %8.4f  ", m.mean_iou, m.mean_corr);
    out << buf;
    if (m.mean_max_iou) {
      std::snprintf(buf, sizeof buf, "%8.4f\n", *m.mean_max_iou);
      out << buf;
    } else {
      out << "       -\n";
    }
  }
  return out.str();
}

nlohmann::ordered_json to_json(const CombinationReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& [tag, m] : report.rows) {
    nlohmann::ordered_json row;
    row["system"] = tag;
    row["report"] = to_json(m);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace halspan

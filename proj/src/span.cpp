#include "halspan/span.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "halspan/error.hpp"

namespace halspan {

CharSpan::CharSpan(std::size_t start, std::size_t end) : start_(start), end_(end) {
  if (start >= end) {
    throw Error(ErrorKind::kInvertedSpan, "span [" + std::to_string(start) + "," +
                                              std::to_string(end) + ") is empty or inverted");
  }
}

SpanSet SpanSet::normalize(std::vector<CharSpan> spans, std::size_t text_len) {
  for (const auto& s : spans) {
    if (s.end() > text_len) {
      throw Error(ErrorKind::kOffsetOutOfBounds,
                  "span [" + std::to_string(s.start()) + "," + std::to_string(s.end()) +
                      ") exceeds text length " + std::to_string(text_len));
    }
  }
  std::sort(spans.begin(), spans.end());
  SpanSet out(text_len);
  for (const auto& s : spans) {
    if (!out.spans_.empty() && s.start() <= out.spans_.back().end()) {
      auto& last = out.spans_.back();
      last = CharSpan(last.start(), std::max(last.end(), s.end()));
    } else {
      out.spans_.push_back(s);
    }
  }
  return out;
}

SpanSet SpanSet::from_pairs(const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                            std::size_t text_len) {
  std::vector<CharSpan> spans;
  spans.reserve(pairs.size());
  for (auto [start, end] : pairs) spans.emplace_back(start, end);
  return normalize(std::move(spans), text_len);
}

SpanSet SpanSet::from_char_mask(const std::vector<bool>& mask) {
  SpanSet out(mask.size());
  std::size_t i = 0;
  while (i < mask.size()) {
    if (!mask[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < mask.size() && mask[j]) ++j;
    out.spans_.emplace_back(i, j);
    i = j;
  }
  return out;
}

std::vector<bool> SpanSet::to_char_mask() const {
  std::vector<bool> mask(text_len_, false);
  for (const auto& s : spans_) {
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s.start()),
              mask.begin() + static_cast<std::ptrdiff_t>(s.end()), true);
  }
  return mask;
}

std::size_t SpanSet::coverage() const noexcept {
  std::size_t n = 0;
  for (const auto& s : spans_) n += s.length();
  return n;
}

SpanSet SpanSet::with_text_len(std::size_t text_len) const {
  return normalize(spans_, text_len);
}

namespace {

void require_same_length(const SpanSet& a, const SpanSet& b) {
  if (a.text_len() != b.text_len()) {
    throw Error(ErrorKind::kLengthMismatch,
                "span sets over texts of length " + std::to_string(a.text_len()) + " and " +
                    std::to_string(b.text_len()));
  }
}

}  // namespace

std::size_t intersect_count(const SpanSet& a, const SpanSet& b) {
  require_same_length(a, b);
  auto sa = a.spans();
  auto sb = b.spans();
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t total = 0;
  while (i < sa.size() && j < sb.size()) {
    const std::size_t lo = std::max(sa[i].start(), sb[j].start());
    const std::size_t hi = std::min(sa[i].end(), sb[j].end());
    if (lo < hi) total += hi - lo;
    if (sa[i].end() < sb[j].end()) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

std::size_t union_count(const SpanSet& a, const SpanSet& b) {
  return a.coverage() + b.coverage() - intersect_count(a, b);
}

SoftSpan::SoftSpan(CharSpan span, double prob) : span_(span), prob_(prob) {
  if (!(prob > 0.0 && prob <= 1.0) || std::isnan(prob)) {
    throw Error(ErrorKind::kInvalidProbability,
                "soft span probability " + std::to_string(prob) + " outside (0, 1]");
  }
}

}  // namespace halspan

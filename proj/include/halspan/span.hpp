#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace halspan {

/// Half-open interval [start, end) of character offsets; never empty.
class CharSpan {
 public:
  /// Throws Error(kInvertedSpan) unless start < end.
  CharSpan(std::size_t start, std::size_t end);

  std::size_t start() const noexcept { return start_; }
  std::size_t end() const noexcept { return end_; }
  std::size_t length() const noexcept { return end_ - start_; }

  auto operator<=>(const CharSpan&) const = default;

 private:
  std::size_t start_;
  std::size_t end_;
};

/// Canonical set of characters of one text: sorted, disjoint, non-adjacent
/// spans, all inside [0, text_len).
class SpanSet {
 public:
  SpanSet() = default;
  explicit SpanSet(std::size_t text_len) : text_len_(text_len) {}

  /// Sorts and coalesces overlapping or touching spans. Throws
  /// Error(kOffsetOutOfBounds) if any span ends past text_len.
  static SpanSet normalize(std::vector<CharSpan> spans, std::size_t text_len);

  /// Same as normalize() for raw (start, end) pairs; inverted or empty pairs
  /// raise Error(kInvertedSpan).
  static SpanSet from_pairs(
      const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
      std::size_t text_len);

  static SpanSet from_char_mask(const std::vector<bool>& mask);
  std::vector<bool> to_char_mask() const;

  std::span<const CharSpan> spans() const noexcept { return spans_; }
  std::size_t text_len() const noexcept { return text_len_; }
  /// Number of covered characters.
  std::size_t coverage() const noexcept;
  bool empty() const noexcept { return spans_.empty(); }

  /// The same spans over a text of a different length; throws
  /// Error(kOffsetOutOfBounds) if a span no longer fits.
  SpanSet with_text_len(std::size_t text_len) const;

  bool operator==(const SpanSet&) const = default;

 private:
  std::vector<CharSpan> spans_;
  std::size_t text_len_ = 0;
};

/// |a ∩ b| and |a ∪ b| in characters. Throw Error(kLengthMismatch) when the
/// sets describe texts of different lengths.
std::size_t intersect_count(const SpanSet& a, const SpanSet& b);
std::size_t union_count(const SpanSet& a, const SpanSet& b);

/// A span with the probability that it is hallucinated.
class SoftSpan {
 public:
  /// Throws Error(kInvalidProbability) unless 0 < prob <= 1.
  SoftSpan(CharSpan span, double prob);

  const CharSpan& span() const noexcept { return span_; }
  double prob() const noexcept { return prob_; }

  bool operator==(const SoftSpan&) const = default;

 private:
  CharSpan span_;
  double prob_;
};

}  // namespace halspan

#include <random>

#include "doctest.h"
#include "halspan/error.hpp"
#include "halspan/span.hpp"
#include "halspan/utf8.hpp"
#include "support/oracles.hpp"

using namespace halspan;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::kPrecondition;
}

}  // namespace

TEST_SUITE("span") {
  TEST_CASE("char span rejects empty and inverted intervals") {
    CHECK(kind_of([] { CharSpan(3, 3); }) == ErrorKind::kInvertedSpan);
    CHECK(kind_of([] { CharSpan(5, 2); }) == ErrorKind::kInvertedSpan);
    CHECK(CharSpan(2, 5).length() == 3);
  }

  TEST_CASE("normalize merges overlapping and touching spans") {
    const auto s = SpanSet::from_pairs({{5, 8}, {0, 2}, {2, 3}, {6, 10}}, 12);
    REQUIRE(s.spans().size() == 2);
    CHECK(s.spans()[0] == CharSpan(0, 3));
    CHECK(s.spans()[1] == CharSpan(5, 10));
    CHECK(s.coverage() == 8);
  }

  TEST_CASE("normalize rejects offsets past the text") {
    CHECK(kind_of([] { SpanSet::from_pairs({{3, 11}}, 10); }) == ErrorKind::kOffsetOutOfBounds);
    CHECK(kind_of([] { SpanSet::from_pairs({{4, 4}}, 10); }) == ErrorKind::kInvertedSpan);
  }

  TEST_CASE("mask round trip and idempotence") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 300; ++t) {
      const std::size_t len = rng() % 60;
      const auto pairs = oracle::random_spans(rng, len, 6);
      const auto s = SpanSet::from_pairs(pairs, len);
      CHECK(s.to_char_mask() == oracle::mask(pairs, len));
      CHECK(SpanSet::from_char_mask(s.to_char_mask()) == s);
      std::vector<CharSpan> again(s.spans().begin(), s.spans().end());
      CHECK(SpanSet::normalize(again, len) == s);
    }
  }

  TEST_CASE("intersection and union follow inclusion-exclusion") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 300; ++t) {
      const std::size_t len = 1 + rng() % 80;
      const auto a = SpanSet::from_pairs(oracle::random_spans(rng, len, 5), len);
      const auto b = SpanSet::from_pairs(oracle::random_spans(rng, len, 5), len);
      const auto ma = a.to_char_mask();
      const auto mb = b.to_char_mask();
      std::size_t inter = 0;
      for (std::size_t i = 0; i < len; ++i) inter += ma[i] && mb[i];
      CHECK(intersect_count(a, b) == inter);
      CHECK(intersect_count(a, b) == intersect_count(b, a));
      CHECK(union_count(a, b) + intersect_count(a, b) == a.coverage() + b.coverage());
    }
  }

  TEST_CASE("set operations require equal text lengths") {
    CHECK(kind_of([] { intersect_count(SpanSet(4), SpanSet(5)); }) == ErrorKind::kLengthMismatch);
  }

  TEST_CASE("soft span probability must be in (0, 1]") {
    CHECK(kind_of([] { SoftSpan(CharSpan(0, 1), 0.0); }) == ErrorKind::kInvalidProbability);
    CHECK(kind_of([] { SoftSpan(CharSpan(0, 1), 1.5); }) == ErrorKind::kInvalidProbability);
    CHECK(SoftSpan(CharSpan(0, 1), 1.0).prob() == 1.0);
  }
}

TEST_SUITE("utf8") {
  TEST_CASE("offsets count code points") {
    const std::string s = "长城 ist très lang";
    CHECK(utf8::length(s) == 16);
    CHECK(utf8::slice(s, 0, 2) == "长城");
    CHECK(utf8::slice(s, 7, 11) == "très");
    CHECK(utf8::encode(utf8::decode(s)) == s);
  }

  TEST_CASE("malformed input is rejected") {
    CHECK(kind_of([] { utf8::decode("\xC3"); }) == ErrorKind::kInvalidUtf8);
    CHECK(kind_of([] { utf8::decode("\xC0\xAF"); }) == ErrorKind::kInvalidUtf8);
    CHECK(kind_of([] { utf8::decode("\xED\xA0\x80"); }) == ErrorKind::kInvalidUtf8);
    CHECK(kind_of([] { utf8::slice("abc", 1, 4); }) == ErrorKind::kOffsetOutOfBounds);
  }
}

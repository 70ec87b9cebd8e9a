#include <algorithm>
#include <random>

#include "doctest.h"
#include "halspan/combination.hpp"
#include "halspan/error.hpp"
#include "support/oracles.hpp"

using namespace halspan;

namespace {

Instance text_instance(std::string id, std::size_t len) {
  Instance inst;
  inst.id = std::move(id);
  inst.lang = "en";
  inst.answer = std::string(len, 'a');
  return inst;
}

double prob_at(const Prediction& p, std::size_t i) {
  for (const auto& s : p.soft) {
    if (s.span().start() <= i && i < s.span().end()) return s.prob();
  }
  return 0.0;
}

}  // namespace

TEST_SUITE("combination") {
  TEST_CASE("three of five members give 0.6 and a hard label") {
    const auto inst = text_instance("a", 10);
    const std::vector<SpanSet> members{
        SpanSet::from_pairs({{2, 5}}, 10), SpanSet::from_pairs({{2, 5}}, 10),
        SpanSet::from_pairs({{2, 5}}, 10), SpanSet::from_pairs({{4, 5}}, 10), SpanSet(10)};
    const auto p = combine(members, inst);
    CHECK(prob_at(p, 2) == doctest::Approx(0.6));
    CHECK(prob_at(p, 4) == doctest::Approx(0.8));
    CHECK(prob_at(p, 0) == 0.0);
    CHECK(p.hard == SpanSet::from_pairs({{2, 5}}, 10));
  }

  TEST_CASE("two of five members stay soft only") {
    const auto inst = text_instance("a", 6);
    const std::vector<SpanSet> members{SpanSet::from_pairs({{0, 3}}, 6),
                                       SpanSet::from_pairs({{0, 3}}, 6), SpanSet(6), SpanSet(6),
                                       SpanSet(6)};
    const auto p = combine(members, inst);
    CHECK(prob_at(p, 1) == doctest::Approx(0.4));
    CHECK(p.hard.empty());
  }

  TEST_CASE("an even split is not a majority") {
    const auto inst = text_instance("a", 4);
    const std::vector<SpanSet> members{SpanSet::from_pairs({{0, 4}}, 4), SpanSet(4)};
    CHECK(combine(members, inst).hard.empty());
  }

  TEST_CASE("unanimous members reproduce the member") {
    const auto inst = text_instance("a", 12);
    const auto s = SpanSet::from_pairs({{1, 3}, {6, 9}}, 12);
    const std::vector<SpanSet> members{s, s, s};
    const auto p = combine(members, inst);
    CHECK(p.hard == s);
    REQUIRE(p.soft.size() == 2);
    CHECK(p.soft[0].prob() == 1.0);
  }

  TEST_CASE("errors") {
    const auto inst = text_instance("a", 4);
    const std::vector<SpanSet> one{SpanSet(4)};
    CHECK_THROWS_AS(combine(one, inst), Error);
    const std::vector<SpanSet> mismatched{SpanSet(4), SpanSet(5)};
    try {
      combine(mismatched, inst);
      FAIL("expected InstanceMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kInstanceMismatch);
    }
  }

  TEST_CASE("probabilities, majority, permutation and monotonicity properties") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 100; ++t) {
      const std::size_t len = 1 + rng() % 40;
      const std::size_t n = 2 + rng() % 5;
      const auto inst = text_instance("p", len);
      std::vector<SpanSet> members;
      for (std::size_t k = 0; k < n; ++k) {
        members.push_back(SpanSet::from_pairs(oracle::random_spans(rng, len, 3), len));
      }
      const auto p = combine(members, inst);
      for (std::size_t i = 0; i < len; ++i) {
        std::size_t count = 0;
        for (const auto& m : members) count += m.to_char_mask()[i];
        CHECK(prob_at(p, i) == doctest::Approx(static_cast<double>(count) / n).epsilon(1e-15));
        CHECK(p.hard.to_char_mask()[i] == (2 * count > n));
      }
      auto shuffled = members;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(combine(shuffled, inst) == p);

      auto with_empty = members;
      with_empty.push_back(SpanSet(len));
      const auto q = combine(with_empty, inst);
      for (std::size_t i = 0; i < len; ++i) CHECK(prob_at(q, i) <= prob_at(p, i));
    }
  }

  TEST_CASE("corpus combination and report") {
    std::vector<Instance> golds;
    std::vector<std::vector<Prediction>> member_preds(3);
    std::mt19937_64 rng(10);
    for (int i = 0; i < 30; ++i) {
      const std::size_t len = 5 + rng() % 30;
      auto g = text_instance("g" + std::to_string(i), len);
      g.gold_hard = SpanSet::from_pairs(oracle::random_spans(rng, len, 2), len);
      for (auto& preds : member_preds) {
        Prediction p;
        p.id = g.id;
        p.hard = SpanSet::from_pairs(oracle::random_spans(rng, len, 2), len);
        preds.push_back(p);
      }
      golds.push_back(std::move(g));
    }
    std::vector<SystemOutput> systems;
    for (std::size_t k = 0; k < member_preds.size(); ++k) {
      systems.push_back(SystemOutput::from_predictions("m" + std::to_string(k), member_preds[k]));
    }
    const auto combined = combine_corpus(systems, golds);
    CHECK(combined == combine_corpus_serial(systems, golds));

    const auto report = combination_report(systems, golds);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows.back().first == "combined");
    CHECK(report.rows.back().second.mean_iou ==
          evaluate_corpus(combined, golds).mean_iou);
    const auto table = format_comparison_table(report);
    CHECK(table.find("m0") != std::string::npos);
    CHECK(table.find("combined") != std::string::npos);

    systems[1].hard.erase("g3");
    CHECK_THROWS_AS(combine_corpus(systems, golds), Error);
  }
}

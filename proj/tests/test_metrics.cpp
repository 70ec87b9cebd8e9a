#include <cmath>
#include <random>

#include "doctest.h"
#include "halspan/error.hpp"
#include "halspan/metrics.hpp"
#include "support/oracles.hpp"

using namespace halspan;

namespace {

SpanSet set(const oracle::Pairs& p, std::size_t len) { return SpanSet::from_pairs(p, len); }

Instance gold(std::string id, std::string answer, const oracle::Pairs& hard) {
  Instance g;
  g.id = std::move(id);
  g.lang = "en";
  g.answer = std::move(answer);
  g.gold_hard = set(hard, g.answer_length());
  return g;
}

Prediction pred(std::string id, const oracle::Pairs& hard, std::size_t len) {
  Prediction p;
  p.id = std::move(id);
  p.hard = set(hard, len);
  for (const auto& s : p.hard.spans()) p.soft.emplace_back(s, 1.0);
  return p;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("iou examples") {
    CHECK(iou(set({{1, 4}}, 8), set({{1, 4}}, 8)) == 1.0);
    CHECK(iou(SpanSet(8), SpanSet(8)) == 1.0);
    CHECK(iou(SpanSet(8), SpanSet(8), {EmptyIouPolicy::kZero}) == 0.0);
    CHECK(iou(SpanSet(8), set({{0, 1}}, 8)) == 0.0);
    CHECK(iou(set({{0, 4}}, 8), set({{2, 6}}, 8)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("iou is symmetric and matches the mask oracle") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 500; ++t) {
      const std::size_t len = 1 + rng() % 50;
      const auto a = oracle::random_spans(rng, len, 4);
      const auto b = oracle::random_spans(rng, len, 4);
      const double v = iou(set(a, len), set(b, len));
      CHECK(v == oracle::iou(a, b, len));
      CHECK(v == iou(set(b, len), set(a, len)));
      CHECK((v == 1.0) == (set(a, len) == set(b, len)));
    }
  }

  TEST_CASE("spearman examples") {
    const std::vector<double> a{0, 0, 1, 1};
    CHECK(spearman(a, a) == doctest::Approx(1.0));
    CHECK(spearman(std::vector<double>{0, 1}, std::vector<double>{1, 0}) == doctest::Approx(-1.0));
    // average ranks: 4 / sqrt(18)
    CHECK(spearman(std::vector<double>{0, 0.5, 1, 0}, std::vector<double>{0, 1, 1, 0}) ==
          doctest::Approx(0.9428090415820634).epsilon(1e-12));
    CHECK(spearman(std::vector<double>{0, 0, 0}, std::vector<double>{0, 0, 0}) == 1.0);
    CHECK(spearman(std::vector<double>{0, 0, 0}, std::vector<double>{0, 1, 0}) == 0.0);
  }

  TEST_CASE("spearman rejects mismatched and empty input") {
    CHECK_THROWS_AS(spearman(std::vector<double>{0, 1}, std::vector<double>{0}), Error);
    CHECK_THROWS_AS(spearman(std::vector<double>{}, std::vector<double>{}), Error);
  }

  TEST_CASE("spearman is rank invariant") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(2 + rng() % 30);
      std::vector<double> y(x.size());
      for (auto& v : x) v = static_cast<double>(rng() % 5) / 4.0;
      for (auto& v : y) v = static_cast<double>(rng() % 5) / 4.0;
      std::vector<double> tx(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) tx[i] = std::exp(3 * x[i]) - 7;
      CHECK(spearman(tx, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
      CHECK(spearman(x, y) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-12));
    }
  }

  TEST_CASE("max_iou picks the best annotator") {
    const std::vector<SpanSet> anns{set({{2, 6}}, 8), set({{0, 4}}, 8)};
    CHECK(max_iou(set({{0, 4}}, 8), anns) == 1.0);
    const std::vector<SpanSet> disjoint{set({{5, 7}}, 8)};
    CHECK(max_iou(set({{0, 2}}, 8), disjoint) == 0.0);
    CHECK_THROWS_AS(max_iou(set({{0, 2}}, 8), std::vector<SpanSet>{}), Error);
  }

  TEST_CASE("soft label vector writes probabilities into covered characters") {
    const std::vector<SoftSpan> soft{SoftSpan(CharSpan(1, 3), 0.5), SoftSpan(CharSpan(4, 5), 1.0)};
    CHECK(soft_label_vector(soft, 6) == std::vector<double>{0, 0.5, 0.5, 0, 1.0, 0});
  }

  TEST_CASE("corpus means and alignment") {
    const std::vector<Instance> golds{gold("a", "abcdefgh", {{0, 4}}), gold("b", "abcdefgh", {})};
    const std::vector<Prediction> preds{pred("b", {{0, 1}}, 8), pred("a", {{0, 4}}, 8)};
    const auto report = evaluate_corpus(preds, golds);
    REQUIRE(report.per_instance.size() == 2);
    CHECK(report.per_instance[0].id == "a");
    CHECK(report.per_instance[0].iou == 1.0);
    CHECK(report.per_instance[1].iou == 0.0);
    CHECK(report.mean_iou == 0.5);
    CHECK_FALSE(report.mean_max_iou.has_value());

    const std::vector<Prediction> missing{pred("a", {}, 8), pred("z", {}, 8)};
    try {
      evaluate_corpus(missing, golds);
      FAIL("expected MissingInstance");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kMissingInstance);
      CHECK(std::string(e.what()).find("b") != std::string::npos);
      CHECK(std::string(e.what()).find("z") != std::string::npos);
    }
  }

  TEST_CASE("five crafted instances match the oracle report") {
    std::vector<Instance> golds;
    std::vector<Prediction> preds;
    const std::string text = "0123456789abcdefghij";
    const std::vector<std::pair<oracle::Pairs, oracle::Pairs>> cases{
        {{{0, 5}}, {{3, 8}}}, {{}, {}}, {{{1, 2}, {10, 15}}, {{10, 12}}},
        {{{0, 20}}, {{5, 6}}}, {{}, {{7, 9}}}};
    double sum_iou = 0;
    double sum_corr = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto id = "i" + std::to_string(i);
      golds.push_back(gold(id, text, cases[i].second));
      golds.back().annotator_sets = std::vector<SpanSet>{set(cases[i].second, 20), set({{0, 20}}, 20)};
      preds.push_back(pred(id, cases[i].first, 20));
      sum_iou += oracle::iou(cases[i].first, cases[i].second, 20);
      std::vector<double> p(20, 0.0);
      std::vector<double> g(20, 0.0);
      for (auto [s, e] : cases[i].first) std::fill(p.begin() + s, p.begin() + e, 1.0);
      for (auto [s, e] : cases[i].second) std::fill(g.begin() + s, g.begin() + e, 1.0);
      sum_corr += oracle::spearman(p, g);
    }
    const auto report = evaluate_corpus(preds, golds);
    CHECK(report.mean_iou == doctest::Approx(sum_iou / 5).epsilon(1e-15));
    CHECK(report.mean_corr == doctest::Approx(sum_corr / 5).epsilon(1e-12));
    REQUIRE(report.mean_max_iou.has_value());
    for (const auto& m : report.per_instance) CHECK(*m.max_iou >= m.iou);
  }

  TEST_CASE("parallel and serial corpus evaluation agree") {
    std::mt19937_64 rng(5);
    std::vector<Instance> golds;
    std::vector<Prediction> preds;
    for (int i = 0; i < 200; ++i) {
      const std::size_t len = 1 + rng() % 60;
      const auto id = "x" + std::to_string(i);
      golds.push_back(gold(id, std::string(len, 'a'), oracle::random_spans(rng, len, 3)));
      preds.push_back(pred(id, oracle::random_spans(rng, len, 3), len));
    }
    const auto a = evaluate_corpus(preds, golds);
    const auto b = evaluate_corpus_serial(preds, golds);
    CHECK(to_json(a).dump() == to_json(b).dump());
  }

  TEST_CASE("report metadata records the conventions") {
    const std::vector<Instance> golds{gold("a", "abc", {})};
    const std::vector<Prediction> preds{pred("a", {}, 3)};
    const auto j = to_json(evaluate_corpus(preds, golds, {EmptyIouPolicy::kZero}));
    const auto& c = j.at("metadata").at("conventions");
    CHECK(c.at("iou_both_empty") == 0.0);
    CHECK(c.at("iou_one_empty") == 0.0);
    CHECK(c.at("spearman_both_constant") == 1.0);
    CHECK(c.at("spearman_one_constant") == 0.0);
  }
}

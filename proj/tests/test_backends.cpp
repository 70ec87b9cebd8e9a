#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "halspan/cache.hpp"
#include "halspan/error.hpp"
#include "halspan/io.hpp"
#include "halspan/retrieval.hpp"
#include "support/world.hpp"

using namespace halspan;
namespace ht = halspan::testing;

namespace {

LlmRequest hello() {
  LlmRequest r;
  r.system = "sys";
  r.user = "hello";
  return r;
}

// Counts calls and answers with the call number.
class CountingLlm final : public LlmBackend {
 public:
  std::string complete(const LlmRequest& r) override {
    const auto n = ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    return r.user + "#" + std::to_string(n);
  }
  BackendIdentity identity() const override { return {"counting", "v1"}; }
  std::atomic<int> calls{0};
};

}  // namespace

TEST_SUITE("backends") {
  TEST_CASE("mock llm replays recorded fixtures and reports missing ones") {
    const auto dir = ht::scratch_dir("mock_llm");
    MockLlmBackend::write_fixture(dir, {"mock", "mock"}, hello(), "world");
    MockLlmBackend mock(dir);
    CHECK(mock.complete(hello()) == "world");
    auto other = hello();
    other.params.temperature = 0.5;
    try {
      mock.complete(other);
      FAIL("expected FixtureMissing");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFixtureMissing);
    }
    CHECK(request_key({"mock", "mock"}, hello()) != request_key({"mock", "other"}, hello()));
  }

  TEST_CASE("fixture search") {
    const auto dir = ht::scratch_dir("mock_search");
    FixtureSearchBackend::write_fixture(dir, "q", {{"s1", "t1"}, {"s2", "t2"}});
    FixtureSearchBackend search(dir);
    const auto got = search.search("q");
    REQUIRE(got.size() == 2);
    CHECK(got[1] == Passage{"s2", "t2"});
    CHECK_THROWS_AS(search.search("unknown"), Error);
  }

  TEST_CASE("response cache hits, misses and corrupt entries") {
    const auto dir = ht::scratch_dir("cache_basic");
    CountingLlm inner;
    ResponseCache cache(dir / "c");
    CachedLlmBackend llm(inner, cache);
    CHECK(llm.complete(hello()) == "hello#1");
    CHECK(llm.complete(hello()) == "hello#1");
    CHECK(inner.calls == 1);
    CHECK(cache.stats().hits == 1);
    CHECK(cache.stats().misses == 1);
    CHECK(cache.entry_count() == 1);

    // Corrupt the entry: it is counted, refetched and rewritten.
    for (const auto& e : std::filesystem::directory_iterator(dir / "c")) {
      std::ofstream(e.path()) << "{ not json";
    }
    CHECK(llm.complete(hello()) == "hello#2");
    CHECK(cache.stats().corrupt == 1);
    CHECK(llm.complete(hello()) == "hello#2");

    cache.clear();
    CHECK(cache.entry_count() == 0);
    CHECK(cache.stats().hits == 0);
  }

  TEST_CASE("concurrent lookups of one key share a single computation") {
    const auto dir = ht::scratch_dir("cache_flight");
    CountingLlm inner;
    ResponseCache cache(dir);
    CachedLlmBackend llm(inner, cache);
    std::vector<std::thread> threads;
    std::vector<std::string> results(8);
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&, i] { results[i] = llm.complete(hello()); });
    }
    for (auto& t : threads) t.join();
    CHECK(inner.calls == 1);
    for (const auto& r : results) CHECK(r == "hello#1");
    CHECK(cache.stats().misses == 1);
    CHECK(cache.stats().hits == 7);
  }

  TEST_CASE("cached search round trips passages") {
    const auto dir = ht::scratch_dir("cache_search");
    FixtureSearchBackend::write_fixture(dir / "fx", "q", {{"s", "passage \"quoted\""}});
    FixtureSearchBackend inner(dir / "fx");
    ResponseCache cache(dir / "cache");
    CachedSearchBackend search(inner, cache);
    CHECK(search.search("q") == search.search("q"));
    CHECK(inner.calls() == 1);
    CHECK(search.search("q")[0].text == "passage \"quoted\"");
  }
}

TEST_SUITE("retrieval") {
  TEST_CASE("question search, truncation and translation") {
    const auto dir = ht::scratch_dir("retrieval_q");
    Instance inst;
    inst.id = "r";
    inst.lang = "de";
    inst.question = "Wo liegt Berlin?";
    inst.answer = "In Frankreich.";
    ht::ScriptedSearch search(dir / "s", [](const std::string& q) {
      return std::vector<Passage>{{"a", "first passage for " + q}, {"b", "second"}, {"c", "third"}};
    });
    ht::ScriptedLlm translator(dir / "l", [](const LlmRequest&) { return "  Where is Berlin?\n"; });
    RetrievalOptions opts;
    opts.max_passages = 2;
    opts.max_passage_chars = 5;
    auto bundle = context_from_question(inst, search, nullptr, opts);
    CHECK(bundle.passages.size() == 2);
    CHECK(bundle.passages[0].text == "first");
    CHECK(bundle.text() == "first\n\nsecon");

    opts.translate = true;
    CHECK_THROWS_AS(context_from_question(inst, search, nullptr, opts), Error);
    bundle = context_from_question(inst, search, &translator, opts);
    CHECK(bundle.queries == std::vector<std::string>{"Where is Berlin?"});
    CHECK(bundle.translated);
  }

  TEST_CASE("claims drive the queries and passages are deduplicated") {
    const auto dir = ht::scratch_dir("retrieval_claims");
    Instance inst;
    inst.id = "c";
    inst.lang = "en";
    inst.question = "Q?";
    inst.answer = "A is B. C is D.";
    ht::ScriptedSearch search(dir / "s", [](const std::string& q) {
      return std::vector<Passage>{{"shared", "common passage"}, {"own", "about " + q}};
    });
    ht::ScriptedLlm llm(dir / "l", [](const LlmRequest&) { return R"(["A is B.", "C is D."])"; });
    const auto bundle = context_from_claims(inst, search, llm, nullptr, {});
    CHECK(bundle.mode == ContextMode::kFromClaims);
    CHECK(bundle.queries.size() == 2);
    REQUIRE(bundle.passages.size() == 3);
    CHECK(bundle.passages[0].text == "common passage");
    CHECK(bundle.passages[2].text == "about C is D.");

    ht::ScriptedLlm none(dir / "l2", [](const LlmRequest&) { return "[]"; });
    CHECK(context_from_claims(inst, search, none, nullptr, {}).mode == ContextMode::kFromQuestion);

    ht::ScriptedSearch empty(dir / "s2", [](const std::string&) { return std::vector<Passage>{}; });
    try {
      context_from_question(inst, empty, nullptr, {});
      FAIL("expected EmptyResult");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEmptyResult);
    }
  }
}

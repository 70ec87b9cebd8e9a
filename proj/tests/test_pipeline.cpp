#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "halspan/config.hpp"
#include "halspan/error.hpp"
#include "halspan/io.hpp"
#include "halspan/pipeline.hpp"
#include "support/world.hpp"

using namespace halspan;
namespace ht = halspan::testing;

namespace {

const Prediction& by_id(const std::vector<Prediction>& preds, const std::string& id) {
  for (const auto& p : preds) {
    if (p.id == id) return p;
  }
  throw std::runtime_error("no prediction for " + id);
}

std::vector<nlohmann::json> read_lines(const std::filesystem::path& path) {
  std::vector<nlohmann::json> out;
  std::istringstream in(io::read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::vector<Prediction> predictions_of(const ht::World& world, const std::filesystem::path& path) {
  const auto lengths = answer_lengths(world.corpus);
  return read_predictions(path, &lengths);
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("paths resolve against the config file and pairs are validated") {
    const nlohmann::json j = {{"detector", "min_revision"},
                              {"context_mode", "none"},
                              {"llm", {{"type", "mock"}, {"dir", "fx"}}},
                              {"cache_dir", "c"}};
    const auto c = RunConfig::from_json(j, "/base");
    CHECK(c.mapper_kind() == MapperKind::kEditDistance);
    CHECK(c.llm.at("dir") == "/base/fx");
    CHECK(c.cache_dir == "/base/c");
    CHECK_NOTHROW(c.validate());

    auto bad = c;
    bad.mapper = MapperKind::kSubstring;
    CHECK_THROWS_AS(bad.validate(), Error);
    auto direct = c;
    direct.detector = DetectorKind::kDirect;
    direct.mapper = MapperKind::kEditDistance;
    CHECK_THROWS_AS(direct.validate(), Error);
    auto no_search = c;
    no_search.context_mode = ContextMode::kFromQuestion;
    CHECK_THROWS_AS(no_search.validate(), Error);

    try {
      RunConfig::from_json({{"detector", "oracle"}}, "/");
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfigError);
    }
  }

  TEST_CASE("snapshot redacts secrets and omits execution settings") {
    RunConfig c;
    c.context_mode = ContextMode::kNone;
    c.llm = {{"type", "openai"}, {"model", "m"}, {"api_key", "sk-secret"}};
    c.translation_llm = {{"type", "openai"}, {"model", "m"}, {"api_key", "${HALSPAN_TEST_KEY}"}};
    c.parallelism = 8;
    const auto snap = c.snapshot();
    CHECK(snap.at("llm").at("api_key") == "<redacted>");
    CHECK(snap.at("translation_llm").at("api_key") == "${HALSPAN_TEST_KEY}");
    CHECK_FALSE(snap.contains("parallelism"));
    CHECK(snap.dump().find("sk-secret") == std::string::npos);

    ::setenv("HALSPAN_TEST_KEY", "from-env", 1);
    CHECK(resolve_secret("${HALSPAN_TEST_KEY}") == "from-env");
    CHECK(resolve_secret("literal ${X}") == "literal ${X}");
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("direct detection over the fixture corpus") {
    const auto world = ht::make_world("pipeline_direct");
    const auto config = world.config(ContextMode::kFromQuestion, DetectorKind::kDirect);
    ht::record_pipeline(world, config, ht::Profile::kGolden);
    const auto summary = run_detect(config, world.corpus_path);
    CHECK(summary.instances == 12);
    CHECK(summary.failures == 1);

    const auto preds = predictions_of(world, summary.paths.predictions);
    REQUIRE(preds.size() == 12);
    for (const auto& inst : world.corpus) {
      const auto& p = by_id(preds, inst.id);
      if (inst.id == "it-broken") {
        CHECK(p.hard.empty());
        CHECK(p.soft.empty());
      } else {
        CHECK_MESSAGE(p.hard == *inst.gold_hard, inst.id);
      }
    }
    CHECK(by_id(preds, "en-capital").soft[0].prob() == 0.99);
    CHECK(by_id(preds, "fr-repair").soft[0].prob() == 0.9);

    const auto errors = read_lines(summary.paths.errors);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].at("id") == "it-broken");
    CHECK(errors[0].at("stage") == "detection");
    CHECK(errors[0].at("kind") == "LlmParseError");
    CHECK(errors[0].at("raw_outputs").size() == 2);

    const auto manifest = nlohmann::json::parse(io::read_file(summary.paths.manifest));
    CHECK(manifest.at("results").at("failures") == 1);
    CHECK(manifest.at("results").at("context_free_fallbacks") == 1);
    CHECK(manifest.at("backends").at("llm") == "mock:mock");
    CHECK(manifest.at("input").at("instances") == 12);
  }

  TEST_CASE("empty retrieval falls back to the context-free prompt") {
    const auto world = ht::make_world("pipeline_noctx");
    std::vector<LlmRequest> seen;
    auto model = ht::corpus_model(world.corpus, ht::Profile::kGolden);
    ht::ScriptedLlm llm(world.llm_dir(), [&](const LlmRequest& r) {
      seen.push_back(r);
      return model(r);
    });
    ht::ScriptedSearch search(world.search_dir(), ht::corpus_search(world.corpus));
    PipelineContext ctx;
    ctx.search = &search;
    ctx.llm = &llm;
    const auto& inst = world.corpus[1];
    REQUIRE(inst.id == "en-noctx");
    const auto outcome = run_instance(inst, ctx);
    CHECK(outcome.context_free);
    CHECK_FALSE(outcome.failure);
    CHECK(outcome.prediction.hard == *inst.gold_hard);
    REQUIRE(seen.size() == 1);
    CHECK(seen[0].system == ExtractionPrompt::defaults(false).instruction);
  }

  TEST_CASE("parallel runs write identical outputs") {
    const auto world = ht::make_world("pipeline_parallel");
    auto config = world.config(ContextMode::kFromClaims, DetectorKind::kDirect);
    ht::record_pipeline(world, config, ht::Profile::kGolden);
    std::string reference;
    for (std::size_t threads : {1, 4, 8}) {
      config.parallelism = threads;
      config.cache_dir = world.root / ("cache" + std::to_string(threads));
      const auto summary = run_detect(config, world.corpus_path);
      const auto bytes = io::read_file(summary.paths.predictions) +
                         io::read_file(summary.paths.errors) +
                         io::read_file(summary.paths.manifest);
      if (reference.empty()) reference = bytes;
      CHECK(bytes == reference);
    }
  }

  TEST_CASE("knowledge graph detection maps facts back to spans") {
    const auto world = ht::make_world("pipeline_kg");
    const auto config = world.config(ContextMode::kFromQuestion, DetectorKind::kKnowledgeGraph);
    ht::record_pipeline(world, config, ht::Profile::kGolden);
    const auto summary = run_detect(config, world.corpus_path);
    CHECK(summary.failures == 0);
    const auto preds = predictions_of(world, summary.paths.predictions);
    CHECK(by_id(preds, "en-capital").hard == *world.corpus[0].gold_hard);
    CHECK(by_id(preds, "es-empty").hard.empty());
  }

  TEST_CASE("minimal revision flags the edited words") {
    const auto world = ht::make_world("pipeline_minrev");
    const auto config = world.config(ContextMode::kNone, DetectorKind::kMinRevision);
    ht::record_pipeline(world, config, ht::Profile::kGolden);
    const auto summary = run_detect(config, world.corpus_path);
    CHECK(summary.failures == 1);
    const auto preds = predictions_of(world, summary.paths.predictions);
    CHECK(by_id(preds, "en-capital").hard == SpanSet::from_pairs({{25, 32}}, 32));
    CHECK(by_id(preds, "es-empty").hard.empty());
    const auto errors = read_lines(summary.paths.errors);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].at("kind") == "MissingTag");
  }

  TEST_CASE("language filter and missing fixtures") {
    const auto world = ht::make_world("pipeline_filter");
    auto config = world.config(ContextMode::kNone, DetectorKind::kDirect);
    config.languages = {"en"};
    ht::record_pipeline(world, config, ht::Profile::kGolden);
    CHECK(run_detect(config, world.corpus_path).instances == 3);

    // No fixtures were recorded for the other languages.
    config.languages = {"fi"};
    const auto summary = run_detect(config, world.corpus_path);
    CHECK(summary.failures == 1);
    CHECK(read_lines(summary.paths.errors)[0].at("kind") == "FixtureMissing");
  }
}

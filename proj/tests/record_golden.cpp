// Regenerates tests/data/golden: mock fixtures recorded from the scripted
// model, plus the prediction and error files a replay of them produces.
//
//   halspan_record_golden <golden-dir>

#include <iostream>

#include "halspan/io.hpp"
#include "halspan/pipeline.hpp"
#include "support/world.hpp"

using namespace halspan;
namespace ht = halspan::testing;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: halspan_record_golden <golden-dir>\n";
    return 2;
  }
  ht::World world;
  world.root = fs::absolute(argv[1]);
  world.corpus_path = ht::data_dir() / "corpus.jsonl";
  world.corpus = read_jsonl(world.corpus_path);
  fs::remove_all(world.llm_dir());
  fs::remove_all(world.search_dir());
  fs::create_directories(world.llm_dir());
  fs::create_directories(world.search_dir());

  auto config = world.config(ContextMode::kFromQuestion, DetectorKind::kDirect);
  ht::record_pipeline(world, config, ht::Profile::kGolden);

  const auto scratch = ht::scratch_dir("record_golden");
  config.cache_dir = scratch / "cache";
  config.output = scratch / "predictions.jsonl";
  const auto summary = run_detect(config, world.corpus_path);
  io::atomic_write(world.root / "predictions.jsonl", io::read_file(summary.paths.predictions));
  io::atomic_write(world.root / "errors.jsonl", io::read_file(summary.paths.errors));
  std::cout << "recorded " << summary.instances << " instances (" << summary.failures
            << " failing) into " << world.root.string() << "\n";
  return 0;
}

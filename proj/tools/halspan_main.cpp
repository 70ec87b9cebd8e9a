// halspan: hallucinated-span detection pipeline, scorer, system combination
// and prompt optimizer.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "halspan/cache.hpp"
#include "halspan/combination.hpp"
#include "halspan/config.hpp"
#include "halspan/dataset.hpp"
#include "halspan/error.hpp"
#include "halspan/io.hpp"
#include "halspan/metrics.hpp"
#include "halspan/optimizer.hpp"
#include "halspan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace halspan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailures = 1;
constexpr int kExitConfig = 2;

struct RunOverrides {
  std::string config;
  std::optional<std::string> output;
  std::optional<std::string> context_mode;
  std::optional<std::string> detector;
  std::optional<std::string> mapper;
  std::optional<bool> translate;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> cache_dir;
  std::optional<std::string> prompt;
  std::vector<std::string> languages;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App& cmd) {
    cmd.add_option("-c,--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd.add_option("--context-mode", context_mode, "none | from_question | from_claims");
    cmd.add_option("--detector", detector, "direct | kg | min_revision");
    cmd.add_option("--mapper", mapper, "substring | fact_to_span | edit_distance");
    cmd.add_flag("--translate,!--no-translate", translate, "Translate search queries to English");
    cmd.add_option("-j,--parallelism", parallelism, "Worker threads")->check(CLI::PositiveNumber);
    cmd.add_option("--cache-dir", cache_dir, "Response cache directory");
    cmd.add_option("--prompt", prompt, "Optimized prompt asset for the direct detector");
    cmd.add_option("--languages", languages, "Restrict to these language codes");
    cmd.add_option("--seed", seed, "Random seed");
  }

  RunConfig load() const {
    auto c = RunConfig::load(config);
    if (output) c.output = *output;
    if (context_mode) c.context_mode = parse_context_mode(*context_mode);
    if (detector) {
      c.detector = parse_detector_kind(*detector);
      if (!mapper) c.mapper.reset();
    }
    if (mapper) c.mapper = parse_mapper_kind(*mapper);
    if (translate) c.retrieval.translate = *translate;
    if (parallelism) c.parallelism = *parallelism;
    if (cache_dir) c.cache_dir = *cache_dir;
    if (prompt) c.prompt_file = fs::path(*prompt);
    if (!languages.empty()) c.languages = languages;
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

int cmd_detect(const RunOverrides& flags, const std::string& input) {
  const auto config = flags.load();
  const auto summary = run_detect(config, input);
  std::cout << "wrote " << summary.instances << " predictions to "
            << summary.paths.predictions.string() << "\n";
  if (summary.failures > 0) {
    std::cout << summary.failures << " instance(s) failed; see "
              << summary.paths.errors.string() << "\n";
    return kExitFailures;
  }
  return kExitOk;
}

MetricOptions metric_options(const std::string& empty_iou) {
  MetricOptions o;
  if (empty_iou == "one") {
    o.both_empty = EmptyIouPolicy::kOne;
  } else if (empty_iou == "zero") {
    o.both_empty = EmptyIouPolicy::kZero;
  } else {
    throw Error(ErrorKind::kConfigError, "--empty-iou must be 'one' or 'zero'");
  }
  return o;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gold_path,
                 const std::string& json_out, const std::string& empty_iou) {
  const auto options = metric_options(empty_iou);
  const auto golds = read_jsonl(gold_path);
  const auto lengths = answer_lengths(golds);
  const auto preds = read_predictions(pred_path, &lengths);
  const auto report = evaluate_corpus(preds, golds, options);
  std::cout << format_table(report);
  const auto json = to_json(report).dump(2) + "\n";
  if (json_out == "-") {
    std::cout << json;
  } else if (!json_out.empty()) {
    io::atomic_write(json_out, json);
  }
  return kExitOk;
}

struct CombineArgs {
  std::string config;
  std::vector<std::string> members;
  std::string input;
  std::string gold;
  std::string output;
  std::string report;
};

int cmd_combine(CombineArgs args) {
  std::vector<std::pair<std::string, fs::path>> members;
  if (!args.config.empty()) {
    const auto base = fs::path(args.config).parent_path();
    const auto resolve = [&](const std::string& p) {
      return fs::path(p).is_absolute() ? fs::path(p) : base / p;
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_file(args.config));
      for (const auto& m : j.at("members")) {
        members.emplace_back(m.at("tag").get<std::string>(), resolve(m.at("path").get<std::string>()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kConfigError, std::string("bad combine config: ") + e.what());
    }
    if (args.input.empty() && j.contains("input")) args.input = resolve(j["input"].get<std::string>());
    if (args.gold.empty() && j.contains("gold")) args.gold = resolve(j["gold"].get<std::string>());
    if (args.output.empty() && j.contains("output")) args.output = resolve(j["output"].get<std::string>());
    if (args.report.empty() && j.contains("report")) args.report = resolve(j["report"].get<std::string>());
  }
  for (const auto& m : args.members) {
    const auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == m.size()) {
      throw Error(ErrorKind::kConfigError, "--member expects tag=path, got '" + m + "'");
    }
    members.emplace_back(m.substr(0, eq), m.substr(eq + 1));
  }
  if (members.size() < 2) {
    throw Error(ErrorKind::kFewerThanTwoSystems, "combine needs at least two member files");
  }
  if (args.input.empty() && args.gold.empty()) {
    throw Error(ErrorKind::kConfigError, "combine needs --input (answers) or --gold");
  }
  if (args.output.empty()) throw Error(ErrorKind::kConfigError, "combine needs --out");

  const auto instances = read_jsonl(args.input.empty() ? args.gold : args.input);
  const auto lengths = answer_lengths(instances);
  std::vector<SystemOutput> systems;
  for (const auto& [tag, path] : members) {
    const auto preds = read_predictions(path, &lengths);
    systems.push_back(SystemOutput::from_predictions(tag, preds));
  }
  const auto combined = combine_corpus(systems, instances);
  write_predictions(combined, args.output);
  std::cout << "wrote " << combined.size() << " combined predictions to " << args.output << "\n";

  if (!args.gold.empty()) {
    const auto golds = read_jsonl(args.gold);
    const auto report = combination_report(systems, golds);
    std::cout << format_comparison_table(report);
    if (!args.report.empty()) io::atomic_write(args.report, to_json(report).dump(2) + "\n");
  }
  return kExitOk;
}

struct OptimizeArgs {
  std::string data;
  std::string objective = "iou";
  std::size_t budget = 8;
  std::string seed_prompt;
  std::string trace;
  std::string best_out = "best_prompt.json";
  std::size_t k = 4;
  std::size_t demo_subsets = 2;
  std::size_t demos_per_subset = 3;
  bool resume = false;
};

int cmd_optimize(const RunOverrides& flags, const OptimizeArgs& args) {
  const auto config = flags.load();
  auto instances = filter_languages(read_jsonl(args.data, config.fields), config.languages);
  BackendSet backends(config);
  const auto ctx = PipelineContext::from(config, backends);

  std::string seed_instruction =
      args.seed_prompt.empty()
          ? ExtractionPrompt::defaults(config.context_mode != ContextMode::kNone).instruction
          : io::read_file(args.seed_prompt);

  OptimizeOptions options;
  options.objective = parse_objective(args.objective);
  options.budget = args.budget;
  options.proposal = {args.k, args.demo_subsets, args.demos_per_subset, config.seed};
  options.parallelism = config.parallelism;
  options.trace_path = args.trace.empty() ? fs::path(args.best_out + ".trace.json") : fs::path(args.trace);
  options.resume = args.resume;

  const auto run = optimize(instances, ctx, seed_instruction, backends.llm(), options);
  const auto& best = run.best_candidate();
  io::atomic_write(args.best_out, to_json(best.merged()).dump(2) + "\n");
  std::cout << "best candidate " << best.id << ": " << to_string(run.objective) << " = "
            << run.trace[*run.best].score << " after " << run.trace.size()
            << " evaluation(s)\nwrote " << args.best_out << " and "
            << options.trace_path->string() << "\n";
  return kExitOk;
}

fs::path cache_dir_from(const std::string& dir, const std::string& config) {
  if (!dir.empty()) return dir;
  if (!config.empty()) return RunConfig::load(config).cache_dir;
  throw Error(ErrorKind::kConfigError, "cache commands need --dir or --config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hallucinated-span detection: detect, evaluate, combine, optimize"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunOverrides detect_flags;
  std::string detect_input;
  auto* detect = app.add_subcommand("detect", "Run retrieve -> detect -> map over a JSONL corpus");
  detect_flags.attach(*detect);
  detect->add_option("-i,--input", detect_input, "Input JSONL")->required()->check(CLI::ExistingFile);
  detect->add_option("-o,--output", detect_flags.output, "Prediction JSONL");

  std::string eval_pred, eval_gold, eval_json, eval_empty = "one";
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  evaluate->add_option("-p,--pred", eval_pred, "Prediction JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("-g,--gold", eval_gold, "Gold JSONL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--json", eval_json, "Write the report JSON here ('-' for stdout)");
  evaluate->add_option("--empty-iou", eval_empty, "IoU when both sets are empty: one | zero");

  CombineArgs combine_args;
  auto* combine = app.add_subcommand("combine", "Combine member systems by agreement");
  combine->add_option("-c,--config", combine_args.config, "Combine config (JSON)")->check(CLI::ExistingFile);
  combine->add_option("-m,--member", combine_args.members, "Member as tag=predictions.jsonl");
  combine->add_option("-i,--input", combine_args.input, "Instances JSONL (answer texts)");
  combine->add_option("-g,--gold", combine_args.gold, "Gold JSONL for the comparison table");
  combine->add_option("-o,--out", combine_args.output, "Combined prediction JSONL");
  combine->add_option("--report", combine_args.report, "Comparison report JSON");

  RunOverrides optimize_flags;
  OptimizeArgs optimize_args;
  auto* opt = app.add_subcommand("optimize", "Search detection prompts with 2-fold CV");
  optimize_flags.attach(*opt);
  opt->add_option("-d,--data", optimize_args.data, "Labelled JSONL")->required()->check(CLI::ExistingFile);
  opt->add_option("--objective", optimize_args.objective, "iou | corr | max_iou | iou+corr");
  opt->add_option("--budget", optimize_args.budget, "Max candidate evaluations")->check(CLI::PositiveNumber);
  opt->add_option("--seed-prompt", optimize_args.seed_prompt, "Seed instruction text file")->check(CLI::ExistingFile);
  opt->add_option("--trace", optimize_args.trace, "Trace JSON (default <best-out>.trace.json)");
  opt->add_option("--best-out", optimize_args.best_out, "Best prompt asset");
  opt->add_option("--k", optimize_args.k, "Instruction rewrites")->check(CLI::PositiveNumber);
  opt->add_option("--demo-subsets", optimize_args.demo_subsets, "Demo subsets per rewrite");
  opt->add_option("--demos-per-subset", optimize_args.demos_per_subset, "Demos per subset");
  opt->add_flag("--resume", optimize_args.resume, "Continue from an existing trace");

  std::string cache_dir, cache_config;
  auto* cache = app.add_subcommand("cache", "Inspect or clear the response cache");
  cache->require_subcommand(1);
  cache->add_option("--dir", cache_dir, "Cache directory");
  cache->add_option("-c,--config", cache_config, "Run config naming the cache directory");
  auto* cache_stats = cache->add_subcommand("stats", "Entry count");
  auto* cache_clear = cache->add_subcommand("clear", "Remove every entry");
  cache_stats->fallthrough();
  cache_clear->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (detect->parsed()) return cmd_detect(detect_flags, detect_input);
    if (evaluate->parsed()) return cmd_evaluate(eval_pred, eval_gold, eval_json, eval_empty);
    if (combine->parsed()) return cmd_combine(combine_args);
    if (opt->parsed()) return cmd_optimize(optimize_flags, optimize_args);
    if (cache->parsed()) {
      ResponseCache store(cache_dir_from(cache_dir, cache_config));
      if (cache_stats->parsed()) {
        std::cout << "cache " << store.dir().string() << ": " << store.entry_count() << " entries\n";
      } else if (cache_clear->parsed()) {
        const auto n = store.entry_count();
        store.clear();
        std::cout << "removed " << n << " entries from " << store.dir().string() << "\n";
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfigError ? kExitConfig : kExitFailures;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailures;
  }
  return kExitOk;
}

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hatescore/pipeline.hpp"

namespace {

void print_error(const std::string& kind, const std::string& message) {
  std::string flat = message;
  for (auto& c : flat)
    if (c == '\n' || c == '\t') c = ' ';
  std::cerr << "ERROR\t" << kind << "\t" << flat << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hatescore"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);

  CLI::App app{"Reconstruct continuous hate-speech scores from LLM attribute ratings."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "hatescore " + std::string(hatescore::kVersion));

  std::string config_file, corpus, schema, condition, backend, world, mock_policy, endpoint, model, api_style, cache,
      templates, granularity, variant, out, predictions, scaling;
  double lambda = 0;
  int folds = 0, top_logprobs = 0;
  std::uint64_t seed = 0;
  std::size_t parallelism = 0;
  bool lambda_search = false, macro_f1 = false, verbose = false, quiet = false;

  app.add_option("--config", config_file, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  auto* o_corpus = app.add_option("--corpus", corpus, "Corpus file (delimiter-separated)");
  auto* o_schema = app.add_option("--schema", schema, "JSON column mapping for the corpus");
  auto* o_condition = app.add_option("--condition", condition, "vanilla | persona");
  auto* o_backend = app.add_option("--backend", backend, "live | mock");
  auto* o_world = app.add_option("--world", world, "World config for the mock backend (default: world.json beside the corpus)");
  auto* o_policy = app.add_option("--mock-policy", mock_policy, "Mock baseline answers: truth | always_hate | noisy");
  auto* o_endpoint = app.add_option("--endpoint", endpoint, "OpenAI-compatible base URL, e.g. http://host:8000/v1");
  auto* o_model = app.add_option("--model", model, "Model name sent to the endpoint");
  auto* o_style = app.add_option("--api-style", api_style, "completions | chat");
  auto* o_top = app.add_option("--top-logprobs", top_logprobs, "Number of top logprobs to request");
  auto* o_cache = app.add_option("--cache", cache, "Response cache file (default: <out>/cache.jsonl)");
  auto* o_templates = app.add_option("--templates", templates, "Directory of prompt template overrides");
  auto* o_lambda = app.add_option("--lambda", lambda, "Ridge penalty");
  auto* o_search = app.add_flag("--lambda-search", lambda_search, "Choose lambda per fold by inner CV");
  auto* o_scaling = app.add_option("--scaling", scaling, "standardize | center_only");
  auto* o_folds = app.add_option("--folds", folds, "Number of CV folds");
  auto* o_seed = app.add_option("--seed", seed, "Seed for fold assignment and synthetic worlds");
  auto* o_gran = app.add_option("--granularity", granularity, "per_annotator | comment_mean");
  auto* o_variant = app.add_option("--variant", variant, "Baseline variant or 'all'");
  auto* o_macro = app.add_flag("--macro-f1", macro_f1, "Report macro F1 instead of positive-class F1");
  auto* o_out = app.add_option("--out", out, "Output directory");
  auto* o_preds = app.add_option("--predictions", predictions, "Predictions file (default: <out>/predictions.<condition>.jsonl)");
  auto* o_par = app.add_option("--parallelism", parallelism, "Concurrent inference requests");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  app.add_subcommand("synth", "Generate a synthetic corpus and world config");
  app.add_subcommand("annotate", "Rate every comment on every attribute and store predictions");
  app.add_subcommand("analyze", "Spearman alignment between predictions and human ratings");
  app.add_subcommand("reconstruct", "Cross-validated ridge reconstruction of the hate score");
  app.add_subcommand("ablate", "Compare the four reconstruction formulas");
  app.add_subcommand("baseline", "Direct binary hate-speech prompting baselines");
  app.add_subcommand("report", "Render every stage output in the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    hatescore::RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    auto set = [](CLI::Option* o, auto& dst, const auto& v) {
      if (o->count() > 0) dst = v;
    };
    set(o_corpus, cfg.corpus, corpus);
    set(o_schema, cfg.schema, schema);
    set(o_condition, cfg.condition, condition);
    set(o_backend, cfg.backend, backend);
    set(o_world, cfg.world, world);
    set(o_policy, cfg.mock_policy, mock_policy);
    set(o_endpoint, cfg.endpoint, endpoint);
    set(o_model, cfg.model, model);
    set(o_style, cfg.api_style, api_style);
    set(o_top, cfg.top_logprobs, top_logprobs);
    set(o_cache, cfg.cache, cache);
    set(o_templates, cfg.templates, templates);
    set(o_lambda, cfg.lambda, lambda);
    set(o_search, cfg.lambda_search, lambda_search);
    set(o_scaling, cfg.scaling, scaling);
    set(o_folds, cfg.folds, folds);
    set(o_seed, cfg.seed, seed);
    set(o_gran, cfg.granularity, granularity);
    set(o_variant, cfg.variant, variant);
    set(o_macro, cfg.macro_f1, macro_f1);
    set(o_out, cfg.out, out);
    set(o_preds, cfg.predictions, predictions);
    set(o_par, cfg.parallelism, parallelism);

    const std::string cmd = app.get_subcommands().front()->get_name();
    hatescore::CommandResult result;
    hatescore::RunStats stats;
    if (cmd == "synth") result = hatescore::cmd_synth(cfg);
    else if (cmd == "annotate") result = hatescore::cmd_annotate(cfg, &stats);
    else if (cmd == "analyze") result = hatescore::cmd_analyze(cfg);
    else if (cmd == "reconstruct") result = hatescore::cmd_reconstruct(cfg);
    else if (cmd == "ablate") result = hatescore::cmd_ablate(cfg);
    else if (cmd == "baseline") result = hatescore::cmd_baseline(cfg, &stats);
    else result = hatescore::cmd_report(cfg);
    std::cout << result.text << std::flush;
    return 0;
  } catch (const hatescore::Error& e) {
    print_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
  }
  return 1;
}

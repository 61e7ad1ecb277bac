#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hatescore/alignment.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/error.hpp"
#include "hatescore/evaluation.hpp"
#include "hatescore/hash.hpp"
#include "hatescore/inference.hpp"
#include "hatescore/mock_backend.hpp"
#include "hatescore/openai_backend.hpp"
#include "hatescore/prompting.hpp"
#include "hatescore/reconstruction.hpp"
#include "hatescore/scoring.hpp"
#include "hatescore/synth.hpp"

namespace hatescore {

inline constexpr std::string_view kVersion = "1.0.0";

namespace fs = std::filesystem;

/// Fully resolved settings for one command. Built from defaults, then a JSON
/// config file, then command-line flags.
struct RunConfig {
  fs::path corpus;
  fs::path schema;  // empty: default column names
  std::string condition = "vanilla";
  std::string backend = "live";  // live | mock
  fs::path world;                // mock backend; defaults to world.json beside the corpus
  std::string mock_policy = "truth";
  std::string endpoint = "http://localhost:8000/v1";
  std::string model = "meta-llama/Llama-3.1-70B-Instruct";
  std::string api_style = "completions";
  double temperature = 0.0;
  std::int64_t decoding_seed = 42;
  int top_logprobs = 20;
  fs::path cache;  // empty: <out>/cache.jsonl
  fs::path templates;
  double lambda = 1.0;
  bool lambda_search = false;
  std::string scaling = "standardize";
  int folds = 5;
  std::uint64_t seed = 42;
  std::string granularity;  // empty: condition default
  std::string variant = "all";
  bool macro_f1 = false;  // report macro instead of positive-class F1
  fs::path out = "out";
  fs::path predictions;  // empty: <out>/predictions.<condition>.jsonl
  std::size_t parallelism = 4;
  int max_attempts = 3;
  int retry_base_ms = 500;
  nlohmann::json baseline = nlohmann::json::object();  // examples / definition / tokens
  nlohmann::json world_overrides = nlohmann::json::object();  // synth parameters

  /// Overlays keys present in `j`.
  void apply_json(const nlohmann::json& j) {
    try {
      auto path = [&](const char* k, fs::path& dst) {
        if (j.contains(k)) dst = j.at(k).get<std::string>();
      };
      auto take = [&](const char* k, auto& dst) {
        if (j.contains(k)) dst = j.at(k).get<std::decay_t<decltype(dst)>>();
      };
      path("corpus", corpus);
      path("schema", schema);
      take("condition", condition);
      take("backend", backend);
      path("world", world);
      take("mock_policy", mock_policy);
      take("endpoint", endpoint);
      take("model", model);
      take("api_style", api_style);
      take("temperature", temperature);
      take("decoding_seed", decoding_seed);
      take("top_logprobs", top_logprobs);
      path("cache", cache);
      path("templates", templates);
      take("lambda", lambda);
      take("lambda_search", lambda_search);
      take("scaling", scaling);
      take("folds", folds);
      take("seed", seed);
      take("granularity", granularity);
      take("variant", variant);
      take("macro_f1", macro_f1);
      path("out", out);
      path("predictions", predictions);
      take("parallelism", parallelism);
      take("max_attempts", max_attempts);
      take("retry_base_ms", retry_base_ms);
      if (j.contains("baseline")) baseline = j.at("baseline");
      if (j.contains("synth")) world_overrides = j.at("synth");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad config value: ") + e.what());
    }
  }

  void load_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    try {
      apply_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
  }

  PromptCondition prompt_condition() const { return PromptCondition::parse(condition); }

  Granularity resolved_granularity() const {
    return granularity.empty() ? default_granularity(prompt_condition()) : granularity_from_string(granularity);
  }

  fs::path cache_path() const { return cache.empty() ? out / "cache.jsonl" : cache; }

  fs::path predictions_path() const {
    return predictions.empty() ? out / ("predictions." + condition + ".jsonl") : predictions;
  }

  fs::path world_path() const { return world.empty() ? corpus.parent_path() / "world.json" : world; }

  DecodingConfig decoding() const {
    DecodingConfig d;
    d.temperature = temperature;
    d.seed = decoding_seed;
    d.top_logprobs = top_logprobs;
    d.model_name = backend == "mock" ? "mock" : model;
    d.endpoint_url = backend == "mock" ? "" : endpoint;
    d.api_style = api_style_from_string(api_style);
    d.validate();
    return d;
  }

  CvOptions cv_options() const {
    CvOptions o;
    o.k = folds;
    o.seed = seed;
    o.ridge.lambda = lambda;
    if (scaling == "standardize") o.ridge.scaling = Scaling::standardize;
    else if (scaling == "center_only") o.ridge.scaling = Scaling::center_only;
    else throw ConfigError("unknown scaling '" + scaling + "'");
    o.lambda_search = lambda_search;
    return o;
  }

  BaselineTexts baseline_texts() const {
    BaselineTexts t;
    try {
      if (baseline.contains("examples"))
        for (const auto& e : baseline.at("examples"))
          t.examples.push_back({e.at("text").get<std::string>(), e.at("hate").get<bool>()});
      if (baseline.contains("definition")) t.definition = baseline.at("definition").get<std::string>();
      if (baseline.contains("hate_token")) t.hate_token = baseline.at("hate_token").get<std::string>();
      if (baseline.contains("non_hate_token")) t.non_hate_token = baseline.at("non_hate_token").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad baseline config: ") + e.what());
    }
    return t;
  }

  /// The resolved configuration, minus anything secret.
  nlohmann::json to_json() const {
    return {{"corpus", corpus.generic_string()},
            {"schema", schema.generic_string()},
            {"condition", condition},
            {"backend", backend},
            {"world", backend == "mock" ? world_path().generic_string() : ""},
            {"mock_policy", mock_policy},
            {"endpoint", endpoint},
            {"model", model},
            {"api_style", api_style},
            {"temperature", temperature},
            {"decoding_seed", decoding_seed},
            {"top_logprobs", top_logprobs},
            {"cache", cache_path().generic_string()},
            {"templates", templates.generic_string()},
            {"lambda", lambda},
            {"lambda_search", lambda_search},
            {"scaling", scaling},
            {"folds", folds},
            {"seed", seed},
            {"granularity", granularity},
            {"variant", variant},
            {"macro_f1", macro_f1},
            {"out", out.generic_string()},
            {"predictions", predictions_path().generic_string()},
            {"parallelism", parallelism},
            {"max_attempts", max_attempts},
            {"retry_base_ms", retry_base_ms},
            {"baseline", baseline},
            {"synth", world_overrides}};
  }
};

/// What a command produced: human-readable text for stdout and a summary
/// that is also written to the manifest.
struct CommandResult {
  std::string text;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<fs::path> outputs;
};

/// Counters that vary between otherwise identical runs (cache hits, call
/// counts). Kept out of every output file so reruns stay byte-identical.
struct RunStats {
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t coverage_warnings = 0;
};

namespace detail {

inline std::string file_sha256(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("failed writing " + p.string());
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(p.string() + " is not valid JSON: " + e.what());
  }
}

inline void write_manifest(const RunConfig& cfg, const std::string& command, const std::string& tag,
                           CommandResult& result, const std::vector<fs::path>& inputs) {
  nlohmann::json m;
  m["tool"] = "hatescore";
  m["version"] = std::string(kVersion);
  m["command"] = command;
  m["config"] = cfg.to_json();
  m["inputs"] = nlohmann::json::object();
  for (const auto& p : inputs) m["inputs"][p.generic_string()] = file_sha256(p);
  m["summary"] = result.summary;
  m["outputs"] = nlohmann::json::array();
  for (const auto& p : result.outputs) m["outputs"].push_back(p.filename().generic_string());
  const auto path = cfg.out / ("manifest." + command + (tag.empty() ? "" : "." + tag) + ".json");
  write_json(path, m);
  result.outputs.push_back(path);
}

inline Corpus load_run_corpus(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw ConfigError("--corpus is required");
  const CorpusSchema schema = cfg.schema.empty() ? CorpusSchema{} : CorpusSchema::from_file(cfg.schema);
  auto corpus = load_corpus(cfg.corpus, schema);
  if (corpus.report().rejected > 0)
    spdlog::warn("corpus: {} of {} rows rejected", corpus.report().rejected, corpus.report().rows_read);
  return corpus;
}

inline PromptRenderer make_renderer(const RunConfig& cfg) {
  return PromptRenderer(cfg.templates.empty() ? PromptTemplates{} : PromptTemplates::load_directory(cfg.templates));
}

/// Owns whatever backend the config selects.
struct BackendHandle {
  std::optional<SyntheticWorld> world;
  std::unique_ptr<Backend> backend;
};

inline BackendHandle make_backend(const RunConfig& cfg) {
  BackendHandle h;
  if (cfg.backend == "mock") {
    h.world = generate_world(load_world_config(cfg.world_path()));
    h.backend = std::make_unique<MockBackend>(*h.world, baseline_policy_from_string(cfg.mock_policy));
  } else if (cfg.backend == "live") {
    h.backend = std::make_unique<OpenAIBackend>(cfg.endpoint);
  } else {
    throw ConfigError("unknown backend '" + cfg.backend + "' (expected live or mock)");
  }
  return h;
}

inline std::string condition_tag(const RunConfig& cfg) {
  std::string tag = cfg.condition;
  for (auto& ch : tag)
    if (ch == ':') ch = '_';
  return tag;
}

}  // namespace detail

inline CommandResult cmd_synth(const RunConfig& cfg) {
  WorldConfig wc;
  wc.seed = cfg.seed;
  nlohmann::json overlay = wc.to_json();
  for (const auto& [k, v] : cfg.world_overrides.items()) overlay[k] = v;
  wc = WorldConfig::from_json(overlay);
  auto world = generate_world(wc);
  write_world(world, cfg.out);
  CommandResult r;
  r.outputs = {cfg.out / "corpus.csv", cfg.out / "world.json"};
  r.summary = {{"comments", world.comments.size()},
               {"annotators", world.annotators.size()},
               {"rows", world.comments.size() * wc.annotators_per_comment}};
  r.text = "wrote " + std::to_string(world.comments.size()) + " comments to " + (cfg.out / "corpus.csv").string() + "\n";
  detail::write_manifest(cfg, "synth", "", r, {});
  return r;
}

inline CommandResult cmd_annotate(const RunConfig& cfg, RunStats* stats = nullptr) {
  const auto condition = cfg.prompt_condition();
  if (condition.kind() == PromptCondition::Kind::baseline)
    throw ConfigError("annotate takes --condition vanilla or persona; use the baseline command for binary prompts");
  const auto corpus = detail::load_run_corpus(cfg);
  const auto renderer = detail::make_renderer(cfg);
  auto handle = detail::make_backend(cfg);
  ResponseCache cache(cfg.cache_path());
  InferenceClient client(*handle.backend, cfg.decoding(), &cache,
                         {cfg.max_attempts, std::chrono::milliseconds(cfg.retry_base_ms)});

  std::vector<AnnotationTask> tasks;
  std::size_t skipped_profiles = 0;
  for (const auto& c : corpus.comments()) {
    if (condition.kind() == PromptCondition::Kind::vanilla) {
      for (auto a : all_attributes()) tasks.push_back({&c, a, condition, nullptr});
      continue;
    }
    for (const auto& r : c.ratings) {
      const auto* profile = corpus.find_annotator(r.annotator_id);
      if (!profile || !profile->complete()) {
        ++skipped_profiles;
        continue;
      }
      for (auto a : all_attributes()) tasks.push_back({&c, a, condition, profile});
    }
  }
  BatchOptions batch;
  batch.parallelism = cfg.parallelism;
  batch.progress_every = 500;
  batch.on_progress = [](std::size_t done, std::size_t total) { spdlog::info("annotate: {}/{}", done, total); };
  auto results = batch_annotate(client, renderer, tasks, batch);

  std::vector<AttributePrediction> preds;
  preds.reserve(tasks.size());
  std::map<std::string, std::size_t> failure_kinds;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    std::optional<std::string> annotator;
    if (t.profile) annotator = t.profile->annotator_id;
    if (const auto* resp = std::get_if<TokenResponse>(&results[i])) {
      preds.push_back(predict_attribute(*resp, *t.attribute, t.comment->comment_id, annotator, condition));
    } else {
      const auto& f = std::get<TaskFailure>(results[i]);
      ++failure_kinds[f.kind];
      spdlog::warn("annotate: comment {} attribute {}: {}", t.comment->comment_id, to_string(*t.attribute), f.message);
      AttributePrediction p;
      p.comment_id = t.comment->comment_id;
      p.annotator_id = annotator;
      p.attribute = *t.attribute;
      p.condition = condition;
      p.status = PredictionStatus::missing;
      preds.push_back(std::move(p));
    }
  }
  const auto out_path = cfg.predictions_path();
  write_predictions(out_path, preds);

  if (stats) *stats = {client.backend_calls(), client.cache_hits(), client.coverage_warnings()};
  spdlog::info("annotate: {} backend calls, {} cache hits", client.backend_calls(), client.cache_hits());

  const auto counts = count_statuses(preds);
  CommandResult r;
  r.outputs = {out_path};
  r.summary = {{"tasks", tasks.size()},
               {"predictions", preds.size()},
               {"status", counts.to_json()},
               {"skipped_incomplete_profiles", skipped_profiles},
               {"failures", failure_kinds}};
  std::ostringstream os;
  os << "condition: " << condition.str() << "\n"
     << "predictions: " << preds.size() << " (ok " << counts.ok << ", fallback " << counts.fallback << ", missing "
     << counts.missing << ")\n";
  if (skipped_profiles) os << "skipped (incomplete annotator profile): " << skipped_profiles << "\n";
  os << "wrote " << out_path.string() << "\n";
  r.text = os.str();
  detail::write_manifest(cfg, "annotate", detail::condition_tag(cfg), r, {cfg.corpus});
  return r;
}

inline CommandResult cmd_analyze(const RunConfig& cfg) {
  const auto condition = cfg.prompt_condition();
  const auto corpus = detail::load_run_corpus(cfg);
  const auto preds = read_predictions(cfg.predictions_path());
  const auto granularity = cfg.resolved_granularity();
  const auto stats = alignment_table(preds, corpus, condition, granularity);
  const auto tag = detail::condition_tag(cfg);

  std::ostringstream csv;
  confidence_correlation_export(csv, stats);
  const auto csv_path = cfg.out / ("alignment." + tag + ".csv");
  detail::write_text(csv_path, csv.str());

  std::ostringstream os;
  os << render_alignment_table({{cfg.model + " " + condition.str(), stats}}) << "\n";
  os << "attribute       rho x100   pearson x100   mean conf   pairs\n";
  for (const auto& s : stats) {
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %9s %14s %11.4f %7zu%s\n", to_string(s.attribute).c_str(),
                  s.rho ? format_x100(*s.rho).c_str() : "skipped", s.pearson ? format_x100(*s.pearson).c_str() : "--",
                  s.mean_confidence, s.n_pairs, s.skipped() ? ("  (" + s.skip_reason + ")").c_str() : "");
    os << line;
  }
  const auto txt_path = cfg.out / ("alignment." + tag + ".txt");
  detail::write_text(txt_path, os.str());
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : stats) js.push_back(to_json(s));
  const auto json_path = cfg.out / ("alignment." + tag + ".json");
  detail::write_json(json_path, {{"label", cfg.model + " " + condition.str()}, {"granularity", to_string(granularity)}, {"stats", js}});

  CommandResult r;
  r.text = os.str();
  r.outputs = {csv_path, txt_path, json_path};
  r.summary = {{"granularity", std::string(to_string(granularity))}, {"stats", js}};
  detail::write_manifest(cfg, "analyze", tag, r, {cfg.corpus, cfg.predictions_path()});
  return r;
}

inline CommandResult cmd_reconstruct(const RunConfig& cfg) {
  const auto condition = cfg.prompt_condition();
  const auto corpus = detail::load_run_corpus(cfg);
  const auto preds = read_predictions(cfg.predictions_path());
  const auto data = build_dataset(preds, corpus, condition);
  const auto options = cfg.cv_options();
  const auto cv = kfold_cv(data, options);
  const auto full = fit_full(data, options);
  const auto tag = detail::condition_tag(cfg);

  std::ostringstream weights;
  export_weights(weights, full);
  std::ostringstream oof;
  write_oof(oof, cv.oof);
  const auto weights_path = cfg.out / ("weights." + tag + ".csv");
  const auto oof_path = cfg.out / ("oof." + tag + ".csv");
  const auto cv_path = cfg.out / ("reconstruction." + tag + ".json");
  detail::write_text(weights_path, weights.str());
  detail::write_text(oof_path, oof.str());
  auto cvj = to_json(cv);
  cvj["label"] = "Ridge (" + condition.str() + ")";
  cvj["comments"] = data.comments.size();
  cvj["comments_without_predictions"] = data.corpus_comments_without_predictions;
  cvj["status"] = data.status_counts.to_json();
  detail::write_json(cv_path, cvj);

  Report rep;
  rep.reconstruction.push_back({cvj["label"].get<std::string>(), metrics_report(cv, "manifest.reconstruct." + tag + ".json")});
  std::ostringstream os;
  os << render_report(rep, {cfg.macro_f1});
  os << "\nfolds:";
  for (const auto& f : cv.folds) os << " " << format_x100(f.r2);
  os << "\nimputed cells: " << cv.imputed_cells << "\n\nweights (standardized features):\n";
  for (auto a : all_attributes())
    os << "  " << to_string(a) << ": " << format_exact(full.weights[static_cast<Eigen::Index>(index_of(a))]) << "\n";

  CommandResult r;
  r.text = os.str();
  r.outputs = {weights_path, oof_path, cv_path};
  r.summary = {{"mean_r2", cv.mean_r2}, {"std_r2", cv.std_r2}, {"imputed_cells", cv.imputed_cells},
               {"comments", data.comments.size()}};
  detail::write_manifest(cfg, "reconstruct", tag, r, {cfg.corpus, cfg.predictions_path()});
  return r;
}

inline CommandResult cmd_ablate(const RunConfig& cfg) {
  const auto condition = cfg.prompt_condition();
  const auto corpus = detail::load_run_corpus(cfg);
  const auto preds = read_predictions(cfg.predictions_path());
  const auto data = build_dataset(preds, corpus, condition);
  const auto rows = run_ablation(data, cfg.cv_options());
  const auto tag = detail::condition_tag(cfg);

  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : rows) j.push_back(to_json(a));
  const auto path = cfg.out / ("ablation." + tag + ".json");
  detail::write_json(path, j);
  Report rep;
  rep.ablation = rows;
  CommandResult r;
  r.text = render_report(rep, {cfg.macro_f1});
  r.outputs = {path};
  r.summary = {{"variants", j}};
  detail::write_manifest(cfg, "ablate", tag, r, {cfg.corpus, cfg.predictions_path()});
  return r;
}

inline CommandResult cmd_baseline(const RunConfig& cfg, RunStats* stats = nullptr) {
  const auto corpus = detail::load_run_corpus(cfg);
  const auto renderer = detail::make_renderer(cfg);
  const auto texts = cfg.baseline_texts();
  auto handle = detail::make_backend(cfg);
  ResponseCache cache(cfg.cache_path());
  InferenceClient client(*handle.backend, cfg.decoding(), &cache,
                         {cfg.max_attempts, std::chrono::milliseconds(cfg.retry_base_ms)});
  std::vector<BaselineVariant> variants;
  if (cfg.variant == "all") {
    for (auto v : kBaselineVariants) {
      if (v == BaselineVariant::few_shot && texts.examples.empty()) {
        spdlog::warn("baseline: skipping few_shot, no examples configured");
        continue;
      }
      variants.push_back(v);
    }
  } else {
    variants.push_back(baseline_variant_from_string(cfg.variant));
  }
  BatchOptions batch;
  batch.parallelism = cfg.parallelism;
  batch.progress_every = 0;

  Report rep;
  CommandResult r;
  nlohmann::json results = nlohmann::json::array();
  for (auto v : variants) {
    auto res = baseline_eval(v, corpus, client, renderer, texts, batch);
    rep.baselines.push_back(res);
    const auto path = cfg.out / ("baseline." + std::string(to_string(v)) + ".json");
    nlohmann::json j = to_json(Report{{}, {}, {}, {res}})["baselines"][0];
    detail::write_json(path, j);
    r.outputs.push_back(path);
    results.push_back(j);
  }
  if (stats) *stats = {client.backend_calls(), client.cache_hits(), client.coverage_warnings()};
  r.text = render_report(rep, {cfg.macro_f1});
  r.summary = {{"baselines", results}};
  detail::write_manifest(cfg, "baseline", cfg.variant, r, {cfg.corpus});
  return r;
}

/// Collects whatever stage outputs exist in the output directory.
inline CommandResult cmd_report(const RunConfig& cfg) {
  Report rep;
  std::vector<fs::path> inputs;
  if (!fs::is_directory(cfg.out)) throw InputError("output directory " + cfg.out.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.out))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const auto name = p.filename().string();
    if (name.starts_with("alignment.") && name.ends_with(".json")) {
      auto j = detail::read_json(p);
      AlignmentRow row;
      row.label = j.at("label").get<std::string>();
      for (const auto& s : j.at("stats")) row.stats.push_back(alignment_stats_from_json(s));
      rep.alignment.push_back(std::move(row));
    } else if (name.starts_with("reconstruction.") && name.ends_with(".json")) {
      auto j = detail::read_json(p);
      MetricsReport m;
      m.r2_mean = j.at("mean_r2").get<double>();
      m.r2_std = j.at("std_r2").get<double>();
      m.metrics = ClassificationMetrics::from_json(j.at("classification"));
      const auto tag = name.substr(15, name.size() - 15 - 5);
      m.manifest = "manifest.reconstruct." + tag + ".json";
      rep.reconstruction.push_back({j.at("label").get<std::string>(), m});
    } else if (name.starts_with("ablation.") && name.ends_with(".json")) {
      for (const auto& a : detail::read_json(p)) rep.ablation.push_back(ablation_row_from_json(a));
    } else if (name.starts_with("baseline.") && name.ends_with(".json")) {
      nlohmann::json wrapper{{"baselines", nlohmann::json::array({detail::read_json(p)})}};
      rep.baselines.push_back(report_from_json(wrapper).baselines.at(0));
    } else {
      continue;
    }
    inputs.push_back(p);
  }
  if (rep.empty()) throw InputError("no stage outputs found in " + cfg.out.string());
  CommandResult r;
  r.text = render_report(rep, {cfg.macro_f1});
  const auto txt = cfg.out / "report.txt";
  const auto js = cfg.out / "report.json";
  detail::write_text(txt, r.text);
  detail::write_json(js, to_json(rep));
  r.outputs = {txt, js};
  r.summary = {{"sections", rep.section_count()}};
  detail::write_manifest(cfg, "report", "", r, inputs);
  return r;
}

}  // namespace hatescore

#pragma once

#include <algorithm>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatescore/alignment.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"
#include "hatescore/inference.hpp"
#include "hatescore/metrics.hpp"
#include "hatescore/prompting.hpp"
#include "hatescore/reconstruction.hpp"
#include "hatescore/stats.hpp"

namespace hatescore {

struct MetricsReport {
  std::optional<double> r2_mean;  // absent for direct-prompting baselines
  std::optional<double> r2_std;
  ClassificationMetrics metrics;
  std::string manifest;  // path of the run manifest that produced it

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline MetricsReport metrics_report(const CvResult& cv, std::string manifest = {}) {
  return {cv.mean_r2, cv.std_r2, cv.classification, std::move(manifest)};
}

/// Reads a binary answer: the top token if it is one of the two label
/// tokens, else whichever label token carries more mass. Unset if neither
/// appears.
inline std::optional<bool> parse_binary(const TokenResponse& r, const BaselineTexts& texts) {
  const auto top = trim(r.top_token);
  if (top == texts.hate_token) return true;
  if (top == texts.non_hate_token) return false;
  double hate = 0.0, non_hate = 0.0;
  bool seen = false;
  for (const auto& [tok, lp] : r.logprobs) {
    const auto t = trim(tok);
    if (t == texts.hate_token) hate += std::exp(lp), seen = true;
    else if (t == texts.non_hate_token) non_hate += std::exp(lp), seen = true;
  }
  if (!seen) return std::nullopt;
  return hate > non_hate;
}

struct BaselineResult {
  BaselineVariant variant = BaselineVariant::zero_shot;
  MetricsReport report;
  std::size_t evaluated = 0;
  std::size_t unparseable = 0;  // no label token in the answer
  std::size_t failures = 0;     // inference or rendering failures

  friend bool operator==(const BaselineResult&, const BaselineResult&) = default;
};

/// Direct binary prompting over every comment, scored against the
/// thresholded corpus score. No R^2: these prompts produce no score.
inline BaselineResult baseline_eval(BaselineVariant variant, const Corpus& corpus, InferenceClient& client,
                                    const PromptRenderer& renderer = PromptRenderer{},
                                    const BaselineTexts& texts = {}, const BatchOptions& options = {},
                                    double threshold = kDefaultThreshold) {
  std::vector<AnnotationTask> tasks;
  for (const auto& c : corpus.comments()) tasks.push_back({&c, std::nullopt, PromptCondition::baseline(variant), nullptr});
  auto results = batch_annotate(client, renderer, tasks, options, texts);

  BaselineResult out;
  out.variant = variant;
  std::vector<bool> pred, truth;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (const auto* failure = std::get_if<TaskFailure>(&results[i])) {
      spdlog::warn("baseline {} comment {}: {}", to_string(variant), tasks[i].comment->comment_id, failure->message);
      ++out.failures;
      continue;
    }
    auto answer = parse_binary(std::get<TokenResponse>(results[i]), texts);
    if (!answer) {
      ++out.unparseable;
      continue;
    }
    pred.push_back(*answer);
    truth.push_back(classify(tasks[i].comment->hate_score, threshold));
  }
  out.evaluated = pred.size();
  if (pred.empty()) throw InputError("baseline " + std::string(to_string(variant)) + " produced no usable answers");
  out.report.metrics = classification_metrics(pred, truth);
  return out;
}

struct ReconstructionSummary {
  std::string label;
  MetricsReport report;

  friend bool operator==(const ReconstructionSummary&, const ReconstructionSummary&) = default;
};

/// Everything a report can show; absent sections are empty.
struct Report {
  std::vector<AlignmentRow> alignment;
  std::vector<ReconstructionSummary> reconstruction;
  std::vector<AblationRow> ablation;
  std::vector<BaselineResult> baselines;

  bool empty() const noexcept {
    return alignment.empty() && reconstruction.empty() && ablation.empty() && baselines.empty();
  }
  std::size_t section_count() const noexcept {
    return !alignment.empty() + !reconstruction.empty() + !ablation.empty() + !baselines.empty();
  }

  friend bool operator==(const Report&, const Report&) = default;
};

struct ReportOptions {
  bool macro_f1 = false;
};

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> opt_double(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"r2_mean", opt_json(m.r2_mean)},
          {"r2_std", opt_json(m.r2_std)},
          {"metrics", m.metrics.to_json()},
          {"manifest", m.manifest}};
}

inline MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.r2_mean = opt_double(j.at("r2_mean"));
  m.r2_std = opt_double(j.at("r2_std"));
  m.metrics = ClassificationMetrics::from_json(j.at("metrics"));
  m.manifest = j.at("manifest").get<std::string>();
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json j;
  j["alignment"] = nlohmann::json::array();
  for (const auto& row : r.alignment) {
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : row.stats) stats.push_back(to_json(s));
    j["alignment"].push_back({{"label", row.label}, {"stats", stats}});
  }
  j["reconstruction"] = nlohmann::json::array();
  for (const auto& s : r.reconstruction)
    j["reconstruction"].push_back({{"label", s.label}, {"report", detail::to_json(s.report)}});
  j["ablation"] = nlohmann::json::array();
  for (const auto& a : r.ablation) j["ablation"].push_back(to_json(a));
  j["baselines"] = nlohmann::json::array();
  for (const auto& b : r.baselines)
    j["baselines"].push_back({{"variant", std::string(to_string(b.variant))},
                              {"report", detail::to_json(b.report)},
                              {"evaluated", b.evaluated},
                              {"unparseable", b.unparseable},
                              {"failures", b.failures}});
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  try {
    Report r;
    for (const auto& row : j.value("alignment", nlohmann::json::array())) {
      AlignmentRow a;
      a.label = row.at("label").get<std::string>();
      for (const auto& s : row.at("stats")) a.stats.push_back(alignment_stats_from_json(s));
      r.alignment.push_back(std::move(a));
    }
    for (const auto& s : j.value("reconstruction", nlohmann::json::array()))
      r.reconstruction.push_back({s.at("label").get<std::string>(), detail::metrics_report_from_json(s.at("report"))});
    for (const auto& a : j.value("ablation", nlohmann::json::array())) r.ablation.push_back(ablation_row_from_json(a));
    for (const auto& b : j.value("baselines", nlohmann::json::array())) {
      BaselineResult br;
      br.variant = baseline_variant_from_string(b.at("variant").get<std::string>());
      br.report = detail::metrics_report_from_json(b.at("report"));
      br.evaluated = b.at("evaluated").get<std::size_t>();
      br.unparseable = b.at("unparseable").get<std::size_t>();
      br.failures = b.at("failures").get<std::size_t>();
      r.baselines.push_back(std::move(br));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed report export: ") + e.what());
  }
}

namespace detail {

inline void metrics_table(std::ostringstream& os, const std::vector<std::pair<std::string, MetricsReport>>& rows,
                          const ReportOptions& options) {
  std::size_t w = 6;
  for (const auto& [label, _] : rows) w = std::max(w, label.size());
  const auto lw = static_cast<int>(w);
  os << std::left << std::setw(lw) << "Method" << "  " << std::right << std::setw(14) << "R2" << "  " << std::setw(7)
     << (options.macro_f1 ? "MacroF1" : "F1") << "  " << std::setw(7) << "Acc" << "  " << std::setw(7) << "Prec"
     << "  " << std::setw(7) << "Rec" << "\n";
  for (const auto& [label, m] : rows) {
    std::string r2 = "--";
    if (m.r2_mean) r2 = format_x100(*m.r2_mean) + (m.r2_std ? " ± " + format_x100(*m.r2_std) : "");
    const auto& c = m.metrics;
    os << std::left << std::setw(lw) << label << "  " << std::right << std::setw(r2.find("±") != std::string::npos ? 15 : 14)
       << r2 << "  " << std::setw(7) << format_x100(options.macro_f1 ? c.macro_f1 : c.f1) << "  " << std::setw(7)
       << format_x100(c.accuracy) << "  " << std::setw(7) << format_x100(c.precision) << "  " << std::setw(7)
       << format_x100(c.recall);
    if (c.precision_undefined || c.recall_undefined) os << "  (zero-denominator metric reported as 0)";
    os << "\n";
  }
}

}  // namespace detail

/// Plain-text report, all values x100 with two decimals.
inline std::string render_report(const Report& report, const ReportOptions& options = {}) {
  if (report.empty()) throw InputError("report has no sections");
  std::ostringstream os;
  bool first = true;
  auto section = [&](const char* title) {
    if (!first) os << "\n";
    first = false;
    os << "== " << title << " ==\n";
  };
  if (!report.alignment.empty()) {
    section("Alignment with human ratings (Spearman x100)");
    os << render_alignment_table(report.alignment);
  }
  if (!report.reconstruction.empty()) {
    section("Score reconstruction (x100)");
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& r : report.reconstruction) rows.emplace_back(r.label, r.report);
    detail::metrics_table(os, rows, options);
  }
  if (!report.ablation.empty()) {
    section("Ablation (x100)");
    os << std::left << std::setw(48) << "Variant" << "  " << std::right << std::setw(8) << "R2" << "  " << std::setw(8)
       << "Pearson" << "  " << std::setw(8) << "Spearman" << "\n";
    for (const auto& a : report.ablation) {
      std::string label = std::string(to_string(a.variant)) + ": " + std::string(describe(a.variant));
      os << std::left << std::setw(48) << label << "  " << std::right << std::setw(8) << format_x100(a.r2) << "  "
         << std::setw(8) << format_x100(a.pearson) << "  " << std::setw(8) << format_x100(a.spearman) << "\n";
    }
  }
  if (!report.baselines.empty()) {
    section("Direct prompting baselines (x100)");
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& b : report.baselines) rows.emplace_back(std::string(to_string(b.variant)), b.report);
    detail::metrics_table(os, rows, options);
    for (const auto& b : report.baselines)
      if (b.unparseable || b.failures)
        os << to_string(b.variant) << ": " << b.unparseable << " unparseable, " << b.failures << " failed\n";
  }
  return os.str();
}

}  // namespace hatescore

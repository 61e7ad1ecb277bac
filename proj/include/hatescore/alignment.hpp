#pragma once

#include <algorithm>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatescore/attributes.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"
#include "hatescore/prompting.hpp"
#include "hatescore/scoring.hpp"
#include "hatescore/stats.hpp"

namespace hatescore {

enum class Granularity { per_annotator, comment_mean };

inline std::string_view to_string(Granularity g) noexcept {
  return g == Granularity::per_annotator ? "per_annotator" : "comment_mean";
}

inline Granularity granularity_from_string(std::string_view s) {
  if (s == "per_annotator") return Granularity::per_annotator;
  if (s == "comment_mean") return Granularity::comment_mean;
  throw ConfigError("unknown granularity '" + std::string(s) + "'");
}

inline Granularity default_granularity(const PromptCondition& c) noexcept {
  return c.kind() == PromptCondition::Kind::persona ? Granularity::per_annotator : Granularity::comment_mean;
}

struct AlignmentStats {
  Attribute attribute = Attribute::sentiment;
  std::string condition;
  std::optional<double> rho;      // unset when skipped
  std::optional<double> pearson;  // unset when skipped
  std::size_t n_pairs = 0;
  double mean_confidence = 0.0;
  std::string skip_reason;  // non-empty iff skipped

  bool skipped() const noexcept { return !rho.has_value(); }
  friend bool operator==(const AlignmentStats&, const AlignmentStats&) = default;
};

/// (LLM label, human rating) pairs per attribute for one condition.
inline PerAttribute<std::vector<std::pair<double, double>>> alignment_pairs(
    const std::vector<AttributePrediction>& predictions, const Corpus& corpus,
    const PromptCondition& condition, Granularity granularity) {
  PerAttribute<std::vector<std::pair<double, double>>> pairs;
  if (granularity == Granularity::per_annotator) {
    for (const auto& p : predictions) {
      if (!(p.condition == condition) || !p.usable()) continue;
      const auto* c = corpus.find_comment(p.comment_id);
      if (!c) continue;
      const std::size_t a = index_of(p.attribute);
      if (p.annotator_id) {
        const auto* r = c->find_ratings(*p.annotator_id);
        if (r && r->values[a]) pairs[a].emplace_back(*p.label, *r->values[a]);
      } else {
        // A comment-level prediction stands in for every annotator's rating.
        for (const auto& r : c->ratings)
          if (r.values[a]) pairs[a].emplace_back(*p.label, *r.values[a]);
      }
    }
  } else {
    std::map<std::pair<std::string, std::size_t>, std::pair<double, int>> sums;
    for (const auto& p : predictions) {
      if (!(p.condition == condition) || !p.usable()) continue;
      auto& [sum, n] = sums[{p.comment_id, index_of(p.attribute)}];
      sum += *p.label;
      ++n;
    }
    for (const auto& [key, acc] : sums) {
      const auto* c = corpus.find_comment(key.first);
      if (!c) continue;
      auto human = mean_human_ratings(*c);
      if (human[key.second]) pairs[key.second].emplace_back(acc.first / acc.second, *human[key.second]);
    }
  }
  for (auto& v : pairs) std::sort(v.begin(), v.end());
  return pairs;
}

/// One row per attribute, most negative rho first, skipped attributes last.
inline std::vector<AlignmentStats> alignment_table(const std::vector<AttributePrediction>& predictions,
                                                   const Corpus& corpus, const PromptCondition& condition,
                                                   Granularity granularity) {
  auto pairs = alignment_pairs(predictions, corpus, condition, granularity);

  PerAttribute<std::vector<double>> confidences;
  for (const auto& p : predictions)
    if (p.condition == condition && p.usable()) confidences[index_of(p.attribute)].push_back(*p.confidence);

  std::vector<AlignmentStats> rows;
  for (auto attr : all_attributes()) {
    const std::size_t a = index_of(attr);
    AlignmentStats s;
    s.attribute = attr;
    s.condition = condition.str();
    s.n_pairs = pairs[a].size();
    if (!confidences[a].empty()) {
      std::sort(confidences[a].begin(), confidences[a].end());
      s.mean_confidence = mean(confidences[a]);
    }
    std::vector<double> llm, human;
    for (const auto& [x, h] : pairs[a]) {
      llm.push_back(x);
      human.push_back(h);
    }
    if (pairs[a].size() < 2) {
      s.skip_reason = "fewer than two usable pairs";
    } else {
      try {
        s.rho = spearman_rho(llm, human);
        s.pearson = pearson_r(llm, human);
      } catch (const DegenerateInputError&) {
        s.rho.reset();
        s.pearson.reset();
        s.skip_reason = "constant predictions or ratings";
      }
    }
    rows.push_back(std::move(s));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const AlignmentStats& x, const AlignmentStats& y) {
    if (x.skipped() != y.skipped()) return !x.skipped();
    if (x.skipped()) return false;
    return *x.rho < *y.rho;
  });
  return rows;
}

inline const std::vector<std::string>& alignment_export_columns() {
  static const std::vector<std::string> cols{"attribute", "condition", "mean_confidence", "rho",
                                             "pearson",   "n_pairs",   "skip_reason"};
  return cols;
}

/// Delimiter-separated export, one row per (attribute, condition).
inline void confidence_correlation_export(std::ostream& out, const std::vector<AlignmentStats>& stats,
                                          char delimiter = ',') {
  if (stats.empty()) throw InputError("nothing to export");
  write_record(out, alignment_export_columns(), delimiter);
  for (const auto& s : stats) {
    write_record(out,
                 {to_string(s.attribute), s.condition, format_exact(s.mean_confidence),
                  s.rho ? format_exact(*s.rho) : "", s.pearson ? format_exact(*s.pearson) : "",
                  std::to_string(s.n_pairs), s.skip_reason},
                 delimiter);
  }
}

inline std::vector<AlignmentStats> read_alignment_export(std::istream& in, char delimiter = ',') {
  DelimitedReader reader(in, delimiter);
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields != alignment_export_columns())
    throw InputError("alignment export has an unexpected header");
  std::vector<AlignmentStats> out;
  auto real = [](const std::string& f) -> std::optional<double> {
    if (f.empty()) return std::nullopt;
    auto v = detail::parse_real(f);
    if (!v) throw InputError("alignment export: bad number '" + f + "'");
    return v;
  };
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != alignment_export_columns().size())
      throw InputError("alignment export: wrong field count in record " + std::to_string(reader.records_read()));
    AlignmentStats s;
    s.attribute = attribute_from_name(fields[0]);
    s.condition = fields[1];
    s.mean_confidence = real(fields[2]).value_or(0.0);
    s.rho = real(fields[3]);
    s.pearson = real(fields[4]);
    s.n_pairs = static_cast<std::size_t>(std::stoull(fields[5]));
    s.skip_reason = fields[6];
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json to_json(const AlignmentStats& s) {
  return {{"attribute", to_string(s.attribute)},
          {"condition", s.condition},
          {"rho", s.rho ? nlohmann::json(*s.rho) : nlohmann::json(nullptr)},
          {"pearson", s.pearson ? nlohmann::json(*s.pearson) : nlohmann::json(nullptr)},
          {"n_pairs", s.n_pairs},
          {"mean_confidence", s.mean_confidence},
          {"skip_reason", s.skip_reason}};
}

inline AlignmentStats alignment_stats_from_json(const nlohmann::json& j) {
  AlignmentStats s;
  s.attribute = attribute_from_name(j.at("attribute").get<std::string>());
  s.condition = j.at("condition").get<std::string>();
  if (!j.at("rho").is_null()) s.rho = j.at("rho").get<double>();
  if (!j.at("pearson").is_null()) s.pearson = j.at("pearson").get<double>();
  s.n_pairs = j.at("n_pairs").get<std::size_t>();
  s.mean_confidence = j.at("mean_confidence").get<double>();
  s.skip_reason = j.at("skip_reason").get<std::string>();
  return s;
}

/// A labeled row of an alignment text table, e.g. a model/condition pair.
struct AlignmentRow {
  std::string label;
  std::vector<AlignmentStats> stats;

  friend bool operator==(const AlignmentRow&, const AlignmentRow&) = default;
};

/// Spearman x100 per attribute, one line per row, fixed column order.
inline std::string render_alignment_table(const std::vector<AlignmentRow>& rows) {
  std::ostringstream os;
  std::size_t label_w = 9;
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
  std::vector<std::size_t> widths;
  os << std::left << std::setw(static_cast<int>(label_w)) << "Condition";
  for (auto attr : kAlignmentColumnOrder) {
    const auto name = spec(attr).display_name;
    widths.push_back(std::max<std::size_t>(name.size(), 7));
    os << "  " << std::right << std::setw(static_cast<int>(widths.back())) << name;
  }
  os << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(label_w)) << r.label;
    for (std::size_t c = 0; c < kAlignmentColumnOrder.size(); ++c) {
      std::string cell = "--";
      for (const auto& s : r.stats)
        if (s.attribute == kAlignmentColumnOrder[c] && s.rho) cell = format_x100(*s.rho);
      os << "  " << std::right << std::setw(static_cast<int>(widths[c])) << cell;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace hatescore

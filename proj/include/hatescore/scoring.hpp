#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatescore/attributes.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"
#include "hatescore/inference.hpp"
#include "hatescore/prompting.hpp"

namespace hatescore {

enum class PredictionStatus { ok, fallback, missing };

inline std::string_view to_string(PredictionStatus s) noexcept {
  switch (s) {
    case PredictionStatus::ok: return "ok";
    case PredictionStatus::fallback: return "fallback";
    case PredictionStatus::missing: return "missing";
  }
  return "?";
}

inline PredictionStatus prediction_status_from_string(std::string_view s) {
  if (s == "ok") return PredictionStatus::ok;
  if (s == "fallback") return PredictionStatus::fallback;
  if (s == "missing") return PredictionStatus::missing;
  throw InputError("unknown prediction status '" + std::string(s) + "'");
}

struct AttributePrediction {
  std::string comment_id;
  std::optional<std::string> annotator_id;  // persona condition only
  Attribute attribute = Attribute::sentiment;
  PromptCondition condition = PromptCondition::vanilla();
  std::optional<int> label;          // S; unset iff status == missing
  std::optional<double> confidence;  // C; unset iff status == missing
  std::map<std::string, double> raw_logprobs;
  PredictionStatus status = PredictionStatus::missing;

  bool usable() const noexcept { return status != PredictionStatus::missing; }
  /// Confidence-weighted feature S * C.
  std::optional<double> weighted() const {
    if (!label || !confidence) return std::nullopt;
    return *label * *confidence;
  }
};

/// Parses a bare integer token in [0, max_label] after trimming whitespace.
inline int parse_label(std::string_view token, int max_label) {
  auto t = trim(token);
  int value = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc{} || p != t.data() + t.size() || t.front() == '-' || t.front() == '+')
    throw InvalidLabelError("token '" + std::string(token) + "' is not an integer label");
  if (value < 0 || value > max_label)
    throw InvalidLabelError("label " + std::to_string(value) + " outside [0, " + std::to_string(max_label) + "]");
  return value;
}

inline int parse_label(std::string_view token, const AttributeSpec& attribute) {
  return parse_label(token, attribute.scale_max);
}

struct Confidence {
  int label = 0;
  double confidence = 0.0;
  std::vector<double> masses;  // renormalized mass per label 0..max_label
  std::size_t labels_observed = 0;
};

/// Renormalized softmax over the label tokens present in `logprobs`. Keys
/// that trim to the same label are summed. Ties go to the smaller label.
inline Confidence extract_confidence(const std::map<std::string, double>& logprobs, int max_label) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> per_label(static_cast<std::size_t>(max_label) + 1);
  double top = kNegInf;
  for (const auto& [token, lp] : logprobs) {
    int k;
    try {
      k = parse_label(token, max_label);
    } catch (const InvalidLabelError&) {
      continue;
    }
    if (std::isnan(lp)) continue;
    per_label[static_cast<std::size_t>(k)].push_back(lp);
    top = std::max(top, lp);
  }
  if (top == kNegInf) throw ExtractionError("no valid label token among the returned logprobs");

  Confidence out;
  out.masses.assign(per_label.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < per_label.size(); ++k) {
    if (per_label[k].empty()) continue;
    ++out.labels_observed;
    for (double lp : per_label[k]) out.masses[k] += std::exp(lp - top);
    total += out.masses[k];
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < out.masses.size(); ++k) {
    out.masses[k] /= total;
    if (out.masses[k] > out.masses[best]) best = k;
  }
  out.label = static_cast<int>(best);
  out.confidence = out.masses[best];
  return out;
}

inline Confidence extract_confidence(const std::map<std::string, double>& logprobs,
                                     const AttributeSpec& attribute) {
  return extract_confidence(logprobs, attribute.scale_max);
}

/// Turns a raw response into a prediction. Never throws on malformed model
/// output; the outcome is encoded in `status`.
inline AttributePrediction predict_attribute(const TokenResponse& response, Attribute attribute,
                                             std::string comment_id,
                                             std::optional<std::string> annotator_id,
                                             PromptCondition condition) {
  AttributePrediction p;
  p.comment_id = std::move(comment_id);
  p.annotator_id = std::move(annotator_id);
  p.attribute = attribute;
  p.condition = std::move(condition);
  p.raw_logprobs = response.logprobs;
  const int s = spec(attribute).scale_max;

  std::optional<Confidence> conf;
  try {
    conf = extract_confidence(response.logprobs, s);
  } catch (const ExtractionError&) {
  }
  std::optional<int> top;
  try {
    top = parse_label(response.top_token, s);
  } catch (const InvalidLabelError&) {
  }

  if (top) {
    p.label = *top;
    p.status = PredictionStatus::ok;
    // The emitted token can be absent from top-k only when the endpoint
    // truncates oddly; treat its mass as unknown and fall back to argmax.
    if (conf && conf->masses[static_cast<std::size_t>(*top)] > 0.0) {
      p.confidence = conf->masses[static_cast<std::size_t>(*top)];
    } else if (conf) {
      p.label = conf->label;
      p.confidence = conf->confidence;
      p.status = PredictionStatus::fallback;
    } else {
      p.confidence = 1.0;
    }
  } else if (conf) {
    p.label = conf->label;
    p.confidence = conf->confidence;
    p.status = PredictionStatus::fallback;
  } else {
    p.status = PredictionStatus::missing;
  }
  return p;
}

inline nlohmann::json to_json(const AttributePrediction& p) {
  nlohmann::json j;
  j["comment_id"] = p.comment_id;
  j["annotator_id"] = p.annotator_id ? nlohmann::json(*p.annotator_id) : nlohmann::json(nullptr);
  j["attribute"] = to_string(p.attribute);
  j["condition"] = p.condition.str();
  j["label"] = p.label ? nlohmann::json(*p.label) : nlohmann::json(nullptr);
  j["confidence"] = p.confidence ? nlohmann::json(*p.confidence) : nlohmann::json(nullptr);
  j["status"] = std::string(to_string(p.status));
  j["logprobs"] = p.raw_logprobs;
  return j;
}

inline AttributePrediction prediction_from_json(const nlohmann::json& j) {
  try {
    AttributePrediction p;
    p.comment_id = j.at("comment_id").get<std::string>();
    if (!j.at("annotator_id").is_null()) p.annotator_id = j.at("annotator_id").get<std::string>();
    p.attribute = attribute_from_name(j.at("attribute").get<std::string>());
    p.condition = PromptCondition::parse(j.at("condition").get<std::string>());
    if (!j.at("label").is_null()) p.label = j.at("label").get<int>();
    if (!j.at("confidence").is_null()) p.confidence = j.at("confidence").get<double>();
    p.status = prediction_status_from_string(j.at("status").get<std::string>());
    if (j.contains("logprobs")) p.raw_logprobs = j.at("logprobs").get<std::map<std::string, double>>();
    if (p.usable() != (p.label.has_value() && p.confidence.has_value()))
      throw InputError("prediction status inconsistent with label/confidence");
    if (p.label && (*p.label < 0 || *p.label > spec(p.attribute).scale_max))
      throw InputError("prediction label out of range");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed prediction record: ") + e.what());
  }
}

inline void write_predictions(std::ostream& out, const std::vector<AttributePrediction>& preds) {
  for (const auto& p : preds) out << to_json(p).dump() << '\n';
}

inline void write_predictions(const std::filesystem::path& path, const std::vector<AttributePrediction>& preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_predictions(out, preds);
}

inline std::vector<AttributePrediction> read_predictions(std::istream& in) {
  std::vector<AttributePrediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("predictions line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<AttributePrediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file " + path.string());
  return read_predictions(in);
}

/// Per-status tallies for a prediction set.
struct PredictionCounts {
  std::size_t ok = 0, fallback = 0, missing = 0;
  std::size_t total() const noexcept { return ok + fallback + missing; }
  nlohmann::json to_json() const { return {{"ok", ok}, {"fallback", fallback}, {"missing", missing}}; }
};

inline PredictionCounts count_statuses(const std::vector<AttributePrediction>& preds) {
  PredictionCounts c;
  for (const auto& p : preds) {
    switch (p.status) {
      case PredictionStatus::ok: ++c.ok; break;
      case PredictionStatus::fallback: ++c.fallback; break;
      case PredictionStatus::missing: ++c.missing; break;
    }
  }
  return c;
}

}  // namespace hatescore

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatescore/error.hpp"

namespace hatescore {

inline constexpr double kDefaultThreshold = 0.5;

/// Strictly above the threshold is hate.
inline bool classify(double score, double threshold = kDefaultThreshold) {
  if (!std::isfinite(score)) throw ValueError("cannot classify a non-finite score");
  return score > threshold;
}

struct ClassificationMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;        // positive class
  double macro_f1 = 0.0;  // mean of positive- and negative-class F1
  double accuracy = 0.0;
  // Set when a denominator was zero and the metric was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }

  nlohmann::json to_json() const {
    return {{"tp", tp},
            {"fp", fp},
            {"fn", fn},
            {"tn", tn},
            {"precision", precision},
            {"recall", recall},
            {"f1", f1},
            {"macro_f1", macro_f1},
            {"accuracy", accuracy},
            {"precision_undefined", precision_undefined},
            {"recall_undefined", recall_undefined}};
  }

  static ClassificationMetrics from_json(const nlohmann::json& j) {
    ClassificationMetrics m;
    m.tp = j.at("tp").get<std::size_t>();
    m.fp = j.at("fp").get<std::size_t>();
    m.fn = j.at("fn").get<std::size_t>();
    m.tn = j.at("tn").get<std::size_t>();
    m.precision = j.at("precision").get<double>();
    m.recall = j.at("recall").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.macro_f1 = j.at("macro_f1").get<double>();
    m.accuracy = j.at("accuracy").get<double>();
    m.precision_undefined = j.at("precision_undefined").get<bool>();
    m.recall_undefined = j.at("recall_undefined").get<bool>();
    return m;
  }

  friend bool operator==(const ClassificationMetrics&, const ClassificationMetrics&) = default;
};

namespace detail {

inline double ratio(std::size_t num, std::size_t den, bool* undefined = nullptr) {
  if (den == 0) {
    if (undefined) *undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

inline ClassificationMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  ClassificationMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision = detail::ratio(tp, tp + fp, &m.precision_undefined);
  m.recall = detail::ratio(tp, tp + fn, &m.recall_undefined);
  m.f1 = detail::f1_of(m.precision, m.recall);
  const double neg_f1 = detail::f1_of(detail::ratio(tn, tn + fn), detail::ratio(tn, tn + fp));
  m.macro_f1 = (m.f1 + neg_f1) / 2.0;
  m.accuracy = detail::ratio(tp + tn, tp + fp + fn + tn);
  return m;
}

inline ClassificationMetrics classification_metrics(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  if (pred.size() != truth.size())
    throw InputError("prediction/truth length mismatch (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()) + ")");
  if (pred.empty()) throw InputError("classification metrics need at least one example");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++tp;
    else if (pred[i]) ++fp;
    else if (truth[i]) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

/// Fold average: rates are averaged, counts summed, undefined flags OR-ed.
inline ClassificationMetrics average_metrics(const std::vector<ClassificationMetrics>& folds) {
  if (folds.empty()) throw InputError("no folds to average");
  ClassificationMetrics m;
  const double n = static_cast<double>(folds.size());
  for (const auto& f : folds) {
    m.tp += f.tp;
    m.fp += f.fp;
    m.fn += f.fn;
    m.tn += f.tn;
    m.precision += f.precision / n;
    m.recall += f.recall / n;
    m.f1 += f.f1 / n;
    m.macro_f1 += f.macro_f1 / n;
    m.accuracy += f.accuracy / n;
    m.precision_undefined = m.precision_undefined || f.precision_undefined;
    m.recall_undefined = m.recall_undefined || f.recall_undefined;
  }
  return m;
}

}  // namespace hatescore

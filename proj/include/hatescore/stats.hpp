#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hatescore/error.hpp"

namespace hatescore {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw DegenerateInputError("mean of an empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// 1-based ranks with ties replaced by the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

inline void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  if (a.size() < 2) throw DegenerateInputError(std::string(what) + ": need at least two pairs");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
      throw DegenerateInputError(std::string(what) + ": non-finite value");
}

}  // namespace detail

inline double pearson_r(std::span<const double> a, std::span<const double> b) {
  detail::check_pair(a, b, "pearson");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInputError("pearson: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Pearson correlation of average-ranked transforms.
inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
  detail::check_pair(a, b, "spearman");
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  try {
    return pearson_r(ra, rb);
  } catch (const DegenerateInputError&) {
    throw DegenerateInputError("spearman: constant input");
  }
}

/// 1 - SS_res / SS_tot.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  detail::check_pair(y_true, y_pred, "r_squared");
  const double m = mean(y_true);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - m) * (y_true[i] - m);
  }
  if (ss_tot == 0.0) throw DegenerateInputError("r_squared: constant target");
  return 1.0 - ss_res / ss_tot;
}

/// Formats `value * 100` with two decimals, rounding half away from zero on
/// the exact binary value of the product.
inline std::string format_x100(double value) {
  if (!std::isfinite(value)) return "nan";
  const double scaled = value * 100.0;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.60f", std::fabs(scaled));
  std::string digits(buf);
  const auto dot = digits.find('.');
  std::string whole = digits.substr(0, dot);
  std::string frac = digits.substr(dot + 1);
  // The third decimal of the expansion decides the rounding direction.
  std::string kept = whole + frac.substr(0, 2);
  const bool up = frac[2] >= '5';
  if (up) {
    int i = static_cast<int>(kept.size()) - 1;
    while (i >= 0 && kept[static_cast<std::size_t>(i)] == '9') kept[static_cast<std::size_t>(i--)] = '0';
    if (i < 0) kept.insert(kept.begin(), '1');
    else ++kept[static_cast<std::size_t>(i)];
  }
  std::string out = kept.substr(0, kept.size() - 2) + "." + kept.substr(kept.size() - 2);
  const bool zero = std::all_of(kept.begin(), kept.end(), [](char c) { return c == '0'; });
  if (std::signbit(scaled) && !zero) out.insert(out.begin(), '-');
  return out;
}

/// Shortest text that reparses to the same double.
inline std::string format_exact(double value) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

}  // namespace hatescore

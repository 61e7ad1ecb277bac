#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <span>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hatescore/attributes.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"
#include "hatescore/hash.hpp"
#include "hatescore/metrics.hpp"
#include "hatescore/ridge.hpp"
#include "hatescore/scoring.hpp"
#include "hatescore/stats.hpp"

namespace hatescore {

struct FeatureVector {
  std::string comment_id;
  PerAttribute<double> x{};
  PerAttribute<bool> imputed{};
};

/// x_i = S_i * C_i for present attributes; absent ones take `fill` (the
/// training-fold mean) and are masked. Multiple predictions for the same
/// attribute are averaged.
inline FeatureVector build_features(const std::vector<AttributePrediction>& predictions,
                                    const PerAttribute<double>& fill = {}) {
  if (predictions.empty()) throw InputError("build_features needs at least one prediction");
  FeatureVector f;
  f.comment_id = predictions.front().comment_id;
  PerAttribute<double> sum{};
  PerAttribute<int> n{};
  for (const auto& p : predictions) {
    if (p.comment_id != f.comment_id) throw InputError("build_features: predictions span several comments");
    if (auto w = p.weighted()) {
      sum[index_of(p.attribute)] += *w;
      ++n[index_of(p.attribute)];
    }
  }
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    if (n[a] > 0) {
      f.x[a] = sum[a] / n[a];
    } else {
      f.x[a] = fill[a];
      f.imputed[a] = true;
    }
  }
  return f;
}

/// Element-wise mean of per-annotator vectors. An attribute is imputed in the
/// result only if it was imputed for every annotator; otherwise imputed
/// entries are left out of its mean.
inline FeatureVector aggregate_persona(const std::vector<FeatureVector>& per_annotator) {
  if (per_annotator.empty()) throw InputError("aggregate_persona needs at least one annotator vector");
  FeatureVector out;
  out.comment_id = per_annotator.front().comment_id;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    double sum = 0.0, imputed_sum = 0.0;
    int n = 0;
    for (const auto& v : per_annotator) {
      if (v.imputed[a]) imputed_sum += v.x[a];
      else {
        sum += v.x[a];
        ++n;
      }
    }
    if (n > 0) out.x[a] = sum / n;
    else {
      out.x[a] = imputed_sum / static_cast<double>(per_annotator.size());
      out.imputed[a] = true;
    }
  }
  return out;
}

/// Comment-level inputs before imputation. Persona predictions are averaged
/// across annotators per attribute.
struct CommentFeatures {
  std::string comment_id;
  double theta = 0.0;
  PerAttribute<std::optional<double>> weighted;  // mean S*C
  PerAttribute<std::optional<double>> label;     // mean S
  PerAttribute<std::optional<double>> human;     // mean human rating
};

struct ReconstructionData {
  std::vector<CommentFeatures> comments;  // comment-id order
  std::size_t corpus_comments_without_predictions = 0;
  std::size_t predictions_for_unknown_comments = 0;
  PredictionCounts status_counts;
};

inline ReconstructionData build_dataset(const std::vector<AttributePrediction>& predictions, const Corpus& corpus,
                                        const PromptCondition& condition) {
  struct Acc {
    PerAttribute<double> w{}, s{};
    PerAttribute<int> n{};
    bool seen = false;
  };
  std::map<std::string, Acc> acc;
  ReconstructionData data;
  std::vector<AttributePrediction> used;
  for (const auto& p : predictions) {
    if (!(p.condition == condition)) continue;
    used.push_back(p);
    if (!corpus.find_comment(p.comment_id)) {
      ++data.predictions_for_unknown_comments;
      continue;
    }
    auto& a = acc[p.comment_id];
    a.seen = true;
    if (p.usable()) {
      const std::size_t i = index_of(p.attribute);
      a.w[i] += *p.weighted();
      a.s[i] += *p.label;
      ++a.n[i];
    }
  }
  data.status_counts = count_statuses(used);
  for (const auto& c : corpus.comments()) {
    auto it = acc.find(c.comment_id);
    if (it == acc.end()) {
      ++data.corpus_comments_without_predictions;
      continue;
    }
    CommentFeatures f;
    f.comment_id = c.comment_id;
    f.theta = c.hate_score;
    f.human = mean_human_ratings(c);
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
      if (it->second.n[i] > 0) {
        f.weighted[i] = it->second.w[i] / it->second.n[i];
        f.label[i] = it->second.s[i] / it->second.n[i];
      }
    }
    data.comments.push_back(std::move(f));
  }
  return data;
}

/// Balanced, seed-dependent fold assignment that depends only on each
/// comment's id, so it is stable under corpus reordering.
inline std::vector<int> assign_folds(const std::vector<std::string>& comment_ids, int k, std::uint64_t seed) {
  if (k < 2) throw FoldError("k must be at least 2");
  if (comment_ids.size() < static_cast<std::size_t>(k))
    throw FoldError("cannot split " + std::to_string(comment_ids.size()) + " comments into " + std::to_string(k) +
                    " folds");
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(comment_ids.size());
  for (std::size_t i = 0; i < comment_ids.size(); ++i)
    keyed.emplace_back(splitmix64(fnv1a64(comment_ids[i]) ^ seed), i);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return comment_ids[a.second] < comment_ids[b.second];
  });
  std::vector<int> folds(comment_ids.size());
  for (std::size_t r = 0; r < keyed.size(); ++r) folds[keyed[r].second] = static_cast<int>(r % static_cast<std::size_t>(k));
  return folds;
}

enum class FeatureKind { weighted, label };  // S*C or raw S

namespace detail {

inline const std::optional<double>& feature_of(const CommentFeatures& c, FeatureKind kind, std::size_t a) {
  return kind == FeatureKind::weighted ? c.weighted[a] : c.label[a];
}

}  // namespace detail

/// Per-attribute mean of the observed feature over the given rows; 0 when no
/// row has a value.
inline PerAttribute<double> imputation_means(const std::vector<CommentFeatures>& rows,
                                             const std::vector<std::size_t>& idx, FeatureKind kind) {
  PerAttribute<double> m{};
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    double sum = 0.0;
    std::size_t n = 0;
    for (auto i : idx)
      if (const auto& v = detail::feature_of(rows[i], kind, a)) {
        sum += *v;
        ++n;
      }
    if (n > 0) m[a] = sum / static_cast<double>(n);
  }
  return m;
}

inline Eigen::MatrixXd design_matrix(const std::vector<CommentFeatures>& rows, const std::vector<std::size_t>& idx,
                                     FeatureKind kind, const PerAttribute<double>& fill,
                                     std::size_t* imputed_cells = nullptr) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(kAttributeCount));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (std::size_t a = 0; a < kAttributeCount; ++a) {
      const auto& v = detail::feature_of(rows[idx[r]], kind, a);
      if (!v && imputed_cells) ++*imputed_cells;
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) = v ? *v : fill[a];
    }
  }
  return X;
}

inline Eigen::VectorXd target_vector(const std::vector<CommentFeatures>& rows, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) y[static_cast<Eigen::Index>(r)] = rows[idx[r]].theta;
  return y;
}

/// Spearman of comment-level mean S against mean human rating, per
/// attribute, over the given rows. Unset where undefined.
inline PerAttribute<std::optional<double>> training_rho(const std::vector<CommentFeatures>& rows,
                                                        const std::vector<std::size_t>& idx) {
  PerAttribute<std::optional<double>> rho;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    std::vector<double> s, h;
    for (auto i : idx) {
      if (rows[i].label[a] && rows[i].human[a]) {
        s.push_back(*rows[i].label[a]);
        h.push_back(*rows[i].human[a]);
      }
    }
    try {
      rho[a] = spearman_rho(s, h);
    } catch (const DegenerateInputError&) {
    }
  }
  return rho;
}

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.01, 0.1, 1.0, 10.0, 100.0};
  return grid;
}

struct CvOptions {
  int k = 5;
  std::uint64_t seed = 42;
  RidgeOptions ridge;
  FeatureKind features = FeatureKind::weighted;
  bool lambda_search = false;  // pick lambda per fold by inner CV on the training portion
  std::vector<double> lambda_grid = default_lambda_grid();
  int inner_folds = 3;
  bool prescale_with_training_rho = false;  // multiply column i by the training-fold rho_i
  double threshold = kDefaultThreshold;
};

struct FoldResult {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double lambda = 0.0;
  double r2 = 0.0;
  ClassificationMetrics classification;
  PerAttribute<double> weights{};  // transformed-space weights
  std::size_t imputed_cells = 0;
};

struct OofPrediction {
  std::string comment_id;
  int fold = 0;
  double y = 0.0;
  double y_hat = 0.0;
};

struct CvResult {
  std::vector<FoldResult> folds;
  double mean_r2 = 0.0;
  double std_r2 = 0.0;  // population std across folds
  ClassificationMetrics classification;
  std::vector<OofPrediction> oof;  // dataset order
  std::size_t imputed_cells = 0;
};

namespace detail {

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(const std::vector<int>& folds, int f) {
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? test : train).push_back(i);
  return {std::move(train), std::move(test)};
}

inline std::vector<std::string> ids_of(const std::vector<CommentFeatures>& rows, const std::vector<std::size_t>& idx) {
  std::vector<std::string> ids;
  ids.reserve(idx.size());
  for (auto i : idx) ids.push_back(rows[i].comment_id);
  return ids;
}

inline double select_lambda(const std::vector<CommentFeatures>& rows, const std::vector<std::size_t>& train,
                            const CvOptions& options) {
  const auto inner = assign_folds(ids_of(rows, train), options.inner_folds, splitmix64(options.seed));
  double best_lambda = options.lambda_grid.front();
  double best_r2 = -std::numeric_limits<double>::infinity();
  for (double lambda : options.lambda_grid) {
    double total = 0.0;
    for (int f = 0; f < options.inner_folds; ++f) {
      auto [tr_local, te_local] = split(inner, f);
      std::vector<std::size_t> tr, te;
      for (auto i : tr_local) tr.push_back(train[i]);
      for (auto i : te_local) te.push_back(train[i]);
      const auto fill = imputation_means(rows, tr, options.features);
      auto model = ridge_fit(design_matrix(rows, tr, options.features, fill), target_vector(rows, tr),
                             {lambda, options.ridge.scaling});
      Eigen::VectorXd pred = model.predict(design_matrix(rows, te, options.features, fill));
      Eigen::VectorXd yt = target_vector(rows, te);
      total += r_squared(std::span<const double>(yt.data(), static_cast<std::size_t>(yt.size())),
                         std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
    }
    if (total / options.inner_folds > best_r2) {
      best_r2 = total / options.inner_folds;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace detail

/// k-fold cross-validated ridge reconstruction. Every statistic used for a
/// test fold (imputation means, scaling, rho, lambda) comes from its
/// training folds only.
inline CvResult kfold_cv(const ReconstructionData& data, const CvOptions& options = {}) {
  const auto& rows = data.comments;
  std::vector<std::string> ids;
  for (const auto& c : rows) ids.push_back(c.comment_id);
  const auto folds = assign_folds(ids, options.k, options.seed);

  CvResult out;
  out.oof.resize(rows.size());
  std::vector<ClassificationMetrics> fold_metrics;
  std::vector<double> r2s;
  for (int f = 0; f < options.k; ++f) {
    auto [train, test] = detail::split(folds, f);
    FoldResult fr;
    fr.fold = f;
    fr.n_train = train.size();
    fr.n_test = test.size();
    const auto fill = imputation_means(rows, train, options.features);
    Eigen::MatrixXd Xtr = design_matrix(rows, train, options.features, fill, &fr.imputed_cells);
    Eigen::MatrixXd Xte = design_matrix(rows, test, options.features, fill, &fr.imputed_cells);
    if (options.prescale_with_training_rho) {
      const auto rho = training_rho(rows, train);
      for (std::size_t a = 0; a < kAttributeCount; ++a) {
        if (!rho[a] || *rho[a] == 0.0)
          throw AblationError("no usable training-fold rho for " + to_string(static_cast<Attribute>(a)));
        Xtr.col(static_cast<Eigen::Index>(a)) *= *rho[a];
        Xte.col(static_cast<Eigen::Index>(a)) *= *rho[a];
      }
    }
    fr.lambda = options.lambda_search ? detail::select_lambda(rows, train, options) : options.ridge.lambda;
    auto model = ridge_fit(Xtr, target_vector(rows, train), {fr.lambda, options.ridge.scaling});
    for (std::size_t a = 0; a < kAttributeCount; ++a) fr.weights[a] = model.weights[static_cast<Eigen::Index>(a)];

    Eigen::VectorXd pred = model.predict(Xte);
    std::vector<double> yt, yp;
    std::vector<bool> truth, guess;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const auto& c = rows[test[r]];
      const double yh = pred[static_cast<Eigen::Index>(r)];
      out.oof[test[r]] = {c.comment_id, f, c.theta, yh};
      yt.push_back(c.theta);
      yp.push_back(yh);
      truth.push_back(classify(c.theta, options.threshold));
      guess.push_back(classify(yh, options.threshold));
    }
    fr.r2 = r_squared(yt, yp);
    fr.classification = classification_metrics(guess, truth);
    r2s.push_back(fr.r2);
    fold_metrics.push_back(fr.classification);
    out.imputed_cells += fr.imputed_cells;
    out.folds.push_back(fr);
  }
  out.mean_r2 = mean(r2s);
  out.std_r2 = stddev(r2s);
  out.classification = average_metrics(fold_metrics);
  return out;
}

/// Ridge fit on every comment, for weight inspection.
inline RidgeModel fit_full(const ReconstructionData& data, const CvOptions& options = {}) {
  std::vector<std::size_t> all(data.comments.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto fill = imputation_means(data.comments, all, options.features);
  return ridge_fit(design_matrix(data.comments, all, options.features, fill), target_vector(data.comments, all),
                   options.ridge);
}

/// attribute,weight,raw_weight in registry order, then the intercepts.
inline void export_weights(std::ostream& out, const RidgeModel& model, char delimiter = ',') {
  write_record(out, {"attribute", "weight", "raw_weight"}, delimiter);
  const auto raw = model.raw_weights();
  for (auto attr : all_attributes()) {
    const auto j = static_cast<Eigen::Index>(index_of(attr));
    write_record(out, {to_string(attr), format_exact(model.weights[j]), format_exact(raw[j])}, delimiter);
  }
  write_record(out, {"(intercept)", format_exact(model.intercept), format_exact(model.raw_intercept())}, delimiter);
}

inline nlohmann::json to_json(const CvResult& r) {
  nlohmann::json j;
  j["mean_r2"] = r.mean_r2;
  j["std_r2"] = r.std_r2;
  j["classification"] = r.classification.to_json();
  j["imputed_cells"] = r.imputed_cells;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json w;
    for (auto attr : all_attributes()) w[to_string(attr)] = f.weights[index_of(attr)];
    j["folds"].push_back({{"fold", f.fold},
                          {"n_train", f.n_train},
                          {"n_test", f.n_test},
                          {"lambda", f.lambda},
                          {"r2", f.r2},
                          {"imputed_cells", f.imputed_cells},
                          {"classification", f.classification.to_json()},
                          {"weights", w}});
  }
  return j;
}

inline void write_oof(std::ostream& out, const std::vector<OofPrediction>& oof, char delimiter = ',') {
  write_record(out, {"comment_id", "fold", "y", "y_hat"}, delimiter);
  for (const auto& p : oof)
    write_record(out, {p.comment_id, std::to_string(p.fold), format_exact(p.y), format_exact(p.y_hat)}, delimiter);
}

// ---------------------------------------------------------------------------
// Ablations

enum class AblationVariant { A, B, C, D };

inline constexpr std::array<AblationVariant, 4> kAblationVariants{AblationVariant::A, AblationVariant::B,
                                                                   AblationVariant::C, AblationVariant::D};

inline std::string_view to_string(AblationVariant v) noexcept {
  switch (v) {
    case AblationVariant::A: return "A";
    case AblationVariant::B: return "B";
    case AblationVariant::C: return "C";
    case AblationVariant::D: return "D";
  }
  return "?";
}

inline std::string_view describe(AblationVariant v) noexcept {
  switch (v) {
    case AblationVariant::A: return "No Ridge, confidence + Spearman weighted sum";
    case AblationVariant::B: return "Ridge with confidence weighting";
    case AblationVariant::C: return "Ridge without confidence weighting";
    case AblationVariant::D: return "No Ridge, Spearman weighted sum only";
  }
  return "?";
}

inline AblationVariant ablation_variant_from_string(std::string_view s) {
  for (auto v : kAblationVariants)
    if (s == to_string(v)) return v;
  throw ConfigError("unknown ablation variant '" + std::string(s) + "'");
}

/// Sum_i rho_i * f_i; every rho_i must be known.
inline double weighted_sum(const PerAttribute<double>& features, const PerAttribute<std::optional<double>>& rho) {
  double y = 0.0;
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    if (!rho[a]) throw AblationError("missing rho for attribute " + to_string(static_cast<Attribute>(a)));
    y += *rho[a] * features[a];
  }
  return y;
}

struct AblationRow {
  AblationVariant variant = AblationVariant::B;
  double r2 = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
  std::vector<double> fold_r2;

  friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

/// Scores all four variants on the same folds; metrics are fold averages.
inline std::vector<AblationRow> run_ablation(const ReconstructionData& data, const CvOptions& options = {}) {
  const auto& rows = data.comments;
  std::vector<std::string> ids;
  for (const auto& c : rows) ids.push_back(c.comment_id);
  const auto folds = assign_folds(ids, options.k, options.seed);

  std::vector<AblationRow> out;
  for (auto v : kAblationVariants) {
    AblationRow row;
    row.variant = v;
    std::vector<double> pe, sp;
    for (int f = 0; f < options.k; ++f) {
      auto [train, test] = detail::split(folds, f);
      const FeatureKind kind =
          (v == AblationVariant::A || v == AblationVariant::B) ? FeatureKind::weighted : FeatureKind::label;
      const auto fill = imputation_means(rows, train, kind);
      Eigen::MatrixXd Xte = design_matrix(rows, test, kind, fill);
      Eigen::VectorXd pred(Xte.rows());
      if (v == AblationVariant::B || v == AblationVariant::C) {
        auto model = ridge_fit(design_matrix(rows, train, kind, fill), target_vector(rows, train), options.ridge);
        pred = model.predict(Xte);
      } else {
        const auto rho = training_rho(rows, train);
        for (Eigen::Index r = 0; r < Xte.rows(); ++r) {
          PerAttribute<double> x{};
          for (std::size_t a = 0; a < kAttributeCount; ++a) x[a] = Xte(r, static_cast<Eigen::Index>(a));
          pred[r] = weighted_sum(x, rho);
        }
      }
      Eigen::VectorXd yt = target_vector(rows, test);
      std::span<const double> ys(yt.data(), static_cast<std::size_t>(yt.size()));
      std::span<const double> ps(pred.data(), static_cast<std::size_t>(pred.size()));
      row.fold_r2.push_back(r_squared(ys, ps));
      pe.push_back(pearson_r(ys, ps));
      sp.push_back(spearman_rho(ys, ps));
    }
    row.r2 = mean(row.fold_r2);
    row.pearson = mean(pe);
    row.spearman = mean(sp);
    out.push_back(std::move(row));
  }
  return out;
}

inline nlohmann::json to_json(const AblationRow& r) {
  return {{"variant", std::string(to_string(r.variant))},
          {"r2", r.r2},
          {"pearson", r.pearson},
          {"spearman", r.spearman},
          {"fold_r2", r.fold_r2}};
}

inline AblationRow ablation_row_from_json(const nlohmann::json& j) {
  AblationRow r;
  r.variant = ablation_variant_from_string(j.at("variant").get<std::string>());
  r.r2 = j.at("r2").get<double>();
  r.pearson = j.at("pearson").get<double>();
  r.spearman = j.at("spearman").get<double>();
  r.fold_r2 = j.at("fold_r2").get<std::vector<double>>();
  return r;
}

}  // namespace hatescore

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hatescore/alignment.hpp"
#include "hatescore/mock_backend.hpp"
#include "hatescore/synth.hpp"
#include "test_util.hpp"

using namespace hatescore;

namespace {

// Rank oracle: rank of v[i] is 1 + #{v[j] < v[i]} + (#{v[j] == v[i]} - 1) / 2.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

double oracle_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = oracle_ranks(a), rb = oracle_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> tied_vector(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  const int levels = 2 + static_cast<int>(rng() % 6);
  for (auto& x : v) x = static_cast<double>(rng() % levels);
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) v[0] += 1.0;
  return v;
}

// Six comments, two annotators each, with per-attribute ratings that vary
// across comments. Attribute `constant_attr` is rated 1 everywhere.
Corpus alignment_corpus(Attribute constant_attr = Attribute::hatespeech) {
  std::vector<testutil::Row> rows;
  for (int c = 0; c < 6; ++c) {
    for (int k = 0; k < 2; ++k) {
      testutil::Row r;
      r.comment_id = "c" + std::to_string(c);
      r.annotator_id = "a" + std::to_string(k);
      for (auto attr : all_attributes()) {
        const int s = spec(attr).scale_max;
        int v = (c + k + static_cast<int>(index_of(attr))) % (s + 1);
        if (attr == constant_attr) v = 1;
        r.values.push_back(std::to_string(v));
      }
      rows.push_back(r);
    }
  }
  return testutil::load(testutil::corpus_text(rows));
}

AttributePrediction prediction(std::string comment, Attribute a, int label, double conf,
                               std::optional<std::string> annotator = std::nullopt,
                               PromptCondition cond = PromptCondition::vanilla()) {
  AttributePrediction p;
  p.comment_id = std::move(comment);
  p.annotator_id = std::move(annotator);
  p.attribute = a;
  p.condition = cond;
  p.label = label;
  p.confidence = conf;
  p.status = PredictionStatus::ok;
  return p;
}

}  // namespace

TEST(Spearman, ClosedFormExample) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{1, 3, 2, 5, 4};
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  const double n = 5;
  const double closed = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
  EXPECT_NEAR(spearman_rho(a, b), closed, 1e-15);
  EXPECT_NEAR(spearman_rho(a, b), 0.8, 1e-15);
}

TEST(Spearman, IdenticalAndReversed) {
  const std::vector<double> a{3, 1, 4, 1, 5, 9, 2, 6};
  std::vector<double> rev(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) rev[i] = -a[i];
  EXPECT_DOUBLE_EQ(spearman_rho(a, a), 1.0);
  EXPECT_DOUBLE_EQ(spearman_rho(a, rev), -1.0);
}

TEST(Spearman, MatchesRankOracleOnTiedVectors) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    auto a = tied_vector(rng, n), b = tied_vector(rng, n);
    EXPECT_NEAR(spearman_rho(a, b), oracle_spearman(a, b), 1e-12);
  }
}

TEST(Spearman, SymmetricAndMonotoneInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng() % 60;
    auto a = tied_vector(rng, n), b = tied_vector(rng, n);
    const double rho = spearman_rho(a, b);
    EXPECT_NEAR(spearman_rho(b, a), rho, 1e-14);
    std::vector<double> ta(a), tb(b);
    for (auto& x : ta) x = std::exp(x) * 3.0 + 1.0;
    for (auto& x : tb) x = x * x * x - 10.0;
    EXPECT_NEAR(spearman_rho(ta, tb), rho, 1e-12);
  }
}

TEST(Spearman, DegenerateInputs) {
  EXPECT_THROW(spearman_rho(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateInputError);
  EXPECT_THROW(spearman_rho(std::vector<double>{1}, std::vector<double>{1}), DegenerateInputError);
  EXPECT_THROW(spearman_rho(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), InputError);
}

TEST(Pearson, AffineAndNegated) {
  EXPECT_DOUBLE_EQ(pearson_r(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5}), 1.0);
  EXPECT_DOUBLE_EQ(pearson_r(std::vector<double>{0, 1, 2}, std::vector<double>{0, -1, -2}), -1.0);
  EXPECT_DOUBLE_EQ(pearson_r(std::vector<double>{2, 7, 1}, std::vector<double>{2, 7, 1}), 1.0);
}

TEST(AlignmentTable, PredictionsEqualToHumanRatingsGiveRhoOne) {
  const auto corpus = alignment_corpus(Attribute::attack_defend);
  std::vector<AttributePrediction> preds;
  for (const auto& c : corpus.comments())
    for (const auto& r : c.ratings)
      for (auto a : all_attributes())
        preds.push_back(prediction(c.comment_id, a, *r.values[index_of(a)], 0.9, r.annotator_id, PromptCondition::persona()));
  const auto rows = alignment_table(preds, corpus, PromptCondition::persona(), Granularity::per_annotator);
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& s : rows) {
    if (s.attribute == Attribute::attack_defend) {
      EXPECT_TRUE(s.skipped());
      EXPECT_FALSE(s.skip_reason.empty());
      continue;
    }
    ASSERT_TRUE(s.rho) << to_string(s.attribute);
    EXPECT_NEAR(*s.rho, 1.0, 1e-12);
    EXPECT_EQ(s.n_pairs, 12u);
    EXPECT_NEAR(s.mean_confidence, 0.9, 1e-15);
  }
  EXPECT_EQ(rows.back().attribute, Attribute::attack_defend);
}

TEST(AlignmentTable, OrderedMostNegativeFirst) {
  const auto corpus = alignment_corpus();
  std::vector<AttributePrediction> preds;
  for (const auto& c : corpus.comments()) {
    const auto h = mean_human_ratings(c);
    for (auto a : all_attributes()) {
      const int s = spec(a).scale_max;
      const int v = static_cast<int>(std::lround(*h[index_of(a)]));
      const bool flip = a == Attribute::respect || a == Attribute::sentiment;
      preds.push_back(prediction(c.comment_id, a, flip ? s - v : v, 0.8));
    }
  }
  const auto rows = alignment_table(preds, corpus, PromptCondition::vanilla(), Granularity::comment_mean);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].skipped()) continue;
    ASSERT_FALSE(rows[i - 1].skipped());
    EXPECT_LE(*rows[i - 1].rho, *rows[i].rho);
  }
  EXPECT_LT(*rows[0].rho, 0.0);
  EXPECT_TRUE(rows.back().skipped());  // hatespeech is constant in this corpus
}

TEST(AlignmentTable, VanillaPredictionPairsWithEveryAnnotator) {
  const auto corpus = alignment_corpus();
  std::vector<AttributePrediction> preds;
  for (const auto& c : corpus.comments()) preds.push_back(prediction(c.comment_id, Attribute::insult, 2, 0.5));
  const auto per = alignment_pairs(preds, corpus, PromptCondition::vanilla(), Granularity::per_annotator);
  const auto mean = alignment_pairs(preds, corpus, PromptCondition::vanilla(), Granularity::comment_mean);
  EXPECT_EQ(per[index_of(Attribute::insult)].size(), 12u);
  EXPECT_EQ(mean[index_of(Attribute::insult)].size(), 6u);
  EXPECT_TRUE(per[index_of(Attribute::genocide)].empty());
}

TEST(AlignmentTable, IgnoresOtherConditionsAndMissingPredictions) {
  const auto corpus = alignment_corpus();
  std::vector<AttributePrediction> preds;
  for (const auto& c : corpus.comments()) {
    preds.push_back(prediction(c.comment_id, Attribute::insult, 1, 0.5, std::nullopt, PromptCondition::persona()));
    AttributePrediction missing;
    missing.comment_id = c.comment_id;
    missing.attribute = Attribute::insult;
    preds.push_back(missing);
  }
  const auto rows = alignment_table(preds, corpus, PromptCondition::vanilla(), Granularity::comment_mean);
  for (const auto& s : rows) {
    EXPECT_TRUE(s.skipped());
    EXPECT_EQ(s.n_pairs, 0u);
  }
}

TEST(AlignmentTable, PermutationStable) {
  const auto corpus = alignment_corpus();
  std::mt19937_64 rng(1);
  std::vector<AttributePrediction> preds;
  for (const auto& c : corpus.comments())
    for (const auto& r : c.ratings)
      for (auto a : all_attributes())
        preds.push_back(prediction(c.comment_id, a, static_cast<int>(rng() % (spec(a).scale_max + 1)),
                                   0.3 + 0.1 * static_cast<double>(rng() % 7), r.annotator_id,
                                   PromptCondition::persona()));
  const auto base = alignment_table(preds, corpus, PromptCondition::persona(), Granularity::per_annotator);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(preds.begin(), preds.end(), rng);
    EXPECT_EQ(alignment_table(preds, corpus, PromptCondition::persona(), Granularity::per_annotator), base);
  }
}

TEST(AlignmentExport, RoundTripsExactly) {
  std::vector<AlignmentStats> stats;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const char* cond : {"vanilla", "persona"}) {
    for (auto a : all_attributes()) {
      AlignmentStats s;
      s.attribute = a;
      s.condition = cond;
      s.n_pairs = 100 + rng() % 50;
      s.mean_confidence = 0.2 + 0.8 * std::abs(u(rng));
      if (a == Attribute::genocide) {
        s.skip_reason = "constant predictions, or ratings";
      } else {
        s.rho = u(rng);
        s.pearson = u(rng);
      }
      stats.push_back(s);
    }
  }
  std::stringstream ss;
  confidence_correlation_export(ss, stats);
  const auto text = ss.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 21);
  EXPECT_EQ(read_alignment_export(ss), stats);
  EXPECT_THROW(confidence_correlation_export(ss, {}), InputError);
}

TEST(AlignmentTable, MeanConfidenceOfConstantRun) {
  const auto corpus = alignment_corpus();
  std::vector<AttributePrediction> preds;
  for (const auto& c : corpus.comments())
    for (auto a : all_attributes()) preds.push_back(prediction(c.comment_id, a, 1, 0.9));
  for (const auto& s : alignment_table(preds, corpus, PromptCondition::vanilla(), Granularity::comment_mean))
    EXPECT_NEAR(s.mean_confidence, 0.9, 1e-15);
}

TEST(AlignmentTable, SyntheticInversionSignOracle) {
  WorldConfig wc;
  wc.seed = 3;
  wc.n_comments = 300;
  auto world = generate_world(wc);
  std::stringstream csv;
  write_world_corpus(world, csv);
  auto corpus = load_corpus(csv, CorpusSchema{});
  MockBackend backend(world);
  InferenceClient client(backend, DecodingConfig{});
  PromptRenderer renderer;
  for (auto cond : {PromptCondition::vanilla(), PromptCondition::persona()}) {
    std::vector<AttributePrediction> preds;
    for (const auto& c : corpus.comments()) {
      for (auto a : all_attributes()) {
        if (cond.kind() == PromptCondition::Kind::vanilla) {
          auto r = client.complete_single_token(renderer.vanilla(a, c));
          preds.push_back(predict_attribute(r, a, c.comment_id, std::nullopt, cond));
        } else {
          const auto& profile = corpus.annotator(c.ratings[0].annotator_id);
          auto r = client.complete_single_token(renderer.persona(a, c, profile));
          preds.push_back(predict_attribute(r, a, c.comment_id, profile.annotator_id, cond));
        }
      }
    }
    for (const auto& s : alignment_table(preds, corpus, cond, default_granularity(cond))) {
      ASSERT_TRUE(s.rho) << to_string(s.attribute);
      if (wc.inversion_map[index_of(s.attribute)]) EXPECT_LT(*s.rho, 0.0) << to_string(s.attribute);
      else EXPECT_GT(*s.rho, 0.0) << to_string(s.attribute);
    }
  }
}

TEST(AlignmentRender, FixedColumnOrderTimesHundred) {
  AlignmentStats insult;
  insult.attribute = Attribute::insult;
  insult.condition = "vanilla";
  insult.rho = 0.6975;
  AlignmentStats respect;
  respect.attribute = Attribute::respect;
  respect.condition = "vanilla";
  respect.rho = -0.7303;
  const auto text = render_alignment_table({{"model vanilla", {insult, respect}}});
  const auto header = text.substr(0, text.find('\n'));
  EXPECT_LT(header.find("Respect"), header.find("Sentiment"));
  EXPECT_LT(header.find("Humiliate"), header.find("Insult"));
  EXPECT_NE(text.find("-73.03"), std::string::npos);
  EXPECT_NE(text.find("69.75"), std::string::npos);
  EXPECT_NE(text.find("--"), std::string::npos);
  EXPECT_LT(text.find("-73.03"), text.find("69.75"));
}

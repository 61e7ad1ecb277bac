#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatescore/attributes.hpp"
#include "hatescore/corpus.hpp"
#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"
#include "hatescore/hash.hpp"
#include "hatescore/prompting.hpp"
#include "hatescore/stats.hpp"

namespace hatescore {

/// Synthetic world parameters. Comments share a latent severity z; each
/// attribute's true value is s * logistic(1.5 z + offset + noise). The mock
/// model perceives inverted attributes as s - t, humans do not.
struct WorldConfig {
  std::uint64_t seed = 42;
  std::size_t n_comments = 2000;
  std::size_t n_annotators = 400;
  std::size_t annotators_per_comment = 3;
  PerAttribute<double> true_weights = [] {
    PerAttribute<double> w;
    w.fill(1.0);
    return w;
  }();
  PerAttribute<bool> inversion_map = [] {
    PerAttribute<bool> m{};
    for (auto a : {Attribute::sentiment, Attribute::hatespeech, Attribute::status, Attribute::respect})
      m[index_of(a)] = true;
    return m;
  }();
  double noise_sigma = 0.1;
  double theta_offset = 0.0;  // added to every theta; shifts the share above the 0.5 threshold
  double confidence_fidelity = 0.9;
  double label_error_rate = 0.15;      // chance a mock label overshoots by one
  double human_noise_rate = 0.3;       // chance a human rating is off by one
  double attribute_noise_sd = 0.7;     // attribute-specific deviation from z
  double persona_confidence_shrink = 0.9;

  void validate() const {
    if (n_comments < 1) throw ConfigError("n_comments must be >= 1");
    if (n_annotators < 1) throw ConfigError("n_annotators must be >= 1");
    if (annotators_per_comment < 1 || annotators_per_comment > n_annotators)
      throw ConfigError("annotators_per_comment must be in [1, n_annotators]");
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
    };
    unit(confidence_fidelity, "confidence_fidelity");
    unit(label_error_rate, "label_error_rate");
    unit(human_noise_rate, "human_noise_rate");
    unit(persona_confidence_shrink, "persona_confidence_shrink");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
    if (!std::isfinite(theta_offset)) throw ConfigError("theta_offset must be finite");
    if (!(attribute_noise_sd >= 0.0) || !std::isfinite(attribute_noise_sd))
      throw ConfigError("attribute_noise_sd must be >= 0");
    for (double w : true_weights)
      if (!std::isfinite(w)) throw ConfigError("true_weights must be finite");
  }

  nlohmann::json to_json() const {
    nlohmann::json w, inv = nlohmann::json::array();
    for (auto a : all_attributes()) {
      w[to_string(a)] = true_weights[index_of(a)];
      if (inversion_map[index_of(a)]) inv.push_back(to_string(a));
    }
    return {{"seed", seed},
            {"n_comments", n_comments},
            {"n_annotators", n_annotators},
            {"annotators_per_comment", annotators_per_comment},
            {"true_weights", w},
            {"inverted", inv},
            {"noise_sigma", noise_sigma},
            {"theta_offset", theta_offset},
            {"confidence_fidelity", confidence_fidelity},
            {"label_error_rate", label_error_rate},
            {"human_noise_rate", human_noise_rate},
            {"attribute_noise_sd", attribute_noise_sd},
            {"persona_confidence_shrink", persona_confidence_shrink}};
  }

  static WorldConfig from_json(const nlohmann::json& j) {
    WorldConfig c;
    try {
      c.seed = j.value("seed", c.seed);
      c.n_comments = j.value("n_comments", c.n_comments);
      c.n_annotators = j.value("n_annotators", c.n_annotators);
      c.annotators_per_comment = j.value("annotators_per_comment", c.annotators_per_comment);
      c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
      c.theta_offset = j.value("theta_offset", c.theta_offset);
      c.confidence_fidelity = j.value("confidence_fidelity", c.confidence_fidelity);
      c.label_error_rate = j.value("label_error_rate", c.label_error_rate);
      c.human_noise_rate = j.value("human_noise_rate", c.human_noise_rate);
      c.attribute_noise_sd = j.value("attribute_noise_sd", c.attribute_noise_sd);
      c.persona_confidence_shrink = j.value("persona_confidence_shrink", c.persona_confidence_shrink);
      if (j.contains("true_weights"))
        for (const auto& [name, v] : j.at("true_weights").items())
          c.true_weights[index_of(attribute_from_name(name))] = v.get<double>();
      if (j.contains("inverted")) {
        c.inversion_map.fill(false);
        for (const auto& name : j.at("inverted")) c.inversion_map[index_of(attribute_from_name(name.get<std::string>()))] = true;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed world config: ") + e.what());
    } catch (const RegistryError& e) {
      throw ConfigError(std::string("malformed world config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

struct SyntheticComment {
  std::string comment_id;
  double latent = 0.0;
  PerAttribute<double> truth{};  // continuous true values in [0, s]
  double theta = 0.0;
  std::vector<std::size_t> annotators;  // indices into SyntheticWorld::annotators
  std::vector<PerAttribute<int>> ratings;
};

struct WorldLabel {
  int label = 0;
  double confidence = 0.0;
  int perceived_label = 0;  // rounded perceived value, before any error
};

class SyntheticWorld {
 public:
  WorldConfig config;
  std::vector<SyntheticComment> comments;  // id order
  std::vector<AnnotatorProfile> annotators;

  const SyntheticComment& comment(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw WorldError("comment '" + std::string(id) + "' is not in the world");
    return comments[it->second];
  }

  /// Deterministic mock-model label and target confidence.
  WorldLabel world_label(std::string_view comment_id, Attribute attribute, const PromptCondition& condition,
                         std::string_view annotator_id = {}) const {
    const auto& c = comment(comment_id);
    const std::size_t a = index_of(attribute);
    const int s = spec(attribute).scale_max;
    const double t = c.truth[a];
    const double perceived = config.inversion_map[a] ? s - t : t;
    WorldLabel out;
    out.perceived_label = static_cast<int>(std::lround(perceived));
    out.label = out.perceived_label;
    std::uint64_t h = fnv1a64(comment_id, splitmix64(config.seed));
    h = fnv1a64(spec(attribute).name, h);
    h = fnv1a64(condition.str(), h);
    h = fnv1a64(annotator_id, h);
    if (out.label < s && unit_interval(splitmix64(h)) < config.label_error_rate) ++out.label;

    const double u = 1.0 / (s + 1);
    const double d = perceived - (out.label - 0.5);
    double g = d >= 0.0 ? 0.9 + 0.1 * std::min(d, 1.0) : 0.9 + 0.45 * d;
    g = std::min(std::max(g, u + 0.05), 0.99);
    double conf = u + config.confidence_fidelity * (g - u);
    if (condition.kind() == PromptCondition::Kind::persona) conf = u + config.persona_confidence_shrink * (conf - u);
    out.confidence = conf;
    return out;
  }

 private:
  friend SyntheticWorld generate_world(const WorldConfig& config);
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(std::to_string(n).size(), 5);
  std::string digits = std::to_string(i + 1);
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

}  // namespace detail

inline SyntheticWorld generate_world(const WorldConfig& config) {
  config.validate();
  SyntheticWorld w;
  w.config = config;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  static constexpr std::array<const char*, 3> kGenders{"woman", "man", "non-binary"};
  static constexpr std::array<const char*, 5> kRaces{"white", "black", "asian", "latinx", "middle eastern"};
  static constexpr std::array<const char*, 5> kReligions{"christian", "muslim", "jewish", "hindu", "nothing"};
  static constexpr std::array<const char*, 3> kIdeologies{"liberal", "moderate", "conservative"};
  for (std::size_t i = 0; i < config.n_annotators; ++i) {
    AnnotatorProfile p;
    p.annotator_id = detail::padded_id('a', i, config.n_annotators);
    p.gender = kGenders[rng() % kGenders.size()];
    p.age = 18 + static_cast<int>(rng() % 63);
    p.age_category = *p.age >= 40 ? "old" : "young";
    p.race = kRaces[rng() % kRaces.size()];
    p.religion = kReligions[rng() % kReligions.size()];
    p.ideology = kIdeologies[rng() % kIdeologies.size()];
    w.annotators.push_back(std::move(p));
  }

  for (std::size_t n = 0; n < config.n_comments; ++n) {
    SyntheticComment c;
    c.comment_id = detail::padded_id('c', n, config.n_comments);
    c.latent = normal(rng);
    for (std::size_t a = 0; a < kAttributeCount; ++a) {
      const double offset = -0.5 + static_cast<double>(a) / (kAttributeCount - 1);
      const double s = registry()[a].scale_max;
      const double e = config.attribute_noise_sd * normal(rng);
      c.truth[a] = s / (1.0 + std::exp(-(1.5 * c.latent + e + offset)));
      c.theta += config.true_weights[a] * c.truth[a];
    }
    c.theta += config.theta_offset + config.noise_sigma * normal(rng);

    // Distinct annotators by partial Fisher-Yates over the pool.
    std::vector<std::size_t> pool(config.n_annotators);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t k = 0; k < config.annotators_per_comment; ++k) {
      std::size_t j = k + static_cast<std::size_t>(rng() % (pool.size() - k));
      std::swap(pool[k], pool[j]);
      c.annotators.push_back(pool[k]);
    }
    std::sort(c.annotators.begin(), c.annotators.end());
    for (std::size_t k = 0; k < c.annotators.size(); ++k) {
      PerAttribute<int> r{};
      for (std::size_t a = 0; a < kAttributeCount; ++a) {
        const int s = registry()[a].scale_max;
        int v = static_cast<int>(std::lround(c.truth[a]));
        if (unif(rng) < config.human_noise_rate) v += unif(rng) < 0.5 ? -1 : 1;
        r[a] = std::clamp(v, 0, s);
      }
      c.ratings.push_back(r);
    }
    w.index_.emplace(c.comment_id, w.comments.size());
    w.comments.push_back(std::move(c));
  }
  return w;
}

/// Writes the world as a corpus file in the default schema.
inline void write_world_corpus(const SyntheticWorld& world, std::ostream& out) {
  CorpusSchema schema;
  write_record(out, schema.columns(), schema.delimiter);
  for (const auto& c : world.comments) {
    for (std::size_t k = 0; k < c.annotators.size(); ++k) {
      const auto& p = world.annotators[c.annotators[k]];
      std::vector<std::string> row{c.comment_id, "Synthetic comment " + c.comment_id + ".", p.annotator_id};
      for (std::size_t a = 0; a < kAttributeCount; ++a) row.push_back(std::to_string(c.ratings[k][a]));
      row.insert(row.end(), {format_exact(c.theta), p.gender, std::to_string(*p.age), p.race, p.religion, p.ideology});
      write_record(out, row, schema.delimiter);
    }
  }
}

/// Writes corpus.csv and world.json into `dir`.
inline void write_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream corpus(dir / "corpus.csv", std::ios::binary);
  if (!corpus) throw IoError("cannot write " + (dir / "corpus.csv").string());
  write_world_corpus(world, corpus);
  std::ofstream cfg(dir / "world.json", std::ios::binary);
  if (!cfg) throw IoError("cannot write " + (dir / "world.json").string());
  cfg << world.config.to_json().dump(2) << '\n';
}

inline WorldConfig load_world_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open world config " + path.string());
  try {
    return WorldConfig::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("world config " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace hatescore

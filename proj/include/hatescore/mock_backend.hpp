#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <string>

#include "hatescore/attributes.hpp"
#include "hatescore/error.hpp"
#include "hatescore/hash.hpp"
#include "hatescore/inference.hpp"
#include "hatescore/metrics.hpp"
#include "hatescore/prompting.hpp"
#include "hatescore/synth.hpp"

namespace hatescore {

enum class BaselinePolicy { truth, always_hate, noisy };

inline std::string_view to_string(BaselinePolicy p) noexcept {
  switch (p) {
    case BaselinePolicy::truth: return "truth";
    case BaselinePolicy::always_hate: return "always_hate";
    case BaselinePolicy::noisy: return "noisy";
  }
  return "?";
}

inline BaselinePolicy baseline_policy_from_string(std::string_view s) {
  if (s == "truth") return BaselinePolicy::truth;
  if (s == "always_hate") return BaselinePolicy::always_hate;
  if (s == "noisy") return BaselinePolicy::noisy;
  throw ConfigError("unknown baseline policy '" + std::string(s) + "'");
}

/// Logprobs whose renormalized mass over `labels` puts `confidence` on
/// `label` and splits the rest evenly. Two junk tokens carry a small share
/// so the map resembles a real top-k list.
inline std::map<std::string, double> mock_logprobs(const std::vector<std::string>& labels, std::size_t label,
                                                   double confidence) {
  constexpr double kJunk = 0.02;
  std::map<std::string, double> lp;
  const double others = labels.size() > 1 ? (1.0 - confidence) / static_cast<double>(labels.size() - 1) : 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double mass = (1.0 - kJunk) * (k == label ? confidence : others);
    if (mass > 0.0) lp[labels[k]] = std::log(mass);
  }
  lp["The"] = std::log(kJunk / 2);
  lp["\n"] = std::log(kJunk / 2);
  return lp;
}

/// Offline backend answering from a synthetic world, keyed by prompt
/// metadata rather than prompt text.
class MockBackend : public Backend {
 public:
  explicit MockBackend(const SyntheticWorld& world, BaselinePolicy policy = BaselinePolicy::truth,
                       double noisy_flip_rate = 0.2)
      : world_(world), policy_(policy), flip_rate_(noisy_flip_rate) {}

  TokenResponse complete(const RenderedPrompt& prompt, const DecodingConfig& config) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    const auto& meta = prompt.meta;
    TokenResponse r;
    r.source = ResponseSource::mock;
    if (meta.condition.kind() == PromptCondition::Kind::baseline) {
      const bool hate = baseline_answer(meta.comment_id, meta.condition);
      const std::size_t idx = hate ? 0 : 1;  // expected_label_set is {hate, non_hate}
      r.top_token = prompt.expected_label_set.at(idx);
      r.logprobs = mock_logprobs(prompt.expected_label_set, idx, 0.9);
    } else {
      if (!meta.attribute) throw InputError("mock backend: attribute prompt without an attribute");
      auto wl = world_.world_label(meta.comment_id, *meta.attribute, meta.condition, meta.annotator_id.value_or(""));
      r.top_token = std::to_string(wl.label);
      r.logprobs = mock_logprobs(prompt.expected_label_set, static_cast<std::size_t>(wl.label), wl.confidence);
    }
    (void)config;
    return r;
  }

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  bool baseline_answer(const std::string& comment_id, const PromptCondition& condition) const {
    const bool truth = classify(world_.comment(comment_id).theta);
    switch (policy_) {
      case BaselinePolicy::truth: return truth;
      case BaselinePolicy::always_hate: return true;
      case BaselinePolicy::noisy: {
        auto h = splitmix64(fnv1a64(condition.str(), fnv1a64(comment_id, world_.config.seed)));
        return unit_interval(h) < flip_rate_ ? !truth : truth;
      }
    }
    return truth;
  }

  const SyntheticWorld& world_;
  BaselinePolicy policy_;
  double flip_rate_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace hatescore

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hatescore/delimited.hpp"
#include "hatescore/error.hpp"
#include "hatescore/hash.hpp"
#include "hatescore/prompting.hpp"

namespace hatescore {

enum class ApiStyle { completions, chat };

inline std::string_view to_string(ApiStyle s) noexcept {
  return s == ApiStyle::chat ? "chat" : "completions";
}

inline ApiStyle api_style_from_string(std::string_view s) {
  if (s == "completions") return ApiStyle::completions;
  if (s == "chat") return ApiStyle::chat;
  throw ConfigError("unknown api style '" + std::string(s) + "'");
}

/// Decoding parameters for single-token label generation.
struct DecodingConfig {
  double temperature = 0.0;
  std::int64_t seed = 42;
  int max_tokens = 1;
  int top_logprobs = 20;
  std::string model_name = "mock";
  std::string endpoint_url;
  ApiStyle api_style = ApiStyle::completions;

  void validate() const {
    if (max_tokens != 1) throw ConfigError("max_tokens must be 1");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (top_logprobs < 1) throw ConfigError("top_logprobs must be >= 1");
  }

  /// Fields that determine the model output; endpoint_url is deliberately
  /// excluded so a cache survives moving the same model to another host.
  nlohmann::json key_fields() const {
    return {{"model", model_name},
            {"temperature", temperature},
            {"seed", seed},
            {"max_tokens", max_tokens},
            {"top_logprobs", top_logprobs},
            {"api_style", std::string(to_string(api_style))}};
  }

  nlohmann::json to_json() const {
    auto j = key_fields();
    j["endpoint_url"] = endpoint_url;
    return j;
  }
};

enum class ResponseSource { live, cache, mock };

inline std::string_view to_string(ResponseSource s) noexcept {
  switch (s) {
    case ResponseSource::live: return "live";
    case ResponseSource::cache: return "cache";
    case ResponseSource::mock: return "mock";
  }
  return "?";
}

struct TokenResponse {
  std::string top_token;
  std::map<std::string, double> logprobs;  // endpoint-reported top-k
  std::chrono::milliseconds latency{0};
  ResponseSource source = ResponseSource::live;
};

/// Retriable transport failure (connection refused, timeout, 5xx, 429).
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message) : Error("transport", message) {}
};

/// Content hash of everything that determines a response.
inline std::string cache_key(const RenderedPrompt& prompt, const DecodingConfig& config) {
  nlohmann::json j{{"system", prompt.system_text},
                   {"user", prompt.user_text},
                   {"decoding", config.key_fields()}};
  return sha256_hex(j.dump());
}

class Backend {
 public:
  virtual ~Backend() = default;
  /// Returns the top token and its top-k logprobs. Throws TransportError for
  /// retriable failures and CapabilityError when logprobs are unavailable.
  virtual TokenResponse complete(const RenderedPrompt& prompt, const DecodingConfig& config) = 0;
};

/// Append-only JSON-lines response cache keyed by content hash. Concurrent
/// reads; appends are serialized. A key is never rebound to different content.
class ResponseCache {
 public:
  ResponseCache() = default;  // in-memory only

  explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ifstream in(*path_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        // A partially written trailing record after a crash; skip it.
        spdlog::warn("cache {}: skipping malformed line {}", path_->string(), lineno);
        ++skipped_;
        continue;
      }
      auto key = j.at("key").get<std::string>();
      auto resp = from_json(j);
      auto [it, inserted] = entries_.try_emplace(key, resp);
      if (!inserted && !same_content(it->second, resp))
        throw CacheCorruptionError("cache " + path_->string() + " binds key " + key +
                                   " to conflicting responses (line " + std::to_string(lineno) + ")");
    }
    out_.open(*path_, std::ios::app);
    if (!out_) throw IoError("cannot open cache file " + path_->string() + " for appending");
  }

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  std::optional<TokenResponse> get(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    TokenResponse r = it->second;
    r.source = ResponseSource::cache;
    return r;
  }

  void put(const std::string& key, const TokenResponse& response) {
    std::unique_lock lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      if (!same_content(it->second, response))
        throw CacheCorruptionError("refusing to overwrite cache key " + key + " with different content");
      return;
    }
    entries_.emplace(key, response);
    if (out_.is_open()) {
      out_ << to_json(key, response).dump() << '\n';
      out_.flush();
    }
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  std::size_t skipped_lines() const noexcept { return skipped_; }

  static bool same_content(const TokenResponse& a, const TokenResponse& b) {
    return a.top_token == b.top_token && a.logprobs == b.logprobs;
  }

 private:
  static nlohmann::json to_json(const std::string& key, const TokenResponse& r) {
    return {{"key", key},
            {"top_token", r.top_token},
            {"logprobs", r.logprobs},
            {"latency_ms", r.latency.count()},
            {"origin", std::string(to_string(r.source))}};
  }

  static TokenResponse from_json(const nlohmann::json& j) {
    TokenResponse r;
    r.top_token = j.at("top_token").get<std::string>();
    r.logprobs = j.at("logprobs").get<std::map<std::string, double>>();
    r.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
    r.source = ResponseSource::cache;
    return r;
  }

  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, TokenResponse> entries_;
  std::ofstream out_;
  std::size_t skipped_ = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};  // doubled after every failed attempt
};

/// Cache-first, retrying front end over a Backend.
class InferenceClient {
 public:
  InferenceClient(Backend& backend, DecodingConfig config, ResponseCache* cache = nullptr,
                  RetryPolicy retry = {})
      : backend_(backend), config_(std::move(config)), cache_(cache), retry_(retry) {
    config_.validate();
    if (retry_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  }

  const DecodingConfig& config() const noexcept { return config_; }

  TokenResponse complete_single_token(const RenderedPrompt& prompt) {
    const auto key = cache_key(prompt, config_);
    if (cache_) {
      if (auto hit = cache_->get(key)) {
        cache_hits_.fetch_add(1, std::memory_order_relaxed);
        return *hit;
      }
    }
    auto delay = retry_.base_delay;
    for (int attempt = 1;; ++attempt) {
      try {
        backend_calls_.fetch_add(1, std::memory_order_relaxed);
        auto t0 = std::chrono::steady_clock::now();
        TokenResponse r = backend_.complete(prompt, config_);
        if (r.source == ResponseSource::live)
          r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::steady_clock::now() - t0);
        check_response(r, prompt, key);
        if (cache_) cache_->put(key, r);
        return r;
      } catch (const TransportError& e) {
        if (attempt >= retry_.max_attempts)
          throw InferenceError(std::string(e.what()) + " after " + std::to_string(attempt) + " attempts", key);
        spdlog::debug("attempt {} failed ({}); retrying in {} ms", attempt, e.what(), delay.count());
        std::this_thread::sleep_for(delay);
        delay *= 2;
      } catch (const CapabilityError&) {
        throw;
      } catch (const CacheCorruptionError&) {
        throw;
      } catch (const Error& e) {
        throw InferenceError(e.what(), key);
      }
    }
  }

  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
  std::size_t coverage_warnings() const noexcept { return coverage_warnings_.load(); }

 private:
  void check_response(const TokenResponse& r, const RenderedPrompt& prompt, const std::string& key) {
    if (r.logprobs.empty()) throw CapabilityError("endpoint returned no logprobs [prompt " + key + "]");
    for (const auto& [tok, lp] : r.logprobs)
      if (!(lp <= 0.0) || std::isnan(lp))
        throw CapabilityError("endpoint returned invalid logprob " + std::to_string(lp) + " for token '" + tok + "'");
    std::size_t covered = 0;
    for (const auto& label : prompt.expected_label_set) {
      bool found = std::any_of(r.logprobs.begin(), r.logprobs.end(),
                               [&](const auto& kv) { return trim(kv.first) == label; });
      covered += found;
    }
    if (covered < prompt.expected_label_set.size()) {
      coverage_warnings_.fetch_add(1, std::memory_order_relaxed);
      spdlog::warn("capability: only {}/{} label tokens among top-{} logprobs for comment {} [prompt {}]",
                   covered, prompt.expected_label_set.size(), config_.top_logprobs,
                   prompt.meta.comment_id, key);
    }
  }

  Backend& backend_;
  DecodingConfig config_;
  ResponseCache* cache_;
  RetryPolicy retry_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> coverage_warnings_{0};
};

struct TaskFailure {
  std::string kind;  // error kind tag, e.g. "inference", "capability", "persona"
  std::string message;
  std::string prompt_hash;  // empty if the prompt could not be rendered
};

using TaskResult = std::variant<TokenResponse, TaskFailure>;

struct BatchOptions {
  std::size_t parallelism = 1;
  std::size_t progress_every = 1000;
  std::function<void(std::size_t done, std::size_t total)> on_progress;
};

/// Runs every prompt through the client with bounded concurrency. Results are
/// in input order; a failing task becomes a TaskFailure in its slot.
inline std::vector<TaskResult> batch_annotate(InferenceClient& client,
                                              std::span<const RenderedPrompt> prompts,
                                              const BatchOptions& options = {}) {
  if (options.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  const std::size_t n = prompts.size();
  std::vector<TaskResult> results(n, TaskFailure{"pending", "", ""});
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        results[i] = client.complete_single_token(prompts[i]);
      } catch (const InferenceError& e) {
        results[i] = TaskFailure{e.kind(), e.what(), e.prompt_hash()};
      } catch (const Error& e) {
        results[i] = TaskFailure{e.kind(), e.what(), cache_key(prompts[i], client.config())};
      } catch (const std::exception& e) {
        results[i] = TaskFailure{"internal", e.what(), cache_key(prompts[i], client.config())};
      }
      auto d = done.fetch_add(1) + 1;
      if (options.on_progress && options.progress_every > 0 &&
          (d % options.progress_every == 0 || d == n)) {
        std::lock_guard lock(progress_mu);
        options.on_progress(d, n);
      }
    }
  };

  const std::size_t workers = std::min(options.parallelism, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

/// One unit of annotation work, rendered lazily by `batch_annotate`.
struct AnnotationTask {
  const CommentRecord* comment = nullptr;
  std::optional<Attribute> attribute;  // unset for baseline prompts
  PromptCondition condition = PromptCondition::vanilla();
  const AnnotatorProfile* profile = nullptr;  // persona only
};

inline RenderedPrompt render_task(const PromptRenderer& renderer, const AnnotationTask& task,
                                  const BaselineTexts& baseline_texts = {}) {
  if (!task.comment) throw InputError("annotation task without a comment");
  switch (task.condition.kind()) {
    case PromptCondition::Kind::vanilla:
      if (!task.attribute) throw InputError("vanilla task without an attribute");
      return renderer.vanilla(*task.attribute, *task.comment);
    case PromptCondition::Kind::persona:
      if (!task.attribute) throw InputError("persona task without an attribute");
      if (!task.profile) throw PersonaError("persona task without an annotator profile");
      return renderer.persona(*task.attribute, *task.comment, *task.profile);
    case PromptCondition::Kind::baseline:
      return renderer.baseline(*task.condition.variant(), *task.comment, baseline_texts);
  }
  throw InputError("unknown condition");
}

/// Renders and runs a task list. Rendering failures become TaskFailures in
/// place, like inference failures.
inline std::vector<TaskResult> batch_annotate(InferenceClient& client, const PromptRenderer& renderer,
                                              std::span<const AnnotationTask> tasks,
                                              const BatchOptions& options = {},
                                              const BaselineTexts& baseline_texts = {}) {
  std::vector<RenderedPrompt> prompts;
  std::vector<std::optional<TaskFailure>> render_failures(tasks.size());
  std::vector<std::size_t> slot;
  prompts.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      prompts.push_back(render_task(renderer, tasks[i], baseline_texts));
      slot.push_back(i);
    } catch (const Error& e) {
      render_failures[i] = TaskFailure{e.kind(), e.what(), ""};
    }
  }
  auto ran = batch_annotate(client, std::span<const RenderedPrompt>(prompts), options);
  std::vector<TaskResult> out(tasks.size(), TaskFailure{"pending", "", ""});
  for (std::size_t j = 0; j < slot.size(); ++j) out[slot[j]] = std::move(ran[j]);
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (render_failures[i]) out[i] = std::move(*render_failures[i]);
  return out;
}

}  // namespace hatescore

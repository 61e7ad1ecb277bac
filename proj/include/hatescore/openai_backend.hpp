#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hatescore/error.hpp"
#include "hatescore/inference.hpp"

namespace hatescore {

/// API key from HATESCORE_API_KEY, falling back to OPENAI_API_KEY.
inline std::string api_key_from_env() {
  for (const char* name : {"HATESCORE_API_KEY", "OPENAI_API_KEY"})
    if (const char* v = std::getenv(name); v && *v) return v;
  return {};
}

/// Backend for OpenAI-compatible servers (vLLM, TGI, llama.cpp, hosted APIs)
/// using either /completions or /chat/completions with top-k logprobs.
class OpenAIBackend : public Backend {
 public:
  struct Options {
    std::string api_key = api_key_from_env();
    std::chrono::seconds timeout{120};
  };

  explicit OpenAIBackend(const std::string& endpoint_url) : OpenAIBackend(endpoint_url, Options()) {}

  OpenAIBackend(const std::string& endpoint_url, Options options) : options_(std::move(options)) {
    // "http://host:port/v1" -> origin "http://host:port", prefix "/v1"
    const auto scheme_end = endpoint_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + endpoint_url);
    const auto path_start = endpoint_url.find('/', scheme_end + 3);
    origin_ = endpoint_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : endpoint_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  TokenResponse complete(const RenderedPrompt& prompt, const DecodingConfig& config) override {
    const bool chat = config.api_style == ApiStyle::chat;
    nlohmann::json body{{"model", config.model_name},
                        {"max_tokens", config.max_tokens},
                        {"temperature", config.temperature},
                        {"seed", config.seed},
                        {"n", 1}};
    if (chat) {
      body["messages"] = nlohmann::json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                                {{"role", "user"}, {"content", prompt.user_text}}});
      body["logprobs"] = true;
      body["top_logprobs"] = config.top_logprobs;
    } else {
      body["prompt"] = prompt.system_text + "\n\n" + prompt.user_text;
      body["logprobs"] = config.top_logprobs;
    }
    const std::string path = prefix_ + (chat ? "/chat/completions" : "/completions");

    httplib::Client client(origin_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
    spdlog::debug("POST {}{} (Authorization: {}) {}", origin_, path, options_.api_key.empty() ? "none" : "Bearer ***",
                  body.dump());

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + origin_ + path + " failed: " + httplib::to_string(res.error()));
    spdlog::debug("HTTP {} {}", res->status, res->body);
    if (res->status == 429 || res->status >= 500)
      throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
    if (res->status != 200) {
      if (res->body.find("logprobs") != std::string::npos)
        throw CapabilityError("endpoint rejected the logprobs request: HTTP " + std::to_string(res->status) + " " +
                              res->body);
      throw Error("http", "endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw TransportError(std::string("endpoint returned malformed JSON: ") + e.what());
    }
    return chat ? parse_chat(j) : parse_completion(j);
  }

  static TokenResponse parse_completion(const nlohmann::json& j) {
    TokenResponse r;
    r.source = ResponseSource::live;
    try {
      const auto& choice = j.at("choices").at(0);
      r.top_token = choice.at("text").get<std::string>();
      if (!choice.contains("logprobs") || choice.at("logprobs").is_null())
        throw CapabilityError("endpoint response has no logprobs; it does not support logprob output");
      const auto& top = choice.at("logprobs").at("top_logprobs");
      if (!top.is_array() || top.empty() || top.at(0).is_null())
        throw CapabilityError("endpoint response has no top_logprobs for the first token");
      for (const auto& [tok, lp] : top.at(0).items()) r.logprobs[tok] = lp.get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw CapabilityError(std::string("unexpected completion response shape: ") + e.what());
    }
    return r;
  }

  static TokenResponse parse_chat(const nlohmann::json& j) {
    TokenResponse r;
    r.source = ResponseSource::live;
    try {
      const auto& choice = j.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      r.top_token = content.is_null() ? "" : content.get<std::string>();
      if (!choice.contains("logprobs") || choice.at("logprobs").is_null())
        throw CapabilityError("endpoint response has no logprobs; it does not support logprob output");
      const auto& tokens = choice.at("logprobs").at("content");
      if (!tokens.is_array() || tokens.empty())
        throw CapabilityError("endpoint response has no logprobs for the first token");
      for (const auto& entry : tokens.at(0).at("top_logprobs"))
        r.logprobs[entry.at("token").get<std::string>()] = entry.at("logprob").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw CapabilityError(std::string("unexpected chat response shape: ") + e.what());
    }
    return r;
  }

 private:
  Options options_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace hatescore

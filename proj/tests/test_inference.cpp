#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "hatescore/mock_backend.hpp"
#include "hatescore/openai_backend.hpp"
#include "hatescore/synth.hpp"
#include "test_util.hpp"

using namespace hatescore;

namespace {

RenderedPrompt prompt(const std::string& user, std::vector<std::string> labels = {"0", "1", "2"}) {
  RenderedPrompt p;
  p.system_text = "sys";
  p.user_text = user;
  p.expected_label_set = std::move(labels);
  p.meta.comment_id = "c1";
  return p;
}

TokenResponse answer(const std::string& top) {
  TokenResponse r;
  r.top_token = top;
  r.logprobs = {{"0", -2.0}, {"1", -0.2}, {"2", -3.0}};
  return r;
}

/// Echoes the user text length as the label; optionally fails the first
/// `failures` calls with a transport error.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(int failures = 0) : failures_(failures) {}
  TokenResponse complete(const RenderedPrompt& p, const DecodingConfig&) override {
    const int n = ++calls_;
    if (n <= failures_) throw TransportError("connection refused");
    return answer(std::to_string(p.user_text.size() % 3));
  }
  int calls() const { return calls_.load(); }

 private:
  int failures_;
  std::atomic<int> calls_{0};
};

class FixedBackend : public Backend {
 public:
  explicit FixedBackend(TokenResponse r) : r_(std::move(r)) {}
  TokenResponse complete(const RenderedPrompt&, const DecodingConfig&) override {
    ++calls;
    return r_;
  }
  int calls = 0;

 private:
  TokenResponse r_;
};

class ThrowingBackend : public Backend {
 public:
  TokenResponse complete(const RenderedPrompt&, const DecodingConfig&) override {
    ++calls;
    throw CapabilityError("no logprobs");
  }
  int calls = 0;
};

RetryPolicy fast_retry(int attempts = 3) { return {attempts, std::chrono::milliseconds(1)}; }

/// Local OpenAI-compatible server recording the last request.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mu;
  nlohmann::json last_body;
  std::string last_auth;
  std::string last_path;
  int status = 200;
  std::string reply;

  FakeServer() {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      last_body = nlohmann::json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      last_path = req.path;
      res.status = status;
      res.set_content(reply, "application/json");
    };
    server.Post("/v1/completions", handler);
    server.Post("/v1/chat/completions", handler);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/"; }
};

const char* kCompletionReply = R"({"choices":[{"text":" 1","logprobs":{"tokens":[" 1"],
  "top_logprobs":[{" 1":-0.1," 0":-2.4,"The":-4.0}]}}]})";
const char* kChatReply = R"({"choices":[{"message":{"role":"assistant","content":"2"},"logprobs":{"content":[
  {"token":"2","logprob":-0.3,"top_logprobs":[{"token":"2","logprob":-0.3},{"token":"3","logprob":-1.5}]}]}}]})";

}  // namespace

TEST(CacheKey, CoversContentAndDecodingButNotEndpoint) {
  DecodingConfig a, b;
  b.endpoint_url = "http://elsewhere:8000/v1";
  EXPECT_EQ(cache_key(prompt("x"), a), cache_key(prompt("x"), b));
  b.model_name = "other";
  EXPECT_NE(cache_key(prompt("x"), a), cache_key(prompt("x"), b));
  b = a;
  b.top_logprobs = 5;
  EXPECT_NE(cache_key(prompt("x"), a), cache_key(prompt("x"), b));
  EXPECT_NE(cache_key(prompt("x"), a), cache_key(prompt("y"), a));
  EXPECT_EQ(cache_key(prompt("x"), a).size(), 64u);
}

TEST(DecodingConfig, Validation) {
  DecodingConfig c;
  EXPECT_NO_THROW(c.validate());
  c.max_tokens = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.temperature = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.top_logprobs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  ScriptedBackend b;
  EXPECT_THROW(InferenceClient(b, c), ConfigError);
}

TEST(ResponseCache, FileRoundTripAndMalformedTail) {
  testutil::TempDir dir;
  const auto path = dir / "cache" / "responses.jsonl";
  {
    ResponseCache cache(path);
    cache.put("k1", answer("1"));
    cache.put("k2", answer("2"));
    cache.put("k1", answer("1"));
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_THROW(cache.put("k1", answer("0")), CacheCorruptionError);
  }
  {
    std::ofstream append(path, std::ios::app);
    append << "{\"key\":\"k3\",\"top_tok";
  }
  ResponseCache reopened(path);
  EXPECT_EQ(reopened.size(), 2u);
  EXPECT_EQ(reopened.skipped_lines(), 1u);
  auto hit = reopened.get("k2");
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->top_token, "2");
  EXPECT_EQ(hit->logprobs, answer("2").logprobs);
  EXPECT_EQ(hit->source, ResponseSource::cache);
  EXPECT_FALSE(reopened.get("k3").has_value());
}

TEST(ResponseCache, ConflictingLinesAreCorruption) {
  testutil::TempDir dir;
  const auto path = dir / "c.jsonl";
  testutil::write_file(path, R"({"key":"k","top_token":"1","logprobs":{"1":-0.1}})"
                             "\n"
                             R"({"key":"k","top_token":"0","logprobs":{"0":-0.1}})"
                             "\n");
  EXPECT_THROW(ResponseCache{path}, CacheCorruptionError);
}

TEST(InferenceClient, CacheHitSkipsBackend) {
  ScriptedBackend backend;
  ResponseCache cache;
  InferenceClient client(backend, DecodingConfig{}, &cache);
  const auto first = client.complete_single_token(prompt("abc"));
  const auto second = client.complete_single_token(prompt("abc"));
  EXPECT_EQ(backend.calls(), 1);
  EXPECT_EQ(client.cache_hits(), 1u);
  EXPECT_EQ(second.source, ResponseSource::cache);
  EXPECT_TRUE(ResponseCache::same_content(first, second));
}

TEST(InferenceClient, RetriesTransientFailures) {
  ScriptedBackend backend(2);
  InferenceClient client(backend, DecodingConfig{}, nullptr, fast_retry(3));
  EXPECT_NO_THROW(client.complete_single_token(prompt("abc")));
  EXPECT_EQ(backend.calls(), 3);
}

TEST(InferenceClient, ExhaustedRetriesNameThePrompt) {
  ScriptedBackend backend(100);
  ResponseCache cache;
  InferenceClient client(backend, DecodingConfig{}, &cache, fast_retry(3));
  const auto p = prompt("abc");
  try {
    client.complete_single_token(p);
    FAIL() << "expected InferenceError";
  } catch (const InferenceError& e) {
    EXPECT_EQ(e.prompt_hash(), cache_key(p, DecodingConfig{}));
    EXPECT_NE(std::string(e.what()).find(e.prompt_hash()), std::string::npos);
  }
  EXPECT_EQ(backend.calls(), 3);
  EXPECT_EQ(cache.size(), 0u);
}

TEST(InferenceClient, CapabilityErrorsAreNotRetried) {
  ThrowingBackend backend;
  InferenceClient client(backend, DecodingConfig{}, nullptr, fast_retry(5));
  EXPECT_THROW(client.complete_single_token(prompt("abc")), CapabilityError);
  EXPECT_EQ(backend.calls, 1);

  TokenResponse empty;
  empty.top_token = "1";
  FixedBackend no_lp(empty);
  InferenceClient c2(no_lp, DecodingConfig{}, nullptr, fast_retry(5));
  EXPECT_THROW(c2.complete_single_token(prompt("abc")), CapabilityError);
  EXPECT_EQ(no_lp.calls, 1);

  TokenResponse positive = answer("1");
  positive.logprobs["1"] = 0.5;
  FixedBackend bad_lp(positive);
  InferenceClient c3(bad_lp, DecodingConfig{});
  EXPECT_THROW(c3.complete_single_token(prompt("abc")), CapabilityError);
}

TEST(InferenceClient, CountsLabelCoverageGaps) {
  TokenResponse r;
  r.top_token = "1";
  r.logprobs = {{"1", -0.1}, {"The", -3.0}};
  FixedBackend backend(r);
  InferenceClient client(backend, DecodingConfig{});
  client.complete_single_token(prompt("abc"));
  EXPECT_EQ(client.coverage_warnings(), 1u);
  client.complete_single_token(prompt("abc", {"1"}));
  EXPECT_EQ(client.coverage_warnings(), 1u);
}

TEST(BatchAnnotate, OrderIndependentOfParallelism) {
  std::vector<RenderedPrompt> prompts;
  for (int i = 0; i < 200; ++i) prompts.push_back(prompt(std::string(static_cast<std::size_t>(i), 'x')));
  auto run = [&](std::size_t parallelism) {
    ScriptedBackend backend;
    InferenceClient client(backend, DecodingConfig{});
    BatchOptions o;
    o.parallelism = parallelism;
    return batch_annotate(client, std::span<const RenderedPrompt>(prompts), o);
  };
  const auto serial = run(1), parallel = run(8);
  ASSERT_EQ(serial.size(), 200u);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(std::get<TokenResponse>(serial[i]).top_token, std::to_string(i % 3));
    EXPECT_EQ(std::get<TokenResponse>(parallel[i]).top_token, std::get<TokenResponse>(serial[i]).top_token);
  }
}

TEST(BatchAnnotate, FailuresStayInTheirSlot) {
  CommentRecord c;
  c.comment_id = "c1";
  c.text = "text";
  AnnotatorProfile incomplete;
  incomplete.annotator_id = "a1";
  std::vector<AnnotationTask> tasks{
      {&c, Attribute::insult, PromptCondition::vanilla(), nullptr},
      {&c, Attribute::insult, PromptCondition::persona(), &incomplete},
      {&c, Attribute::violence, PromptCondition::vanilla(), nullptr},
  };
  ScriptedBackend backend;
  InferenceClient client(backend, DecodingConfig{});
  const auto results = batch_annotate(client, PromptRenderer{}, tasks);
  EXPECT_TRUE(std::holds_alternative<TokenResponse>(results[0]));
  ASSERT_TRUE(std::holds_alternative<TaskFailure>(results[1]));
  EXPECT_EQ(std::get<TaskFailure>(results[1]).kind, "persona");
  EXPECT_TRUE(std::holds_alternative<TokenResponse>(results[2]));
  EXPECT_EQ(backend.calls(), 2);
}

TEST(BatchAnnotate, TenThousandMockTasksFillTheCache) {
  WorldConfig cfg;
  cfg.n_comments = 1000;
  cfg.n_annotators = 50;
  const auto world = generate_world(cfg);
  std::vector<CommentRecord> comments;
  for (const auto& c : world.comments) {
    CommentRecord r;
    r.comment_id = c.comment_id;
    r.text = "Synthetic comment " + c.comment_id + ".";
    comments.push_back(r);
  }
  std::vector<AnnotationTask> tasks;
  for (const auto& c : comments)
    for (auto a : all_attributes()) tasks.push_back({&c, a, PromptCondition::vanilla(), nullptr});
  ASSERT_EQ(tasks.size(), 10000u);

  testutil::TempDir dir;
  MockBackend backend(world);
  {
    ResponseCache cache(dir / "cache.jsonl");
    InferenceClient client(backend, DecodingConfig{}, &cache);
    BatchOptions o;
    o.parallelism = 4;
    const auto results = batch_annotate(client, PromptRenderer{}, tasks, o);
    for (const auto& r : results) ASSERT_TRUE(std::holds_alternative<TokenResponse>(r));
    EXPECT_EQ(cache.size(), 10000u);
  }
  ResponseCache reopened(dir / "cache.jsonl");
  EXPECT_EQ(reopened.size(), 10000u);
  InferenceClient again(backend, DecodingConfig{}, &reopened);
  batch_annotate(again, PromptRenderer{}, tasks);
  EXPECT_EQ(again.backend_calls(), 0u);
  EXPECT_EQ(backend.calls(), 10000u);
}

TEST(OpenAIBackend, CompletionsRequestAndResponse) {
  FakeServer fake;
  fake.reply = kCompletionReply;
  OpenAIBackend backend(fake.url(), {"secret-key", std::chrono::seconds(5)});
  DecodingConfig cfg;
  cfg.model_name = "m";
  cfg.top_logprobs = 7;
  const auto r = backend.complete(prompt("rate this"), cfg);
  EXPECT_EQ(fake.last_path, "/v1/completions");
  EXPECT_EQ(fake.last_auth, "Bearer secret-key");
  EXPECT_EQ(fake.last_body["prompt"], "sys\n\nrate this");
  EXPECT_EQ(fake.last_body["logprobs"], 7);
  EXPECT_EQ(fake.last_body["max_tokens"], 1);
  EXPECT_EQ(fake.last_body["temperature"], 0.0);
  EXPECT_EQ(fake.last_body["model"], "m");
  EXPECT_EQ(r.top_token, " 1");
  EXPECT_EQ(r.logprobs.size(), 3u);
  EXPECT_DOUBLE_EQ(r.logprobs.at(" 0"), -2.4);
  EXPECT_EQ(r.source, ResponseSource::live);
}

TEST(OpenAIBackend, ChatRequestAndResponse) {
  FakeServer fake;
  fake.reply = kChatReply;
  OpenAIBackend backend(fake.url(), {"", std::chrono::seconds(5)});
  DecodingConfig cfg;
  cfg.api_style = ApiStyle::chat;
  const auto r = backend.complete(prompt("rate this"), cfg);
  EXPECT_EQ(fake.last_path, "/v1/chat/completions");
  EXPECT_EQ(fake.last_auth, "");
  EXPECT_EQ(fake.last_body["messages"][0]["content"], "sys");
  EXPECT_EQ(fake.last_body["messages"][1]["content"], "rate this");
  EXPECT_EQ(fake.last_body["logprobs"], true);
  EXPECT_EQ(fake.last_body["top_logprobs"], 20);
  EXPECT_EQ(r.top_token, "2");
  EXPECT_DOUBLE_EQ(r.logprobs.at("3"), -1.5);
}

TEST(OpenAIBackend, HttpErrorsMapToKinds) {
  FakeServer fake;
  OpenAIBackend backend(fake.url(), {"", std::chrono::seconds(5)});
  fake.status = 503;
  fake.reply = "{}";
  EXPECT_THROW(backend.complete(prompt("x"), DecodingConfig{}), TransportError);
  fake.status = 429;
  EXPECT_THROW(backend.complete(prompt("x"), DecodingConfig{}), TransportError);
  fake.status = 400;
  fake.reply = R"({"error":"logprobs are not supported for this model"})";
  EXPECT_THROW(backend.complete(prompt("x"), DecodingConfig{}), CapabilityError);
  fake.reply = R"({"error":"bad request"})";
  try {
    backend.complete(prompt("x"), DecodingConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "http");
  }
  fake.status = 200;
  fake.reply = R"({"choices":[{"text":"1","logprobs":null}]})";
  EXPECT_THROW(backend.complete(prompt("x"), DecodingConfig{}), CapabilityError);
}

TEST(OpenAIBackend, UnreachableEndpointIsRetriedThenFails) {
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  OpenAIBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1", {"", std::chrono::seconds(2)});
  InferenceClient client(backend, DecodingConfig{}, nullptr, fast_retry(2));
  EXPECT_THROW(client.complete_single_token(prompt("x")), InferenceError);
  EXPECT_EQ(client.backend_calls(), 2u);
  EXPECT_THROW(OpenAIBackend("localhost:8000"), ConfigError);
}

TEST(OpenAIBackend, ParsesResponseFixtures) {
  const auto c = OpenAIBackend::parse_completion(nlohmann::json::parse(kCompletionReply));
  EXPECT_EQ(c.top_token, " 1");
  EXPECT_DOUBLE_EQ(c.logprobs.at("The"), -4.0);
  const auto h = OpenAIBackend::parse_chat(nlohmann::json::parse(kChatReply));
  EXPECT_EQ(h.logprobs.size(), 2u);
  EXPECT_THROW(OpenAIBackend::parse_chat(nlohmann::json::parse(R"({"choices":[]})")), CapabilityError);
  EXPECT_THROW(OpenAIBackend::parse_completion(nlohmann::json::parse(R"({"choices":[{"text":"1"}]})")),
               CapabilityError);
}

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelbench/common.hpp"

namespace novelbench {

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

enum class Role : std::uint8_t { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string text;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    std::string request_tag;  // trial identifier; not part of the cache key
    int sample_index = 0;     // distinguishes sampled paths in the cache key
};

/// Throws ConfigError if the request violates its invariants.
void validate(const ChatRequest& request);

struct TokenUsage {
    int prompt = 0;
    int completion = 0;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    bool cached = false;
    int attempts = 0;  // provider round-trips made by this call (0 on a cache hit)
};

/// What a provider returns for one successful round-trip.
struct ProviderReply {
    std::string text;
    TokenUsage usage;
};

enum class FailureKind : std::uint8_t { Transient, Permanent };

class ProviderError : public Error {
  public:
    ProviderError(FailureKind kind, int status, const std::string& what)
        : Error(what), kind_(kind), status_(status) {}

    [[nodiscard]] FailureKind kind() const { return kind_; }
    [[nodiscard]] bool transient() const { return kind_ == FailureKind::Transient; }
    /// HTTP status, or 0 for network-level failures.
    [[nodiscard]] int status() const { return status_; }

  private:
    FailureKind kind_;
    int status_;
};

/// Raised by a scripted mock when it runs out of responses.
class MockExhaustedError : public ProviderError {
  public:
    explicit MockExhaustedError(const std::string& what) : ProviderError(FailureKind::Permanent, 0, what) {}
};

class ChatProvider {
  public:
    virtual ~ChatProvider() = default;
    virtual ProviderReply complete(const ChatRequest& request) = 0;
    [[nodiscard]] virtual bool is_mock() const { return false; }
};

// ---------------------------------------------------------------------------
// HTTP transport
// ---------------------------------------------------------------------------

struct HttpResponse {
    int status = 0;  // 0 => network error, see `error`
    std::string body;
    std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
  public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) = 0;
};

/// cpp-httplib backed transport (http and https).
std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(120));

/// Total requests issued by real HTTP transports in this process.
std::size_t http_requests_sent();

/// 408/425/429/5xx and network errors are transient; everything else permanent.
FailureKind classify_http_status(int status);

/// Reads a bearer token from the named environment variable; empty if unset.
std::string api_key_from_env(const std::string& variable);

/// OpenAI-compatible chat completions: POST {base_url}/chat/completions.
class HttpChatProvider final : public ChatProvider {
  public:
    HttpChatProvider(std::string base_url, std::string api_key, std::shared_ptr<HttpTransport> transport);

    ProviderReply complete(const ChatRequest& request) override;

    [[nodiscard]] static nlohmann::json request_body(const ChatRequest& request);

  private:
    std::string url_;
    std::string api_key_;
    std::shared_ptr<HttpTransport> transport_;
};

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

using MockRule = std::function<std::string(const ChatRequest&)>;

/// Deterministic provider: consumes a script in order or applies a rule.
/// Every request is recorded. Never touches the network.
class MockChatProvider final : public ChatProvider {
  public:
    static std::shared_ptr<MockChatProvider> scripted(std::vector<std::string> script);
    static std::shared_ptr<MockChatProvider> with_rule(MockRule rule);

    ProviderReply complete(const ChatRequest& request) override;
    [[nodiscard]] bool is_mock() const override { return true; }

    [[nodiscard]] std::vector<ChatRequest> requests() const;
    [[nodiscard]] std::size_t call_count() const;

  private:
    MockChatProvider() = default;

    mutable std::mutex mu_;
    std::vector<std::string> script_;
    std::size_t next_ = 0;
    MockRule rule_;
    std::vector<ChatRequest> recorded_;
};

/// Convenience factory mirroring the two construction modes.
std::shared_ptr<MockChatProvider> make_mock(std::vector<std::string> script);
std::shared_ptr<MockChatProvider> make_mock(MockRule rule);

namespace mock_rules {

/// Always answers with a fixed text.
MockRule constant(std::string text);

/// Always picks the first presented paper.
MockRule always_first();

/// Reads "Paper X Average Contextual Date: <date>" and the Paper Y line from
/// the prompt and names the slot with the later date using the closing
/// sentence. Equal or missing dates get a non-committal answer.
MockRule date_aware();

/// Looks up a rule by name: "first", "second", "date-aware".
std::optional<MockRule> by_name(std::string_view name);

}  // namespace mock_rules

// ---------------------------------------------------------------------------
// Retry, clock and rate limiting
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{1000};
    double multiplier = 2.0;

    [[nodiscard]] std::chrono::milliseconds delay_before_retry(int retry_number) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper real_sleeper();

/// Runs `fn` until it succeeds, a permanent ProviderError is thrown, or the
/// retry budget is spent. `attempts` receives the number of invocations.
template <typename Fn>
auto call_with_retries(const RetryPolicy& policy, const Sleeper& sleep, Fn&& fn, int& attempts) {
    attempts = 0;
    for (;;) {
        ++attempts;
        try {
            return fn();
        } catch (const ProviderError& e) {
            if (!e.transient() || attempts > policy.max_retries) throw;
            if (sleep) sleep(policy.delay_before_retry(attempts));
        }
    }
}

class Clock {
  public:
    using time_point = std::chrono::steady_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_until(time_point t) = 0;
};

std::shared_ptr<Clock> system_clock();

/// Test clock: sleeping advances time instantly.
class ManualClock final : public Clock {
  public:
    time_point now() override;
    void sleep_until(time_point t) override;
    void advance(std::chrono::nanoseconds d);

  private:
    std::mutex mu_;
    time_point now_{};
};

/// Sliding-window limiter: at most `per_second` acquisitions in any window of
/// one second.
class RateLimiter {
  public:
    RateLimiter(int per_second, std::shared_ptr<Clock> clock);

    void acquire();
    [[nodiscard]] int limit() const { return limit_; }

  private:
    int limit_;
    std::shared_ptr<Clock> clock_;
    std::mutex mu_;
    std::deque<Clock::time_point> recent_;
};

// ---------------------------------------------------------------------------
// Response cache
// ---------------------------------------------------------------------------

/// Content-addressed response store. With a directory, entries persist as
/// `<dir>/chat-v1/<key[0:2]>/<key>.json`; without one it is memory only.
class ResponseCache {
  public:
    static constexpr std::string_view kLayoutVersion = "chat-v1";

    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir);

    static std::string key_for(const ChatRequest& request);

    [[nodiscard]] std::optional<ProviderReply> get(const std::string& key) const;
    void put(const std::string& key, const ChatRequest& request, const ProviderReply& reply);
    [[nodiscard]] std::size_t size() const;

  private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::string, ProviderReply> memory_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct GatewayOptions {
    std::shared_ptr<ResponseCache> cache;  // optional
    std::shared_ptr<RateLimiter> limiter;  // optional
    RetryPolicy retry;
    Sleeper sleeper = real_sleeper();
    std::string default_model = "gpt-4o-mini";
};

/// Thread-safe chat access with caching, retries and rate limiting.
class Gateway {
  public:
    Gateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options = {});

    ChatResponse chat(ChatRequest request);

    [[nodiscard]] const std::string& default_model() const { return options_.default_model; }
    [[nodiscard]] bool is_mock() const { return provider_->is_mock(); }
    /// Provider round-trips made (retries included, cache hits excluded).
    [[nodiscard]] std::size_t provider_round_trips() const { return round_trips_.load(); }

  private:
    std::shared_ptr<ChatProvider> provider_;
    GatewayOptions options_;
    std::atomic<std::size_t> round_trips_{0};
};

}  // namespace novelbench

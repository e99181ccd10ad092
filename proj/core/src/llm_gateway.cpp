#include "novelbench/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace novelbench {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

void validate(const ChatRequest& request) {
    if (request.messages.empty()) throw ConfigError("chat request has no messages");
    if (request.messages.front().role == Role::Assistant) {
        throw ConfigError("chat request must start with a system or user message");
    }
    if (request.temperature && *request.temperature < 0.0) throw ConfigError("negative temperature");
    if (request.max_tokens && *request.max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

// ---------------------------------------------------------------------------
// HTTP provider
// ---------------------------------------------------------------------------

FailureKind classify_http_status(int status) {
    if (status == 0 || status == 408 || status == 425 || status == 429 || status >= 500) {
        return FailureKind::Transient;
    }
    return FailureKind::Permanent;
}

std::string api_key_from_env(const std::string& variable) {
    if (variable.empty()) return {};
    const char* value = std::getenv(variable.c_str());
    return value ? std::string(value) : std::string();
}

HttpChatProvider::HttpChatProvider(std::string base_url, std::string api_key,
                                   std::shared_ptr<HttpTransport> transport)
    : url_(std::move(base_url)), api_key_(std::move(api_key)), transport_(std::move(transport)) {
    while (!url_.empty() && url_.back() == '/') url_.pop_back();
    url_ += "/chat/completions";
    if (!transport_) throw ConfigError("HttpChatProvider requires a transport");
}

json HttpChatProvider::request_body(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    }
    json body = {{"model", request.model_id}, {"messages", std::move(messages)}};
    if (request.temperature) body["temperature"] = *request.temperature;
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
    return body;
}

ProviderReply HttpChatProvider::complete(const ChatRequest& request) {
    HttpHeaders headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

    const auto res = transport_->post_json(url_, request_body(request).dump(), headers);
    if (res.status != 200) {
        std::string what = "chat provider returned status " + std::to_string(res.status);
        if (!res.error.empty()) what += ": " + res.error;
        throw ProviderError(classify_http_status(res.status), res.status, what);
    }
    json body = json::parse(res.body, nullptr, false);
    if (body.is_discarded()) throw ProviderError(FailureKind::Transient, res.status, "malformed provider response");
    try {
        ProviderReply reply;
        const auto& content = body.at("choices").at(0).at("message").at("content");
        reply.text = content.is_string() ? content.get<std::string>() : std::string();
        if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
            reply.usage.prompt = usage->value("prompt_tokens", 0);
            reply.usage.completion = usage->value("completion_tokens", 0);
        }
        return reply;
    } catch (const json::exception& e) {
        throw ProviderError(FailureKind::Transient, res.status, std::string("unexpected provider payload: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

std::shared_ptr<MockChatProvider> MockChatProvider::scripted(std::vector<std::string> script) {
    if (script.empty()) throw ConfigError("mock script must not be empty");
    std::shared_ptr<MockChatProvider> mock(new MockChatProvider());
    mock->script_ = std::move(script);
    return mock;
}

std::shared_ptr<MockChatProvider> MockChatProvider::with_rule(MockRule rule) {
    if (!rule) throw ConfigError("mock rule must be callable");
    std::shared_ptr<MockChatProvider> mock(new MockChatProvider());
    mock->rule_ = std::move(rule);
    return mock;
}

ProviderReply MockChatProvider::complete(const ChatRequest& request) {
    std::string text;
    {
        std::lock_guard lock(mu_);
        recorded_.push_back(request);
        if (!rule_) {
            if (next_ >= script_.size()) {
                throw MockExhaustedError("mock script exhausted after " + std::to_string(script_.size()) +
                                         " responses");
            }
            text = script_[next_++];
        }
    }
    if (rule_) text = rule_(request);
    ProviderReply reply;
    reply.text = std::move(text);
    return reply;
}

std::vector<ChatRequest> MockChatProvider::requests() const {
    std::lock_guard lock(mu_);
    return recorded_;
}

std::size_t MockChatProvider::call_count() const {
    std::lock_guard lock(mu_);
    return recorded_.size();
}

std::shared_ptr<MockChatProvider> make_mock(std::vector<std::string> script) {
    return MockChatProvider::scripted(std::move(script));
}

std::shared_ptr<MockChatProvider> make_mock(MockRule rule) {
    return MockChatProvider::with_rule(std::move(rule));
}

namespace mock_rules {

namespace {

std::string all_text(const ChatRequest& request) {
    std::string text;
    for (const auto& m : request.messages) {
        text += m.text;
        text += '\n';
    }
    return text;
}

std::optional<Date> labelled_date(const std::string& text, const std::string& label) {
    // Last occurrence wins so that retry turns see the original prompt.
    auto pos = text.rfind(label);
    if (pos == std::string::npos) return std::nullopt;
    pos += label.size();
    auto end = text.find('\n', pos);
    return Date::parse(text.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
}

MockRule pick_slot(bool first) {
    return [first](const ChatRequest& request) {
        const auto text = all_text(request);
        if (text.find("Paper X") != std::string::npos) {
            return std::string("The more novel and impactful paper is Paper ") + (first ? "X" : "Y");
        }
        return std::string(first ? "1" : "2");
    };
}

}  // namespace

MockRule constant(std::string text) {
    return [text = std::move(text)](const ChatRequest&) { return text; };
}

MockRule always_first() { return pick_slot(true); }

MockRule date_aware() {
    return [](const ChatRequest& request) {
        const auto text = all_text(request);
        const auto x = labelled_date(text, "Paper X Average Contextual Date:");
        const auto y = labelled_date(text, "Paper Y Average Contextual Date:");
        if (!x || !y || *x == *y) return std::string("Both papers appear comparably novel.");
        return std::string("The more novel and impactful paper is Paper ") + (*x > *y ? "X" : "Y");
    };
}

std::optional<MockRule> by_name(std::string_view name) {
    if (name == "first") return always_first();
    if (name == "second") return pick_slot(false);
    if (name == "date-aware") return date_aware();
    return std::nullopt;
}

}  // namespace mock_rules

// ---------------------------------------------------------------------------
// Retry, clock, rate limiter
// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_before_retry(int retry_number) const {
    const double factor = std::pow(multiplier, std::max(0, retry_number - 1));
    return std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(base_delay.count()) * factor));
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

namespace {

class SteadyClock final : public Clock {
  public:
    time_point now() override { return std::chrono::steady_clock::now(); }
    void sleep_until(time_point t) override { std::this_thread::sleep_until(t); }
};

}  // namespace

std::shared_ptr<Clock> system_clock() {
    static auto clock = std::make_shared<SteadyClock>();
    return clock;
}

ManualClock::time_point ManualClock::now() {
    std::lock_guard lock(mu_);
    return now_;
}

void ManualClock::sleep_until(time_point t) {
    std::lock_guard lock(mu_);
    if (t > now_) now_ = t;
}

void ManualClock::advance(std::chrono::nanoseconds d) {
    std::lock_guard lock(mu_);
    now_ += d;
}

RateLimiter::RateLimiter(int per_second, std::shared_ptr<Clock> clock)
    : limit_(per_second), clock_(std::move(clock)) {
    if (limit_ < 1) throw ConfigError("rate limit must be at least 1 request per second");
    if (!clock_) clock_ = system_clock();
}

void RateLimiter::acquire() {
    std::lock_guard lock(mu_);
    auto now = clock_->now();
    while (!recent_.empty() && now - recent_.front() >= std::chrono::seconds(1)) recent_.pop_front();
    if (static_cast<int>(recent_.size()) >= limit_) {
        clock_->sleep_until(recent_.front() + std::chrono::seconds(1));
        now = clock_->now();
        while (!recent_.empty() && now - recent_.front() >= std::chrono::seconds(1)) recent_.pop_front();
    }
    recent_.push_back(now);
}

// ---------------------------------------------------------------------------
// Response cache
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_ / kLayoutVersion, ec);
    if (ec) throw IoError("cannot create cache directory " + dir_->string() + ": " + ec.message());
}

std::string ResponseCache::key_for(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({to_string(m.role), m.text});
    json key = {
        {"model", request.model_id},
        {"messages", std::move(messages)},
        {"temperature", request.temperature ? json(*request.temperature) : json(nullptr)},
        {"max_tokens", request.max_tokens ? json(*request.max_tokens) : json(nullptr)},
        {"sample_index", request.sample_index},
    };
    return sha256_hex(key.dump());
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
    return *dir_ / kLayoutVersion / key.substr(0, 2) / (key + ".json");
}

std::optional<ProviderReply> ResponseCache::get(const std::string& key) const {
    {
        std::shared_lock lock(mu_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;

    std::ifstream in(entry_path(key), std::ios::binary);
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("text")) return std::nullopt;
    ProviderReply reply;
    reply.text = j["text"].get<std::string>();
    reply.usage.prompt = j.value("prompt_tokens", 0);
    reply.usage.completion = j.value("completion_tokens", 0);

    std::unique_lock lock(mu_);
    memory_.emplace(key, reply);
    return reply;
}

void ResponseCache::put(const std::string& key, const ChatRequest& request, const ProviderReply& reply) {
    std::unique_lock lock(mu_);
    if (memory_.contains(key)) return;  // first writer wins
    memory_.emplace(key, reply);
    if (!dir_) return;

    const auto path = entry_path(key);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    json entry = {
        {"key", key},
        {"request", HttpChatProvider::request_body(request)},
        {"sample_index", request.sample_index},
        {"text", reply.text},
        {"prompt_tokens", reply.usage.prompt},
        {"completion_tokens", reply.usage.completion},
    };
    // Write-then-rename so concurrent processes never observe a partial entry.
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache entry " + tmp.string());
        out << entry.dump();
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot publish cache entry " + path.string() + ": " + ec.message());
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mu_);
    return memory_.size();
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options)
    : provider_(std::move(provider)), options_(std::move(options)) {
    if (!provider_) throw ConfigError("gateway requires a provider");
}

ChatResponse Gateway::chat(ChatRequest request) {
    if (request.model_id.empty()) request.model_id = options_.default_model;
    validate(request);

    std::string key;
    if (options_.cache) {
        key = ResponseCache::key_for(request);
        if (auto hit = options_.cache->get(key)) {
            return ChatResponse{hit->text, hit->usage, /*cached=*/true, /*attempts=*/0};
        }
    }

    int attempts = 0;
    auto reply = call_with_retries(
        options_.retry, options_.sleeper,
        [&] {
            if (options_.limiter) options_.limiter->acquire();
            round_trips_.fetch_add(1);
            return provider_->complete(request);
        },
        attempts);

    if (options_.cache) options_.cache->put(key, request, reply);
    return ChatResponse{std::move(reply.text), reply.usage, /*cached=*/false, attempts};
}

}  // namespace novelbench

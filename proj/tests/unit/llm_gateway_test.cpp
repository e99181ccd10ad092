#include <gtest/gtest.h>

#include "novelbench/llm_gateway.hpp"
#include "testkit.hpp"

using namespace novelbench;
using namespace std::chrono_literals;

namespace {

ChatRequest simple_request(std::string text = "hello") {
    ChatRequest r;
    r.model_id = "m";
    r.messages = {{Role::System, "sys"}, {Role::User, std::move(text)}};
    return r;
}

// Provider failing `failures` times with `status` before answering.
class FlakyProvider final : public ChatProvider {
  public:
    FlakyProvider(int failures, int status) : failures_(failures), status_(status) {}
    ProviderReply complete(const ChatRequest&) override {
        ++calls;
        if (calls <= failures_) throw ProviderError(classify_http_status(status_), status_, "boom");
        return {"ok", {3, 1}};
    }
    int calls = 0;

  private:
    int failures_;
    int status_;
};

class FakeTransport final : public HttpTransport {
  public:
    explicit FakeTransport(HttpResponse response) : response_(std::move(response)) {}
    HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
        last_url = url;
        last_body = body;
        last_headers = headers;
        return response_;
    }
    std::string last_url, last_body;
    HttpHeaders last_headers;

  private:
    HttpResponse response_;
};

struct RecordingSleeper {
    std::vector<std::chrono::milliseconds> delays;
    Sleeper fn() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

}  // namespace

TEST(ChatRequest, Validation) {
    EXPECT_NO_THROW(validate(simple_request()));
    ChatRequest empty;
    EXPECT_THROW(validate(empty), ConfigError);
    auto r = simple_request();
    r.temperature = -0.1;
    EXPECT_THROW(validate(r), ConfigError);
    r = simple_request();
    r.max_tokens = 0;
    EXPECT_THROW(validate(r), ConfigError);
    r = simple_request();
    r.messages.insert(r.messages.begin(), {Role::Assistant, "x"});
    EXPECT_THROW(validate(r), ConfigError);
}

TEST(ResponseCache, KeyCoversDecodingButNotTag) {
    auto a = simple_request();
    auto b = a;
    b.request_tag = "some trial";
    EXPECT_EQ(ResponseCache::key_for(a), ResponseCache::key_for(b));
    b = a;
    b.sample_index = 1;
    EXPECT_NE(ResponseCache::key_for(a), ResponseCache::key_for(b));
    b = a;
    b.temperature = 0.7;
    EXPECT_NE(ResponseCache::key_for(a), ResponseCache::key_for(b));
    b = a;
    b.max_tokens = 200;
    EXPECT_NE(ResponseCache::key_for(a), ResponseCache::key_for(b));
    b = a;
    b.model_id = "other";
    EXPECT_NE(ResponseCache::key_for(a), ResponseCache::key_for(b));
}

TEST(Retry, BackoffSchedule) {
    RetryPolicy p;
    EXPECT_EQ(p.delay_before_retry(1), 1000ms);
    EXPECT_EQ(p.delay_before_retry(2), 2000ms);
    EXPECT_EQ(p.delay_before_retry(3), 4000ms);
}

TEST(Gateway, RetriesTransientFailures) {
    auto provider = std::make_shared<FlakyProvider>(2, 503);
    RecordingSleeper sleeper;
    GatewayOptions opts;
    opts.sleeper = sleeper.fn();
    Gateway gw(provider, opts);
    auto res = gw.chat(simple_request());
    EXPECT_EQ(res.text, "ok");
    EXPECT_EQ(res.attempts, 3);
    EXPECT_FALSE(res.cached);
    EXPECT_EQ(sleeper.delays, (std::vector<std::chrono::milliseconds>{1000ms, 2000ms}));
    EXPECT_EQ(gw.provider_round_trips(), 3u);
}

TEST(Gateway, GivesUpAfterRetryBudget) {
    auto provider = std::make_shared<FlakyProvider>(100, 429);
    RecordingSleeper sleeper;
    GatewayOptions opts;
    opts.sleeper = sleeper.fn();
    Gateway gw(provider, opts);
    EXPECT_THROW(gw.chat(simple_request()), ProviderError);
    EXPECT_EQ(provider->calls, 4);  // one attempt plus three retries
    EXPECT_EQ(sleeper.delays.size(), 3u);
}

TEST(Gateway, PermanentFailureIsNotRetried) {
    auto provider = std::make_shared<FlakyProvider>(100, 401);
    GatewayOptions opts;
    opts.sleeper = [](std::chrono::milliseconds) {};
    Gateway gw(provider, opts);
    EXPECT_THROW(gw.chat(simple_request()), ProviderError);
    EXPECT_EQ(provider->calls, 1);
}

TEST(Gateway, CacheHitSkipsProvider) {
    auto mock = make_mock(mock_rules::constant("answer"));
    GatewayOptions opts;
    opts.cache = std::make_shared<ResponseCache>();
    Gateway gw(mock, opts);
    auto first = gw.chat(simple_request());
    auto second = gw.chat(simple_request());
    EXPECT_EQ(first.attempts, 1);
    EXPECT_FALSE(first.cached);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(second.attempts, 0);
    EXPECT_EQ(second.text, "answer");
    EXPECT_EQ(mock->call_count(), 1u);
}

TEST(Gateway, FillsDefaultModel) {
    auto mock = make_mock(mock_rules::constant("x"));
    Gateway gw(mock);
    auto r = simple_request();
    r.model_id.clear();
    gw.chat(r);
    EXPECT_EQ(mock->requests().at(0).model_id, "gpt-4o-mini");
}

TEST(ResponseCache, DirectoryPersistsAcrossInstances) {
    testkit::TempDir dir;
    {
        GatewayOptions opts;
        opts.cache = std::make_shared<ResponseCache>(dir.path());
        Gateway gw(make_mock(mock_rules::constant("persisted")), opts);
        gw.chat(simple_request());
    }
    auto mock = make_mock(mock_rules::constant("fresh"));
    GatewayOptions opts;
    opts.cache = std::make_shared<ResponseCache>(dir.path());
    Gateway gw(mock, opts);
    auto res = gw.chat(simple_request());
    EXPECT_EQ(res.text, "persisted");
    EXPECT_TRUE(res.cached);
    EXPECT_EQ(mock->call_count(), 0u);

    const auto key = ResponseCache::key_for(simple_request());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "chat-v1" / key.substr(0, 2) / (key + ".json")));
}

TEST(RateLimiter, SlidingWindow) {
    auto clock = std::make_shared<ManualClock>();
    RateLimiter limiter(2, clock);
    const auto t0 = clock->now();
    limiter.acquire();
    limiter.acquire();
    EXPECT_EQ(clock->now(), t0);
    limiter.acquire();  // third call waits for the window to slide
    EXPECT_EQ(clock->now() - t0, std::chrono::seconds(1));
    clock->advance(std::chrono::milliseconds(500));
    limiter.acquire();  // one slot free in the window
    EXPECT_EQ(clock->now() - t0, std::chrono::milliseconds(1500));
    limiter.acquire();
    EXPECT_EQ(clock->now() - t0, std::chrono::seconds(2));
}

TEST(HttpProvider, BuildsOpenAiRequestAndParsesReply) {
    auto transport = std::make_shared<FakeTransport>(HttpResponse{
        200, R"({"choices":[{"message":{"content":"Paper X"}}],"usage":{"prompt_tokens":12,"completion_tokens":2}})",
        ""});
    HttpChatProvider provider("https://example.test/v1/", "sk-test", transport);
    auto req = simple_request();
    req.temperature = 0.7;
    req.max_tokens = 200;
    auto reply = provider.complete(req);
    EXPECT_EQ(reply.text, "Paper X");
    EXPECT_EQ(reply.usage.prompt, 12);
    EXPECT_EQ(transport->last_url, "https://example.test/v1/chat/completions");
    auto body = nlohmann::json::parse(transport->last_body);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["temperature"], 0.7);
    EXPECT_EQ(body["max_tokens"], 200);
    ASSERT_EQ(transport->last_headers.size(), 1u);
    EXPECT_EQ(transport->last_headers[0].second, "Bearer sk-test");
}

TEST(HttpProvider, ClassifiesErrors) {
    EXPECT_EQ(classify_http_status(0), FailureKind::Transient);
    EXPECT_EQ(classify_http_status(429), FailureKind::Transient);
    EXPECT_EQ(classify_http_status(502), FailureKind::Transient);
    EXPECT_EQ(classify_http_status(400), FailureKind::Permanent);
    EXPECT_EQ(classify_http_status(401), FailureKind::Permanent);

    auto transport = std::make_shared<FakeTransport>(HttpResponse{500, "", ""});
    HttpChatProvider provider("http://x", "", transport);
    try {
        provider.complete(simple_request());
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.transient());
        EXPECT_EQ(e.status(), 500);
    }
    EXPECT_TRUE(transport->last_headers.empty());
}

TEST(Mock, ScriptedAndRules) {
    auto scripted = make_mock(std::vector<std::string>{"a", "b"});
    EXPECT_EQ(scripted->complete(simple_request()).text, "a");
    EXPECT_EQ(scripted->complete(simple_request()).text, "b");
    EXPECT_THROW(scripted->complete(simple_request()), MockExhaustedError);
    EXPECT_TRUE(scripted->is_mock());

    auto first = *mock_rules::by_name("first");
    EXPECT_EQ(first(simple_request("Paper 1 Title: a")), "1");
    EXPECT_NE(first(simple_request("Paper X Title: a")).find("Paper X"), std::string::npos);
    auto second = *mock_rules::by_name("second");
    EXPECT_EQ(second(simple_request("Paper 1 Title: a")), "2");
    EXPECT_FALSE(mock_rules::by_name("nope"));

    auto dated = mock_rules::date_aware();
    EXPECT_NE(dated(simple_request("Paper X Average Contextual Date: 2020-01-01\n"
                                   "Paper Y Average Contextual Date: 2021-01-01\n"))
                  .find("Paper Y"),
              std::string::npos);
    EXPECT_EQ(dated(simple_request("Paper X Average Contextual Date: no retrieved context\n"
                                   "Paper Y Average Contextual Date: 2021-01-01\n")),
              "Both papers appear comparably novel.");
}

// cpp-httplib is heavy to compile; keep it confined to this translation unit.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "novelbench/llm_gateway.hpp"

namespace novelbench {

namespace {

std::atomic<std::size_t> g_requests_sent{0};

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("URL must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
  public:
    explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    HttpResponse post_json(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
        const auto parts = split_url(url);
        httplib::Client client(parts.origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);

        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);

        g_requests_sent.fetch_add(1);
        auto res = client.Post(parts.path, h, body, "application/json");
        HttpResponse out;
        if (!res) {
            out.status = 0;
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }

  private:
    std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
    return std::make_unique<HttplibTransport>(timeout);
}

std::size_t http_requests_sent() { return g_requests_sent.load(); }

}  // namespace novelbench

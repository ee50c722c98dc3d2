#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "stratchat/gateway.hpp"

namespace stratchat {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' lacks a scheme");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpTransport::HttpTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

HttpResponse HttpTransport::post(const ProviderProfile&, const HttpRequest& request) {
    auto url = split_url(request.url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
        if (k == "Content-Type")
            content_type = v;
        else
            headers.emplace(k, v);
    }
    auto res = client.Post(url.path, headers, request.body, content_type);
    if (!res) throw TransportError("POST " + request.url + " failed: " + httplib::to_string(res.error()), 1);
    return {res->status, res->body};
}

}  // namespace stratchat

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/gateway.hpp"

namespace stratchat {

struct MockReply {
    int status = 200;
    std::string content;
    bool connection_failure = false;
};

// In-process Transport speaking the chat-completions wire format. Replies come
// from a per-role queue first, then a per-role responder, then the default
// responder. Thread-safe.
class MockTransport : public Transport {
public:
    using Responder = std::function<MockReply(const ProviderProfile&, const nlohmann::json& request)>;

    void script(const std::string& role, std::string content);
    void script_reply(const std::string& role, MockReply reply);
    void set_responder(const std::string& role, Responder responder);
    void set_default_responder(Responder responder);
    // When off, only call counts are kept. On by default.
    void record_requests(bool on);

    int calls(const std::string& role) const;
    int total_calls() const;
    std::vector<nlohmann::json> requests(const std::string& role) const;
    std::size_t pending(const std::string& role) const;

    HttpResponse post(const ProviderProfile& profile, const HttpRequest& request) override;

    // Replies with the content of the last user message.
    static MockReply echo(const ProviderProfile&, const nlohmann::json& request);

private:
    mutable std::mutex mu_;
    std::map<std::string, std::deque<MockReply>> queues_;
    std::map<std::string, Responder> responders_;
    Responder fallback_;
    std::map<std::string, std::vector<nlohmann::json>> requests_;
    std::map<std::string, int> counts_;
    bool record_ = true;
    int counter_ = 0;
};

// Builds a chat-completions response body around one completion.
std::string mock_completion_body(const std::string& model, const std::string& content, int id);

// A gateway over a mock transport that never sleeps between retries.
struct MockGateway {
    std::shared_ptr<MockTransport> transport = std::make_shared<MockTransport>();
    Gateway gateway{transport, RetryPolicy{3, std::chrono::milliseconds(0), 2.0, std::chrono::milliseconds(0)},
                    [](std::chrono::milliseconds) {}};
};

}  // namespace stratchat

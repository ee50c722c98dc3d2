#include "stratchat/mock_provider.hpp"

#include <sstream>

namespace stratchat {

using nlohmann::json;

namespace {

int word_count(const std::string& s) {
    std::istringstream in(s);
    std::string w;
    int n = 0;
    while (in >> w) ++n;
    return n;
}

}  // namespace

std::string mock_completion_body(const std::string& model, const std::string& content, int id) {
    int completion = word_count(content);
    json body = {{"id", "mock-" + std::to_string(id)},
                 {"object", "chat.completion"},
                 {"model", model},
                 {"choices",
                  json::array({{{"index", 0},
                                {"message", {{"role", "assistant"}, {"content", content}}},
                                {"finish_reason", "stop"}}})},
                 {"usage", {{"prompt_tokens", 0}, {"completion_tokens", completion}, {"total_tokens", completion}}}};
    return body.dump();
}

void MockTransport::script(const std::string& role, std::string content) {
    script_reply(role, MockReply{200, std::move(content), false});
}

void MockTransport::script_reply(const std::string& role, MockReply reply) {
    std::lock_guard lock(mu_);
    queues_[role].push_back(std::move(reply));
}

void MockTransport::set_responder(const std::string& role, Responder responder) {
    std::lock_guard lock(mu_);
    responders_[role] = std::move(responder);
}

void MockTransport::set_default_responder(Responder responder) {
    std::lock_guard lock(mu_);
    fallback_ = std::move(responder);
}

void MockTransport::record_requests(bool on) {
    std::lock_guard lock(mu_);
    record_ = on;
}

int MockTransport::calls(const std::string& role) const {
    std::lock_guard lock(mu_);
    auto it = counts_.find(role);
    return it == counts_.end() ? 0 : it->second;
}

int MockTransport::total_calls() const {
    std::lock_guard lock(mu_);
    int n = 0;
    for (const auto& [_, v] : counts_) n += v;
    return n;
}

std::vector<json> MockTransport::requests(const std::string& role) const {
    std::lock_guard lock(mu_);
    auto it = requests_.find(role);
    return it == requests_.end() ? std::vector<json>{} : it->second;
}

std::size_t MockTransport::pending(const std::string& role) const {
    std::lock_guard lock(mu_);
    auto it = queues_.find(role);
    return it == queues_.end() ? 0 : it->second.size();
}

HttpResponse MockTransport::post(const ProviderProfile& profile, const HttpRequest& request) {
    json body = json::parse(request.body);
    MockReply reply;
    Responder responder;
    int id = 0;
    {
        std::lock_guard lock(mu_);
        ++counts_[profile.role];
        if (record_) requests_[profile.role].push_back(body);
        id = ++counter_;
        auto& q = queues_[profile.role];
        if (!q.empty()) {
            reply = std::move(q.front());
            q.pop_front();
        } else if (auto it = responders_.find(profile.role); it != responders_.end()) {
            responder = it->second;
        } else if (fallback_) {
            responder = fallback_;
        } else {
            throw ConfigError("mock transport has no reply for role '" + profile.role + "'");
        }
    }
    if (responder) reply = responder(profile, body);
    if (reply.connection_failure) throw TransportError("mock connection refused", 1);
    if (reply.status != 200) return {reply.status, R"({"error":{"message":"mock failure"}})"};
    return {200, mock_completion_body(profile.model, reply.content, id)};
}

MockReply MockTransport::echo(const ProviderProfile&, const json& request) {
    const auto& msgs = request.at("messages");
    for (auto it = msgs.rbegin(); it != msgs.rend(); ++it)
        if ((*it).at("role") == "user") return {200, (*it).at("content").get<std::string>(), false};
    return {200, "", false};
}

}  // namespace stratchat

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "stratchat/errors.hpp"
#include "stratchat/moderator.hpp"
#include "stratchat/workflows.hpp"

namespace stratchat {

class UnknownSessionError : public SessionError {
public:
    explicit UnknownSessionError(const std::string& id) : SessionError("unknown session '" + id + "'") {}
};

class ClosedSessionError : public SessionError {
public:
    explicit ClosedSessionError(const std::string& id) : SessionError("session '" + id + "' is closed") {}
};

// Body of POST /sessions. Profile fields name runtime profiles.
struct SessionRequest {
    ModeratorMode mode = ModeratorMode::Full;
    std::optional<int> warmup_turns;
    bool trace = false;           // expose decisions and emotions to the client
    bool record_prompts = false;  // keep prompts on moderator turns (implies trace)
    std::optional<std::string> opener;
    std::string strategy_provider = "strategy_provider";
    std::string generator;  // defaults by mode
    std::optional<std::string> extractor;
    std::optional<ValidationMode> validation;
};

// Throws ConfigError on bad fields.
SessionRequest session_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionRequest& r);

// In-memory session store. Calls on distinct sessions run concurrently;
// calls on one session are serialized.
class SessionService {
public:
    explicit SessionService(const Runtime& runtime, std::optional<fs::path> store_dir = std::nullopt);
    ~SessionService();

    // Generates u0. Provider failures propagate and no session is kept.
    nlohmann::json create_session(const SessionRequest& request);
    nlohmann::json post_message(const std::string& id, const std::string& text);
    nlohmann::json get_trace(const std::string& id) const;
    nlohmann::json close(const std::string& id);

    std::size_t size() const;

private:
    struct Record;
    std::shared_ptr<Record> find(const std::string& id) const;
    void persist(const Record& r) const;
    nlohmann::json step_view(const Record& r, const ModeratorStep& step) const;

    const Runtime* runtime_;
    std::optional<fs::path> store_dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Record>> sessions_;
    std::uint64_t counter_ = 0;
};

// HTTP facade:
//   POST /sessions                 create (201)
//   POST /sessions/{id}/messages   {"text": "..."}
//   GET  /sessions/{id}/trace
//   POST /sessions/{id}/close
//   GET  /healthz
// With an API key set, every route except /healthz needs
// "Authorization: Bearer <key>" or "X-API-Key: <key>".
class HttpService {
public:
    HttpService(SessionService& sessions, std::optional<std::string> api_key = std::nullopt);
    ~HttpService();

    // Binds to host:port (0 picks a free port) and returns the bound port.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Status code for an exception escaping a service call.
int http_status_for(const std::exception& e);

}  // namespace stratchat

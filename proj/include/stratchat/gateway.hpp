#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/dialogue.hpp"
#include "stratchat/strategy_pool.hpp"

namespace stratchat {

class PromptPack;

struct Sampling {
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    int n = 1;
    std::optional<double> presence_penalty;
    std::optional<double> frequency_penalty;

    bool operator==(const Sampling&) const = default;
};

// Endpoint plus sampling configuration for one chat-completion role
// (generator, strategy provider, extractor, annotator, judge, twin).
struct ProviderProfile {
    std::string role;
    std::string endpoint;  // full chat-completions URL
    std::string model;
    Sampling sampling;
    bool structured_output = false;
    std::string credentials_env;  // environment variable holding the API key
    int max_in_flight = 4;
    double requests_per_second = 0.0;  // 0 disables the rate limit

    bool operator==(const ProviderProfile&) const = default;
};

enum class ProfileKind { Generator, StrategyProvider, FreeTextStrategyProvider, Extractor, Annotator, Judge, Twin };

// Sampling defaults per role: n=1, max_tokens=1024, top_p=1, temperature=1,
// except the free-text strategy provider (top_p=0.9, temperature=0.6, both
// penalties 0).
ProviderProfile default_profile(std::string role, ProfileKind kind);

// Throws ConfigError on max_tokens <= 0, n != 1 or temperature < 0.
void validate_profile(const ProviderProfile& p);

nlohmann::json to_json(const ProviderProfile& p);
// Fields missing from j keep the value they have in base.
ProviderProfile profile_from_json(const nlohmann::json& j, ProviderProfile base = {});

// Chat-completions request body. Deterministic for a given input; keys are
// emitted in sorted order by dump().
nlohmann::json build_request(const ProviderProfile& profile, std::span<const ChatMessage> messages,
                             const nlohmann::json* response_format = nullptr);

std::vector<nlohmann::json> to_json(std::span<const ChatMessage> messages);

struct HttpRequest {
    std::string url;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Wire layer. post() throws TransportError when no HTTP response was obtained.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const ProviderProfile& profile, const HttpRequest& request) = 0;
};

class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::chrono::seconds timeout = std::chrono::seconds(120));
    HttpResponse post(const ProviderProfile& profile, const HttpRequest& request) override;

private:
    std::chrono::seconds timeout_;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int total_tokens = 0;
};

struct ChatExchange {
    std::vector<ChatMessage> messages;
    std::string response;
    std::optional<Usage> usage;
    std::chrono::milliseconds latency{0};
    int attempts = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
};

// Appends one JSON line per exchange to a file. Authorization headers are
// written as "Bearer ***".
class ExchangeLog {
public:
    explicit ExchangeLog(std::string path);
    void record(const ProviderProfile& profile, const HttpRequest& request, const HttpResponse* response,
                const std::string& error, int attempt, std::chrono::milliseconds latency);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::mutex mu_;
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit Gateway(std::shared_ptr<Transport> transport, RetryPolicy retry = {}, Sleeper sleeper = {});
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    void set_log(std::shared_ptr<ExchangeLog> log) { log_ = std::move(log); }
    const RetryPolicy& retry_policy() const { return retry_; }

    // Returns the first completion. Transport failures, 429 and 5xx are
    // retried with exponential backoff up to retry_policy().max_attempts.
    ChatExchange chat_complete(const ProviderProfile& profile, std::span<const ChatMessage> messages,
                               const nlohmann::json* response_format = nullptr) const;

private:
    struct Limits;
    Limits& limits_for(const ProviderProfile& profile) const;

    std::shared_ptr<Transport> transport_;
    RetryPolicy retry_;
    Sleeper sleeper_;
    std::shared_ptr<ExchangeLog> log_;
    mutable std::mutex limits_mu_;
    mutable std::map<std::string, std::unique_ptr<Limits>> limits_;
};

struct StructuredStrategyOutput {
    StrategyDecision decision;
    std::optional<Emotion> emotion;
    std::optional<std::string> rationale;
    std::string provider_text;  // raw completion of the strategy provider
    bool extracted = false;     // true when the extractor profile produced the structure
};

struct StrategyCallOptions {
    ValidationMode mode = ValidationMode::Strict;
    bool with_emotion = true;
    const ProviderProfile* extractor = nullptr;  // required for free-text providers
    const PromptPack* prompts = nullptr;         // extractor prompt; default pack if null
};

// The "Strategy" structured-output schema sent to capable providers.
nlohmann::json strategy_response_format(const StrategyPool& pool, bool with_emotion);

// Parses {"backward":..,"forward":..,"emotion":..,"rationale":..} or
// {"strategies":[...], ...}, tolerating surrounding prose or code fences.
// Throws MalformedOutputError (raw payload attached) or StrategyValidationError
// for shape violations such as three strategies.
StructuredStrategyOutput parse_strategy_payload(const std::string& text, const StrategyPool& pool);

// Asks the provider for a decision. Free-text providers get a second call to
// options.extractor. Unknown tags are always rejected; strict mode also
// rejects direction mismatches.
StructuredStrategyOutput structured_strategy_call(const Gateway& gateway, const ProviderProfile& provider,
                                                  std::span<const ChatMessage> messages,
                                                  const StrategyPool& pool,
                                                  const StrategyCallOptions& options = {});

}  // namespace stratchat

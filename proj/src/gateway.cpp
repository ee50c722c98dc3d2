#include "stratchat/gateway.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "stratchat/prompt_pack.hpp"

namespace stratchat {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

ProviderProfile default_profile(std::string role, ProfileKind kind) {
    ProviderProfile p;
    p.role = std::move(role);
    p.endpoint = "https://api.openai.com/v1/chat/completions";
    p.credentials_env = "OPENAI_API_KEY";
    p.model = "gpt-4o";
    switch (kind) {
        case ProfileKind::StrategyProvider:
            p.model = "o3-mini";
            p.structured_output = true;
            break;
        case ProfileKind::FreeTextStrategyProvider:
            p.model = "llama-3.1-405b-instruct";
            p.sampling.top_p = 0.9;
            p.sampling.temperature = 0.6;
            p.sampling.presence_penalty = 0.0;
            p.sampling.frequency_penalty = 0.0;
            break;
        case ProfileKind::Extractor:
            p.structured_output = true;
            break;
        case ProfileKind::Twin:
            p.model = "digital-twin";
            break;
        case ProfileKind::Generator:
        case ProfileKind::Annotator:
        case ProfileKind::Judge:
            break;
    }
    return p;
}

void validate_profile(const ProviderProfile& p) {
    if (p.sampling.max_tokens <= 0) throw ConfigError("profile '" + p.role + "': max_tokens must be > 0");
    if (p.sampling.n != 1) throw ConfigError("profile '" + p.role + "': n must be 1");
    if (p.sampling.temperature < 0) throw ConfigError("profile '" + p.role + "': temperature must be >= 0");
    if (p.max_in_flight < 1) throw ConfigError("profile '" + p.role + "': max_in_flight must be >= 1");
}

json to_json(const ProviderProfile& p) {
    json s = {{"temperature", p.sampling.temperature},
              {"top_p", p.sampling.top_p},
              {"max_tokens", p.sampling.max_tokens},
              {"n", p.sampling.n}};
    if (p.sampling.presence_penalty) s["presence_penalty"] = *p.sampling.presence_penalty;
    if (p.sampling.frequency_penalty) s["frequency_penalty"] = *p.sampling.frequency_penalty;
    return {{"role", p.role},
            {"endpoint", p.endpoint},
            {"model", p.model},
            {"sampling", s},
            {"structured_output", p.structured_output},
            {"credentials_env", p.credentials_env},
            {"max_in_flight", p.max_in_flight},
            {"requests_per_second", p.requests_per_second}};
}

ProviderProfile profile_from_json(const json& j, ProviderProfile base) {
    ProviderProfile p = std::move(base);
    try {
        if (!j.is_object()) throw ConfigError("invalid provider profile: expected an object");
        if (j.contains("role") || p.role.empty()) p.role = j.at("role").get<std::string>();
        p.endpoint = j.value("endpoint", p.endpoint);
        p.model = j.value("model", p.model);
        if (j.contains("sampling")) {
            const auto& s = j["sampling"];
            p.sampling.temperature = s.value("temperature", p.sampling.temperature);
            p.sampling.top_p = s.value("top_p", p.sampling.top_p);
            p.sampling.max_tokens = s.value("max_tokens", p.sampling.max_tokens);
            p.sampling.n = s.value("n", p.sampling.n);
            if (s.contains("presence_penalty")) p.sampling.presence_penalty = s["presence_penalty"].get<double>();
            if (s.contains("frequency_penalty")) p.sampling.frequency_penalty = s["frequency_penalty"].get<double>();
        }
        p.structured_output = j.value("structured_output", p.structured_output);
        p.credentials_env = j.value("credentials_env", p.credentials_env);
        p.max_in_flight = j.value("max_in_flight", p.max_in_flight);
        p.requests_per_second = j.value("requests_per_second", p.requests_per_second);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid provider profile: ") + e.what());
    }
    validate_profile(p);
    return p;
}

std::vector<json> to_json(std::span<const ChatMessage> messages) {
    std::vector<json> out;
    out.reserve(messages.size());
    for (const auto& m : messages) out.push_back({{"role", m.role}, {"content", m.content}});
    return out;
}

json build_request(const ProviderProfile& profile, std::span<const ChatMessage> messages,
                   const json* response_format) {
    json body = {{"model", profile.model},
                 {"messages", to_json(messages)},
                 {"n", profile.sampling.n},
                 {"max_tokens", profile.sampling.max_tokens},
                 {"top_p", profile.sampling.top_p},
                 {"temperature", profile.sampling.temperature}};
    if (profile.sampling.presence_penalty) body["presence_penalty"] = *profile.sampling.presence_penalty;
    if (profile.sampling.frequency_penalty) body["frequency_penalty"] = *profile.sampling.frequency_penalty;
    if (response_format) body["response_format"] = *response_format;
    return body;
}

ExchangeLog::ExchangeLog(std::string path) : path_(std::move(path)) {}

void ExchangeLog::record(const ProviderProfile& profile, const HttpRequest& request,
                         const HttpResponse* response, const std::string& error, int attempt,
                         std::chrono::milliseconds latency) {
    json headers = json::object();
    for (const auto& [k, v] : request.headers)
        headers[k] = (k == "Authorization") ? std::string("Bearer ***") : v;
    json rec = {{"role", profile.role},
                {"model", profile.model},
                {"url", request.url},
                {"headers", headers},
                {"request", json::parse(request.body, nullptr, false)},
                {"attempt", attempt},
                {"latency_ms", latency.count()}};
    if (response) {
        rec["status"] = response->status;
        rec["response"] = response->body;
    }
    if (!error.empty()) rec["error"] = error;
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << rec.dump() << '\n';
}

// Per-profile in-flight cap plus a token bucket on request starts.
struct Gateway::Limits {
    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
    int cap = 1;
    double rate = 0.0;
    double tokens = 1.0;
    Clock::time_point refilled = Clock::now();

    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return in_flight < cap; });
        ++in_flight;
        if (rate <= 0) return;
        for (;;) {
            auto now = Clock::now();
            double burst = std::max(1.0, rate);
            tokens = std::min(burst, tokens + std::chrono::duration<double>(now - refilled).count() * rate);
            refilled = now;
            if (tokens >= 1.0) {
                tokens -= 1.0;
                return;
            }
            auto wait = std::chrono::duration<double>((1.0 - tokens) / rate);
            lock.unlock();
            std::this_thread::sleep_for(wait);
            lock.lock();
        }
    }

    void release() {
        {
            std::lock_guard lock(mu);
            --in_flight;
        }
        cv.notify_one();
    }
};

Gateway::Gateway(std::shared_ptr<Transport> transport, RetryPolicy retry, Sleeper sleeper)
    : transport_(std::move(transport)), retry_(retry), sleeper_(std::move(sleeper)) {
    if (!transport_) throw ConfigError("gateway requires a transport");
    if (retry_.max_attempts < 1) retry_.max_attempts = 1;
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Gateway::~Gateway() = default;

Gateway::Limits& Gateway::limits_for(const ProviderProfile& profile) const {
    std::lock_guard lock(limits_mu_);
    auto key = profile.role + "|" + profile.endpoint;
    auto& slot = limits_[key];
    if (!slot) {
        slot = std::make_unique<Limits>();
        slot->cap = std::max(1, profile.max_in_flight);
        slot->rate = profile.requests_per_second;
    }
    return *slot;
}

namespace {

bool transient_status(int status) { return status == 429 || status >= 500; }

}  // namespace

ChatExchange Gateway::chat_complete(const ProviderProfile& profile, std::span<const ChatMessage> messages,
                                    const json* response_format) const {
    if (messages.empty()) throw ConfigError("chat_complete requires at least one message");
    validate_profile(profile);

    HttpRequest req;
    req.url = profile.endpoint;
    req.body = build_request(profile, messages, response_format).dump();
    req.headers.emplace_back("Content-Type", "application/json");
    if (!profile.credentials_env.empty()) {
        if (const char* key = std::getenv(profile.credentials_env.c_str()); key && *key)
            req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    auto& limits = limits_for(profile);
    auto backoff = retry_.initial_backoff;
    std::string last_error;
    HttpResponse last_response;
    bool have_response = false;

    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        if (attempt > 1) {
            sleeper_(backoff);
            backoff = std::min(retry_.max_backoff,
                               std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.multiplier)));
        }
        auto start = Clock::now();
        HttpResponse resp;
        try {
            struct Slot {
                Limits& l;
                explicit Slot(Limits& x) : l(x) { l.acquire(); }
                ~Slot() { l.release(); }
            } slot(limits);
            resp = transport_->post(profile, req);
        } catch (const TransportError& e) {
            auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
            if (log_) log_->record(profile, req, nullptr, e.what(), attempt, latency);
            last_error = e.what();
            have_response = false;
            continue;
        }
        auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
        if (log_) log_->record(profile, req, &resp, "", attempt, latency);

        if (transient_status(resp.status)) {
            last_response = resp;
            have_response = true;
            continue;
        }
        if (resp.status < 200 || resp.status >= 300) throw ProviderError(resp.status, resp.body);

        json body = json::parse(resp.body, nullptr, false);
        if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array() ||
            body["choices"].empty())
            throw MalformedOutputError("provider '" + profile.role + "' returned no choices", resp.body);
        const auto& message = body["choices"][0].value("message", json::object());
        std::string content = message.contains("content") && message["content"].is_string()
                                  ? message["content"].get<std::string>()
                                  : std::string();
        if (content.find_first_not_of(" \t\r\n") == std::string::npos)
            throw EmptyResponseError("provider '" + profile.role + "' returned an empty completion");

        ChatExchange ex;
        ex.messages.assign(messages.begin(), messages.end());
        ex.response = std::move(content);
        ex.latency = latency;
        ex.attempts = attempt;
        if (body.contains("usage") && body["usage"].is_object()) {
            Usage u;
            u.prompt_tokens = body["usage"].value("prompt_tokens", 0);
            u.completion_tokens = body["usage"].value("completion_tokens", 0);
            u.total_tokens = body["usage"].value("total_tokens", 0);
            ex.usage = u;
        }
        return ex;
    }
    if (have_response) throw ProviderError(last_response.status, last_response.body);
    throw TransportError("provider '" + profile.role + "' unreachable after " +
                             std::to_string(retry_.max_attempts) + " attempts: " + last_error,
                         retry_.max_attempts);
}

json strategy_response_format(const StrategyPool& pool, bool with_emotion) {
    json backward_enum = json::array();
    json forward_enum = json::array();
    for (const auto& s : pool.entries())
        (s.direction == Direction::Backward ? backward_enum : forward_enum).push_back(s.tag);
    backward_enum.push_back(nullptr);
    forward_enum.push_back(nullptr);

    json properties = {
        {"backward", {{"type", json::array({"string", "null"})}, {"enum", backward_enum}}},
        {"forward", {{"type", json::array({"string", "null"})}, {"enum", forward_enum}}},
        {"rationale", {{"type", "string"}}}};
    json required = json::array({"backward", "forward", "rationale"});
    if (with_emotion) {
        json emotions = json::array();
        for (auto e : kAllEmotions) emotions.push_back(to_string(e));
        properties["emotion"] = {{"type", "string"}, {"enum", emotions}};
        required.push_back("emotion");
    }
    return {{"type", "json_schema"},
            {"json_schema",
             {{"name", "Strategy"},
              {"strict", true},
              {"schema",
               {{"type", "object"},
                {"properties", properties},
                {"required", required},
                {"additionalProperties", false}}}}}};
}

namespace {

json extract_json_object(const std::string& text) {
    json direct = json::parse(text, nullptr, false);
    if (!direct.is_discarded() && direct.is_object()) return direct;
    auto open = text.find('{');
    auto close = text.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        json inner = json::parse(text.substr(open, close - open + 1), nullptr, false);
        if (!inner.is_discarded() && inner.is_object()) return inner;
    }
    throw MalformedOutputError("strategy output is not a JSON object", text);
}

std::optional<std::string> optional_tag(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw MalformedOutputError(std::string("field '") + key + "' is not a string", j.dump());
    auto s = it->get<std::string>();
    if (s.empty() || s == "null" || s == "none") return std::nullopt;
    return s;
}

}  // namespace

StructuredStrategyOutput parse_strategy_payload(const std::string& text, const StrategyPool& pool) {
    json j = extract_json_object(text);
    StructuredStrategyOutput out;
    out.provider_text = text;
    if (j.contains("strategies")) {
        if (!j["strategies"].is_array()) throw MalformedOutputError("'strategies' is not an array", text);
        std::vector<std::string> tags;
        for (const auto& t : j["strategies"]) {
            if (!t.is_string()) throw MalformedOutputError("strategy entry is not a string", text);
            tags.push_back(t.get<std::string>());
        }
        out.decision = decision_from_tags(tags, pool);
    } else {
        out.decision.backward = optional_tag(j, "backward");
        out.decision.forward = optional_tag(j, "forward");
        auto canonical = [&](std::optional<std::string>& slot) {
            if (!slot) return;
            if (const auto* s = pool.find(*slot)) slot = s->tag;
        };
        canonical(out.decision.backward);
        canonical(out.decision.forward);
    }
    if (auto e = optional_tag(j, "emotion")) {
        out.emotion = try_emotion_from_string(*e);
        if (!out.emotion) throw MalformedOutputError("unknown emotion '" + *e + "'", text);
    }
    if (auto r = optional_tag(j, "rationale")) out.rationale = *r;
    return out;
}

StructuredStrategyOutput structured_strategy_call(const Gateway& gateway, const ProviderProfile& provider,
                                                  std::span<const ChatMessage> messages,
                                                  const StrategyPool& pool, const StrategyCallOptions& options) {
    StructuredStrategyOutput out;
    if (provider.structured_output) {
        json format = strategy_response_format(pool, options.with_emotion);
        auto ex = gateway.chat_complete(provider, messages, &format);
        out = parse_strategy_payload(ex.response, pool);
    } else {
        if (!options.extractor)
            throw ConfigError("provider '" + provider.role + "' lacks structured output and no extractor is set");
        auto ex = gateway.chat_complete(provider, messages);
        const auto& prompts = options.prompts ? *options.prompts : default_prompt_pack();
        std::vector<ChatMessage> extract_msgs = {
            {"system", prompts.render(prompt::kStrategyExtractor, {{"strategy_pool", render_context(pool)}})},
            {"user", ex.response}};
        json format = strategy_response_format(pool, options.with_emotion);
        auto extracted = gateway.chat_complete(*options.extractor, extract_msgs,
                                               options.extractor->structured_output ? &format : nullptr);
        out = parse_strategy_payload(extracted.response, pool);
        out.provider_text = ex.response;
        out.extracted = true;
    }
    if (!options.with_emotion) out.emotion.reset();

    auto result = validate_decision(out.decision, pool, options.mode);
    if (!result.ok()) throw StrategyValidationError(std::move(result.violations));
    return out;
}

}  // namespace stratchat

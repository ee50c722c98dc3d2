#include "stratchat/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace stratchat {

using nlohmann::json;

namespace {

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json decision_json(const std::optional<StrategyDecision>& d) { return d ? to_json(*d) : json(); }

}  // namespace

SessionRequest session_request_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("session request must be a JSON object");
    SessionRequest r;
    try {
        if (j.contains("mode")) r.mode = moderator_mode_from_string(j["mode"].get<std::string>());
        if (j.contains("warmup_turns")) r.warmup_turns = j["warmup_turns"].get<int>();
        r.trace = j.value("trace", false);
        r.record_prompts = j.value("record_prompts", false);
        if (r.record_prompts) r.trace = true;
        if (j.contains("opener") && !j["opener"].is_null()) r.opener = j["opener"].get<std::string>();
        r.strategy_provider = j.value("strategy_provider", r.strategy_provider);
        r.generator = j.value("generator", "");
        if (j.contains("extractor") && !j["extractor"].is_null()) r.extractor = j["extractor"].get<std::string>();
        if (j.contains("validation")) {
            auto v = j["validation"].get<std::string>();
            if (v == "strict")
                r.validation = ValidationMode::Strict;
            else if (v == "lenient")
                r.validation = ValidationMode::Lenient;
            else
                throw ConfigError("validation must be strict or lenient");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid session request: ") + e.what());
    }
    return r;
}

json to_json(const SessionRequest& r) {
    json j = {{"mode", to_string(r.mode)},
              {"trace", r.trace},
              {"record_prompts", r.record_prompts},
              {"strategy_provider", r.strategy_provider},
              {"generator", r.generator}};
    if (r.warmup_turns) j["warmup_turns"] = *r.warmup_turns;
    if (r.opener) j["opener"] = *r.opener;
    if (r.extractor) j["extractor"] = *r.extractor;
    if (r.validation) j["validation"] = *r.validation == ValidationMode::Strict ? "strict" : "lenient";
    return j;
}

struct SessionService::Record {
    std::string id;
    SessionRequest request;
    std::unique_ptr<Session> session;
    std::string created;
    std::string updated;
    mutable std::mutex mu;
};

SessionService::SessionService(const Runtime& runtime, std::optional<fs::path> store_dir)
    : runtime_(&runtime), store_dir_(std::move(store_dir)) {
    if (store_dir_) fs::create_directories(*store_dir_);
}

SessionService::~SessionService() = default;

std::size_t SessionService::size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

std::shared_ptr<SessionService::Record> SessionService::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSessionError(id);
    return it->second;
}

void SessionService::persist(const Record& r) const {
    if (!store_dir_) return;
    std::ofstream out(*store_dir_ / (r.id + ".json"), std::ios::binary | std::ios::trunc);
    out << serialize(r.session->conversation()) << '\n';
}

json SessionService::step_view(const Record& r, const ModeratorStep& step) const {
    const auto& conv = r.session->conversation();
    json j = {{"utterance", step.utterance},
              {"index", conv.turns.back().index},
              {"kind", to_string(step.kind)}};
    if (r.request.trace) {
        j["decision"] = decision_json(step.decision);
        j["tags"] = step.decision ? step.decision->tags() : std::vector<std::string>{};
        j["emotion"] = step.emotion ? json(to_string(*step.emotion)) : json();
    }
    return j;
}

json SessionService::create_session(const SessionRequest& request) {
    auto cfg = runtime_->session_config(request.mode);
    cfg.strategy_provider = runtime_->profile(request.strategy_provider);
    if (!request.generator.empty()) cfg.generator = runtime_->profile(request.generator);
    if (request.extractor) cfg.extractor = runtime_->profile(*request.extractor);
    if (request.warmup_turns) cfg.warmup_turns = *request.warmup_turns;
    if (request.validation) cfg.validation = *request.validation;
    cfg.record_prompts = request.record_prompts;

    auto rec = std::make_shared<Record>();
    rec->request = request;
    if (rec->request.generator.empty()) rec->request.generator = cfg.generator.role;
    {
        std::lock_guard lock(mu_);
        static thread_local std::mt19937_64 rng{std::random_device{}()};
        char buf[32];
        std::snprintf(buf, sizeof buf, "s-%06llu-%08llx", static_cast<unsigned long long>(++counter_),
                      static_cast<unsigned long long>(rng() & 0xffffffffULL));
        rec->id = buf;
    }
    rec->session = std::make_unique<Session>(runtime_->gateway(), cfg, rec->id, request.opener);
    auto step = rec->session->start();  // failures leave nothing behind
    rec->created = rec->updated = now_iso();
    {
        std::lock_guard lock(mu_);
        sessions_[rec->id] = rec;
    }
    persist(*rec);
    return {{"id", rec->id},
            {"status", "open"},
            {"config", to_json(rec->request)},
            {"created", rec->created},
            {"turn", step_view(*rec, step)}};
}

json SessionService::post_message(const std::string& id, const std::string& text) {
    auto rec = find(id);
    std::lock_guard lock(rec->mu);
    if (rec->session->closed()) throw ClosedSessionError(id);
    auto step = rec->session->next_turn(text);
    rec->updated = now_iso();
    persist(*rec);
    return {{"id", id}, {"turn", step_view(*rec, step)}};
}

json SessionService::get_trace(const std::string& id) const {
    auto rec = find(id);
    std::lock_guard lock(rec->mu);
    json conv = to_json(rec->session->conversation());
    if (!rec->request.trace) {
        for (auto& t : conv["turns"]) {
            t.erase("decision");
            t.erase("emotion");
            t.erase("trace");
            t.erase("notes");
        }
    }
    return {{"id", id},
            {"status", rec->session->closed() ? "closed" : "open"},
            {"trace", rec->request.trace},
            {"config", to_json(rec->request)},
            {"created", rec->created},
            {"updated", rec->updated},
            {"conversation", std::move(conv)}};
}

json SessionService::close(const std::string& id) {
    auto rec = find(id);
    std::lock_guard lock(rec->mu);
    rec->session->close();
    rec->updated = now_iso();
    persist(*rec);
    return {{"id", id}, {"status", "closed"}, {"turns", rec->session->conversation().turns.size()}};
}

int http_status_for(const std::exception& e) {
    if (dynamic_cast<const UnknownSessionError*>(&e)) return 404;
    if (dynamic_cast<const NotFoundError*>(&e)) return 404;
    if (dynamic_cast<const SessionError*>(&e)) return 409;
    if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProviderError*>(&e) ||
        dynamic_cast<const EmptyResponseError*>(&e) || dynamic_cast<const MalformedOutputError*>(&e) ||
        dynamic_cast<const StrategyValidationError*>(&e))
        return 502;
    if (dynamic_cast<const Error*>(&e) || dynamic_cast<const json::exception*>(&e)) return 400;
    return 500;
}

struct HttpService::Impl {
    SessionService* sessions;
    std::optional<std::string> api_key;
    httplib::Server server;

    bool authorized(const httplib::Request& req) const {
        if (!api_key) return true;
        if (req.get_header_value("X-API-Key") == *api_key) return true;
        return req.get_header_value("Authorization") == "Bearer " + *api_key;
    }

    template <typename F>
    void handle(const httplib::Request& req, httplib::Response& res, int ok_status, F&& f) {
        if (!authorized(req)) {
            res.status = 401;
            res.set_content(json{{"error", "unauthorized"}}.dump(), "application/json");
            return;
        }
        try {
            json body = f();
            res.status = ok_status;
            res.set_content(body.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = http_status_for(e);
            res.set_content(json{{"error", e.what()}, {"status", res.status}}.dump(), "application/json");
        }
    }
};

HttpService::HttpService(SessionService& sessions, std::optional<std::string> api_key)
    : impl_(std::make_unique<Impl>()) {
    impl_->sessions = &sessions;
    impl_->api_key = std::move(api_key);
    auto& svr = impl_->server;
    auto* self = impl_.get();

    svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type, Authorization, X-API-Key"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"status", "ok"}}.dump(), "application/json");
    });
    svr.Post("/sessions", [self](const httplib::Request& req, httplib::Response& res) {
        self->handle(req, res, 201, [&] {
            auto body = req.body.empty() ? json::object() : json::parse(req.body);
            return self->sessions->create_session(session_request_from_json(body));
        });
    });
    svr.Post(R"(/sessions/([^/]+)/messages)", [self](const httplib::Request& req, httplib::Response& res) {
        self->handle(req, res, 200, [&] {
            auto body = json::parse(req.body);
            if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
                throw IngestionError("message body needs a string field 'text'");
            return self->sessions->post_message(req.matches[1], body["text"].get<std::string>());
        });
    });
    svr.Get(R"(/sessions/([^/]+)/trace)", [self](const httplib::Request& req, httplib::Response& res) {
        self->handle(req, res, 200, [&] { return self->sessions->get_trace(req.matches[1]); });
    });
    svr.Post(R"(/sessions/([^/]+)/close)", [self](const httplib::Request& req, httplib::Response& res) {
        self->handle(req, res, 200, [&] { return self->sessions->close(req.matches[1]); });
    });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    auto& svr = impl_->server;
    if (port == 0) {
        int p = svr.bind_to_any_port(host);
        if (p < 0) throw ConfigError("cannot bind " + host);
        return p;
    }
    if (!svr.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::serve() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace stratchat

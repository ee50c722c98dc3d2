#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "stratchat/prompt_pack.hpp"
#include "support.hpp"

using namespace stratchat;
using nlohmann::json;

namespace {

const std::vector<ChatMessage> kHello = {{"system", "be brief"}, {"user", "hello"}};

}  // namespace

TEST_CASE("generator defaults reach the wire unchanged") {
    auto p = default_profile("generator", ProfileKind::Generator);
    auto body = build_request(p, kHello);
    json expected = {{"model", "gpt-4o"},
                     {"messages", json::array({{{"role", "system"}, {"content", "be brief"}},
                                               {{"role", "user"}, {"content", "hello"}}})},
                     {"n", 1},
                     {"max_tokens", 1024},
                     {"top_p", 1.0},
                     {"temperature", 1.0}};
    CHECK(body == expected);
    CHECK(body.dump() == build_request(p, kHello).dump());
}

TEST_CASE("free-text strategy provider sampling") {
    auto p = default_profile("llama", ProfileKind::FreeTextStrategyProvider);
    auto body = build_request(p, kHello);
    CHECK(body["top_p"] == 0.9);
    CHECK(body["temperature"] == 0.6);
    CHECK(body["presence_penalty"] == 0.0);
    CHECK(body["frequency_penalty"] == 0.0);
}

TEST_CASE("profile validation and overlay") {
    auto p = default_profile("generator", ProfileKind::Generator);
    p.sampling.n = 2;
    CHECK_THROWS_AS(validate_profile(p), ConfigError);
    p.sampling.n = 1;
    p.sampling.max_tokens = 0;
    CHECK_THROWS_AS(validate_profile(p), ConfigError);

    auto base = default_profile("generator", ProfileKind::Generator);
    auto over = profile_from_json(json{{"model", "local-8b"}, {"endpoint", "http://localhost:9/v1"}}, base);
    CHECK(over.model == "local-8b");
    CHECK(over.role == "generator");
    CHECK(over.sampling == base.sampling);
    CHECK(profile_from_json(to_json(base)) == base);
    CHECK_THROWS_AS(profile_from_json(json{{"model", "x"}}), ConfigError);  // no role anywhere
}

TEST_CASE("transient failures are retried, then reported") {
    testkit::MockGateway mg;
    auto p = default_profile("generator", ProfileKind::Generator);
    mg.transport->script_reply("generator", {503, "", false});
    mg.transport->script_reply("generator", {429, "", false});
    mg.transport->script("generator", "third time lucky");
    auto ex = mg.gateway.chat_complete(p, kHello);
    CHECK(ex.response == "third time lucky");
    CHECK(ex.attempts == 3);
    CHECK(mg.transport->calls("generator") == 3);
}

TEST_CASE("unreachable endpoint fails after three attempts") {
    testkit::MockGateway mg;
    auto p = default_profile("generator", ProfileKind::Generator);
    for (int i = 0; i < 5; ++i) mg.transport->script_reply("generator", {0, "", true});
    try {
        mg.gateway.chat_complete(p, kHello);
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts() == 3);
    }
    CHECK(mg.transport->calls("generator") == 3);
}

TEST_CASE("real sockets: refused connection is a transport error") {
    auto p = default_profile("generator", ProfileKind::Generator);
    p.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    p.credentials_env.clear();
    Gateway g(std::make_shared<HttpTransport>(std::chrono::seconds(2)),
              RetryPolicy{3, std::chrono::milliseconds(0), 2.0, std::chrono::milliseconds(0)});
    CHECK_THROWS_AS(g.chat_complete(p, kHello), TransportError);
}

TEST_CASE("client errors are not retried") {
    testkit::MockGateway mg;
    auto p = default_profile("generator", ProfileKind::Generator);
    mg.transport->script_reply("generator", {400, "", false});
    try {
        mg.gateway.chat_complete(p, kHello);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.status() == 400);
    }
    CHECK(mg.transport->calls("generator") == 1);
}

TEST_CASE("empty completions are rejected") {
    testkit::MockGateway mg;
    auto p = default_profile("generator", ProfileKind::Generator);
    mg.transport->script("generator", "  \n");
    CHECK_THROWS_AS(mg.gateway.chat_complete(p, kHello), EmptyResponseError);
}

TEST_CASE("echo responder") {
    testkit::MockGateway mg;
    mg.transport->set_default_responder(MockTransport::echo);
    auto p = default_profile("anything", ProfileKind::Generator);
    CHECK(mg.gateway.chat_complete(p, kHello).response == "hello");
}

TEST_CASE("credentials come from the named environment variable and are redacted in logs") {
    testkit::MockGateway mg;
    auto dir = testkit::scratch_dir("gateway-log");
    auto log = std::make_shared<ExchangeLog>((dir / "calls.jsonl").string());
    mg.gateway.set_log(log);
    auto p = default_profile("generator", ProfileKind::Generator);
    p.credentials_env = "STRATCHAT_TEST_KEY";
    ::setenv("STRATCHAT_TEST_KEY", "sk-secret-value", 1);
    mg.transport->script("generator", "ok");
    mg.gateway.chat_complete(p, kHello);
    ::unsetenv("STRATCHAT_TEST_KEY");
    auto text = testkit::slurp(dir / "calls.jsonl");
    CHECK(text.find("sk-secret-value") == std::string::npos);
    auto rec = json::parse(text.substr(0, text.find('\n')));
    CHECK(rec["headers"]["Authorization"] == "Bearer ***");
    CHECK(rec["status"] == 200);
}

TEST_CASE("structured strategy call") {
    testkit::MockGateway mg;
    const auto& pool = default_pool();
    auto provider = default_profile("strategy_provider", ProfileKind::StrategyProvider);
    mg.transport->script("strategy_provider", testkit::strategy_json("Ack", "OpQ", "joy"));
    auto out = structured_strategy_call(mg.gateway, provider, kHello, pool);
    CHECK(out.decision == StrategyDecision{"Ack", "OpQ"});
    REQUIRE(out.emotion);
    CHECK(*out.emotion == Emotion::Joy);
    auto req = mg.transport->requests("strategy_provider").at(0);
    CHECK(req["response_format"]["json_schema"]["name"] == "Strategy");

    SUBCASE("emotion dropped when not requested") {
        mg.transport->script("strategy_provider", testkit::strategy_json(std::nullopt, "OpQ", "neutral"));
        StrategyCallOptions o;
        o.with_emotion = false;
        auto r = structured_strategy_call(mg.gateway, provider, kHello, pool, o);
        CHECK(r.decision == StrategyDecision{std::nullopt, "OpQ"});
        CHECK_FALSE(r.emotion);
    }
    SUBCASE("direction mismatch rejected in strict mode only") {
        mg.transport->script("strategy_provider", testkit::strategy_json("OpQ", std::nullopt));
        CHECK_THROWS_AS(structured_strategy_call(mg.gateway, provider, kHello, pool), StrategyValidationError);
        mg.transport->script("strategy_provider", testkit::strategy_json("OpQ", std::nullopt));
        StrategyCallOptions o;
        o.mode = ValidationMode::Lenient;
        CHECK(structured_strategy_call(mg.gateway, provider, kHello, pool, o).decision.backward == "OpQ");
    }
    SUBCASE("unknown tags always rejected") {
        mg.transport->script("strategy_provider", testkit::strategy_json(std::nullopt, "Telepathy"));
        StrategyCallOptions o;
        o.mode = ValidationMode::Lenient;
        CHECK_THROWS_AS(structured_strategy_call(mg.gateway, provider, kHello, pool, o), StrategyValidationError);
    }
}

TEST_CASE("free-text provider goes through the extractor") {
    testkit::MockGateway mg;
    const auto& pool = default_pool();
    auto provider = default_profile("llama", ProfileKind::FreeTextStrategyProvider);
    auto extractor = default_profile("extractor", ProfileKind::Extractor);
    mg.transport->script("llama", "I would acknowledge, then ask an open question");
    mg.transport->script("extractor", R"({"backward": "Ack", "forward": "OpQ", "emotion": "neutral", "rationale": "r"})");
    StrategyCallOptions o;
    o.extractor = &extractor;
    auto out = structured_strategy_call(mg.gateway, provider, kHello, pool, o);
    CHECK(out.decision == StrategyDecision{"Ack", "OpQ"});
    CHECK(out.extracted);
    CHECK(out.provider_text == "I would acknowledge, then ask an open question");
    auto req = mg.transport->requests("extractor").at(0);
    CHECK(req["messages"][1]["content"] == "I would acknowledge, then ask an open question");

    mg.transport->script("llama", "something");
    CHECK_THROWS_AS(structured_strategy_call(mg.gateway, provider, kHello, pool), ConfigError);
}

TEST_CASE("strategy payload parsing") {
    const auto& pool = default_pool();
    auto fenced = parse_strategy_payload("Sure!\n```json\n{\"backward\": null, \"forward\": \"Open-Question\"}\n```",
                                         pool);
    CHECK(fenced.decision == StrategyDecision{std::nullopt, "OpQ"});
    CHECK(parse_strategy_payload(R"({"strategies": ["Ack", "OpQ"]})", pool).decision ==
          StrategyDecision{"Ack", "OpQ"});
    CHECK_THROWS_AS(parse_strategy_payload(R"({"strategies": ["Ack", "Rep", "OpQ"]})", pool),
                    StrategyValidationError);
    try {
        parse_strategy_payload("no json here", pool);
        FAIL("expected MalformedOutputError");
    } catch (const MalformedOutputError& e) {
        CHECK(e.raw_payload() == "no json here");
    }
    CHECK_THROWS_AS(parse_strategy_payload(R"({"forward": "OpQ", "emotion": "elated"})", pool),
                    MalformedOutputError);
}

TEST_CASE("prompt templates") {
    CHECK(render_template("a {{x}} b", {{"x", "1"}}) == "a 1 b");
    CHECK_THROWS_AS(render_template("a {{y}}", {{"x", "1"}}), ConfigError);
    const auto& pack = default_prompt_pack();
    CHECK_FALSE(pack.version().empty());
    for (auto role : {prompt::kStrategyProvider, prompt::kModeratorInitial, prompt::kAnnotator, prompt::kJudge,
                      prompt::kTwin})
        CHECK_FALSE(pack.raw(role).empty());
}

#include <doctest.h>

#include "support.hpp"

using namespace stratchat;
using testkit::mock_config;
using testkit::strategy_json;

TEST_CASE("propose_strategy returns the scripted pair") {
    testkit::MockGateway mg;
    ModeratorEngine engine(mg.gateway, mock_config(ModeratorMode::Full));
    Conversation empty;
    mg.transport->script("strategy_provider", strategy_json(std::nullopt, "OpQ", "neutral"));
    auto p = engine.propose_strategy(ConversationPrefix(empty, 0));
    CHECK(p.decision == StrategyDecision{std::nullopt, "OpQ"});
    REQUIRE(p.emotion);
    CHECK(*p.emotion == Emotion::Neutral);

    ModeratorEngine plain(mg.gateway, mock_config(ModeratorMode::NoEmotion));
    mg.transport->script("strategy_provider", strategy_json(std::nullopt, "OpQ", "neutral"));
    auto q = plain.propose_strategy(ConversationPrefix(empty, 0));
    CHECK(q.decision == StrategyDecision{std::nullopt, "OpQ"});
    CHECK_FALSE(q.emotion);
    auto req = mg.transport->requests("strategy_provider").back();
    CHECK_FALSE(req["response_format"]["json_schema"]["schema"]["properties"].contains("emotion"));

    ModeratorEngine base(mg.gateway, mock_config(ModeratorMode::Baseline));
    CHECK_THROWS_AS(base.propose_strategy(ConversationPrefix(empty, 0)), ConfigError);
}

TEST_CASE("generator prompt carries the chosen strategies and emotion") {
    testkit::MockGateway mg;
    ModeratorEngine engine(mg.gateway, mock_config(ModeratorMode::Full));
    auto c = testkit::dialogue("g", {"Hello!", "I baked bread today."});
    ConversationPrefix h(c, 2);
    StrategyDecision d{"Ack", "OpQ"};
    mg.transport->script("generator", "Oh lovely. What kind of bread?");
    auto out = engine.generate_utterance(h, &d, Emotion::Sadness);
    CHECK(out.text == "Oh lovely. What kind of bread?");
    const auto& system = out.messages.at(0).content;
    const auto& pool = default_pool();
    CHECK(system.find(pool.lookup("Ack").definition) != std::string::npos);
    CHECK(system.find(pool.lookup("OpQ").definition) != std::string::npos);
    CHECK(system.find("sadness") != std::string::npos);
    REQUIRE(out.messages.size() == 3);
    CHECK(out.messages[1].role == "assistant");
    CHECK(out.messages[2].role == "user");

    auto no_emotion = engine.generator_messages(h, &d, std::nullopt);
    CHECK(no_emotion[0].content.find("sadness") == std::string::npos);

    StrategyDecision bad{"OpQ", std::nullopt};
    CHECK_THROWS_AS(engine.generate_utterance(h, &bad, std::nullopt), StrategyValidationError);
}

TEST_CASE("serialized history marks emotions only in full mode") {
    auto c = testkit::dialogue("e", {"Hi", "I feel great", "Wonderful!", "Yes"});
    c.turns[2].emotion = Emotion::Joy;
    ConversationPrefix h(c, 4);
    CHECK(serialize_history(h, true).find("User [emotion: joy]: I feel great") != std::string::npos);
    CHECK(serialize_history(h, false).find("emotion") == std::string::npos);
}

TEST_CASE("warm-up turns carry no decision, later turns do") {
    testkit::MockGateway mg;
    mg.transport->set_responder("strategy_provider", [](const ProviderProfile&, const nlohmann::json&) {
        return MockReply{200, strategy_json("Ack", "OpQ", "joy"), false};
    });
    mg.transport->set_responder("generator", [](const ProviderProfile&, const nlohmann::json&) {
        return MockReply{200, "Tell me more.", false};
    });
    Session s(mg.gateway, mock_config(ModeratorMode::Full), "w");
    auto u0 = s.start();
    CHECK(u0.kind == TurnKind::Warmup);
    CHECK_FALSE(u0.decision);
    auto u1 = s.next_turn("hello");
    CHECK(u1.kind == TurnKind::Warmup);
    CHECK_FALSE(u1.decision);
    CHECK(mg.transport->calls("strategy_provider") == 0);
    auto u2 = s.next_turn("I went fishing");
    CHECK(u2.kind == TurnKind::Strategic);
    CHECK(u2.decision == StrategyDecision{"Ack", "OpQ"});
    REQUIRE(u2.emotion);
    CHECK(*u2.emotion == Emotion::Joy);
    CHECK(mg.transport->calls("strategy_provider") == 1);

    const auto& conv = s.conversation();
    REQUIRE(conv.turns.size() == 5);
    CHECK(conv.turns[4].decision == u2.decision);
    CHECK(conv.turns[4].emotion == u2.emotion);
    CHECK(*conv.turns[4].kind == TurnKind::Strategic);
}

TEST_CASE("baseline mode never calls the strategy provider") {
    testkit::MockGateway mg;
    mg.transport->set_responder("generator", [](const ProviderProfile&, const nlohmann::json&) {
        return MockReply{200, "How nice.", false};
    });
    Session s(mg.gateway, mock_config(ModeratorMode::Baseline), "b");
    s.start();
    for (int i = 0; i < 6; ++i) {
        auto step = s.next_turn("message " + std::to_string(i));
        CHECK(step.kind == TurnKind::Baseline);
        CHECK_FALSE(step.decision);
    }
    CHECK(mg.transport->calls("strategy_provider") == 0);
    CHECK(mg.transport->calls("generator") == 7);
}

TEST_CASE("failed turns leave the conversation untouched") {
    testkit::MockGateway mg;
    mg.transport->set_responder("generator", [](const ProviderProfile&, const nlohmann::json&) {
        return MockReply{200, "ok", false};
    });
    Session s(mg.gateway, mock_config(ModeratorMode::Full, 1), "f");
    s.start();
    mg.transport->script("strategy_provider", strategy_json("OpQ", std::nullopt));  // wrong direction
    CHECK_THROWS_AS(s.next_turn("hi"), StrategyValidationError);
    CHECK(s.conversation().turns.size() == 1);
    CHECK_THROWS_AS(s.next_turn("   "), IngestionError);
    CHECK(s.conversation().turns.size() == 1);
    mg.transport->script("strategy_provider", strategy_json(std::nullopt, "OpQ"));
    CHECK(s.next_turn("hi").kind == TurnKind::Strategic);
    CHECK(s.conversation().turns.size() == 3);
    s.close();
    CHECK_THROWS_AS(s.next_turn("again"), SessionError);
}

TEST_CASE("lenient mode retries once, then falls back") {
    testkit::MockGateway mg;
    mg.transport->set_responder("generator", [](const ProviderProfile&, const nlohmann::json&) {
        return MockReply{200, "ok", false};
    });
    auto cfg = mock_config(ModeratorMode::Full, 1);
    cfg.validation = ValidationMode::Lenient;
    Session s(mg.gateway, cfg, "l");
    s.start();
    mg.transport->script("strategy_provider", strategy_json(std::nullopt, "Nope"));
    mg.transport->script("strategy_provider", strategy_json(std::nullopt, "Nope"));
    auto step = s.next_turn("hi");
    CHECK(step.kind == TurnKind::Fallback);
    CHECK_FALSE(step.decision);
    CHECK(step.trace.notes.size() == 3);
    CHECK(s.conversation().turns.back().extra.contains("notes"));
}

TEST_CASE("record_prompts attaches prompts to moderator turns") {
    testkit::MockGateway mg;
    mg.transport->set_responder("generator", [](const ProviderProfile&, const nlohmann::json&) {
        return MockReply{200, "ok", false};
    });
    auto cfg = mock_config(ModeratorMode::Full, 0);
    cfg.record_prompts = true;
    mg.transport->script("strategy_provider", strategy_json(std::nullopt, "CoO"));
    Session s(mg.gateway, cfg, "r", "Morning chat");
    s.start();
    const auto& extra = s.conversation().turns[0].extra;
    REQUIRE(extra.contains("trace"));
    CHECK(extra["trace"].contains("provider_prompt"));
    CHECK(extra["trace"]["generator_prompt"][0]["content"].get<std::string>().find("Morning chat") !=
          std::string::npos);
}

TEST_CASE("mode strings") {
    CHECK(moderator_mode_from_string("no_emotion") == ModeratorMode::NoEmotion);
    CHECK_THROWS_AS(moderator_mode_from_string("chaos"), ConfigError);
    auto cfg = mock_config(ModeratorMode::Full);
    cfg.warmup_turns = -1;
    CHECK_THROWS_AS(normalized(cfg), ConfigError);
}

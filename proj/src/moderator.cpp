#include "stratchat/moderator.hpp"

#include <sstream>

namespace stratchat {

std::string_view to_string(ModeratorMode m) {
    switch (m) {
        case ModeratorMode::Full: return "full";
        case ModeratorMode::NoEmotion: return "no_emotion";
        case ModeratorMode::Baseline: return "baseline";
    }
    return "full";
}

ModeratorMode moderator_mode_from_string(std::string_view s) {
    if (s == "full") return ModeratorMode::Full;
    if (s == "no_emotion" || s == "no-emotion") return ModeratorMode::NoEmotion;
    if (s == "baseline") return ModeratorMode::Baseline;
    throw ConfigError("unknown moderator mode '" + std::string(s) + "'");
}

SessionConfig normalized(SessionConfig config) {
    if (config.warmup_turns < 0) throw ConfigError("warmup_turns must be >= 0");
    if (!config.pool) config.pool = std::shared_ptr<const StrategyPool>(&default_pool(), [](const StrategyPool*) {});
    if (!config.prompts)
        config.prompts = std::shared_ptr<const PromptPack>(&default_prompt_pack(), [](const PromptPack*) {});
    return config;
}

std::string serialize_history(const ConversationPrefix& history, bool include_emotions) {
    std::ostringstream out;
    if (history.opener()) out << "Session context: " << *history.opener() << "\n";
    auto turns = history.turns();
    if (turns.empty()) {
        out << "(The conversation has not started yet. The moderator speaks first.)\n";
        return out.str();
    }
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const auto& t = turns[i];
        if (t.speaker == Speaker::Moderator) {
            out << "Moderator: " << t.text << "\n";
            continue;
        }
        out << "User";
        if (include_emotions && i + 1 < turns.size() && turns[i + 1].emotion)
            out << " [emotion: " << to_string(*turns[i + 1].emotion) << "]";
        out << ": " << t.text << "\n";
    }
    return out.str();
}

std::string render_selected_strategies(const StrategyDecision& decision, const StrategyPool& pool) {
    std::ostringstream out;
    for (const auto& tag : decision.tags()) {
        const auto& s = pool.lookup(tag);
        out << "- " << s.name << " [" << s.tag << "], " << to_string(s.direction) << "-looking: " << s.definition
            << " Example: \"" << s.example << "\"\n";
    }
    auto text = out.str();
    if (!text.empty()) text.pop_back();
    return text;
}

ModeratorEngine::ModeratorEngine(const Gateway& gateway, SessionConfig config)
    : gateway_(&gateway), config_(normalized(std::move(config))) {}

std::vector<ChatMessage> ModeratorEngine::strategy_messages(const ConversationPrefix& history) const {
    bool with_emotion = config_.mode == ModeratorMode::Full;
    auto role = with_emotion ? prompt::kStrategyProvider : prompt::kStrategyProviderNoEmotion;
    return {{"system", config_.prompts->render(role, {{"strategy_pool", render_context(*config_.pool)}})},
            {"user", serialize_history(history, with_emotion)}};
}

ProposedStrategy ModeratorEngine::propose_strategy(const ConversationPrefix& history) const {
    if (config_.mode == ModeratorMode::Baseline)
        throw ConfigError("baseline mode never consults the strategy provider");
    if (!history.empty() && !history.ends_at_user())
        throw RangeError("strategy history must end at a user turn");

    StrategyCallOptions opts;
    opts.mode = config_.validation;
    opts.with_emotion = config_.mode == ModeratorMode::Full;
    opts.extractor = config_.extractor ? &*config_.extractor : nullptr;
    opts.prompts = config_.prompts.get();

    ProposedStrategy out;
    out.messages = strategy_messages(history);
    auto result = structured_strategy_call(*gateway_, config_.strategy_provider, out.messages, *config_.pool, opts);
    out.decision = std::move(result.decision);
    out.emotion = result.emotion;
    out.raw = std::move(result.provider_text);
    return out;
}

std::vector<ChatMessage> ModeratorEngine::generator_messages(const ConversationPrefix& history,
                                                             const StrategyDecision* decision,
                                                             std::optional<Emotion> emotion) const {
    TemplateVars vars = {{"topic_policy", config_.topic_policy},
                         {"opener", history.opener() ? "Session context: " + *history.opener() : std::string()}};
    std::string_view role = prompt::kModeratorInitial;
    if (decision) {
        vars["strategies"] = render_selected_strategies(*decision, *config_.pool);
        if (emotion) {
            role = prompt::kModeratorStrategy;
            vars["emotion"] = "The user currently seems to feel " + std::string(to_string(*emotion)) +
                              ". Respond with that in mind.";
        } else {
            role = prompt::kModeratorStrategyNoEmotion;
        }
    }
    std::vector<ChatMessage> msgs = {{"system", config_.prompts->render(role, vars)}};
    for (const auto& t : history.turns())
        msgs.push_back({t.speaker == Speaker::Moderator ? "assistant" : "user", t.text});
    return msgs;
}

GeneratedUtterance ModeratorEngine::generate_utterance(const ConversationPrefix& history,
                                                       const StrategyDecision* decision,
                                                       std::optional<Emotion> emotion) const {
    if (decision) require_valid(*decision, *config_.pool, config_.validation);
    GeneratedUtterance out;
    out.messages = generator_messages(history, decision, emotion);
    auto ex = gateway_->chat_complete(config_.generator, out.messages);
    out.text = std::move(ex.response);
    return out;
}

Session::Session(const Gateway& gateway, SessionConfig config, std::string id, std::optional<std::string> opener)
    : engine_(gateway, std::move(config)) {
    conv_.id = std::move(id);
    conv_.opener = std::move(opener);
    conv_.meta.arm = engine_.config().mode == ModeratorMode::Baseline ? Arm::Baseline : Arm::WithStrategy;
}

ModeratorStep Session::start() {
    if (closed_) throw SessionError("session is closed");
    if (started()) throw SessionError("session already started");
    Conversation candidate = conv_;
    auto step = respond(candidate);
    conv_ = std::move(candidate);
    steps_.push_back(step);
    return step;
}

ModeratorStep Session::next_turn(const std::string& user_message) {
    if (closed_) throw SessionError("session is closed");
    if (!started()) throw SessionError("session has not produced its opening turn");
    Conversation candidate = conv_;
    append_turn(candidate, Speaker::User, user_message);
    auto step = respond(candidate);
    conv_ = std::move(candidate);
    steps_.push_back(step);
    return step;
}

ModeratorStep Session::respond(Conversation& candidate) {
    const auto& cfg = engine_.config();
    ConversationPrefix history(candidate, candidate.turns.size());
    ModeratorStep step;
    const StrategyDecision* decision = nullptr;

    if (cfg.mode == ModeratorMode::Baseline) {
        step.kind = TurnKind::Baseline;
    } else if (static_cast<int>(count_turns(candidate, Speaker::Moderator)) < cfg.warmup_turns) {
        step.kind = TurnKind::Warmup;
    } else {
        std::optional<ProposedStrategy> proposed;
        int tries = cfg.validation == ValidationMode::Lenient ? 2 : 1;
        for (int i = 0; i < tries && !proposed; ++i) {
            try {
                proposed = engine_.propose_strategy(history);
            } catch (const StrategyValidationError& e) {
                if (cfg.validation == ValidationMode::Strict) throw;
                step.trace.notes.push_back(std::string("strategy rejected: ") + e.what());
            }
        }
        if (proposed) {
            step.kind = TurnKind::Strategic;
            step.decision = proposed->decision;
            if (cfg.mode == ModeratorMode::Full) step.emotion = proposed->emotion;
            step.trace.provider_messages = std::move(proposed->messages);
            step.trace.provider_raw = std::move(proposed->raw);
            decision = &*step.decision;
        } else {
            step.kind = TurnKind::Fallback;
            step.trace.notes.push_back("falling back to improvised generation");
        }
    }

    auto generated = engine_.generate_utterance(history, decision, step.emotion);
    step.utterance = std::move(generated.text);
    step.trace.generator_messages = std::move(generated.messages);
    step.trace.generator_raw = step.utterance;

    Turn& turn = append_turn(candidate, Speaker::Moderator, step.utterance);
    turn.kind = step.kind;
    turn.decision = step.decision;
    turn.emotion = step.emotion;
    if (!step.trace.notes.empty()) turn.extra["notes"] = step.trace.notes;
    if (cfg.record_prompts) {
        nlohmann::json trace = nlohmann::json::object();
        if (!step.trace.provider_messages.empty()) {
            trace["provider_prompt"] = to_json(std::span<const ChatMessage>(step.trace.provider_messages));
            trace["provider_raw"] = step.trace.provider_raw;
        }
        trace["generator_prompt"] = to_json(std::span<const ChatMessage>(step.trace.generator_messages));
        turn.extra["trace"] = std::move(trace);
    }
    return step;
}

}  // namespace stratchat

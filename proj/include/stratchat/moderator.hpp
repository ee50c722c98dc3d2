#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stratchat/dialogue.hpp"
#include "stratchat/gateway.hpp"
#include "stratchat/prompt_pack.hpp"
#include "stratchat/strategy_pool.hpp"

namespace stratchat {

// full: strategy + emotion; no_emotion: strategy only; baseline: generator only.
enum class ModeratorMode { Full, NoEmotion, Baseline };

std::string_view to_string(ModeratorMode m);
ModeratorMode moderator_mode_from_string(std::string_view s);

inline constexpr const char* kDefaultTopicPolicy =
    "Let the user choose what to talk about instead of imposing topics.";

struct SessionConfig {
    ModeratorMode mode = ModeratorMode::Full;
    int warmup_turns = 2;
    std::shared_ptr<const StrategyPool> pool;
    std::shared_ptr<const PromptPack> prompts;
    ProviderProfile strategy_provider;
    ProviderProfile generator;
    std::optional<ProviderProfile> extractor;
    ValidationMode validation = ValidationMode::Strict;
    std::string topic_policy = kDefaultTopicPolicy;
    bool record_prompts = false;  // attach prompts and raw completions to moderator turns
};

// Fills pool/prompts with the bundled defaults when unset and checks
// warmup_turns >= 0. Throws ConfigError.
SessionConfig normalized(SessionConfig config);

struct StepTrace {
    std::vector<ChatMessage> provider_messages;
    std::string provider_raw;
    std::vector<ChatMessage> generator_messages;
    std::string generator_raw;
    std::vector<std::string> notes;
};

struct ModeratorStep {
    std::string utterance;
    std::optional<StrategyDecision> decision;
    std::optional<Emotion> emotion;
    TurnKind kind = TurnKind::Warmup;
    StepTrace trace;
};

struct ProposedStrategy {
    StrategyDecision decision;
    std::optional<Emotion> emotion;
    std::vector<ChatMessage> messages;
    std::string raw;
};

struct GeneratedUtterance {
    std::string text;
    std::vector<ChatMessage> messages;
};

// The policy pair: a strategy provider followed by an utterance generator.
// Stateless apart from its configuration; safe to share across threads.
class ModeratorEngine {
public:
    ModeratorEngine(const Gateway& gateway, SessionConfig config);

    const SessionConfig& config() const { return config_; }
    const Gateway& gateway() const { return *gateway_; }

    // Requires mode != baseline and a prefix that is empty or ends at a user turn.
    ProposedStrategy propose_strategy(const ConversationPrefix& history) const;

    // Without a decision the generator improvises from the history alone.
    GeneratedUtterance generate_utterance(const ConversationPrefix& history,
                                          const StrategyDecision* decision,
                                          std::optional<Emotion> emotion) const;

    std::vector<ChatMessage> strategy_messages(const ConversationPrefix& history) const;
    std::vector<ChatMessage> generator_messages(const ConversationPrefix& history,
                                                const StrategyDecision* decision,
                                                std::optional<Emotion> emotion) const;

private:
    const Gateway* gateway_;
    SessionConfig config_;
};

// Plain-text transcript handed to the strategy provider. In full mode each
// user line carries the emotion inferred for it on earlier turns.
std::string serialize_history(const ConversationPrefix& history, bool include_emotions);

// The strategy block given to the generator for a decision.
std::string render_selected_strategies(const StrategyDecision& decision, const StrategyPool& pool);

// One live conversation. Strictly sequential; not thread-safe.
class Session {
public:
    Session(const Gateway& gateway, SessionConfig config, std::string id = {},
            std::optional<std::string> opener = std::nullopt);

    // Produces the opening moderator turn u0.
    ModeratorStep start();
    // Appends the user turn and the moderator reply. On any error the
    // conversation is left untouched.
    ModeratorStep next_turn(const std::string& user_message);
    void close() { closed_ = true; }

    bool closed() const { return closed_; }
    bool started() const { return !conv_.turns.empty(); }
    const Conversation& conversation() const { return conv_; }
    const std::vector<ModeratorStep>& steps() const { return steps_; }
    const ModeratorEngine& engine() const { return engine_; }
    std::size_t moderator_turns() const { return count_turns(conv_, Speaker::Moderator); }

private:
    ModeratorStep respond(Conversation& candidate);

    ModeratorEngine engine_;
    Conversation conv_;
    std::vector<ModeratorStep> steps_;
    bool closed_ = false;
};

}  // namespace stratchat

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/strategy_pool.hpp"

namespace stratchat {

enum class Speaker { Moderator, User };
enum class Emotion { Joy, Neutral, Sadness, Anger, Surprise };
enum class TurnKind { Warmup, Strategic, Baseline, Fallback };
enum class Source { Real, Simulated };
enum class Arm { WithStrategy, Baseline };

std::string_view to_string(Speaker s);
std::string_view to_string(Emotion e);
std::string_view to_string(TurnKind k);
std::string_view to_string(Source s);
std::string_view to_string(Arm a);

// Parsers throw SchemaError on unknown values.
Speaker speaker_from_string(std::string_view s);
Emotion emotion_from_string(std::string_view s);
std::optional<Emotion> try_emotion_from_string(std::string_view s);
TurnKind turn_kind_from_string(std::string_view s);
Source source_from_string(std::string_view s);
Arm arm_from_string(std::string_view s);

inline constexpr Emotion kAllEmotions[] = {Emotion::Joy, Emotion::Neutral, Emotion::Sadness,
                                           Emotion::Anger, Emotion::Surprise};

// One maximal single-speaker utterance. Moderator turns are numbered from 0
// (u0, u1, ...) and user turns from 1 (x1, x2, ...).
struct Turn {
    Speaker speaker = Speaker::Moderator;
    std::string text;
    std::size_t index = 0;
    std::optional<StrategyDecision> decision;
    std::optional<Emotion> emotion;
    std::optional<TurnKind> kind;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Turn&) const = default;
};

// For simulated conversations `participant` holds the twin id.
struct ConversationMeta {
    std::string participant;
    std::string session;  // timestamp or week label, e.g. "week-09"
    Source source = Source::Real;
    std::optional<Arm> arm;
    std::optional<std::uint64_t> seed;
    std::optional<int> episode;
    bool aborted = false;

    bool operator==(const ConversationMeta&) const = default;
};

struct Conversation {
    std::string id;
    std::optional<std::string> opener;  // starting point, not a turn
    std::vector<Turn> turns;
    ConversationMeta meta;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Conversation&) const = default;
};

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

inline std::size_t turn_count(const Conversation& c) { return c.turns.size(); }
std::size_t count_turns(const Conversation& c, Speaker s);

// Append a turn, assigning its index. Throws IngestionError if the text is
// blank or the previous turn has the same speaker.
Turn& append_turn(Conversation& c, Speaker speaker, std::string text);

// Leading system record becomes the opener; assistant records become
// moderator turns; consecutive same-role records merge with '\n'.
Conversation ingest_dialogue(std::span<const ChatMessage> raw);
Conversation ingest_dialogue(const nlohmann::json& raw);

// Keeps conversations with at least min_turns turns, in order.
std::vector<Conversation> filter_corpus(std::span<const Conversation> corpus,
                                        std::size_t min_turns = 40);

// Non-owning view of the first `cut` turns of a conversation plus its opener.
class ConversationPrefix {
public:
    ConversationPrefix(const Conversation& c, std::size_t cut);

    const Conversation& conversation() const { return *conv_; }
    std::size_t cut() const { return cut_; }
    std::span<const Turn> turns() const { return {conv_->turns.data(), cut_}; }
    const std::optional<std::string>& opener() const { return conv_->opener; }
    bool empty() const { return cut_ == 0; }
    bool ends_at_user() const { return cut_ > 0 && conv_->turns[cut_ - 1].speaker == Speaker::User; }

private:
    const Conversation* conv_;
    std::size_t cut_;
};

// History before moderator turn t (0-based). Throws RangeError if the
// conversation has no moderator turn t.
ConversationPrefix history_at(const Conversation& c, std::size_t t);

// Store format: one JSON object per line. Unknown fields are kept.
nlohmann::json to_json(const Conversation& c);
Conversation conversation_from_json(const nlohmann::json& j);
std::string serialize(const Conversation& c);
Conversation parse_conversation(std::string_view line, std::size_t lineno = 1);

void write_store(std::ostream& out, std::span<const Conversation> corpus);
// Throws ParseError naming the first malformed line.
std::vector<Conversation> read_store(std::istream& in);
void write_store_file(const std::string& path, std::span<const Conversation> corpus);
std::vector<Conversation> read_store_file(const std::string& path);

nlohmann::json to_json(const StrategyDecision& d);
StrategyDecision decision_from_json(const nlohmann::json& j);

}  // namespace stratchat

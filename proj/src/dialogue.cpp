#include "stratchat/dialogue.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace stratchat {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::pair<Enum, std::string_view> (&table)[N],
                const char* what) {
    for (const auto& [value, name] : table)
        if (name == s) return value;
    throw SchemaError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum e, const std::pair<Enum, std::string_view> (&table)[N]) {
    for (const auto& [value, name] : table)
        if (value == e) return name;
    return table[0].second;
}

constexpr std::pair<Speaker, std::string_view> kSpeakers[] = {
    {Speaker::Moderator, "moderator"}, {Speaker::User, "user"}};
constexpr std::pair<Emotion, std::string_view> kEmotions[] = {
    {Emotion::Joy, "joy"},         {Emotion::Neutral, "neutral"}, {Emotion::Sadness, "sadness"},
    {Emotion::Anger, "anger"},     {Emotion::Surprise, "surprise"}};
constexpr std::pair<TurnKind, std::string_view> kKinds[] = {{TurnKind::Warmup, "warmup"},
                                                            {TurnKind::Strategic, "strategic"},
                                                            {TurnKind::Baseline, "baseline"},
                                                            {TurnKind::Fallback, "fallback"}};
constexpr std::pair<Source, std::string_view> kSources[] = {{Source::Real, "real"},
                                                            {Source::Simulated, "simulated"}};
constexpr std::pair<Arm, std::string_view> kArms[] = {{Arm::WithStrategy, "with_strategy"},
                                                      {Arm::Baseline, "baseline"}};

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

std::string_view to_string(Speaker s) { return enum_name(s, kSpeakers); }
std::string_view to_string(Emotion e) { return enum_name(e, kEmotions); }
std::string_view to_string(TurnKind k) { return enum_name(k, kKinds); }
std::string_view to_string(Source s) { return enum_name(s, kSources); }
std::string_view to_string(Arm a) { return enum_name(a, kArms); }

Speaker speaker_from_string(std::string_view s) { return parse_enum(s, kSpeakers, "speaker"); }
Emotion emotion_from_string(std::string_view s) { return parse_enum(s, kEmotions, "emotion"); }
TurnKind turn_kind_from_string(std::string_view s) { return parse_enum(s, kKinds, "turn kind"); }
Source source_from_string(std::string_view s) { return parse_enum(s, kSources, "source"); }
Arm arm_from_string(std::string_view s) { return parse_enum(s, kArms, "arm"); }

std::optional<Emotion> try_emotion_from_string(std::string_view s) {
    for (const auto& [value, name] : kEmotions)
        if (name == s) return value;
    return std::nullopt;
}

std::size_t count_turns(const Conversation& c, Speaker s) {
    return static_cast<std::size_t>(std::count_if(
        c.turns.begin(), c.turns.end(), [s](const Turn& t) { return t.speaker == s; }));
}

Turn& append_turn(Conversation& c, Speaker speaker, std::string text) {
    if (blank(text)) throw IngestionError("turn text is empty");
    if (!c.turns.empty() && c.turns.back().speaker == speaker)
        throw IngestionError("two consecutive " + std::string(to_string(speaker)) + " turns");
    Turn t;
    t.speaker = speaker;
    t.text = std::move(text);
    t.index = count_turns(c, speaker) + (speaker == Speaker::User ? 1 : 0);
    c.turns.push_back(std::move(t));
    return c.turns.back();
}

Conversation ingest_dialogue(std::span<const ChatMessage> raw) {
    if (raw.empty()) throw IngestionError("empty chat-message list");
    Conversation c;
    std::size_t i = 0;
    if (raw[0].role == "system") {
        if (blank(raw[0].content)) throw IngestionError("record 0 has empty content");
        c.opener = raw[0].content;
        i = 1;
    }
    for (; i < raw.size(); ++i) {
        const auto& m = raw[i];
        Speaker speaker;
        if (m.role == "assistant")
            speaker = Speaker::Moderator;
        else if (m.role == "user")
            speaker = Speaker::User;
        else
            throw IngestionError("record " + std::to_string(i) + " has unknown role '" + m.role + "'");
        if (blank(m.content))
            throw IngestionError("record " + std::to_string(i) + " has empty content");
        if (!c.turns.empty() && c.turns.back().speaker == speaker)
            c.turns.back().text += "\n" + m.content;
        else
            append_turn(c, speaker, m.content);
    }
    return c;
}

Conversation ingest_dialogue(const json& raw) {
    if (!raw.is_array()) throw IngestionError("chat-message list must be a JSON array");
    std::vector<ChatMessage> msgs;
    msgs.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& r = raw[i];
        if (!r.is_object() || !r.contains("role") || !r.contains("content") ||
            !r["role"].is_string() || !r["content"].is_string())
            throw IngestionError("record " + std::to_string(i) + " lacks string role/content");
        msgs.push_back({r["role"].get<std::string>(), r["content"].get<std::string>()});
    }
    return ingest_dialogue(std::span<const ChatMessage>(msgs));
}

std::vector<Conversation> filter_corpus(std::span<const Conversation> corpus, std::size_t min_turns) {
    std::vector<Conversation> out;
    for (const auto& c : corpus)
        if (turn_count(c) >= min_turns) out.push_back(c);
    return out;
}

ConversationPrefix::ConversationPrefix(const Conversation& c, std::size_t cut) : conv_(&c), cut_(cut) {
    if (cut > c.turns.size())
        throw RangeError("prefix cut " + std::to_string(cut) + " exceeds " +
                         std::to_string(c.turns.size()) + " turns");
}

ConversationPrefix history_at(const Conversation& c, std::size_t t) {
    std::size_t seen = 0;
    for (std::size_t pos = 0; pos < c.turns.size(); ++pos) {
        if (c.turns[pos].speaker != Speaker::Moderator) continue;
        if (seen == t) return ConversationPrefix(c, pos);
        ++seen;
    }
    throw RangeError("conversation has " + std::to_string(seen) + " moderator turns, asked for u" +
                     std::to_string(t));
}

json to_json(const StrategyDecision& d) {
    json j = json::object();
    if (d.backward) j["backward"] = *d.backward;
    if (d.forward) j["forward"] = *d.forward;
    return j;
}

StrategyDecision decision_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("decision must be an object");
    StrategyDecision d;
    if (auto it = j.find("backward"); it != j.end() && !it->is_null()) d.backward = it->get<std::string>();
    if (auto it = j.find("forward"); it != j.end() && !it->is_null()) d.forward = it->get<std::string>();
    return d;
}

namespace {

const char* const kTurnFields[] = {"speaker", "text", "index", "decision", "emotion", "kind"};
const char* const kConversationFields[] = {"id", "opener", "turns", "meta"};

bool is_known(std::string_view key, std::span<const char* const> fields) {
    return std::any_of(fields.begin(), fields.end(), [&](const char* f) { return key == f; });
}

json turn_to_json(const Turn& t) {
    json j = t.extra.is_object() ? t.extra : json::object();
    j["speaker"] = to_string(t.speaker);
    j["text"] = t.text;
    j["index"] = t.index;
    if (t.decision) j["decision"] = to_json(*t.decision);
    if (t.emotion) j["emotion"] = to_string(*t.emotion);
    if (t.kind) j["kind"] = to_string(*t.kind);
    return j;
}

json meta_to_json(const ConversationMeta& m) {
    json j = json::object();
    j["participant"] = m.participant;
    j["session"] = m.session;
    j["source"] = to_string(m.source);
    if (m.arm) j["arm"] = to_string(*m.arm);
    if (m.seed) j["seed"] = *m.seed;
    if (m.episode) j["episode"] = *m.episode;
    if (m.aborted) j["aborted"] = true;
    return j;
}

ConversationMeta meta_from_json(const json& j) {
    ConversationMeta m;
    if (!j.is_object()) throw SchemaError("meta must be an object");
    m.participant = j.value("participant", "");
    m.session = j.value("session", "");
    m.source = source_from_string(j.value("source", "real"));
    if (j.contains("arm")) m.arm = arm_from_string(j["arm"].get<std::string>());
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("episode")) m.episode = j["episode"].get<int>();
    m.aborted = j.value("aborted", false);
    return m;
}

}  // namespace

json to_json(const Conversation& c) {
    json j = c.extra.is_object() ? c.extra : json::object();
    j["id"] = c.id;
    if (c.opener) j["opener"] = *c.opener;
    j["meta"] = meta_to_json(c.meta);
    json turns = json::array();
    for (const auto& t : c.turns) turns.push_back(turn_to_json(t));
    j["turns"] = std::move(turns);
    return j;
}

Conversation conversation_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("conversation record must be an object");
    Conversation c;
    if (!j.contains("id") || !j["id"].is_string()) throw SchemaError("missing string field 'id'");
    c.id = j["id"].get<std::string>();
    if (j.contains("opener")) c.opener = j["opener"].get<std::string>();
    if (j.contains("meta")) c.meta = meta_from_json(j["meta"]);
    if (!j.contains("turns") || !j["turns"].is_array()) throw SchemaError("missing array field 'turns'");
    for (const auto& tj : j["turns"]) {
        if (!tj.is_object()) throw SchemaError("turn must be an object");
        Turn& t = append_turn(c, speaker_from_string(tj.at("speaker").get<std::string>()),
                              tj.at("text").get<std::string>());
        if (tj.contains("index") && tj["index"].get<std::size_t>() != t.index)
            throw SchemaError("turn index " + tj["index"].dump() + " does not match position " +
                              std::to_string(t.index));
        if (tj.contains("decision")) t.decision = decision_from_json(tj["decision"]);
        if (tj.contains("emotion")) t.emotion = emotion_from_string(tj["emotion"].get<std::string>());
        if (tj.contains("kind")) t.kind = turn_kind_from_string(tj["kind"].get<std::string>());
        for (const auto& [k, v] : tj.items())
            if (!is_known(k, kTurnFields)) t.extra[k] = v;
    }
    for (const auto& [k, v] : j.items())
        if (!is_known(k, kConversationFields)) c.extra[k] = v;
    return c;
}

std::string serialize(const Conversation& c) { return to_json(c).dump(); }

Conversation parse_conversation(std::string_view line, std::size_t lineno) {
    try {
        return conversation_from_json(json::parse(line));
    } catch (const json::exception& e) {
        throw ParseError(lineno, e.what());
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(lineno, e.what());
    }
}

void write_store(std::ostream& out, std::span<const Conversation> corpus) {
    for (const auto& c : corpus) out << serialize(c) << '\n';
}

std::vector<Conversation> read_store(std::istream& in) {
    std::vector<Conversation> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        out.push_back(parse_conversation(line, lineno));
    }
    return out;
}

void write_store_file(const std::string& path, std::span<const Conversation> corpus) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write store '" + path + "'");
    write_store(out, corpus);
}

std::vector<Conversation> read_store_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open store '" + path + "'");
    return read_store(in);
}

}  // namespace stratchat

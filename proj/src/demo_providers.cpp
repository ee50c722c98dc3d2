#include "stratchat/demo_providers.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <vector>

namespace stratchat {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string message(const json& request, std::string_view role, bool last = true) {
    const auto& msgs = request.at("messages");
    std::string out;
    for (const auto& m : msgs) {
        if (m.at("role") != role) continue;
        out = m.at("content").get<std::string>();
        if (!last) break;
    }
    return out;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool contains_any(const std::string& text, std::initializer_list<const char*> words) {
    return std::any_of(words.begin(), words.end(), [&](const char* w) { return text.find(w) != std::string::npos; });
}

std::string infer_emotion(const std::string& utterance) {
    auto t = lower(utterance);
    if (contains_any(t, {"annoy", "angry", "frustrat", "unfair"})) return "anger";
    if (contains_any(t, {"miss ", "lonely", "sad", "tired"})) return "sadness";
    if (contains_any(t, {"surpris", "wow", "can't believe"})) return "surprise";
    if (contains_any(t, {"happy", "enjoy", "lovely", "laughed", "wonderful"})) return "joy";
    return "neutral";
}

// Longest alphabetic word of at least five letters, lowercased.
std::string keyword(const std::string& text) {
    std::string best, cur;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        char c = i < text.size() ? text[i] : ' ';
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            if (cur.size() >= 5 && cur.size() > best.size()) best = cur;
            cur.clear();
        }
    }
    return best;
}

const std::string* pick(const std::vector<std::string>& v, std::uint64_t h) {
    return v.empty() ? nullptr : &v[h % v.size()];
}

std::vector<std::string> weighted(const StrategyPool& pool, Direction d, std::initializer_list<const char*> prefs) {
    std::vector<std::string> out;
    for (const char* tag : prefs) {
        const auto* s = pool.find(tag);
        if (s && s->direction == d) out.emplace_back(s->tag);
    }
    if (out.empty())
        for (const auto& s : pool.entries())
            if (s.direction == d) out.push_back(s.tag);
    return out;
}

std::string last_user_line(const std::string& history) {
    std::istringstream in(history);
    std::string line, last;
    while (std::getline(in, line))
        if (line.rfind("User", 0) == 0) last = line.substr(std::min(line.size(), line.find(':') + 1));
    return last;
}

}  // namespace

MockReply demo_strategy_provider(const StrategyPool& pool, const json& request) {
    auto history = message(request, "user");
    auto h = fnv1a(history);
    static const auto shapes = std::vector<int>{0, 1, 1, 1, 1, 2, 2, 2, 2, 2};  // 0 = B, 1 = B+F, 2 = F
    int shape = shapes[h % shapes.size()];
    auto fwd = weighted(pool, Direction::Forward, {"OpQ", "OpQ", "OpQ", "OpQ", "WhQ", "WhQ", "YNQ", "CoO", "Sd", "I", "PS", "DYNQ", "OrC"});
    auto bwd = weighted(pool, Direction::Backward, {"Ack", "Ack", "Ack", "StaNo", "StaNo", "App", "Agr", "RoF", "Rep", "Sta"});
    json out = {{"backward", nullptr}, {"forward", nullptr}};
    const auto* b = pick(bwd, h >> 8);
    const auto* f = pick(fwd, h >> 24);
    if (shape != 2 && b) out["backward"] = *b;
    if ((shape != 0 || !b) && f) out["forward"] = *f;
    if (out["backward"].is_null() && out["forward"].is_null() && b) out["backward"] = *b;
    out["emotion"] = infer_emotion(last_user_line(history));
    out["rationale"] = "demo policy";
    return {200, out.dump(), false};
}

MockReply demo_generator(const StrategyPool& pool, const json& request) {
    auto system = message(request, "system");
    auto last_user = message(request, "user");
    auto h = fnv1a(system + last_user);

    // Tags appear as "[Tag], backward-looking" in the selected-strategy block.
    std::vector<const Strategy*> chosen;
    for (std::size_t pos = 0; (pos = system.find("], ", pos)) != std::string::npos; pos += 3) {
        auto rest = std::string_view(system).substr(pos + 3);
        if (rest.rfind("backward-looking", 0) != 0 && rest.rfind("forward-looking", 0) != 0) continue;
        auto open = system.rfind('[', pos);
        if (open == std::string::npos) continue;
        if (const auto* s = pool.find(std::string_view(system).substr(open + 1, pos - open - 1))) chosen.push_back(s);
    }

    std::string kw = keyword(last_user);
    if (!chosen.empty()) {
        std::string out;
        for (const auto* s : chosen) {
            if (!out.empty()) out += ' ';
            if (s->direction == Direction::Forward && !kw.empty()) out += "You mentioned " + kw + ". ";
            out += s->example;
        }
        return {200, out, false};
    }
    if (last_user.empty())
        return {200, "Hello there! It is really lovely to see you today. How has your day been so far?", false};

    static const std::vector<std::string> bank = {
        "That sounds really interesting, and I appreciate you sharing it with me.",
        "Many people find that these little moments make a day feel complete.",
        "It is always nice to hear how you spend your time and what keeps you busy.",
        "I have read that staying active and connected with others is good for both body and mind.",
        "There is often a lot to think about when it comes to everyday routines.",
        "Everyone has their own way of looking at things, and yours is worth hearing.",
    };
    std::string out;
    if (!kw.empty()) out = "Thank you for telling me about " + kw + ". ";
    out += bank[h % bank.size()] + " " + bank[(h >> 16) % bank.size()];
    if ((h >> 32) % 3 != 0) out += " Is there anything else on your mind today?";
    return {200, out, false};
}

MockReply demo_extractor(const StrategyPool& pool, const json& request) {
    auto text = message(request, "user");
    json out = {{"backward", nullptr}, {"forward", nullptr}, {"emotion", nullptr}};
    for (const auto& s : pool.entries()) {
        auto slot = std::string(to_string(s.direction));
        if (!out[slot].is_null()) continue;
        if (text.find("[" + s.tag + "]") != std::string::npos || text.find(s.name) != std::string::npos) out[slot] = s.tag;
    }
    for (const char* e : {"joy", "neutral", "sadness", "anger", "surprise"})
        if (text.find(e) != std::string::npos) {
            out["emotion"] = e;
            break;
        }
    return {200, out.dump(), false};
}

MockReply demo_annotator(const StrategyPool& pool, const json& request) {
    auto prompt = message(request, "user");
    const std::string marker = "Moderator utterance to label:\n";
    auto at = prompt.rfind(marker);
    std::string utterance = at == std::string::npos ? prompt : prompt.substr(at + marker.size());
    if (auto end = utterance.find("\n\nReply with"); end != std::string::npos) utterance.resize(end);

    std::vector<std::string> tags;
    for (const auto& s : pool.entries())
        if (!s.example.empty() && utterance.find(s.example) != std::string::npos) tags.push_back(s.tag);
    if (tags.empty()) {
        if (utterance.find('?') != std::string::npos && pool.find("OpQ")) tags.push_back("OpQ");
        if (pool.find("StaNo")) tags.push_back("StaNo");
    }
    std::string out;
    for (const auto& t : tags) out += (out.empty() ? "" : ", ") + t;
    return {200, out, false};
}

MockReply demo_judge(const json& request) {
    auto prompt = message(request, "user");
    auto a_at = prompt.find("Conversation A:\n");
    auto b_at = prompt.find("Conversation B:\n");
    auto end = prompt.find("In which conversation");
    if (a_at == std::string::npos || b_at == std::string::npos || end == std::string::npos)
        return {200, "I cannot tell.", false};
    auto user_tokens = [](std::string_view block) {
        std::size_t n = 0;
        std::istringstream in{std::string(block)};
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("User", 0) != 0) continue;
            std::istringstream words(line.substr(line.find(':') + 1));
            std::string w;
            while (words >> w) ++n;
        }
        return n;
    };
    auto a = user_tokens(std::string_view(prompt).substr(a_at, b_at - a_at));
    auto b = user_tokens(std::string_view(prompt).substr(b_at, end - b_at));
    // Close calls fall back on the first-presented dialogue, as real judges tend to.
    auto hi = std::max(a, b), lo = std::min(a, b);
    if (hi == 0 || (hi - lo) * 10 < hi) return {200, "A", false};
    return {200, a > b ? "A" : "B", false};
}

MockReply demo_twin(const json& request) {
    auto persona = message(request, "system");
    auto moderator = message(request, "user");
    auto turns = request.at("messages").size();
    auto h = fnv1a(persona + "\x1f" + moderator + "\x1f" + std::to_string(turns));
    auto m = lower(moderator);

    static const std::vector<std::string> openers = {"Oh, ", "Well, ", "Hmm, ", "", "Ah, "};
    static const std::vector<std::string> bank = {
        "I spent the morning in my garden with the roses.",
        "My granddaughter called me yesterday and we laughed a lot.",
        "I miss my old friends from the factory sometimes.",
        "The weather has been lovely this week.",
        "I was surprised to see the prices at the market.",
        "It gets lonely in the evenings.",
        "My knees are tired after the walk to the shop.",
        "I really enjoy the radio programs in the afternoon.",
        "It annoys me when the bus is late again.",
        "We used to dance every Saturday when I was young.",
        "My neighbour brought over some soup, which was kind of her.",
        "I am reading a book about the old railways.",
    };
    std::size_t sentences = 1 + (h >> 40) % 2;
    if (m.find('?') != std::string::npos) ++sentences;
    if (contains_any(m, {"how about you", "what", "tell me", "how "})) sentences += 2;

    std::string out = openers[h % openers.size()];
    std::string kw = keyword(moderator);
    if (!kw.empty() && (h >> 8) % 2 == 0) out += "about " + kw + ", ";
    for (std::size_t i = 0; i < sentences; ++i) {
        if (i) out += ' ';
        out += bank[(h >> (12 + 4 * i)) % bank.size()];
    }
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return {200, out, false};
}

void install_demo_providers(MockTransport& transport, const StrategyPool& pool) {
    // The pool is copied so the responders outlive the caller's reference.
    auto p = std::make_shared<StrategyPool>(pool);
    transport.set_responder(roles::kStrategyProvider,
                            [p](const ProviderProfile&, const json& r) { return demo_strategy_provider(*p, r); });
    auto gen = [p](const ProviderProfile&, const json& r) { return demo_generator(*p, r); };
    transport.set_responder(roles::kGenerator, gen);
    transport.set_responder(roles::kBaselineGenerator, gen);
    transport.set_responder(roles::kExtractor,
                            [p](const ProviderProfile&, const json& r) { return demo_extractor(*p, r); });
    transport.set_responder(roles::kAnnotator,
                            [p](const ProviderProfile&, const json& r) { return demo_annotator(*p, r); });
    transport.set_responder(roles::kJudge, [](const ProviderProfile&, const json& r) { return demo_judge(r); });
    transport.set_default_responder([](const ProviderProfile&, const json& r) { return demo_twin(r); });
}

}  // namespace stratchat

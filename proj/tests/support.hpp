#pragma once

// Fixtures shared by the test binaries.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/dialogue.hpp"
#include "stratchat/gateway.hpp"
#include "stratchat/mock_provider.hpp"
#include "stratchat/moderator.hpp"

namespace testkit {

using namespace stratchat;
namespace fs = std::filesystem;

// Fresh directory under $STRATCHAT_TMP (or the system temp dir).
inline fs::path scratch_dir(const std::string& name) {
    static std::atomic<int> seq{0};
    const char* root = std::getenv("STRATCHAT_TMP");
    fs::path base = root && *root ? fs::path(root) : fs::temp_directory_path() / "stratchat-tests";
    auto dir = base / (name + "-" + std::to_string(::getpid()) + "-" + std::to_string(seq++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SessionConfig mock_config(ModeratorMode mode, int warmup = 2) {
    SessionConfig c;
    c.mode = mode;
    c.warmup_turns = warmup;
    c.strategy_provider = default_profile("strategy_provider", ProfileKind::StrategyProvider);
    c.generator = default_profile("generator", ProfileKind::Generator);
    return normalized(std::move(c));
}

inline std::string strategy_json(const std::optional<std::string>& b, const std::optional<std::string>& f,
                                 const std::string& emotion = "neutral") {
    nlohmann::json j = {{"backward", b ? nlohmann::json(*b) : nlohmann::json()},
                        {"forward", f ? nlohmann::json(*f) : nlohmann::json()},
                        {"emotion", emotion},
                        {"rationale", "scripted"}};
    return j.dump();
}

// Builds a conversation from alternating texts, moderator first.
inline Conversation dialogue(const std::string& id, const std::vector<std::string>& texts,
                             const std::string& participant = "p1") {
    Conversation c;
    c.id = id;
    c.meta.participant = participant;
    for (std::size_t i = 0; i < texts.size(); ++i)
        append_turn(c, i % 2 == 0 ? Speaker::Moderator : Speaker::User, texts[i]);
    return c;
}

inline Conversation sized_dialogue(const std::string& id, std::size_t turns) {
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < turns; ++i) texts.push_back("turn " + std::to_string(i));
    return dialogue(id, texts);
}

}  // namespace testkit

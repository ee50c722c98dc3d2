#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/dialogue.hpp"
#include "stratchat/gateway.hpp"
#include "stratchat/moderator.hpp"

namespace stratchat {

// A simulated user reachable as a chat endpoint.
struct TwinProfile {
    std::string id;
    std::string persona;
    ProviderProfile provider;
    std::string opener;  // session context given to both arms; may be empty
};

struct EpisodePlan {
    std::vector<TwinProfile> twins;
    int episodes_per_twin = 20;
    int turns_per_episode = 20;  // single-speaker turns
    std::vector<ModeratorMode> arms = {ModeratorMode::Full, ModeratorMode::Baseline};
    std::uint64_t seed = 0;
    int workers = 4;
    SessionConfig moderator;                          // mode is set per arm
    std::optional<ProviderProfile> baseline_generator;  // generator for the baseline arm
};

// Throws ConfigError on empty twins, duplicate twin ids, counts < 1 or no arms.
void validate_plan(const EpisodePlan& plan);

// Parse a plan file. Twin providers not given default to a twin profile with
// role "twin:<id>". The moderator config is left for the caller.
EpisodePlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_summary(const EpisodePlan& plan);

// Per-episode seed shared by both arms.
std::uint64_t episode_seed(std::uint64_t plan_seed, const std::string& twin, int episode);
std::string episode_id(const std::string& twin, ModeratorMode arm, int episode);

// Messages the twin sees: its persona prompt, then the moderator as "user"
// and its own earlier replies as "assistant".
std::vector<ChatMessage> twin_messages(const Conversation& conv, const TwinProfile& twin, const PromptPack& prompts);

// Alternates moderator and twin until the conversation holds `turns` turns.
// Provider failures abort the episode: the conversation keeps everything up
// to the last twin reply and is flagged aborted. Configuration errors throw.
Conversation run_episode(Session& session, const TwinProfile& twin, int turns, std::uint64_t seed);

struct ManifestEntry {
    std::string id;
    std::string twin;
    std::string arm;  // moderator mode
    int episode = 0;
    std::uint64_t seed = 0;
    std::string status;  // complete | aborted | missing
    std::size_t turns = 0;

    bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
    nlohmann::json plan;
    std::vector<ManifestEntry> entries;

    bool complete() const;
    const ManifestEntry* find(const std::string& id) const;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

struct BatchResult {
    Manifest manifest;
    std::size_t generated = 0;
    std::size_t reused = 0;
    std::size_t aborted = 0;
};

inline constexpr const char* kCorpusFile = "conversations.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

// Runs every (twin, arm, episode) into `corpus_dir`. Completed conversations
// already in the store are reused, so an interrupted or trimmed run resumes
// where it stopped. The store is rewritten in plan order at the end.
BatchResult run_batch(const EpisodePlan& plan, const Gateway& gateway, const std::filesystem::path& corpus_dir);

}  // namespace stratchat

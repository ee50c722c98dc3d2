#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/gateway.hpp"
#include "stratchat/mock_provider.hpp"
#include "stratchat/moderator.hpp"
#include "stratchat/offline_eval.hpp"
#include "stratchat/prompt_pack.hpp"
#include "stratchat/report.hpp"
#include "stratchat/simulation.hpp"

namespace stratchat {

namespace fs = std::filesystem;

// Profile names understood by the runtime. Each doubles as the profile role.
inline constexpr const char* kProfileNames[] = {"strategy_provider", "generator", "baseline_generator",
                                                "extractor",         "annotator", "judge"};

// Everything a run needs besides its inputs. Loaded from a JSON file:
//   {"profiles": {"generator": {...}, ...}, "pool": "pool.jsonl", "prompts": "dir",
//    "mock": false, "exchange_log": "calls.jsonl", "api_key_env": "STRATCHAT_API_KEY",
//    "warmup_turns": 2, "validation": "strict", "topic_policy": "..."}
// Relative paths resolve against the config file's directory. Credentials are
// only ever read from the environment variables the profiles name.
struct RuntimeConfig {
    std::map<std::string, nlohmann::json> profiles;
    std::optional<fs::path> pool_path;
    std::optional<fs::path> prompts_path;
    bool mock = false;
    std::optional<fs::path> exchange_log;
    std::optional<std::string> api_key_env;
    int warmup_turns = 2;
    ValidationMode validation = ValidationMode::Strict;
    std::string topic_policy = kDefaultTopicPolicy;
    int max_attempts = 3;
};

RuntimeConfig runtime_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {});
RuntimeConfig load_runtime_config(const fs::path& path);

class Runtime {
public:
    explicit Runtime(RuntimeConfig config);

    const RuntimeConfig& config() const { return config_; }
    const StrategyPool& pool() const { return *pool_; }
    std::shared_ptr<const StrategyPool> pool_ptr() const { return pool_; }
    const PromptPack& prompts() const { return *prompts_; }
    std::shared_ptr<const PromptPack> prompts_ptr() const { return prompts_; }
    const Gateway& gateway() const { return *gateway_; }
    // Null unless the runtime runs on demo providers.
    MockTransport* mock() const { return mock_.get(); }

    bool has_profile(const std::string& name) const { return profiles_.count(name) != 0; }
    // Throws ConfigError for unknown names.
    const ProviderProfile& profile(const std::string& name) const;

    // Moderator settings for a mode. Baseline uses the baseline_generator profile.
    SessionConfig session_config(ModeratorMode mode) const;

private:
    RuntimeConfig config_;
    std::shared_ptr<const StrategyPool> pool_;
    std::shared_ptr<const PromptPack> prompts_;
    std::shared_ptr<MockTransport> mock_;
    std::unique_ptr<Gateway> gateway_;
    std::map<std::string, ProviderProfile> profiles_;
};

// Nine simulated users with distinct personas.
std::vector<TwinProfile> demo_twins(int count = 9);

struct SimulateOptions {
    std::optional<fs::path> plan_file;
    fs::path out_dir;
    int twins = 9;  // when no plan file is given
    std::optional<int> episodes;
    std::optional<int> turns;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::vector<ModeratorMode> arms;  // empty keeps the plan's arms
};

BatchResult run_simulate(const Runtime& rt, const SimulateOptions& options);

struct EvalOfflineOptions {
    fs::path corpus;  // conversation store
    fs::path out_dir;
    std::size_t min_turns = 40;
    EvalOptions turns;
    TurnRange range;
    int workers = 4;
};

struct EvalOfflineResult {
    std::vector<AlignmentRecord> records;
    std::size_t conversations = 0;
    std::size_t filtered_out = 0;
};

inline constexpr const char* kAlignmentFile = "alignment.jsonl";

// Writes alignment.jsonl plus per-grouping CSV tables into out_dir.
EvalOfflineResult run_eval_offline(const Runtime& rt, const EvalOfflineOptions& options);

std::vector<AlignmentRecord> read_alignment_file(const fs::path& path);

struct ReportRunOptions {
    fs::path corpus;
    std::optional<fs::path> alignment;
    fs::path out_dir;
    ReportOptions report;
    bool judge = true;  // use the runtime's judge profile for win rates
};

ReportBundle run_report(const Runtime& rt, const ReportRunOptions& options);

// Raw chat logs, one dialogue per line: either a bare message array or
// {"id", "participant", "session", "messages": [...]}. Missing ids become
// "conv-0001" and so on. Throws ParseError naming the offending line.
std::vector<Conversation> ingest_file(const fs::path& path);

}  // namespace stratchat

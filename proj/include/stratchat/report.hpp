#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stratchat/metrics.hpp"
#include "stratchat/offline_eval.hpp"

namespace stratchat {

struct ReportOptions {
    std::uint64_t seed = 0;  // pairing for win rates
    std::vector<Aspect> aspects = {Aspect::Listening, Aspect::Fluency, Aspect::MakingSense};
    std::optional<ProviderProfile> judge;  // win rates are computed only with a judge
    const PromptPack* prompts = nullptr;   // default pack if null
    int workers = 4;
    std::size_t first_cut = 3;
    std::size_t last_cut = 20;
    int warmup_turns = 2;
    std::size_t top_triplets = 15;
    std::size_t top_strategies = 10;
    TurnRange alignment_range;
    // Subset of verbosity, win_rate, progression, emotion, strategy, alignment. Empty means all.
    std::set<std::string> metrics;
};

// File name to contents. Numbers are printed with fixed precision so equal
// inputs give byte-identical bundles.
struct ReportBundle {
    std::map<std::string, std::string> files;
};

inline constexpr const char* kReportMetrics[] = {"verbosity", "win_rate", "progression",
                                                  "emotion",   "strategy", "alignment"};

// Aborted conversations are counted in the summary and left out of every metric.
ReportBundle build_report(std::span<const Conversation> corpus, std::span<const AlignmentRecord> alignment,
                          const Gateway* gateway, const StrategyPool& pool, const ReportOptions& options);

void write_report(const ReportBundle& bundle, const std::filesystem::path& dir);

// Minimal CSV quoting: fields with commas, quotes or newlines are quoted.
std::string csv_field(const std::string& s);
std::string fixed(double v, int precision = 6);

}  // namespace stratchat

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stratchat/dialogue.hpp"
#include "stratchat/gateway.hpp"
#include "stratchat/moderator.hpp"
#include "stratchat/strategy_set.hpp"

namespace stratchat {

StrategySet to_set(const StrategyDecision& d);

// Resolve an annotator reply into pool tags. Accepts a JSON array, a JSON
// object with a "tags" or "strategies" array, or labels separated by commas,
// semicolons, '+' or newlines. Names resolve to their tags. Throws
// EmptyAnnotationError when nothing resolves.
StrategySet parse_annotation(std::string_view reply, const StrategyPool& pool);

// Ask the annotator which strategies lie behind `utterance` given the context.
StrategySet annotate_strategies(const Gateway& gateway, std::string_view utterance, const ConversationPrefix& context,
                                const ProviderProfile& annotator, const StrategyPool& pool,
                                const PromptPack& prompts);

// One evaluated moderator turn. `turn` is the 0-based moderator index t.
// Skipped records keep whatever sets were obtained and carry a reason.
struct AlignmentRecord {
    std::string conversation_id;
    std::string participant;
    std::string session;
    std::size_t turn = 0;
    StrategySet golden;
    StrategySet proposed;
    StrategySet baseline;
    std::optional<double> smp_strategy;
    std::optional<double> smp_baseline;
    std::optional<std::string> skip_reason;

    bool skipped() const { return skip_reason.has_value(); }
    bool operator==(const AlignmentRecord&) const = default;
};

nlohmann::json to_json(const AlignmentRecord& r);
AlignmentRecord alignment_record_from_json(const nlohmann::json& j);

struct EvalOptions {
    // Moderator turns outside [first_turn, last_turn] are not evaluated.
    std::size_t first_turn = 0;
    std::size_t last_turn = std::numeric_limits<std::size_t>::max();
};

// Golden labels come from annotating u_t; the strategy arm scores the
// provider's proposal for s_t directly; the baseline arm generates an
// utterance from s_t and annotates it. Failed annotations and rejected
// proposals become skipped records. Gateway errors propagate.
std::vector<AlignmentRecord> evaluate_dialogue(const Conversation& conv, const ModeratorEngine& engine,
                                               const ModeratorEngine& baseline, const ProviderProfile& annotator,
                                               const EvalOptions& options = {});

enum class GroupBy { Turn, Participant, Week };

std::string_view to_string(GroupBy g);
GroupBy group_by_from_string(std::string_view s);

struct TurnRange {
    std::size_t first = 1;
    std::size_t last = 40;
};

struct AlignmentRow {
    std::string group;
    std::size_t count = 0;
    double mean_strategy = 0.0;
    double mean_baseline = 0.0;
};

struct CrossTabCell {
    std::string golden;
    std::string baseline;
    std::size_t count = 0;

    bool operator==(const CrossTabCell&) const = default;
};

struct AlignmentTable {
    GroupBy by = GroupBy::Turn;
    std::vector<AlignmentRow> rows;
    // Records where the strategy arm equals the golden set but the baseline differs.
    std::vector<CrossTabCell> discrepancy;
    std::size_t skipped = 0;
    std::size_t out_of_range = 0;
};

// Mean SMP per group and arm over usable records inside the turn range.
// Turn groups sort numerically, the others lexicographically.
AlignmentTable aggregate_alignment(std::span<const AlignmentRecord> records, GroupBy by, TurnRange range = {});

}  // namespace stratchat

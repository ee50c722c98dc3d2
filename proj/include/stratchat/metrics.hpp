#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stratchat/dialogue.hpp"
#include "stratchat/gateway.hpp"
#include "stratchat/kernels.hpp"
#include "stratchat/prompt_pack.hpp"

namespace stratchat {

// ---- verbosity

struct VerbosityScore {
    std::size_t user_tokens = 0;
    std::size_t moderator_tokens = 0;
    double value = 0.0;
};

// Throws UndefinedMetricError when the moderator produced no tokens.
VerbosityScore verbosity(const Conversation& c, const Tokenizer& tokenize = whitespace_tokens);
VerbosityScore verbosity_from_totals(const TokenTotals& t);

struct ArmVerbosity {
    std::string arm;
    std::size_t conversations = 0;
    double pooled_mean = 0.0;                   // mean over conversations
    std::map<std::string, double> per_twin;     // mean over each twin's conversations
    double twin_mean = 0.0;                     // mean of the per-twin means
};

// Aborted conversations and conversations with no moderator tokens are left out.
std::vector<ArmVerbosity> verbosity_by_arm(std::span<const Conversation> corpus,
                                           const Tokenizer& tokenize = whitespace_tokens);

// ---- judged win rates

enum class Aspect { Listening, Fluency, MakingSense };
enum class Order { AB, BA };
enum class Preference { A, B };

inline constexpr Aspect kAllAspects[] = {Aspect::Listening, Aspect::Fluency, Aspect::MakingSense};

std::string_view to_string(Aspect a);
std::string_view to_string(Order o);
Aspect aspect_from_string(std::string_view s);
std::string_view aspect_description(Aspect a);

struct JudgeVerdict {
    std::string pair_id;
    Aspect aspect = Aspect::Listening;
    Order order = Order::AB;
    std::optional<Preference> preferred;  // empty when the reply was unparseable
    std::string raw;
};

// Same-twin match of a strategy-arm and a baseline-arm conversation.
struct DialoguePair {
    std::string id;
    std::string twin;
    std::string strategy_id;
    std::string baseline_id;

    bool operator==(const DialoguePair&) const = default;
};

// Random matching under the same-twin constraint. Each twin's baseline
// conversations are shuffled with a seeded Fisher-Yates pass and zipped with
// its strategy conversations in id order. Aborted conversations are skipped.
std::vector<DialoguePair> pair_dialogues(std::span<const Conversation> corpus, std::uint64_t seed);

// Accepts a reply whose last non-empty line is a lone "A" or "B" (surrounding
// quotes, asterisks and a trailing period are tolerated).
std::optional<Preference> parse_verdict(std::string_view reply);

std::string render_for_judge(const Conversation& c);

// Two judge calls with the presentation order swapped. `a` is the strategy arm.
// Throws PairingError unless both come from the same twin and different arms.
std::pair<JudgeVerdict, JudgeVerdict> judge_pair(const Gateway& gateway, const Conversation& a, const Conversation& b,
                                                 Aspect aspect, const ProviderProfile& judge,
                                                 const PromptPack& prompts, const std::string& pair_id = {});

// Judges every pair on every aspect, `workers` calls at a time. Verdicts are
// returned in (pair, aspect, order) order regardless of scheduling.
std::vector<JudgeVerdict> judge_pairs(const Gateway& gateway, std::span<const DialoguePair> pairs,
                                      std::span<const Conversation> corpus, std::span<const Aspect> aspects,
                                      const ProviderProfile& judge, const PromptPack& prompts, int workers = 4);

struct WinRateResult {
    Aspect aspect = Aspect::Listening;
    std::size_t wins = 0;
    std::size_t consistent_pairs = 0;
    std::size_t total_pairs = 0;
    double value = 0.0;
    double retention = 0.0;
};

// A pair is consistent when both orders prefer the same underlying dialogue.
// Throws UndefinedMetricError when no pair is consistent.
WinRateResult win_rate(std::span<const JudgeVerdict> verdicts, Aspect aspect);

// 1 - mean(wrs). Throws UndefinedMetricError on an empty list.
double baseline_wr(std::span<const double> wrs);

// ln(4x + 1). Throws DomainError for x < -0.25.
double log_normalize(double x);

// ---- progression

enum class CurveMetric { Verbosity, UserTokens };

std::string_view to_string(CurveMetric m);
CurveMetric curve_metric_from_string(std::string_view s);

struct CurvePoint {
    std::size_t cut = 0;
    std::string arm;
    std::size_t conversations = 0;
    double mean = 0.0;
};

struct CurveTable {
    CurveMetric metric = CurveMetric::Verbosity;
    std::vector<CurvePoint> points;
    std::vector<std::string> notes;
};

// The metric on every conversation truncated to its first `cut` turns, for
// cut in [max(first_cut, warmup_turns + 1), last_cut], averaged per arm.
// Cuts beyond the shortest conversation are omitted with a note.
CurveTable progression_curves(std::span<const Conversation> corpus, CurveMetric metric, std::size_t first_cut,
                              std::size_t last_cut, int warmup_turns = 2,
                              const Tokenizer& tokenize = whitespace_tokens);

// ---- emotions

enum class TripletMiddle { Dot, Strategy };

struct TripletCount {
    std::string from;
    std::string middle;
    std::string to;
    double count = 0.0;

    bool operator==(const TripletCount&) const = default;
};

struct TripletTable {
    std::vector<TripletCount> rows;  // count descending, then key ascending
    std::size_t pairs = 0;           // adjacent annotation pairs seen
    std::vector<std::string> notes;
};

// (e_t, u_t, e_{t+1}) over consecutive emotion-labelled moderator turns. The
// middle slot is "·" or the strategy label of u_t.
TripletTable emotion_triplets(std::span<const Conversation> corpus, TripletMiddle middle = TripletMiddle::Dot);
// Mean of the per-twin tables over twins that contributed annotations.
TripletTable emotion_triplets_per_twin(std::span<const Conversation> corpus,
                                       TripletMiddle middle = TripletMiddle::Dot);
TripletTable top_k(TripletTable table, std::size_t k);

struct ValenceMap {
    int joy = 1;
    int neutral = 0;
    int sadness = -1;
    int anger = -1;
    int surprise = 0;

    int operator()(Emotion e) const;
};

enum class Shift { Positive, Negative, Unchanged, Unknown };
std::string_view to_string(Shift s);

// First against last emotion annotation of the conversation.
Shift emotion_shift(const Conversation& c, const ValenceMap& valence = {});

// ---- strategy occurrence

struct StrategyCount {
    std::string tag;
    std::uint64_t count = 0;

    bool operator==(const StrategyCount&) const = default;
};

struct OccurrenceTable {
    std::vector<StrategyCount> overall;  // count descending, then tag ascending; zero counts dropped
    std::map<std::string, std::vector<StrategyCount>> per_twin;
};

OccurrenceTable strategy_occurrence(std::span<const Conversation> corpus, const StrategyPool& pool);
std::vector<StrategyCount> top_k(std::vector<StrategyCount> counts, std::size_t k);

}  // namespace stratchat

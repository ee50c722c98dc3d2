#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "stratchat/dialogue.hpp"
#include "stratchat/strategy_set.hpp"

// Corpus-level folds. Each kernel has an OpenMP implementation in
// stratchat::kernels and a single-threaded reference in
// stratchat::kernels::serial that the tests compare against. Parallel loops
// run over independent items (conversations, records, groups) and every
// floating-point sum is accumulated in input order, so both versions return
// bit-identical results.
namespace stratchat {

using Tokenizer = std::function<std::size_t(std::string_view)>;

// Number of whitespace-delimited tokens.
std::size_t whitespace_tokens(std::string_view text);

struct TokenTotals {
    std::size_t user = 0;
    std::size_t moderator = 0;

    bool operator==(const TokenTotals&) const = default;
};

struct GroupSums {
    std::size_t count = 0;
    double sum_a = 0.0;
    double sum_b = 0.0;

    bool operator==(const GroupSums&) const = default;
};

// [from][to] counts in kAllEmotions order.
using TransitionMatrix = std::array<std::array<std::uint64_t, 5>, 5>;

inline constexpr std::size_t kNoGroup = std::numeric_limits<std::size_t>::max();

std::size_t emotion_index(Emotion e);

namespace kernels {

// Token totals per conversation over all turns.
std::vector<TokenTotals> token_totals(std::span<const Conversation> corpus, const Tokenizer& tokenize);

// SMP per record; NaN where the golden set is empty.
std::vector<double> smp_batch(std::span<const StrategySet> golden, std::span<const StrategySet> candidate);

// Per-group count and sums of a and b. Records with group kNoGroup are skipped.
std::vector<GroupSums> group_sums(std::span<const std::size_t> group_of, std::span<const double> a,
                                  std::span<const double> b, std::size_t groups);

// Transitions between emotion labels on consecutive moderator turns.
TransitionMatrix emotion_transitions(std::span<const Conversation> corpus);

// Occurrences of each pool entry (by index) among moderator-turn decisions.
std::vector<std::uint64_t> tag_counts(std::span<const Conversation> corpus, const StrategyPool& pool);

// Row-major [conversation][cut] verbosity of the first `cut` turns. NaN when
// the conversation is shorter than the cut or the moderator has no tokens.
std::vector<double> truncated_verbosity(std::span<const Conversation> corpus, std::span<const std::size_t> cuts,
                                        const Tokenizer& tokenize);

namespace serial {

std::vector<TokenTotals> token_totals(std::span<const Conversation> corpus, const Tokenizer& tokenize);
std::vector<double> smp_batch(std::span<const StrategySet> golden, std::span<const StrategySet> candidate);
std::vector<GroupSums> group_sums(std::span<const std::size_t> group_of, std::span<const double> a,
                                  std::span<const double> b, std::size_t groups);
TransitionMatrix emotion_transitions(std::span<const Conversation> corpus);
std::vector<std::uint64_t> tag_counts(std::span<const Conversation> corpus, const StrategyPool& pool);
std::vector<double> truncated_verbosity(std::span<const Conversation> corpus, std::span<const std::size_t> cuts,
                                        const Tokenizer& tokenize);

}  // namespace serial
}  // namespace kernels
}  // namespace stratchat

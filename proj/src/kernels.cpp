#include "stratchat/kernels.hpp"

#include <cctype>
#include <cmath>

#include <omp.h>

namespace stratchat {

std::size_t whitespace_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        bool space = std::isspace(c) != 0;
        if (!space && !in_token) ++n;
        in_token = !space;
    }
    return n;
}

std::size_t emotion_index(Emotion e) {
    for (std::size_t i = 0; i < std::size(kAllEmotions); ++i)
        if (kAllEmotions[i] == e) return i;
    return 0;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TokenTotals count_conversation(const Conversation& c, const Tokenizer& tokenize) {
    TokenTotals t;
    for (const auto& turn : c.turns) {
        auto n = tokenize(turn.text);
        (turn.speaker == Speaker::User ? t.user : t.moderator) += n;
    }
    return t;
}

double smp_or_nan(const StrategySet& g, const StrategySet& c) { return g.empty() ? kNaN : smp(g, c); }

void add_transitions(const Conversation& c, TransitionMatrix& m) {
    const Turn* prev = nullptr;
    for (const auto& t : c.turns) {
        if (t.speaker != Speaker::Moderator) continue;
        if (prev && prev->emotion && t.emotion) ++m[emotion_index(*prev->emotion)][emotion_index(*t.emotion)];
        prev = &t;
    }
}

void verbosity_row(const Conversation& c, std::span<const std::size_t> cuts, const Tokenizer& tokenize,
                   double* row) {
    std::vector<std::size_t> user(c.turns.size() + 1, 0), mod(c.turns.size() + 1, 0);
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
        auto n = tokenize(c.turns[i].text);
        user[i + 1] = user[i] + (c.turns[i].speaker == Speaker::User ? n : 0);
        mod[i + 1] = mod[i] + (c.turns[i].speaker == Speaker::Moderator ? n : 0);
    }
    for (std::size_t k = 0; k < cuts.size(); ++k) {
        auto cut = cuts[k];
        if (cut > c.turns.size() || mod[cut] == 0)
            row[k] = kNaN;
        else
            row[k] = static_cast<double>(user[cut]) / static_cast<double>(mod[cut]);
    }
}

void check_sizes(std::size_t a, std::size_t b) {
    if (a != b) throw RangeError("kernel inputs differ in length");
}

// Bucket record indices by group, preserving input order within each group.
std::vector<std::vector<std::size_t>> bucket(std::span<const std::size_t> group_of, std::size_t groups) {
    std::vector<std::vector<std::size_t>> members(groups);
    for (std::size_t i = 0; i < group_of.size(); ++i) {
        auto g = group_of[i];
        if (g == kNoGroup) continue;
        if (g >= groups) throw RangeError("group index out of range");
        members[g].push_back(i);
    }
    return members;
}

}  // namespace

namespace kernels {

std::vector<TokenTotals> token_totals(std::span<const Conversation> corpus, const Tokenizer& tokenize) {
    std::vector<TokenTotals> out(corpus.size());
    const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = count_conversation(corpus[i], tokenize);
    return out;
}

std::vector<double> smp_batch(std::span<const StrategySet> golden, std::span<const StrategySet> candidate) {
    check_sizes(golden.size(), candidate.size());
    std::vector<double> out(golden.size());
    const auto n = static_cast<std::ptrdiff_t>(golden.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = smp_or_nan(golden[i], candidate[i]);
    return out;
}

std::vector<GroupSums> group_sums(std::span<const std::size_t> group_of, std::span<const double> a,
                                  std::span<const double> b, std::size_t groups) {
    check_sizes(group_of.size(), a.size());
    check_sizes(group_of.size(), b.size());
    auto members = bucket(group_of, groups);
    std::vector<GroupSums> out(groups);
    const auto n = static_cast<std::ptrdiff_t>(groups);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t g = 0; g < n; ++g) {
        GroupSums s;
        for (auto i : members[g]) {
            ++s.count;
            s.sum_a += a[i];
            s.sum_b += b[i];
        }
        out[g] = s;
    }
    return out;
}

TransitionMatrix emotion_transitions(std::span<const Conversation> corpus) {
    std::uint64_t flat[25] = {};
    const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : flat[:25])
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        TransitionMatrix local{};
        add_transitions(corpus[i], local);
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 5; ++c) flat[r * 5 + c] += local[r][c];
    }
    TransitionMatrix m{};
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) m[r][c] = flat[r * 5 + c];
    return m;
}

std::vector<std::uint64_t> tag_counts(std::span<const Conversation> corpus, const StrategyPool& pool) {
    const std::size_t k = pool.size();
    std::vector<std::vector<std::uint64_t>> per(corpus.size());
    const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        std::vector<std::uint64_t> local(k, 0);
        for (const auto& t : corpus[i].turns) {
            if (t.speaker != Speaker::Moderator || !t.decision) continue;
            for (const auto& tag : t.decision->tags()) {
                const auto* s = pool.find(tag);
                if (s) ++local[static_cast<std::size_t>(s - pool.entries().data())];
            }
        }
        per[i] = std::move(local);
    }
    std::vector<std::uint64_t> out(k, 0);
    for (const auto& local : per)
        for (std::size_t j = 0; j < k; ++j) out[j] += local[j];
    return out;
}

std::vector<double> truncated_verbosity(std::span<const Conversation> corpus, std::span<const std::size_t> cuts,
                                        const Tokenizer& tokenize) {
    std::vector<double> out(corpus.size() * cuts.size());
    const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) verbosity_row(corpus[i], cuts, tokenize, out.data() + i * cuts.size());
    return out;
}

namespace serial {

std::vector<TokenTotals> token_totals(std::span<const Conversation> corpus, const Tokenizer& tokenize) {
    std::vector<TokenTotals> out;
    out.reserve(corpus.size());
    for (const auto& c : corpus) out.push_back(count_conversation(c, tokenize));
    return out;
}

std::vector<double> smp_batch(std::span<const StrategySet> golden, std::span<const StrategySet> candidate) {
    check_sizes(golden.size(), candidate.size());
    std::vector<double> out;
    out.reserve(golden.size());
    for (std::size_t i = 0; i < golden.size(); ++i) out.push_back(smp_or_nan(golden[i], candidate[i]));
    return out;
}

std::vector<GroupSums> group_sums(std::span<const std::size_t> group_of, std::span<const double> a,
                                  std::span<const double> b, std::size_t groups) {
    check_sizes(group_of.size(), a.size());
    check_sizes(group_of.size(), b.size());
    std::vector<GroupSums> out(groups);
    for (std::size_t i = 0; i < group_of.size(); ++i) {
        auto g = group_of[i];
        if (g == kNoGroup) continue;
        if (g >= groups) throw RangeError("group index out of range");
        ++out[g].count;
        out[g].sum_a += a[i];
        out[g].sum_b += b[i];
    }
    return out;
}

TransitionMatrix emotion_transitions(std::span<const Conversation> corpus) {
    TransitionMatrix m{};
    for (const auto& c : corpus) add_transitions(c, m);
    return m;
}

std::vector<std::uint64_t> tag_counts(std::span<const Conversation> corpus, const StrategyPool& pool) {
    std::vector<std::uint64_t> out(pool.size(), 0);
    for (const auto& c : corpus)
        for (const auto& t : c.turns) {
            if (t.speaker != Speaker::Moderator || !t.decision) continue;
            for (const auto& tag : t.decision->tags())
                if (const auto* s = pool.find(tag)) ++out[static_cast<std::size_t>(s - pool.entries().data())];
        }
    return out;
}

std::vector<double> truncated_verbosity(std::span<const Conversation> corpus, std::span<const std::size_t> cuts,
                                        const Tokenizer& tokenize) {
    std::vector<double> out(corpus.size() * cuts.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) verbosity_row(corpus[i], cuts, tokenize, out.data() + i * cuts.size());
    return out;
}

}  // namespace serial
}  // namespace kernels
}  // namespace stratchat

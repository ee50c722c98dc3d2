// Serial reference vs OpenMP kernels on a synthetic corpus.
//   ./bench_kernels --benchmark_filter=Smp
// OMP_NUM_THREADS controls the parallel side.

#include <map>
#include <random>

#include <benchmark/benchmark.h>

#include "stratchat/kernels.hpp"
#include "stratchat/strategy_pool.hpp"

using namespace stratchat;

namespace {

std::vector<Conversation> make_corpus(std::size_t n) {
    std::mt19937_64 rng(n);
    const auto& pool = default_pool();
    std::vector<std::string> backward, forward;
    for (const auto& s : pool.entries()) (s.direction == Direction::Backward ? backward : forward).push_back(s.tag);
    std::vector<Conversation> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = out[i];
        c.id = "b" + std::to_string(i);
        for (std::size_t t = 0; t < 40; ++t) {
            std::string text;
            for (std::size_t w = 0, words = 3 + rng() % 30; w < words; ++w) text += "word ";
            auto& turn = append_turn(c, t % 2 ? Speaker::User : Speaker::Moderator, text);
            if (turn.speaker != Speaker::Moderator) continue;
            turn.emotion = kAllEmotions[rng() % 5];
            StrategyDecision d;
            if (rng() % 2) d.backward = backward[rng() % backward.size()];
            d.forward = forward[rng() % forward.size()];
            turn.decision = d;
        }
    }
    return out;
}

const std::vector<Conversation>& corpus(std::size_t n) {
    static std::map<std::size_t, std::vector<Conversation>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_corpus(n)).first;
    return it->second;
}

struct SmpInput {
    std::vector<StrategySet> golden, candidate;
};

SmpInput smp_input(std::size_t n) {
    std::mt19937_64 rng(n);
    std::vector<std::string> tags;
    for (const auto& s : default_pool().entries()) tags.push_back(s.tag);
    SmpInput in;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> g = {tags[rng() % tags.size()], tags[rng() % tags.size()]};
        std::vector<std::string> c = {tags[rng() % tags.size()]};
        in.golden.push_back(StrategySet::of(g));
        in.candidate.push_back(StrategySet::of(c));
    }
    return in;
}

template <bool Parallel>
void BM_TokenTotals(benchmark::State& state) {
    const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto r = Parallel ? kernels::token_totals(c, whitespace_tokens)
                          : kernels::serial::token_totals(c, whitespace_tokens);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_TruncatedVerbosity(benchmark::State& state) {
    const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
    std::vector<std::size_t> cuts;
    for (std::size_t k = 3; k <= 40; ++k) cuts.push_back(k);
    for (auto _ : state) {
        auto r = Parallel ? kernels::truncated_verbosity(c, cuts, whitespace_tokens)
                          : kernels::serial::truncated_verbosity(c, cuts, whitespace_tokens);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_EmotionTransitions(benchmark::State& state) {
    const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto r = Parallel ? kernels::emotion_transitions(c) : kernels::serial::emotion_transitions(c);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_TagCounts(benchmark::State& state) {
    const auto& c = corpus(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto r = Parallel ? kernels::tag_counts(c, default_pool()) : kernels::serial::tag_counts(c, default_pool());
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_SmpBatch(benchmark::State& state) {
    auto in = smp_input(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto r = Parallel ? kernels::smp_batch(in.golden, in.candidate)
                          : kernels::serial::smp_batch(in.golden, in.candidate);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_GroupSums(benchmark::State& state) {
    auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(n);
    std::vector<std::size_t> group(n);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        group[i] = rng() % 40;
        a[i] = static_cast<double>(rng() % 100) / 100.0;
        b[i] = static_cast<double>(rng() % 100) / 100.0;
    }
    for (auto _ : state) {
        auto r = Parallel ? kernels::group_sums(group, a, b, 40) : kernels::serial::group_sums(group, a, b, 40);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_TokenTotals<false>)->Name("TokenTotals/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_TokenTotals<true>)->Name("TokenTotals/omp")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_TruncatedVerbosity<false>)->Name("TruncatedVerbosity/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_TruncatedVerbosity<true>)->Name("TruncatedVerbosity/omp")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_EmotionTransitions<false>)->Name("EmotionTransitions/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_EmotionTransitions<true>)->Name("EmotionTransitions/omp")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_TagCounts<false>)->Name("TagCounts/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_TagCounts<true>)->Name("TagCounts/omp")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_SmpBatch<false>)->Name("SmpBatch/serial")->Arg(100000)->Arg(1000000);
BENCHMARK(BM_SmpBatch<true>)->Name("SmpBatch/omp")->Arg(100000)->Arg(1000000)->UseRealTime();
BENCHMARK(BM_GroupSums<false>)->Name("GroupSums/serial")->Arg(100000)->Arg(1000000);
BENCHMARK(BM_GroupSums<true>)->Name("GroupSums/omp")->Arg(100000)->Arg(1000000)->UseRealTime();

BENCHMARK_MAIN();

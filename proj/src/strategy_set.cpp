#include "stratchat/strategy_set.hpp"

#include <algorithm>

#include "stratchat/errors.hpp"

namespace stratchat {

StrategySet::StrategySet(std::initializer_list<std::string> init)
    : StrategySet(of(std::span<const std::string>(init.begin(), init.size()))) {}

StrategySet StrategySet::of(std::span<const std::string> in) {
    StrategySet s;
    s.tags.assign(in.begin(), in.end());
    std::sort(s.tags.begin(), s.tags.end());
    s.tags.erase(std::unique(s.tags.begin(), s.tags.end()), s.tags.end());
    return s;
}

bool StrategySet::contains(std::string_view tag) const {
    return std::binary_search(tags.begin(), tags.end(), tag, std::less<>{});
}

std::string StrategySet::label() const {
    std::string out;
    for (const auto& t : tags) {
        if (!out.empty()) out += '+';
        out += t;
    }
    return out;
}

double smp(const StrategySet& golden, const StrategySet& candidate) {
    if (golden.empty()) throw UndefinedMetricError("SMP is undefined for an empty golden set");
    std::size_t matches = 0;
    for (const auto& tag : candidate.tags)
        if (golden.contains(tag)) ++matches;
    return static_cast<double>(matches) / static_cast<double>(golden.size());
}

}  // namespace stratchat

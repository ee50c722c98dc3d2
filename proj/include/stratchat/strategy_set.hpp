#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stratchat {

class StrategyPool;

// Distinct strategy tags, kept sorted. Labels that did not resolve against
// the pool are carried separately and never take part in matching.
struct StrategySet {
    std::vector<std::string> tags;
    std::vector<std::string> unresolved;

    StrategySet() = default;
    StrategySet(std::initializer_list<std::string> init);
    static StrategySet of(std::span<const std::string> tags);

    bool empty() const { return tags.empty(); }
    std::size_t size() const { return tags.size(); }
    bool contains(std::string_view tag) const;
    std::string label() const;  // "Ack+OpQ"

    bool operator==(const StrategySet&) const = default;
};

// Strategy match percentage: (1/|golden|) * sum over candidate tags of
// [tag in golden]. Throws UndefinedMetricError when golden is empty.
double smp(const StrategySet& golden, const StrategySet& candidate);

}  // namespace stratchat

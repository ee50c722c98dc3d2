#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stratchat/errors.hpp"

namespace stratchat {

// Backward-looking acts relate the utterance to prior discourse; forward-looking
// acts constrain what comes next.
enum class Direction { Backward, Forward };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct Strategy {
    std::string name;
    std::string tag;
    Direction direction = Direction::Forward;
    std::string definition;
    std::string example;

    bool operator==(const Strategy&) const = default;
};

// Immutable, ordered strategy taxonomy. Tags and names are case-sensitive and
// unique; lookup resolves either.
class StrategyPool {
public:
    StrategyPool() = default;
    StrategyPool(std::vector<Strategy> entries, std::string version);

    const std::vector<Strategy>& entries() const { return entries_; }
    const std::string& version() const { return version_; }
    std::size_t size() const { return entries_.size(); }

    // Throws NotFoundError carrying the key.
    const Strategy& lookup(std::string_view tag_or_name) const;
    const Strategy* find(std::string_view tag_or_name) const;
    bool contains_tag(std::string_view tag) const;

    std::size_t count(Direction d) const;

private:
    std::vector<Strategy> entries_;
    std::string version_;
    std::unordered_map<std::string, std::size_t> by_tag_;
    std::unordered_map<std::string, std::size_t> by_name_;
};

// Parse a pool document: one JSON record per line with name, tag, direction,
// definition, example. An optional leading {"version": ...} record names the
// pool. Blank lines are ignored. Throws SchemaError.
StrategyPool load_pool(std::string_view document);
StrategyPool load_pool_file(const std::string& path);

// The bundled 25-strategy document and the pool it defines.
std::string_view default_pool_document();
const StrategyPool& default_pool();

// Deterministic in-context description block. A subset restricts (and orders)
// the output; an empty subset yields an empty block. Unknown tags throw
// NotFoundError.
std::string render_context(const StrategyPool& pool,
                           std::optional<std::span<const std::string>> subset = std::nullopt);

// The macro action for one moderator turn: a forward act, a backward act, or a
// backward act followed by a forward act.
struct StrategyDecision {
    std::optional<std::string> backward;
    std::optional<std::string> forward;

    bool empty() const { return !backward && !forward; }
    // Tags in rendered order: backward first.
    std::vector<std::string> tags() const;
    // "Ack+OpQ", "OpQ", or "" when empty.
    std::string label() const;

    bool operator==(const StrategyDecision&) const = default;
};

enum class ValidationMode { Strict, Lenient };

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(Violation::Rule r) const;
};

// Strict mode also enforces that each slot holds a strategy of its own
// direction. Lenient mode skips only that check.
ValidationResult validate_decision(const StrategyDecision& decision, const StrategyPool& pool,
                                   ValidationMode mode = ValidationMode::Strict);

// Throws StrategyValidationError when validation fails.
void require_valid(const StrategyDecision& decision, const StrategyPool& pool,
                   ValidationMode mode = ValidationMode::Strict);

// Map an ordered list of tags (as a provider might emit) onto decision slots.
// One tag goes to the slot of its pool direction (forward if unknown); two
// tags fill backward then forward. Zero or more than two tags throws
// StrategyValidationError with a shape violation.
StrategyDecision decision_from_tags(std::span<const std::string> tags, const StrategyPool& pool);

}  // namespace stratchat

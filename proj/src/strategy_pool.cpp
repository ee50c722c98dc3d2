#include "stratchat/strategy_pool.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedded.hpp"

namespace stratchat {

using nlohmann::json;

std::string to_string(Violation::Rule rule) {
    switch (rule) {
        case Violation::Rule::Shape: return "shape";
        case Violation::Rule::UnknownTag: return "unknown_tag";
        case Violation::Rule::DirectionMismatch: return "direction_mismatch";
        case Violation::Rule::DuplicateTag: return "duplicate_tag";
    }
    return "shape";
}

namespace {

std::string join_violations(const std::vector<Violation>& vs) {
    std::string out = "invalid strategy decision:";
    for (const auto& v : vs) out += " [" + to_string(v.rule) + ": " + v.detail + "]";
    return out;
}

}  // namespace

StrategyValidationError::StrategyValidationError(std::vector<Violation> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

std::string_view to_string(Direction d) {
    return d == Direction::Backward ? "backward" : "forward";
}

Direction direction_from_string(std::string_view s) {
    if (s == "backward") return Direction::Backward;
    if (s == "forward") return Direction::Forward;
    throw SchemaError("invalid direction '" + std::string(s) + "'");
}

StrategyPool::StrategyPool(std::vector<Strategy> entries, std::string version)
    : entries_(std::move(entries)), version_(std::move(version)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& s = entries_[i];
        if (!by_tag_.emplace(s.tag, i).second)
            throw SchemaError("duplicate tag '" + s.tag + "'");
        if (!by_name_.emplace(s.name, i).second)
            throw SchemaError("duplicate name '" + s.name + "' (tag '" + s.tag + "')");
    }
}

const Strategy* StrategyPool::find(std::string_view key) const {
    std::string k(key);
    if (auto it = by_tag_.find(k); it != by_tag_.end()) return &entries_[it->second];
    if (auto it = by_name_.find(k); it != by_name_.end()) return &entries_[it->second];
    return nullptr;
}

const Strategy& StrategyPool::lookup(std::string_view key) const {
    if (const auto* s = find(key)) return *s;
    throw NotFoundError(std::string(key));
}

bool StrategyPool::contains_tag(std::string_view tag) const {
    return by_tag_.count(std::string(tag)) != 0;
}

std::size_t StrategyPool::count(Direction d) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [d](const Strategy& s) { return s.direction == d; }));
}

namespace {

std::string required_field(const json& rec, const char* field, const std::string& where) {
    auto it = rec.find(field);
    if (it == rec.end() || !it->is_string())
        throw SchemaError(where + ": missing field '" + field + "'");
    auto value = it->get<std::string>();
    if (value.find_first_not_of(" \t\r\n") == std::string::npos)
        throw SchemaError(where + ": empty field '" + field + "'");
    return value;
}

}  // namespace

StrategyPool load_pool(std::string_view document) {
    std::vector<Strategy> entries;
    std::string version = "unversioned";
    std::istringstream in{std::string(document)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("pool line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.is_object())
            throw SchemaError("pool line " + std::to_string(lineno) + ": expected an object");
        if (entries.empty() && rec.size() == 1 && rec.contains("version")) {
            version = rec["version"].get<std::string>();
            continue;
        }
        std::string where = "pool line " + std::to_string(lineno);
        Strategy s;
        s.tag = required_field(rec, "tag", where);
        where += " (tag '" + s.tag + "')";
        s.name = required_field(rec, "name", where);
        s.direction = direction_from_string(required_field(rec, "direction", where));
        s.definition = required_field(rec, "definition", where);
        s.example = required_field(rec, "example", where);
        entries.push_back(std::move(s));
    }
    if (entries.empty()) throw SchemaError("pool document contains no strategies");
    return StrategyPool(std::move(entries), std::move(version));
}

StrategyPool load_pool_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open pool document '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_pool(ss.str());
}

std::string_view default_pool_document() { return embedded::pool_document; }

const StrategyPool& default_pool() {
    static const StrategyPool pool = load_pool(default_pool_document());
    return pool;
}

namespace {

void render_section(std::ostringstream& out, const Strategy& s) {
    out << "### " << s.name << " (" << s.tag << ")\n"
        << "Direction: " << to_string(s.direction) << "-looking\n"
        << "Definition: " << s.definition << "\n"
        << "Example: " << s.example << "\n";
}

}  // namespace

std::string render_context(const StrategyPool& pool,
                           std::optional<std::span<const std::string>> subset) {
    std::ostringstream out;
    bool first = true;
    auto emit = [&](const Strategy& s) {
        if (!first) out << "\n";
        first = false;
        render_section(out, s);
    };
    if (!subset) {
        for (const auto& s : pool.entries()) emit(s);
    } else {
        std::vector<const Strategy*> picked;
        for (const auto& tag : *subset) {
            if (!pool.contains_tag(tag)) throw NotFoundError(tag);
            picked.push_back(&pool.lookup(tag));
        }
        for (const auto* s : picked) emit(*s);
    }
    return out.str();
}

std::vector<std::string> StrategyDecision::tags() const {
    std::vector<std::string> out;
    if (backward) out.push_back(*backward);
    if (forward) out.push_back(*forward);
    return out;
}

std::string StrategyDecision::label() const {
    std::string out;
    for (const auto& t : tags()) {
        if (!out.empty()) out += '+';
        out += t;
    }
    return out;
}

bool ValidationResult::has(Violation::Rule r) const {
    return std::any_of(violations.begin(), violations.end(),
                       [r](const Violation& v) { return v.rule == r; });
}

ValidationResult validate_decision(const StrategyDecision& decision, const StrategyPool& pool,
                                   ValidationMode mode) {
    ValidationResult result;
    auto add = [&](Violation::Rule r, std::string detail) {
        result.violations.push_back({r, std::move(detail)});
    };
    if (decision.empty()) {
        add(Violation::Rule::Shape, "empty decision: at least one strategy is required");
        return result;
    }
    if (decision.backward && decision.forward && *decision.backward == *decision.forward)
        add(Violation::Rule::DuplicateTag, "backward and forward slots both hold '" +
                                               *decision.backward + "'");

    auto check_slot = [&](const std::optional<std::string>& tag, Direction slot) {
        if (!tag) return;
        if (!pool.contains_tag(*tag)) {
            add(Violation::Rule::UnknownTag, "'" + *tag + "' is not a pool tag");
            return;
        }
        const auto& s = pool.lookup(*tag);
        if (mode == ValidationMode::Strict && s.direction != slot)
            add(Violation::Rule::DirectionMismatch,
                "'" + *tag + "' is " + std::string(to_string(s.direction)) + "-looking but sits in the " +
                    std::string(to_string(slot)) + " slot");
    };
    check_slot(decision.backward, Direction::Backward);
    check_slot(decision.forward, Direction::Forward);
    return result;
}

void require_valid(const StrategyDecision& decision, const StrategyPool& pool, ValidationMode mode) {
    auto result = validate_decision(decision, pool, mode);
    if (!result.ok()) throw StrategyValidationError(std::move(result.violations));
}

StrategyDecision decision_from_tags(std::span<const std::string> tags, const StrategyPool& pool) {
    if (tags.empty())
        throw StrategyValidationError({{Violation::Rule::Shape, "no strategies given"}});
    if (tags.size() > 2)
        throw StrategyValidationError(
            {{Violation::Rule::Shape,
              std::to_string(tags.size()) + " strategies given, at most two are allowed"}});
    auto canonical = [&](const std::string& key) {
        const auto* s = pool.find(key);
        return s ? s->tag : key;
    };
    StrategyDecision d;
    if (tags.size() == 2) {
        d.backward = canonical(tags[0]);
        d.forward = canonical(tags[1]);
        return d;
    }
    const auto* s = pool.find(tags[0]);
    if (s && s->direction == Direction::Backward)
        d.backward = s->tag;
    else
        d.forward = canonical(tags[0]);
    return d;
}

}  // namespace stratchat

#include <doctest.h>

#include <algorithm>
#include <set>

#include "stratchat/strategy_pool.hpp"

using namespace stratchat;

namespace {

const std::vector<std::string> kBackward = {"StaNo", "Ack", "Sta", "Agr", "App", "ConC", "H",   "Oth",
                                            "Quo",   "AcD", "CoC", "Rep", "Off", "Sel",  "Apo", "RoF"};
const std::vector<std::string> kForward = {"YNQ", "WhQ", "DYNQ", "OpQ", "OrC", "CoO", "Sd", "PS", "I"};

std::string record(const std::string& tag, const std::string& name, const std::string& dir) {
    return R"({"name": ")" + name + R"(", "tag": ")" + tag + R"(", "direction": ")" + dir +
           R"(", "definition": "d", "example": "e"})";
}

}  // namespace

TEST_CASE("default pool holds the 25 reference strategies") {
    const auto& pool = default_pool();
    CHECK(pool.size() == 25);
    CHECK(pool.count(Direction::Backward) == 16);
    CHECK(pool.count(Direction::Forward) == 9);
    for (const auto& t : kBackward) CHECK(pool.lookup(t).direction == Direction::Backward);
    for (const auto& t : kForward) CHECK(pool.lookup(t).direction == Direction::Forward);
}

TEST_CASE("lookup by tag or name") {
    const auto& pool = default_pool();
    CHECK(pool.lookup("OpQ").name == "Open-Question");
    CHECK(pool.lookup("OpQ").direction == Direction::Forward);
    CHECK(pool.lookup("Reflection of Feelings").tag == "RoF");
    CHECK(pool.lookup("Reflection of Feelings").direction == Direction::Backward);
    CHECK(pool.find("opq") == nullptr);  // case-sensitive
    try {
        pool.lookup("Nope");
        FAIL("expected NotFoundError");
    } catch (const NotFoundError& e) {
        CHECK(e.key() == "Nope");
    }
}

TEST_CASE("pool documents are schema-checked") {
    auto good = record("A", "Alpha", "backward") + "\n" + record("B", "Beta", "forward") + "\n";
    auto pool = load_pool(R"({"version": "t1"})" "\n" + good);
    CHECK(pool.size() == 2);
    CHECK(pool.version() == "t1");

    CHECK_THROWS_AS(load_pool(good + record("A", "Gamma", "forward")), SchemaError);      // duplicate tag
    CHECK_THROWS_AS(load_pool(good + record("C", "Alpha", "forward")), SchemaError);      // duplicate name
    CHECK_THROWS_AS(load_pool(record("C", "Gamma", "sideways")), SchemaError);            // bad direction
    CHECK_THROWS_AS(load_pool(R"({"name": "x", "tag": "X", "direction": "forward"})"), SchemaError);  // missing fields
    CHECK_THROWS_AS(load_pool("{not json"), SchemaError);
}

TEST_CASE("render_context") {
    const auto& pool = default_pool();
    auto full = render_context(pool);
    std::size_t sections = 0;
    std::size_t last = 0;
    for (const auto& s : pool.entries()) {
        auto at = full.find("### " + s.name + " (" + s.tag + ")\n");
        REQUIRE(at != std::string::npos);
        CHECK(at >= last);  // pool order
        last = at;
        ++sections;
    }
    CHECK(sections == 25);
    std::size_t headers = 0;
    for (auto at = full.find("### "); at != std::string::npos; at = full.find("### ", at + 1)) ++headers;
    CHECK(headers == 25);
    CHECK(render_context(pool) == full);  // deterministic

    std::vector<std::string> ack = {"Ack"};
    auto one = render_context(pool, std::span<const std::string>(ack));
    CHECK(one.find("Uh-huh.") != std::string::npos);
    CHECK(one.find("(OpQ)") == std::string::npos);

    std::vector<std::string> none;
    CHECK(render_context(pool, std::span<const std::string>(none)).empty());
    std::vector<std::string> bad = {"Zzz"};
    CHECK_THROWS_AS(render_context(pool, std::span<const std::string>(bad)), NotFoundError);
}

TEST_CASE("validate_decision examples") {
    const auto& pool = default_pool();
    CHECK(validate_decision({std::nullopt, "OpQ"}, pool).ok());
    CHECK(validate_decision({"Ack", "OpQ"}, pool).ok());
    CHECK(validate_decision({"Ack", std::nullopt}, pool).ok());

    auto r = validate_decision({"OpQ", std::nullopt}, pool);
    CHECK(r.has(Violation::Rule::DirectionMismatch));
    CHECK(validate_decision({"OpQ", std::nullopt}, pool, ValidationMode::Lenient).ok());

    CHECK(validate_decision({}, pool).has(Violation::Rule::Shape));
    CHECK(validate_decision({std::nullopt, "Zzz"}, pool).has(Violation::Rule::UnknownTag));
    CHECK(validate_decision({std::nullopt, "Zzz"}, pool, ValidationMode::Lenient).has(Violation::Rule::UnknownTag));

    try {
        require_valid({"OpQ", "Ack"}, pool);
        FAIL("expected StrategyValidationError");
    } catch (const StrategyValidationError& e) {
        CHECK(e.violations().size() == 2);
    }
}

TEST_CASE("validation is exhaustive over single and paired slots") {
    // Oracle: a decision is valid iff it has a forward slot holding a forward
    // tag, a backward slot holding a backward tag, or both.
    const auto& pool = default_pool();
    auto is = [&](const std::string& t, Direction d) { return pool.lookup(t).direction == d; };
    std::size_t valid = 0, checked = 0;
    for (const auto& s : pool.entries()) {
        bool f_ok = is(s.tag, Direction::Forward);
        CHECK(validate_decision({std::nullopt, s.tag}, pool).ok() == f_ok);
        CHECK(validate_decision({s.tag, std::nullopt}, pool).ok() == !f_ok);
        checked += 2;
        valid += 1;
        for (const auto& t : pool.entries()) {
            bool expect = is(s.tag, Direction::Backward) && is(t.tag, Direction::Forward);
            CHECK(validate_decision({s.tag, t.tag}, pool).ok() == expect);
            ++checked;
            valid += expect;
        }
    }
    CHECK(checked == 25 * 2 + 25 * 25);
    CHECK(valid == 25 + 16 * 9);
}

TEST_CASE("decision_from_tags maps onto slots") {
    const auto& pool = default_pool();
    std::vector<std::string> one = {"Ack"};
    CHECK(decision_from_tags(one, pool) == StrategyDecision{"Ack", std::nullopt});
    std::vector<std::string> two = {"Ack", "OpQ"};
    CHECK(decision_from_tags(two, pool) == StrategyDecision{"Ack", "OpQ"});
    std::vector<std::string> three = {"Ack", "Rep", "OpQ"};
    CHECK_THROWS_AS(decision_from_tags(three, pool), StrategyValidationError);
    std::vector<std::string> zero;
    CHECK_THROWS_AS(decision_from_tags(zero, pool), StrategyValidationError);
}

TEST_CASE("decision labels") {
    CHECK(StrategyDecision{"Ack", "OpQ"}.label() == "Ack+OpQ");
    CHECK(StrategyDecision{std::nullopt, "OpQ"}.label() == "OpQ");
    CHECK(StrategyDecision{}.label().empty());
    CHECK(StrategyDecision{"Ack", "OpQ"}.tags() == std::vector<std::string>{"Ack", "OpQ"});
}

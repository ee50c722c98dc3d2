#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "stratchat/offline_eval.hpp"
#include "support.hpp"

using namespace stratchat;
using testkit::strategy_json;

namespace {

// |g ∩ c| / |g| over std::set, written without the library.
double smp_oracle(const std::set<std::string>& g, const std::set<std::string>& c) {
    std::size_t hit = 0;
    for (const auto& t : c) hit += g.count(t);
    return static_cast<double>(hit) / static_cast<double>(g.size());
}

struct Engines {
    testkit::MockGateway mg;
    ModeratorEngine engine{mg.gateway, testkit::mock_config(ModeratorMode::Full)};
    ModeratorEngine baseline{mg.gateway, [] {
                                 auto c = testkit::mock_config(ModeratorMode::Baseline);
                                 c.generator = default_profile("baseline_generator", ProfileKind::Generator);
                                 return c;
                             }()};
    ProviderProfile annotator = default_profile("annotator", ProfileKind::Annotator);
};

AlignmentRecord rec(std::string participant, std::size_t turn, double a, double b, std::string week = "week-01") {
    AlignmentRecord r;
    r.conversation_id = "c-" + participant;
    r.participant = std::move(participant);
    r.session = std::move(week);
    r.turn = turn;
    r.golden = {"OpQ"};
    r.proposed = {"OpQ"};
    r.baseline = {"Ack"};
    r.smp_strategy = a;
    r.smp_baseline = b;
    return r;
}

}  // namespace

TEST_CASE("smp examples") {
    CHECK(smp({"Ack", "OpQ"}, {"OpQ"}) == 0.5);
    CHECK(smp({"OpQ"}, {"Ack", "OpQ"}) == 1.0);
    CHECK(smp({"Ack"}, {"OpQ"}) == 0.0);
    CHECK_THROWS_AS(smp({}, {"OpQ"}), UndefinedMetricError);
    CHECK(smp({"OpQ", "OpQ", "Ack"}, {"OpQ"}) == 0.5);  // sets, not bags
}

TEST_CASE("smp matches the set oracle on random pairs") {
    const auto& pool = default_pool();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> size(1, 4);
    for (int i = 0; i < 2000; ++i) {
        std::vector<std::string> tags;
        for (const auto& s : pool.entries()) tags.push_back(s.tag);
        std::shuffle(tags.begin(), tags.end(), rng);
        int ng = size(rng), nc = size(rng) - 1;
        std::vector<std::string> g(tags.begin(), tags.begin() + ng);
        std::shuffle(tags.begin(), tags.end(), rng);
        std::vector<std::string> c(tags.begin(), tags.begin() + nc);
        CHECK(smp(StrategySet::of(g), StrategySet::of(c)) ==
              smp_oracle({g.begin(), g.end()}, {c.begin(), c.end()}));
    }
}

TEST_CASE("annotation parsing") {
    const auto& pool = default_pool();
    CHECK(parse_annotation("Ack, OpQ", pool) == StrategySet{"Ack", "OpQ"});
    CHECK(parse_annotation("[\"Open-Question\"]", pool) == StrategySet{"OpQ"});
    CHECK(parse_annotation(R"({"tags": ["Rep", "WhQ"]})", pool) == StrategySet{"Rep", "WhQ"});
    CHECK(parse_annotation("Acknowledge (Backchannel) (Ack) + Open-Question (OpQ).", pool) ==
          StrategySet{"Ack", "OpQ"});
    auto mixed = parse_annotation("OpQ; Mind-reading", pool);
    CHECK(mixed.tags == std::vector<std::string>{"OpQ"});
    CHECK(mixed.unresolved == std::vector<std::string>{"Mind-reading"});
    CHECK_THROWS_AS(parse_annotation("no idea", pool), EmptyAnnotationError);
    CHECK_THROWS_AS(parse_annotation("", pool), EmptyAnnotationError);
}

TEST_CASE("annotator request") {
    Engines e;
    e.mg.transport->script("annotator", "Ack, OpQ");
    auto c = testkit::dialogue("a", {"Hello", "I fished", "Oh nice. Where?"});
    auto set = annotate_strategies(e.mg.gateway, c.turns[2].text, ConversationPrefix(c, 2), e.annotator,
                                   default_pool(), default_prompt_pack());
    CHECK(set == StrategySet{"Ack", "OpQ"});
    auto req = e.mg.transport->requests("annotator").at(0);
    auto body = req["messages"][0]["content"].get<std::string>();
    CHECK(body.find("Oh nice. Where?") != std::string::npos);
    CHECK(body.find("I fished") != std::string::npos);
}

TEST_CASE("evaluate_dialogue yields one record per moderator turn") {
    Engines e;
    auto c = testkit::dialogue("three", {"Hello", "Hi", "How are you?", "Fine", "Great. Any plans?"}, "p7");
    c.meta.session = "week-03";
    for (int t = 0; t < 3; ++t) {
        e.mg.transport->script("annotator", "OpQ");                              // golden
        e.mg.transport->script("strategy_provider", strategy_json(std::nullopt, "OpQ"));
        e.mg.transport->script("baseline_generator", "Let me tell you about my day.");
        e.mg.transport->script("annotator", "Ack, Sd");                          // baseline
    }
    auto recs = evaluate_dialogue(c, e.engine, e.baseline, e.annotator);
    REQUIRE(recs.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(recs[t].turn == t);
        CHECK(recs[t].participant == "p7");
        CHECK(recs[t].session == "week-03");
        CHECK_FALSE(recs[t].skipped());
        // proposal equals golden, baseline misses it: a'_t = a_t != ã_t
        CHECK(*recs[t].smp_strategy == 1.0);
        CHECK(*recs[t].smp_baseline == smp_oracle({"OpQ"}, {"Ack", "Sd"}));
    }
    CHECK(e.mg.transport->calls("annotator") == 6);
    CHECK(e.mg.transport->calls("strategy_provider") == 3);

    // strategy provider saw exactly the prefix before u_t
    auto reqs = e.mg.transport->requests("strategy_provider");
    auto last = reqs[2]["messages"][1]["content"].get<std::string>();
    CHECK(last.find("User: Fine") != std::string::npos);
    CHECK(last.find("Any plans") == std::string::npos);

    auto table = aggregate_alignment(recs, GroupBy::Turn, {0, 40});
    REQUIRE(table.discrepancy.size() == 1);
    CHECK(table.discrepancy[0] == CrossTabCell{"OpQ", "Ack+Sd", 3});
}

TEST_CASE("evaluate_dialogue skips unusable turns") {
    Engines e;
    auto c = testkit::dialogue("skip", {"Hello", "Hi", "How are you?"});
    e.mg.transport->script("annotator", "gibberish");  // golden for u0 fails
    e.mg.transport->script("annotator", "OpQ");
    e.mg.transport->script("strategy_provider", strategy_json("OpQ", std::nullopt));  // rejected
    auto recs = evaluate_dialogue(c, e.engine, e.baseline, e.annotator);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].skipped());
    CHECK(recs[0].skip_reason->find("golden") != std::string::npos);
    CHECK(recs[1].skipped());
    CHECK(recs[1].skip_reason->find("rejected") != std::string::npos);
    CHECK(e.mg.transport->calls("baseline_generator") == 0);

    EvalOptions only_first{0, 0};
    e.mg.transport->script("annotator", "CoO");
    e.mg.transport->script("strategy_provider", strategy_json(std::nullopt, "CoO"));
    e.mg.transport->script("baseline_generator", "Hello!");
    e.mg.transport->script("annotator", "CoO");
    auto one = evaluate_dialogue(c, e.engine, e.baseline, e.annotator, only_first);
    REQUIRE(one.size() == 1);
    CHECK(*one[0].smp_baseline == 1.0);
}

TEST_CASE("alignment records round trip through JSON") {
    auto r = rec("p1", 4, 0.5, 0.25);
    r.golden.unresolved = {"weird"};
    CHECK(alignment_record_from_json(to_json(r)) == r);
    AlignmentRecord s;
    s.conversation_id = "x";
    s.skip_reason = "golden annotation: none";
    CHECK(alignment_record_from_json(to_json(s)) == s);
}

TEST_CASE("aggregation by participant averages only each group's records") {
    std::vector<AlignmentRecord> recs = {rec("alice", 1, 1.0, 0.0), rec("alice", 2, 0.5, 0.5),
                                         rec("bob", 1, 0.0, 1.0), rec("bob", 3, 1.0, 0.5)};
    auto t = aggregate_alignment(recs, GroupBy::Participant);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].group == "alice");
    CHECK(t.rows[0].count == 2);
    CHECK(t.rows[0].mean_strategy == (1.0 + 0.5) / 2);
    CHECK(t.rows[0].mean_baseline == (0.0 + 0.5) / 2);
    CHECK(t.rows[1].group == "bob");
    CHECK(t.rows[1].mean_strategy == (0.0 + 1.0) / 2);
    CHECK(t.rows[1].mean_baseline == (1.0 + 0.5) / 2);
}

TEST_CASE("aggregation by turn sorts numerically and honours the range") {
    std::vector<AlignmentRecord> recs = {rec("a", 10, 1, 0), rec("a", 2, 1, 0), rec("a", 0, 1, 0),
                                         rec("a", 41, 1, 0), rec("b", 2, 0, 1)};
    AlignmentRecord skipped;
    skipped.turn = 5;
    skipped.skip_reason = "x";
    recs.push_back(skipped);
    auto t = aggregate_alignment(recs, GroupBy::Turn);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].group == "2");
    CHECK(t.rows[0].count == 2);
    CHECK(t.rows[0].mean_strategy == 0.5);
    CHECK(t.rows[1].group == "10");
    CHECK(t.out_of_range == 2);
    CHECK(t.skipped == 1);
}

TEST_CASE("discrepancy cross-tab matches a hand tally") {
    auto make = [](StrategySet g, StrategySet a, StrategySet b) {
        AlignmentRecord r;
        r.turn = 1;
        r.golden = g;
        r.proposed = a;
        r.baseline = b;
        r.smp_strategy = smp(g, a);
        r.smp_baseline = smp(g, b);
        return r;
    };
    std::vector<AlignmentRecord> recs = {
        make({"Ack", "OpQ"}, {"Ack", "OpQ"}, {"OpQ"}),       // counts
        make({"Ack", "OpQ"}, {"Ack", "OpQ"}, {"OpQ"}),       // counts
        make({"Ack", "OpQ"}, {"Ack", "OpQ"}, {"Sd"}),        // counts
        make({"Ack", "OpQ"}, {"Ack", "OpQ"}, {"Ack", "OpQ"}),  // baseline agrees
        make({"Rep", "OpQ"}, {"OpQ"}, {"Sd"}),               // proposal misses
        make({"Rep", "OpQ"}, {"Rep", "OpQ"}, {"Rep"}),       // counts
    };
    auto t = aggregate_alignment(recs, GroupBy::Week);
    std::vector<CrossTabCell> expected = {{"Ack+OpQ", "OpQ", 2}, {"Ack+OpQ", "Sd", 1}, {"OpQ+Rep", "Rep", 1}};
    CHECK(t.discrepancy == expected);
}

TEST_CASE("group names") {
    CHECK(group_by_from_string("session") == GroupBy::Week);
    CHECK(to_string(GroupBy::Participant) == "participant");
    CHECK_THROWS_AS(group_by_from_string("moon"), ConfigError);
}

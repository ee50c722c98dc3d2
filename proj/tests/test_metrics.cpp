#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "stratchat/metrics.hpp"
#include "support.hpp"

using namespace stratchat;
using testkit::dialogue;

namespace {

// Independent recount: split on spaces by hand.
std::size_t count_words(const std::string& s) {
    std::istringstream in(s);
    std::string w;
    std::size_t n = 0;
    while (in >> w) ++n;
    return n;
}

Conversation arm_dialogue(const std::string& id, const std::string& twin, Arm arm, const std::string& marker) {
    auto c = dialogue(id, {"Hello " + marker, "Hi there", "How was your day?", "Quite good, thanks"}, twin);
    c.meta.arm = arm;
    c.meta.source = Source::Simulated;
    return c;
}

JudgeVerdict verdict(const std::string& pair, Order o, std::optional<Preference> p) {
    return {pair, Aspect::Listening, o, p, ""};
}

Conversation with_emotions(const std::string& id, std::vector<std::optional<Emotion>> labels,
                           const std::string& twin = "t1") {
    Conversation c;
    c.id = id;
    c.meta.participant = twin;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) append_turn(c, Speaker::User, "reply " + std::to_string(i));
        auto& t = append_turn(c, Speaker::Moderator, "moderator " + std::to_string(i));
        t.emotion = labels[i];
    }
    return c;
}

}  // namespace

TEST_CASE("verbosity on a hand-counted dialogue") {
    auto c = dialogue("v", {"How are you", "I went to the market today", "Tell me more", "I went to the market today"});
    auto v = verbosity(c);
    CHECK(v.user_tokens == 12);
    CHECK(v.moderator_tokens == 6);
    CHECK(v.value == 2.0);
}

TEST_CASE("verbosity agrees with an independent recount") {
    std::vector<std::string> texts = {"Good  morning!\tHow did you\nsleep?", "Not well, the rain kept me up all night",
                                      "Oh dear.", "yes", "Would a nap help?", "Maybe later, after lunch."};
    auto c = dialogue("r", texts);
    std::size_t u = 0, m = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) (i % 2 ? u : m) += count_words(texts[i]);
    auto v = verbosity(c);
    CHECK(v.user_tokens == u);
    CHECK(v.moderator_tokens == m);
    CHECK(v.value == static_cast<double>(u) / static_cast<double>(m));
}

TEST_CASE("verbosity is undefined without moderator tokens") {
    Conversation c;
    append_turn(c, Speaker::User, "hello?");
    CHECK_THROWS_AS(verbosity(c), UndefinedMetricError);
    CHECK_THROWS_AS(verbosity_from_totals({5, 0}), UndefinedMetricError);
}

TEST_CASE("verbosity by arm pools conversations and averages twins") {
    auto a = dialogue("a", {"one two", "one two three four"}, "t1");  // 2.0
    auto b = dialogue("b", {"one two", "one two"}, "t1");             // 1.0
    auto c = dialogue("c", {"one", "one two three four"}, "t2");      // 4.0
    auto d = dialogue("d", {"one", "one"}, "t2");
    d.meta.aborted = true;
    for (auto* x : {&a, &b, &c, &d}) x->meta.arm = Arm::WithStrategy;
    std::vector<Conversation> corpus = {a, b, c, d};
    auto arms = verbosity_by_arm(corpus);
    REQUIRE(arms.size() == 1);
    CHECK(arms[0].conversations == 3);
    CHECK(arms[0].pooled_mean == doctest::Approx(7.0 / 3.0));
    CHECK(arms[0].per_twin.at("t1") == 1.5);
    CHECK(arms[0].per_twin.at("t2") == 4.0);
    CHECK(arms[0].twin_mean == 2.75);
}

TEST_CASE("verdict parsing") {
    CHECK(parse_verdict("A") == Preference::A);
    CHECK(parse_verdict("Reasoning first.\n\n**B**\n") == Preference::B);
    CHECK(parse_verdict("\"A\".") == Preference::A);
    CHECK_FALSE(parse_verdict("Both are fine"));
    CHECK_FALSE(parse_verdict("A or B"));
    CHECK_FALSE(parse_verdict(""));
}

TEST_CASE("win rate on the mixed fixture") {
    // 10 pairs: 8 consistent (5 strategy wins, 3 baseline wins), 2 flipped with order.
    std::vector<JudgeVerdict> v;
    for (int i = 0; i < 5; ++i) {
        v.push_back(verdict("s" + std::to_string(i), Order::AB, Preference::A));
        v.push_back(verdict("s" + std::to_string(i), Order::BA, Preference::B));
    }
    for (int i = 0; i < 3; ++i) {
        v.push_back(verdict("b" + std::to_string(i), Order::AB, Preference::B));
        v.push_back(verdict("b" + std::to_string(i), Order::BA, Preference::A));
    }
    for (int i = 0; i < 2; ++i) {
        v.push_back(verdict("x" + std::to_string(i), Order::AB, Preference::A));
        v.push_back(verdict("x" + std::to_string(i), Order::BA, Preference::A));
    }
    auto r = win_rate(v, Aspect::Listening);
    CHECK(r.total_pairs == 10);
    CHECK(r.consistent_pairs == 8);
    CHECK(r.wins == 5);
    CHECK(r.value == 0.625);
    CHECK(r.retention == 0.8);
    CHECK_THROWS_AS(win_rate(v, Aspect::Fluency), UndefinedMetricError);
}

TEST_CASE("unparseable verdicts count as inconsistent") {
    std::vector<JudgeVerdict> v = {verdict("p", Order::AB, Preference::A), verdict("p", Order::BA, std::nullopt),
                                   verdict("q", Order::AB, Preference::A), verdict("q", Order::BA, Preference::B)};
    auto r = win_rate(v, Aspect::Listening);
    CHECK(r.consistent_pairs == 1);
    CHECK(r.retention == 0.5);
}

TEST_CASE("judges against the order-swap filter") {
    std::vector<Conversation> corpus;
    for (int i = 0; i < 4; ++i) {
        corpus.push_back(arm_dialogue("s" + std::to_string(i), "t" + std::to_string(i % 2), Arm::WithStrategy, "SMARK"));
        corpus.push_back(arm_dialogue("b" + std::to_string(i), "t" + std::to_string(i % 2), Arm::Baseline, "BMARK"));
    }
    auto pairs = pair_dialogues(corpus, 11);
    REQUIRE(pairs.size() == 4);
    auto judge = default_profile("judge", ProfileKind::Judge);
    std::vector<Aspect> aspects = {Aspect::Listening};

    SUBCASE("always-first judge keeps nothing") {
        testkit::MockGateway mg;
        mg.transport->set_responder("judge", [](const ProviderProfile&, const nlohmann::json&) {
            return MockReply{200, "A", false};
        });
        auto v = judge_pairs(mg.gateway, pairs, corpus, aspects, judge, default_prompt_pack(), 2);
        CHECK(v.size() == 8);
        CHECK(mg.transport->calls("judge") == 8);
        CHECK_THROWS_AS(win_rate(v, Aspect::Listening), UndefinedMetricError);
    }
    SUBCASE("content judge keeps everything") {
        testkit::MockGateway mg;
        mg.transport->set_responder("judge", [](const ProviderProfile&, const nlohmann::json& req) {
            auto text = req["messages"].back()["content"].get<std::string>();
            bool strategy_first = text.find("SMARK") < text.find("BMARK");
            return MockReply{200, strategy_first ? "A" : "B", false};
        });
        auto v = judge_pairs(mg.gateway, pairs, corpus, aspects, judge, default_prompt_pack(), 3);
        auto r = win_rate(v, Aspect::Listening);
        CHECK(r.retention == 1.0);
        CHECK(r.value == 1.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            CHECK(v[i].pair_id == pairs[i / 2].id);
            CHECK(v[i].order == (i % 2 ? Order::BA : Order::AB));
        }
    }
}

TEST_CASE("judge_pair refuses mismatched pairs") {
    testkit::MockGateway mg;
    auto judge = default_profile("judge", ProfileKind::Judge);
    auto a = arm_dialogue("a", "t1", Arm::WithStrategy, "x");
    auto b = arm_dialogue("b", "t2", Arm::Baseline, "y");
    CHECK_THROWS_AS(judge_pair(mg.gateway, a, b, Aspect::Fluency, judge, default_prompt_pack()), PairingError);
    auto c = arm_dialogue("c", "t1", Arm::WithStrategy, "z");
    CHECK_THROWS_AS(judge_pair(mg.gateway, a, c, Aspect::Fluency, judge, default_prompt_pack()), PairingError);
    CHECK(mg.transport->total_calls() == 0);
}

TEST_CASE("pairing stays within a twin and is seeded") {
    std::vector<Conversation> corpus;
    for (int t = 0; t < 3; ++t)
        for (int e = 0; e < 5; ++e) {
            auto twin = "t" + std::to_string(t);
            corpus.push_back(arm_dialogue(twin + "-s" + std::to_string(e), twin, Arm::WithStrategy, "s"));
            corpus.push_back(arm_dialogue(twin + "-b" + std::to_string(e), twin, Arm::Baseline, "b"));
        }
    corpus.push_back(arm_dialogue("t0-b9", "t0", Arm::Baseline, "extra"));
    auto p1 = pair_dialogues(corpus, 5);
    CHECK(p1 == pair_dialogues(corpus, 5));
    CHECK(p1.size() == 15);
    std::map<std::string, const Conversation*> by_id;
    for (const auto& c : corpus) by_id[c.id] = &c;
    std::set<std::string> used;
    for (const auto& p : p1) {
        CHECK(by_id[p.strategy_id]->meta.participant == p.twin);
        CHECK(by_id[p.baseline_id]->meta.participant == p.twin);
        CHECK(*by_id[p.strategy_id]->meta.arm == Arm::WithStrategy);
        CHECK(*by_id[p.baseline_id]->meta.arm == Arm::Baseline);
        CHECK(used.insert(p.baseline_id).second);
    }
    bool differs = false;
    for (std::uint64_t seed = 6; seed < 12 && !differs; ++seed) differs = pair_dialogues(corpus, seed) != p1;
    CHECK(differs);
}

TEST_CASE("baseline win rate is the complement of the mean") {
    std::vector<double> listening = {0.4962, 0.4884, 0.4407};
    std::vector<double> fluency = {0.4748, 0.5368, 0.4926};
    std::vector<double> sense = {0.4786, 0.5180, 0.4963};
    CHECK(std::abs(baseline_wr(listening) - 0.5249) <= 1e-4);
    CHECK(std::abs(baseline_wr(fluency) - 0.4986) <= 1e-4);
    CHECK(std::abs(baseline_wr(sense) - 0.5024) <= 1e-4);
    std::vector<double> any = {0.1, 0.7, 0.35, 0.9};
    double mean = (0.1 + 0.7 + 0.35 + 0.9) / 4;
    CHECK(baseline_wr(any) == doctest::Approx(1 - mean).epsilon(1e-15));
    std::vector<double> none;
    CHECK_THROWS_AS(baseline_wr(none), UndefinedMetricError);
}

TEST_CASE("log normalization") {
    CHECK(log_normalize(0.0) == 0.0);
    CHECK(std::abs(log_normalize(2.0) - std::log(9.0)) < 1e-9);
    CHECK(log_normalize(0.8643) == std::log(4.4572));
    CHECK(std::abs(log_normalize(0.8643) - 1.4945) < 1e-4);
    CHECK_THROWS_AS(log_normalize(-0.3), DomainError);
    CHECK_THROWS_AS(log_normalize(std::nan("")), DomainError);
    double prev = -INFINITY;
    for (int i = 0; i < 1000; ++i) {
        double y = log_normalize(-0.2 + i * 0.01);
        CHECK(y > prev);
        prev = y;
    }
}

TEST_CASE("progression curves") {
    // user turns lengthen over time, moderator turns stay at one token
    auto grow = [&](const std::string& id) {
        std::vector<std::string> t;
        for (int i = 0; i < 12; ++i) {
            if (i % 2 == 0) {
                t.push_back("ok");
            } else {
                std::string s;
                for (int k = 0; k <= i; ++k) s += "word ";
                t.push_back(s);
            }
        }
        auto c = dialogue(id, t);
        c.meta.arm = Arm::WithStrategy;
        return c;
    };
    std::vector<Conversation> corpus = {grow("a"), grow("b")};
    auto table = progression_curves(corpus, CurveMetric::Verbosity, 1, 12);
    REQUIRE_FALSE(table.points.empty());
    CHECK(table.points.front().cut == 3);  // first two turns are warm-up
    double prev = -1;
    for (const auto& p : table.points) {
        if (p.cut % 2) continue;  // cut ends on a user turn
        CHECK(p.mean > prev);
        prev = p.mean;
    }
    CHECK(table.notes.empty());

    auto user = progression_curves(corpus, CurveMetric::UserTokens, 3, 40);
    CHECK(user.points.back().cut == 12);
    CHECK_FALSE(user.notes.empty());
    auto c = corpus[0];
    std::size_t tokens = 0;
    for (std::size_t i = 0; i < 5; ++i)
        if (c.turns[i].speaker == Speaker::User) tokens += count_words(c.turns[i].text);
    CHECK(user.points[2].cut == 5);
    CHECK(user.points[2].mean == static_cast<double>(tokens));
}

TEST_CASE("emotion triplets match brute force") {
    using E = Emotion;
    auto small = with_emotions("x", {E::Neutral, E::Neutral, E::Joy});
    std::vector<Conversation> one = {small};
    auto t = emotion_triplets(one);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.pairs == 2);
    std::map<std::pair<std::string, std::string>, double> got;
    for (const auto& r : t.rows) got[{r.from, r.to}] = r.count;
    CHECK(got[{"neutral", "neutral"}] == 1);
    CHECK(got[{"neutral", "joy"}] == 1);

    // Random fixture against an explicit enumeration.
    std::vector<Conversation> corpus;
    std::uint64_t state = 12345;
    auto next = [&] { return (state = state * 6364136223846793005ULL + 1442695040888963407ULL) >> 33; };
    for (int c = 0; c < 30; ++c) {
        std::vector<std::optional<Emotion>> labels;
        auto n = 2 + next() % 10;
        for (std::size_t i = 0; i < n; ++i) {
            auto r = next() % 6;
            labels.push_back(r == 5 ? std::nullopt : std::optional<Emotion>(kAllEmotions[r]));
        }
        corpus.push_back(with_emotions("c" + std::to_string(c), labels, "t" + std::to_string(c % 3)));
    }
    std::map<std::pair<std::string, std::string>, double> brute;
    std::size_t pairs = 0;
    for (const auto& c : corpus) {
        std::vector<const Turn*> mods;
        for (const auto& turn : c.turns)
            if (turn.speaker == Speaker::Moderator) mods.push_back(&turn);
        for (std::size_t i = 0; i + 1 < mods.size(); ++i)
            if (mods[i]->emotion && mods[i + 1]->emotion) {
                brute[{std::string(to_string(*mods[i]->emotion)), std::string(to_string(*mods[i + 1]->emotion))}] += 1;
                ++pairs;
            }
    }
    auto table = emotion_triplets(corpus);
    CHECK(table.pairs == pairs);
    std::map<std::pair<std::string, std::string>, double> seen;
    for (const auto& r : table.rows) {
        CHECK(r.middle == "·");
        seen[{r.from, r.to}] = r.count;
    }
    CHECK(seen == brute);
    for (std::size_t i = 1; i < table.rows.size(); ++i) CHECK(table.rows[i - 1].count >= table.rows[i].count);
}

TEST_CASE("strategy-middle triplets and per-twin means") {
    using E = Emotion;
    auto a = with_emotions("a", {E::Neutral, E::Joy}, "t1");
    a.turns[0].decision = StrategyDecision{"Ack", "OpQ"};
    auto b = with_emotions("b", {E::Neutral, E::Joy}, "t1");
    b.turns[0].decision = StrategyDecision{std::nullopt, "OpQ"};
    auto c = with_emotions("c", {E::Neutral, E::Joy, E::Joy}, "t2");
    auto none = with_emotions("d", {std::nullopt, std::nullopt}, "t3");
    std::vector<Conversation> corpus = {a, b, c, none};

    auto s = emotion_triplets(corpus, TripletMiddle::Strategy);
    std::map<std::string, double> by_middle;
    for (const auto& r : s.rows) by_middle[r.from + "|" + r.middle + "|" + r.to] = r.count;
    CHECK(by_middle["neutral|Ack+OpQ|joy"] == 1);
    CHECK(by_middle["neutral|OpQ|joy"] == 1);
    CHECK(by_middle["neutral|·|joy"] == 1);
    CHECK(by_middle["joy|·|joy"] == 1);
    CHECK(s.notes.size() == 1);

    auto per = emotion_triplets_per_twin(corpus);
    std::map<std::string, double> mean;
    for (const auto& r : per.rows) mean[r.from + ">" + r.to] = r.count;
    CHECK(mean["neutral>joy"] == (2.0 + 1.0) / 2);
    CHECK(mean["joy>joy"] == (0.0 + 1.0) / 2);
}

TEST_CASE("top-k keeps the largest counts with a stable tie order") {
    TripletTable t;
    for (int i = 0; i < 20; ++i)
        t.rows.push_back({"e" + std::to_string(i), "·", "x", static_cast<double>(i % 7)});
    auto top = top_k(t, 15);
    REQUIRE(top.rows.size() == 15);
    auto expected = t.rows;
    std::sort(expected.begin(), expected.end(), [](const TripletCount& a, const TripletCount& b) {
        return a.count != b.count ? a.count > b.count : a.from < b.from;
    });
    expected.resize(15);
    CHECK(top.rows == expected);
    CHECK(top_k(top, 15).rows == top.rows);
}

TEST_CASE("emotion shift classes") {
    using E = Emotion;
    CHECK(emotion_shift(with_emotions("a", {E::Neutral, E::Joy})) == Shift::Positive);
    CHECK(emotion_shift(with_emotions("b", {E::Joy, E::Joy})) == Shift::Unchanged);
    CHECK(emotion_shift(with_emotions("c", {E::Joy, E::Sadness})) == Shift::Negative);
    CHECK(emotion_shift(with_emotions("d", {E::Anger, E::Sadness})) == Shift::Unchanged);
    CHECK(emotion_shift(with_emotions("e", {E::Surprise, E::Neutral})) == Shift::Unchanged);
    CHECK(emotion_shift(with_emotions("f", {E::Sadness, std::nullopt, E::Neutral})) == Shift::Positive);
    CHECK(emotion_shift(with_emotions("g", {E::Joy})) == Shift::Unknown);
    ValenceMap custom;
    custom.surprise = 1;
    CHECK(emotion_shift(with_emotions("h", {E::Neutral, E::Surprise}), custom) == Shift::Positive);
}

TEST_CASE("strategy occurrence tally") {
    Conversation c;
    c.id = "o";
    c.meta.participant = "t1";
    std::vector<StrategyDecision> ds = {{std::nullopt, "OpQ"}, {std::nullopt, "OpQ"}, {std::nullopt, "OpQ"},
                                        {"Ack", "OpQ"}, {"Ack", "OpQ"}};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (i) append_turn(c, Speaker::User, "u");
        append_turn(c, Speaker::Moderator, "m").decision = ds[i];
    }
    std::vector<Conversation> corpus = {c};
    auto t = strategy_occurrence(corpus, default_pool());
    std::vector<StrategyCount> expected = {{"OpQ", 5}, {"Ack", 2}};
    CHECK(t.overall == expected);
    CHECK(t.per_twin.at("t1") == expected);
    CHECK(top_k(t.overall, 1) == std::vector<StrategyCount>{{"OpQ", 5}});
}

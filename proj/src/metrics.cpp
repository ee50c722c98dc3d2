#include "stratchat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <unordered_map>

#include "stratchat/errors.hpp"
#include "stratchat/moderator.hpp"

namespace stratchat {

namespace {

std::string arm_key(const Conversation& c) { return c.meta.arm ? std::string(to_string(*c.meta.arm)) : "unknown"; }

std::string_view strip(std::string_view s, std::string_view junk) {
    auto b = s.find_first_not_of(junk);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(junk);
    return s.substr(b, e - b + 1);
}

// Uniform integer in [0, n) by rejection, so results only depend on the
// engine's (standardized) output sequence.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return x % n;
}

}  // namespace

VerbosityScore verbosity_from_totals(const TokenTotals& t) {
    if (t.moderator == 0) throw UndefinedMetricError("verbosity is undefined without moderator tokens");
    return {t.user, t.moderator, static_cast<double>(t.user) / static_cast<double>(t.moderator)};
}

VerbosityScore verbosity(const Conversation& c, const Tokenizer& tokenize) {
    TokenTotals t;
    for (const auto& turn : c.turns) (turn.speaker == Speaker::User ? t.user : t.moderator) += tokenize(turn.text);
    return verbosity_from_totals(t);
}

std::vector<ArmVerbosity> verbosity_by_arm(std::span<const Conversation> corpus, const Tokenizer& tokenize) {
    auto totals = kernels::token_totals(corpus, tokenize);
    std::map<std::string, std::map<std::string, std::vector<double>>> values;  // arm -> twin -> v
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].meta.aborted || totals[i].moderator == 0) continue;
        values[arm_key(corpus[i])][corpus[i].meta.participant].push_back(verbosity_from_totals(totals[i]).value);
    }
    std::vector<ArmVerbosity> out;
    for (const auto& [arm, twins] : values) {
        ArmVerbosity a;
        a.arm = arm;
        double pooled = 0.0, twin_sum = 0.0;
        for (const auto& [twin, vs] : twins) {
            double s = 0.0;
            for (double v : vs) s += v;
            pooled += s;
            a.conversations += vs.size();
            a.per_twin[twin] = s / static_cast<double>(vs.size());
            twin_sum += a.per_twin[twin];
        }
        a.pooled_mean = pooled / static_cast<double>(a.conversations);
        a.twin_mean = twin_sum / static_cast<double>(twins.size());
        out.push_back(std::move(a));
    }
    return out;
}

std::string_view to_string(Aspect a) {
    switch (a) {
        case Aspect::Listening: return "listening";
        case Aspect::Fluency: return "fluency";
        case Aspect::MakingSense: return "making_sense";
    }
    return "listening";
}

std::string_view to_string(Order o) { return o == Order::AB ? "AB" : "BA"; }

Aspect aspect_from_string(std::string_view s) {
    for (auto a : kAllAspects)
        if (to_string(a) == s) return a;
    if (s == "making-sense") return Aspect::MakingSense;
    throw ConfigError("unknown aspect '" + std::string(s) + "'");
}

std::string_view aspect_description(Aspect a) {
    switch (a) {
        case Aspect::Listening:
            return "Does the user pay attention to what the moderator says and respond to it?";
        case Aspect::Fluency:
            return "Does the user express themselves smoothly and at length, without halting or one-word replies?";
        case Aspect::MakingSense:
            return "Are the user's replies coherent and relevant to the conversation?";
    }
    return "";
}

std::vector<DialoguePair> pair_dialogues(std::span<const Conversation> corpus, std::uint64_t seed) {
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_twin;
    for (const auto& c : corpus) {
        if (c.meta.aborted || !c.meta.arm) continue;
        auto& slot = by_twin[c.meta.participant];
        (*c.meta.arm == Arm::WithStrategy ? slot.first : slot.second).push_back(c.id);
    }
    std::mt19937_64 rng(seed);
    std::vector<DialoguePair> out;
    for (auto& [twin, arms] : by_twin) {
        auto& [strat, base] = arms;
        std::sort(strat.begin(), strat.end());
        std::sort(base.begin(), base.end());
        for (std::size_t i = base.size(); i > 1; --i) std::swap(base[i - 1], base[bounded(rng, i)]);
        auto n = std::min(strat.size(), base.size());
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({twin + "#" + std::to_string(i), twin, strat[i], base[i]});
    }
    return out;
}

std::optional<Preference> parse_verdict(std::string_view reply) {
    std::string_view last;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= reply.size(); ++i) {
        if (i == reply.size() || reply[i] == '\n') {
            auto line = strip(reply.substr(start, i - start), " \t\r");
            if (!line.empty()) last = line;
            start = i + 1;
        }
    }
    auto token = strip(last, " \t\"'*`.");
    if (token == "A") return Preference::A;
    if (token == "B") return Preference::B;
    return std::nullopt;
}

std::string render_for_judge(const Conversation& c) {
    return serialize_history(ConversationPrefix(c, c.turns.size()), false);
}

std::pair<JudgeVerdict, JudgeVerdict> judge_pair(const Gateway& gateway, const Conversation& a, const Conversation& b,
                                                 Aspect aspect, const ProviderProfile& judge,
                                                 const PromptPack& prompts, const std::string& pair_id) {
    if (a.meta.participant != b.meta.participant)
        throw PairingError("cannot pair conversations of '" + a.meta.participant + "' and '" + b.meta.participant + "'");
    if (a.meta.arm == b.meta.arm) throw PairingError("paired conversations must come from different arms");

    auto text_a = render_for_judge(a), text_b = render_for_judge(b);
    auto ask = [&](Order order) {
        bool ab = order == Order::AB;
        auto prompt = prompts.render(prompt::kJudge, {{"aspect", std::string(to_string(aspect))},
                                                      {"aspect_description", std::string(aspect_description(aspect))},
                                                      {"dialogue_a", ab ? text_a : text_b},
                                                      {"dialogue_b", ab ? text_b : text_a}});
        std::vector<ChatMessage> msgs = {{"user", std::move(prompt)}};
        JudgeVerdict v;
        v.pair_id = pair_id.empty() ? a.id + "|" + b.id : pair_id;
        v.aspect = aspect;
        v.order = order;
        try {
            v.raw = gateway.chat_complete(judge, msgs).response;
        } catch (const EmptyResponseError&) {
        }
        v.preferred = parse_verdict(v.raw);
        return v;
    };
    auto first = ask(Order::AB);
    return {std::move(first), ask(Order::BA)};
}

std::vector<JudgeVerdict> judge_pairs(const Gateway& gateway, std::span<const DialoguePair> pairs,
                                      std::span<const Conversation> corpus, std::span<const Aspect> aspects,
                                      const ProviderProfile& judge, const PromptPack& prompts, int workers) {
    std::unordered_map<std::string, const Conversation*> by_id;
    for (const auto& c : corpus) by_id[c.id] = &c;
    auto find = [&](const std::string& id) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw NotFoundError(id);
        return it->second;
    };
    struct Job {
        const Conversation* a;
        const Conversation* b;
        Aspect aspect;
        const std::string* id;
    };
    std::vector<Job> jobs;
    for (const auto& p : pairs)
        for (auto aspect : aspects) jobs.push_back({find(p.strategy_id), find(p.baseline_id), aspect, &p.id});

    std::vector<std::pair<JudgeVerdict, JudgeVerdict>> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            results[i] = judge_pair(gateway, *jobs[i].a, *jobs[i].b, jobs[i].aspect, judge, prompts, *jobs[i].id);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<JudgeVerdict> out;
    out.reserve(2 * results.size());
    for (auto& [ab, ba] : results) {
        out.push_back(std::move(ab));
        out.push_back(std::move(ba));
    }
    return out;
}

WinRateResult win_rate(std::span<const JudgeVerdict> verdicts, Aspect aspect) {
    // underlying winner per order: true when the strategy arm was preferred
    std::map<std::string, std::pair<std::optional<bool>, std::optional<bool>>> by_pair;
    for (const auto& v : verdicts) {
        if (v.aspect != aspect) continue;
        auto& slot = by_pair[v.pair_id];
        std::optional<bool> strategy_won;
        if (v.preferred) strategy_won = (*v.preferred == Preference::A) == (v.order == Order::AB);
        (v.order == Order::AB ? slot.first : slot.second) = strategy_won;
    }
    WinRateResult r;
    r.aspect = aspect;
    r.total_pairs = by_pair.size();
    for (const auto& [id, s] : by_pair) {
        if (!s.first || !s.second || *s.first != *s.second) continue;
        ++r.consistent_pairs;
        if (*s.first) ++r.wins;
    }
    if (r.consistent_pairs == 0)
        throw UndefinedMetricError("win rate is undefined: no consistent pairs for " + std::string(to_string(aspect)));
    r.value = static_cast<double>(r.wins) / static_cast<double>(r.consistent_pairs);
    r.retention = static_cast<double>(r.consistent_pairs) / static_cast<double>(r.total_pairs);
    return r;
}

double baseline_wr(std::span<const double> wrs) {
    if (wrs.empty()) throw UndefinedMetricError("baseline win rate needs at least one win rate");
    double sum = 0.0;
    for (double w : wrs) sum += w;
    return 1.0 - sum / static_cast<double>(wrs.size());
}

double log_normalize(double x) {
    if (!(x >= -0.25)) throw DomainError("log_normalize is undefined for x < -0.25");
    return std::log(4.0 * x + 1.0);
}

std::string_view to_string(CurveMetric m) { return m == CurveMetric::Verbosity ? "verbosity" : "user_tokens"; }

CurveMetric curve_metric_from_string(std::string_view s) {
    if (s == "verbosity") return CurveMetric::Verbosity;
    if (s == "user_tokens") return CurveMetric::UserTokens;
    throw ConfigError("unknown curve metric '" + std::string(s) + "'");
}

CurveTable progression_curves(std::span<const Conversation> corpus, CurveMetric metric, std::size_t first_cut,
                              std::size_t last_cut, int warmup_turns, const Tokenizer& tokenize) {
    CurveTable table;
    table.metric = metric;
    if (corpus.empty()) return table;
    first_cut = std::max<std::size_t>(first_cut, static_cast<std::size_t>(std::max(warmup_turns, 0)) + 1);
    std::size_t shortest = corpus[0].turns.size();
    for (const auto& c : corpus) shortest = std::min(shortest, c.turns.size());

    std::vector<std::size_t> cuts;
    for (std::size_t t = first_cut; t <= last_cut; ++t) {
        if (t > shortest) {
            table.notes.push_back("cuts " + std::to_string(t) + ".." + std::to_string(last_cut) +
                                  " omitted: shortest conversation has " + std::to_string(shortest) + " turns");
            break;
        }
        cuts.push_back(t);
    }
    if (cuts.empty()) return table;

    std::vector<double> values;
    if (metric == CurveMetric::Verbosity) {
        values = kernels::truncated_verbosity(corpus, cuts, tokenize);
    } else {
        values.resize(corpus.size() * cuts.size());
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            std::size_t user = 0, pos = 0;
            for (std::size_t k = 0; k < cuts.size(); ++k) {
                for (; pos < cuts[k]; ++pos)
                    if (corpus[i].turns[pos].speaker == Speaker::User) user += tokenize(corpus[i].turns[pos].text);
                values[i * cuts.size() + k] = static_cast<double>(user);
            }
        }
    }

    std::map<std::string, std::vector<std::size_t>> arms;
    for (std::size_t i = 0; i < corpus.size(); ++i) arms[arm_key(corpus[i])].push_back(i);
    for (std::size_t k = 0; k < cuts.size(); ++k) {
        for (const auto& [arm, members] : arms) {
            CurvePoint p;
            p.cut = cuts[k];
            p.arm = arm;
            double sum = 0.0;
            for (auto i : members) {
                double v = values[i * cuts.size() + k];
                if (std::isnan(v)) continue;
                sum += v;
                ++p.conversations;
            }
            if (p.conversations == 0) {
                table.notes.push_back("cut " + std::to_string(cuts[k]) + " undefined for arm " + arm);
                continue;
            }
            p.mean = sum / static_cast<double>(p.conversations);
            table.points.push_back(std::move(p));
        }
    }
    return table;
}

namespace {

constexpr const char* kDot = "·";

bool has_emotions(const Conversation& c) {
    return std::any_of(c.turns.begin(), c.turns.end(),
                       [](const Turn& t) { return t.speaker == Speaker::Moderator && t.emotion; });
}

void sort_rows(std::vector<TripletCount>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const TripletCount& a, const TripletCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return std::tie(a.from, a.middle, a.to) < std::tie(b.from, b.middle, b.to);
    });
}

using TripletKey = std::tuple<std::string, std::string, std::string>;

std::size_t add_strategy_triplets(const Conversation& c, std::map<TripletKey, double>& counts) {
    std::size_t pairs = 0;
    const Turn* prev = nullptr;
    for (const auto& t : c.turns) {
        if (t.speaker != Speaker::Moderator) continue;
        if (prev && prev->emotion && t.emotion) {
            std::string middle = prev->decision && !prev->decision->empty() ? prev->decision->label() : kDot;
            counts[{std::string(to_string(*prev->emotion)), middle, std::string(to_string(*t.emotion))}] += 1.0;
            ++pairs;
        }
        prev = &t;
    }
    return pairs;
}

// Triplet table of a corpus slice with every conversation already known to carry annotations.
std::pair<std::map<TripletKey, double>, std::size_t> count_triplets(std::span<const Conversation> corpus,
                                                                    TripletMiddle middle) {
    std::map<TripletKey, double> counts;
    std::size_t pairs = 0;
    if (middle == TripletMiddle::Dot) {
        auto m = kernels::emotion_transitions(corpus);
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 5; ++c) {
                if (m[r][c] == 0) continue;
                counts[{std::string(to_string(kAllEmotions[r])), kDot, std::string(to_string(kAllEmotions[c]))}] =
                    static_cast<double>(m[r][c]);
                pairs += m[r][c];
            }
    } else {
        for (const auto& c : corpus) pairs += add_strategy_triplets(c, counts);
    }
    return {std::move(counts), pairs};
}

TripletTable to_table(const std::map<TripletKey, double>& counts, std::size_t pairs) {
    TripletTable t;
    t.pairs = pairs;
    for (const auto& [k, n] : counts) t.rows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), n});
    sort_rows(t.rows);
    return t;
}

}  // namespace

TripletTable emotion_triplets(std::span<const Conversation> corpus, TripletMiddle middle) {
    std::vector<Conversation> annotated;
    std::vector<std::string> notes;
    for (const auto& c : corpus) {
        if (has_emotions(c))
            annotated.push_back(c);
        else
            notes.push_back("skipped " + c.id + ": no emotion annotations");
    }
    auto [counts, pairs] = count_triplets(annotated, middle);
    auto table = to_table(counts, pairs);
    table.notes = std::move(notes);
    return table;
}

TripletTable emotion_triplets_per_twin(std::span<const Conversation> corpus, TripletMiddle middle) {
    std::map<std::string, std::vector<Conversation>> by_twin;
    std::vector<std::string> notes;
    for (const auto& c : corpus) {
        if (has_emotions(c))
            by_twin[c.meta.participant].push_back(c);
        else
            notes.push_back("skipped " + c.id + ": no emotion annotations");
    }
    std::map<TripletKey, double> sum;
    std::size_t pairs = 0;
    for (const auto& [twin, convs] : by_twin) {
        auto [counts, n] = count_triplets(convs, middle);
        for (const auto& [k, v] : counts) sum[k] += v;
        pairs += n;
    }
    for (auto& [k, v] : sum) v /= static_cast<double>(by_twin.size());
    auto table = to_table(sum, pairs);
    table.notes = std::move(notes);
    return table;
}

TripletTable top_k(TripletTable table, std::size_t k) {
    sort_rows(table.rows);
    if (table.rows.size() > k) table.rows.resize(k);
    return table;
}

int ValenceMap::operator()(Emotion e) const {
    switch (e) {
        case Emotion::Joy: return joy;
        case Emotion::Neutral: return neutral;
        case Emotion::Sadness: return sadness;
        case Emotion::Anger: return anger;
        case Emotion::Surprise: return surprise;
    }
    return 0;
}

std::string_view to_string(Shift s) {
    switch (s) {
        case Shift::Positive: return "positive";
        case Shift::Negative: return "negative";
        case Shift::Unchanged: return "unchanged";
        case Shift::Unknown: return "unknown";
    }
    return "unknown";
}

Shift emotion_shift(const Conversation& c, const ValenceMap& valence) {
    std::optional<Emotion> first, last;
    std::size_t n = 0;
    for (const auto& t : c.turns) {
        if (t.speaker != Speaker::Moderator || !t.emotion) continue;
        if (!first) first = t.emotion;
        last = t.emotion;
        ++n;
    }
    if (n < 2) return Shift::Unknown;
    int d = valence(*last) - valence(*first);
    return d > 0 ? Shift::Positive : d < 0 ? Shift::Negative : Shift::Unchanged;
}

std::vector<StrategyCount> top_k(std::vector<StrategyCount> counts, std::size_t k) {
    std::stable_sort(counts.begin(), counts.end(), [](const StrategyCount& a, const StrategyCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.tag < b.tag;
    });
    if (counts.size() > k) counts.resize(k);
    return counts;
}

OccurrenceTable strategy_occurrence(std::span<const Conversation> corpus, const StrategyPool& pool) {
    auto ranked = [&](const std::vector<std::uint64_t>& raw) {
        std::vector<StrategyCount> v;
        for (std::size_t i = 0; i < raw.size(); ++i)
            if (raw[i]) v.push_back({pool.entries()[i].tag, raw[i]});
        auto n = v.size();
        return top_k(std::move(v), n);
    };
    OccurrenceTable out;
    out.overall = ranked(kernels::tag_counts(corpus, pool));

    std::map<std::string, std::vector<std::uint64_t>> per_twin;
    for (const auto& c : corpus) {
        auto& counts = per_twin[c.meta.participant];
        counts.resize(pool.size(), 0);
        auto one = kernels::serial::tag_counts(std::span<const Conversation>(&c, 1), pool);
        for (std::size_t i = 0; i < one.size(); ++i) counts[i] += one[i];
    }
    for (const auto& [twin, counts] : per_twin) {
        auto r = ranked(counts);
        if (!r.empty()) out.per_twin[twin] = std::move(r);
    }
    return out;
}

}  // namespace stratchat

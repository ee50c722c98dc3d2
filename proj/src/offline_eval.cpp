#include "stratchat/offline_eval.hpp"

#include <algorithm>
#include <map>

#include "stratchat/errors.hpp"
#include "stratchat/kernels.hpp"
#include "stratchat/prompt_pack.hpp"

namespace stratchat {

StrategySet to_set(const StrategyDecision& d) {
    auto tags = d.tags();
    return StrategySet::of(tags);
}

namespace {

std::string_view trim(std::string_view s, std::string_view junk = " \t\r\n\"'`[]{}()*.-:") {
    auto b = s.find_first_not_of(junk);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(junk);
    return s.substr(b, e - b + 1);
}

void resolve_into(std::string_view label, const StrategyPool& pool, std::vector<std::string>& tags,
                  std::vector<std::string>& unresolved) {
    // Names such as "Acknowledge (Backchannel)" end in a parenthesis, so try
    // the lightly trimmed label before stripping brackets.
    auto light = trim(label, " \t\r\n\"'`*.:-");
    auto bare = trim(label);
    if (bare.empty()) return;
    for (auto candidate : {light, bare}) {
        if (const auto* s = pool.find(candidate)) {
            tags.push_back(s->tag);
            return;
        }
    }
    // "Open-Question (OpQ)" style
    auto open = light.rfind('(');
    auto close = light.rfind(')');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        if (const auto* s = pool.find(trim(light.substr(open + 1, close - open - 1)))) {
            tags.push_back(s->tag);
            return;
        }
    }
    unresolved.emplace_back(bare);
}

void collect_json(const nlohmann::json& j, const StrategyPool& pool, std::vector<std::string>& tags,
                  std::vector<std::string>& unresolved) {
    if (j.is_string()) {
        resolve_into(j.get<std::string>(), pool, tags, unresolved);
    } else if (j.is_array()) {
        for (const auto& e : j) collect_json(e, pool, tags, unresolved);
    } else if (j.is_object()) {
        for (const char* key : {"tags", "strategies", "backward", "forward"})
            if (j.contains(key) && !j[key].is_null()) collect_json(j[key], pool, tags, unresolved);
    }
}

}  // namespace

StrategySet parse_annotation(std::string_view reply, const StrategyPool& pool) {
    std::vector<std::string> tags, unresolved;
    auto body = trim(reply, " \t\r\n`");
    bool parsed = false;
    if (!body.empty() && (body.front() == '[' || body.front() == '{')) {
        auto j = nlohmann::json::parse(body, nullptr, false);
        if (!j.is_discarded()) {
            collect_json(j, pool, tags, unresolved);
            parsed = true;
        }
    }
    if (!parsed) {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= body.size(); ++i) {
            if (i == body.size() || body[i] == ',' || body[i] == ';' || body[i] == '+' || body[i] == '\n') {
                resolve_into(body.substr(start, i - start), pool, tags, unresolved);
                start = i + 1;
            }
        }
    }
    auto set = StrategySet::of(tags);
    if (set.empty()) throw EmptyAnnotationError("annotator reply has no resolvable strategy: '" + std::string(reply) + "'");
    set.unresolved = std::move(unresolved);
    return set;
}

StrategySet annotate_strategies(const Gateway& gateway, std::string_view utterance, const ConversationPrefix& context,
                                const ProviderProfile& annotator, const StrategyPool& pool,
                                const PromptPack& prompts) {
    if (trim(utterance, " \t\r\n").empty()) throw RangeError("cannot annotate an empty utterance");
    auto text = prompts.render(prompt::kAnnotator, {{"strategy_pool", render_context(pool)},
                                                    {"history", serialize_history(context, false)},
                                                    {"utterance", std::string(utterance)}});
    std::vector<ChatMessage> msgs = {{"user", std::move(text)}};
    auto ex = gateway.chat_complete(annotator, msgs);
    return parse_annotation(ex.response, pool);
}

nlohmann::json to_json(const AlignmentRecord& r) {
    nlohmann::json j = {{"conversation_id", r.conversation_id},
                        {"participant", r.participant},
                        {"session", r.session},
                        {"turn", r.turn},
                        {"golden", r.golden.tags},
                        {"proposed", r.proposed.tags},
                        {"baseline", r.baseline.tags}};
    j["smp_strategy"] = r.smp_strategy ? nlohmann::json(*r.smp_strategy) : nlohmann::json();
    j["smp_baseline"] = r.smp_baseline ? nlohmann::json(*r.smp_baseline) : nlohmann::json();
    if (r.skip_reason) j["skip_reason"] = *r.skip_reason;
    // Labels the annotator produced that are not in the pool, kept for auditing.
    for (auto [k, set] : {std::pair{"golden", &r.golden}, {"proposed", &r.proposed}, {"baseline", &r.baseline}})
        if (!set->unresolved.empty()) j[std::string(k) + "_unresolved"] = set->unresolved;
    return j;
}

AlignmentRecord alignment_record_from_json(const nlohmann::json& j) {
    try {
        AlignmentRecord r;
        r.conversation_id = j.at("conversation_id").get<std::string>();
        r.participant = j.value("participant", "");
        r.session = j.value("session", "");
        r.turn = j.at("turn").get<std::size_t>();
        auto set = [&](const char* k) {
            auto out = j.contains(k) ? StrategySet::of(j[k].get<std::vector<std::string>>()) : StrategySet{};
            auto extra = std::string(k) + "_unresolved";
            if (j.contains(extra)) out.unresolved = j[extra].get<std::vector<std::string>>();
            return out;
        };
        r.golden = set("golden");
        r.proposed = set("proposed");
        r.baseline = set("baseline");
        if (j.contains("smp_strategy") && !j["smp_strategy"].is_null()) r.smp_strategy = j["smp_strategy"].get<double>();
        if (j.contains("smp_baseline") && !j["smp_baseline"].is_null()) r.smp_baseline = j["smp_baseline"].get<double>();
        if (j.contains("skip_reason")) r.skip_reason = j["skip_reason"].get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("alignment record: ") + e.what());
    }
}

std::vector<AlignmentRecord> evaluate_dialogue(const Conversation& conv, const ModeratorEngine& engine,
                                               const ModeratorEngine& baseline, const ProviderProfile& annotator,
                                               const EvalOptions& options) {
    const auto& pool = *engine.config().pool;
    const auto& prompts = *engine.config().prompts;
    std::vector<AlignmentRecord> out;
    std::size_t t = 0;
    for (std::size_t pos = 0; pos < conv.turns.size(); ++pos) {
        if (conv.turns[pos].speaker != Speaker::Moderator) continue;
        std::size_t turn = t++;
        if (turn < options.first_turn) continue;
        if (turn > options.last_turn) break;

        ConversationPrefix prefix(conv, pos);
        AlignmentRecord r;
        r.conversation_id = conv.id;
        r.participant = conv.meta.participant;
        r.session = conv.meta.session;
        r.turn = turn;

        try {
            r.golden = annotate_strategies(engine.gateway(), conv.turns[pos].text, prefix, annotator, pool, prompts);
        } catch (const EmptyAnnotationError& e) {
            r.skip_reason = std::string("golden annotation: ") + e.what();
            out.push_back(std::move(r));
            continue;
        }

        try {
            r.proposed = to_set(engine.propose_strategy(prefix).decision);
        } catch (const StrategyValidationError& e) {
            r.skip_reason = std::string("strategy proposal rejected: ") + e.what();
            out.push_back(std::move(r));
            continue;
        }

        auto generated = baseline.generate_utterance(prefix, nullptr, std::nullopt);
        try {
            r.baseline = annotate_strategies(baseline.gateway(), generated.text, prefix, annotator, pool, prompts);
        } catch (const EmptyAnnotationError& e) {
            r.skip_reason = std::string("baseline annotation: ") + e.what();
            out.push_back(std::move(r));
            continue;
        }

        r.smp_strategy = smp(r.golden, r.proposed);
        r.smp_baseline = smp(r.golden, r.baseline);
        out.push_back(std::move(r));
    }
    return out;
}

std::string_view to_string(GroupBy g) {
    switch (g) {
        case GroupBy::Turn: return "turn";
        case GroupBy::Participant: return "participant";
        case GroupBy::Week: return "week";
    }
    return "turn";
}

GroupBy group_by_from_string(std::string_view s) {
    if (s == "turn") return GroupBy::Turn;
    if (s == "participant") return GroupBy::Participant;
    if (s == "week" || s == "session") return GroupBy::Week;
    throw ConfigError("unknown grouping '" + std::string(s) + "'");
}

AlignmentTable aggregate_alignment(std::span<const AlignmentRecord> records, GroupBy by, TurnRange range) {
    AlignmentTable table;
    table.by = by;

    // Keys in output order. Turn keys are zero-padded so string order matches numeric order.
    std::map<std::string, std::size_t> keys;
    std::vector<std::string> key_of(records.size());
    std::vector<bool> usable(records.size(), false);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.turn < range.first || r.turn > range.last) {
            ++table.out_of_range;
            continue;
        }
        if (r.skipped() || !r.smp_strategy || !r.smp_baseline) {
            ++table.skipped;
            continue;
        }
        usable[i] = true;
        switch (by) {
            case GroupBy::Turn: {
                auto s = std::to_string(r.turn);
                key_of[i] = std::string(20 - s.size(), '0') + s;
                break;
            }
            case GroupBy::Participant: key_of[i] = r.participant; break;
            case GroupBy::Week: key_of[i] = r.session; break;
        }
        keys.emplace(key_of[i], 0);
    }
    std::size_t g = 0;
    for (auto& [k, idx] : keys) idx = g++;

    std::vector<std::size_t> group_of(records.size(), kNoGroup);
    std::vector<double> a(records.size(), 0.0), b(records.size(), 0.0);
    std::map<std::pair<std::string, std::string>, std::size_t> crosstab;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!usable[i]) continue;
        const auto& r = records[i];
        group_of[i] = keys.at(key_of[i]);
        a[i] = *r.smp_strategy;
        b[i] = *r.smp_baseline;
        if (r.proposed.tags == r.golden.tags && r.baseline.tags != r.golden.tags)
            ++crosstab[{r.golden.label(), r.baseline.label()}];
    }

    auto sums = kernels::group_sums(group_of, a, b, keys.size());
    for (const auto& [k, idx] : keys) {
        AlignmentRow row;
        row.group = by == GroupBy::Turn ? std::to_string(std::stoull(k)) : k;
        row.count = sums[idx].count;
        row.mean_strategy = sums[idx].sum_a / static_cast<double>(row.count);
        row.mean_baseline = sums[idx].sum_b / static_cast<double>(row.count);
        table.rows.push_back(std::move(row));
    }
    for (const auto& [k, n] : crosstab) table.discrepancy.push_back({k.first, k.second, n});
    return table;
}

}  // namespace stratchat

#include "stratchat/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stratchat/errors.hpp"

namespace stratchat {

namespace fs = std::filesystem;

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed(double v, int precision) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    // avoid "-0.000000"
    std::string s = buf;
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

namespace {

class Csv {
public:
    explicit Csv(std::initializer_list<std::string> header) { row(std::vector<std::string>(header)); }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
        out_ << '\n';
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

std::string num(std::size_t n) { return std::to_string(n); }

bool wanted(const ReportOptions& o, const char* metric) { return o.metrics.empty() || o.metrics.count(metric); }

}  // namespace

ReportBundle build_report(std::span<const Conversation> all, std::span<const AlignmentRecord> alignment,
                          const Gateway* gateway, const StrategyPool& pool, const ReportOptions& options) {
    for (const auto& m : options.metrics) {
        bool known = false;
        for (const char* k : kReportMetrics) known = known || m == k;
        if (!known) throw ConfigError("unknown report metric '" + m + "'");
    }
    std::vector<Conversation> corpus;
    std::map<std::string, std::size_t> per_arm;
    std::size_t aborted = 0;
    for (const auto& c : all) {
        if (c.meta.aborted) {
            ++aborted;
            continue;
        }
        corpus.push_back(c);
        ++per_arm[c.meta.arm ? std::string(to_string(*c.meta.arm)) : "unknown"];
    }

    ReportBundle bundle;
    std::ostringstream md;
    md << "# Run summary\n\n";
    md << "Conversations: " << corpus.size() << " usable, " << aborted << " aborted.\n\n";
    for (const auto& [arm, n] : per_arm) md << "- " << arm << ": " << n << "\n";
    md << "\n";

    if (wanted(options, "verbosity")) {
        Csv csv({"arm", "twin", "conversations", "verbosity", "log_normalized"});
        md << "## Verbosity\n\n| arm | conversations | pooled mean | mean of twin means | log-normalized |\n"
              "|---|---|---|---|---|\n";
        for (const auto& a : verbosity_by_arm(corpus)) {
            csv.row({a.arm, "*", num(a.conversations), fixed(a.pooled_mean), fixed(log_normalize(a.pooled_mean))});
            csv.row({a.arm, "twin_mean", num(a.per_twin.size()), fixed(a.twin_mean), fixed(log_normalize(a.twin_mean))});
            for (const auto& [twin, v] : a.per_twin) csv.row({a.arm, twin, "", fixed(v), fixed(log_normalize(v))});
            md << "| " << a.arm << " | " << a.conversations << " | " << fixed(a.pooled_mean, 4) << " | "
               << fixed(a.twin_mean, 4) << " | " << fixed(log_normalize(a.pooled_mean), 4) << " |\n";
        }
        md << "\n";
        bundle.files["verbosity.csv"] = csv.str();
    }

    if (wanted(options, "win_rate")) {
        md << "## Win rates\n\n";
        if (!gateway || !options.judge) {
            md << "Skipped: no judge configured.\n\n";
        } else {
            const auto& prompts = options.prompts ? *options.prompts : default_prompt_pack();
            auto pairs = pair_dialogues(corpus, options.seed);
            Csv pairs_csv({"pair_id", "twin", "strategy_id", "baseline_id"});
            for (const auto& p : pairs) pairs_csv.row({p.id, p.twin, p.strategy_id, p.baseline_id});
            bundle.files["pairs.csv"] = pairs_csv.str();

            auto verdicts = judge_pairs(*gateway, pairs, corpus, options.aspects, *options.judge, prompts, options.workers);
            Csv vcsv({"pair_id", "aspect", "order", "preferred"});
            for (const auto& v : verdicts)
                vcsv.row({v.pair_id, std::string(to_string(v.aspect)), std::string(to_string(v.order)),
                          v.preferred ? (*v.preferred == Preference::A ? "A" : "B") : "unparseable"});
            bundle.files["verdicts.csv"] = vcsv.str();

            Csv csv({"aspect", "wins", "consistent_pairs", "total_pairs", "win_rate", "retention", "baseline_win_rate"});
            md << "| aspect | strategy WR | baseline WR | retention | consistent / total |\n|---|---|---|---|---|\n";
            for (auto aspect : options.aspects) {
                auto name = std::string(to_string(aspect));
                try {
                    auto r = win_rate(verdicts, aspect);
                    double wr = r.value;
                    double base = baseline_wr(std::span<const double>(&wr, 1));
                    csv.row({name, num(r.wins), num(r.consistent_pairs), num(r.total_pairs), fixed(r.value),
                             fixed(r.retention), fixed(base)});
                    md << "| " << name << " | " << fixed(r.value, 4) << " | " << fixed(base, 4) << " | "
                       << fixed(r.retention, 4) << " | " << r.consistent_pairs << " / " << r.total_pairs << " |\n";
                } catch (const UndefinedMetricError&) {
                    csv.row({name, "0", "0", num(pairs.size()), "nan", fixed(0.0), "nan"});
                    md << "| " << name << " | undefined | undefined | 0.0000 | 0 / " << pairs.size() << " |\n";
                }
            }
            md << "\n";
            bundle.files["win_rates.csv"] = csv.str();
        }
    }

    if (wanted(options, "progression")) {
        md << "## Progression\n\n";
        for (auto metric : {CurveMetric::Verbosity, CurveMetric::UserTokens}) {
            auto table = progression_curves(corpus, metric, options.first_cut, options.last_cut, options.warmup_turns);
            Csv csv({"cut", "arm", "conversations", "mean"});
            for (const auto& p : table.points) csv.row({num(p.cut), p.arm, num(p.conversations), fixed(p.mean)});
            bundle.files["progression_" + std::string(to_string(metric)) + ".csv"] = csv.str();
            for (const auto& n : table.notes) md << "- " << to_string(metric) << ": " << n << "\n";
        }
        md << "Curves start after the warm-up turns (first cut "
           << std::max<std::size_t>(options.first_cut, static_cast<std::size_t>(std::max(options.warmup_turns, 0)) + 1)
           << ").\n\n";
    }

    if (wanted(options, "emotion")) {
        auto write_triplets = [&](const TripletTable& t, const std::string& file) {
            Csv csv({"from", "middle", "to", "count"});
            for (const auto& r : t.rows) csv.row({r.from, r.middle, r.to, fixed(r.count)});
            bundle.files[file] = csv.str();
        };
        auto overall = emotion_triplets(corpus);
        write_triplets(top_k(overall, options.top_triplets), "emotion_triplets.csv");
        write_triplets(top_k(emotion_triplets_per_twin(corpus), options.top_triplets), "emotion_triplets_per_twin.csv");
        write_triplets(top_k(emotion_triplets(corpus, TripletMiddle::Strategy), options.top_triplets),
                       "emotion_triplets_strategy.csv");

        std::map<std::string, std::map<Shift, std::size_t>> shifts;
        for (const auto& c : corpus)
            ++shifts[c.meta.arm ? std::string(to_string(*c.meta.arm)) : "unknown"][emotion_shift(c)];
        Csv csv({"arm", "positive", "negative", "unchanged", "unknown"});
        md << "## Emotions\n\nAdjacent annotation pairs: " << overall.pairs << "\n\n";
        for (const auto& [arm, counts] : shifts) {
            auto get = [&](Shift s) {
                auto it = counts.find(s);
                return it == counts.end() ? std::size_t{0} : it->second;
            };
            csv.row({arm, num(get(Shift::Positive)), num(get(Shift::Negative)), num(get(Shift::Unchanged)),
                     num(get(Shift::Unknown))});
            md << "- " << arm << ": " << get(Shift::Positive) << " positive, " << get(Shift::Negative)
               << " negative, " << get(Shift::Unchanged) << " unchanged, " << get(Shift::Unknown) << " unknown\n";
        }
        md << "\n";
        bundle.files["emotion_shift.csv"] = csv.str();
    }

    if (wanted(options, "strategy")) {
        auto occ = strategy_occurrence(corpus, pool);
        Csv csv({"twin", "rank", "tag", "count"});
        auto emit = [&](const std::string& twin, const std::vector<StrategyCount>& counts) {
            auto top = top_k(counts, options.top_strategies);
            for (std::size_t i = 0; i < top.size(); ++i) csv.row({twin, num(i + 1), top[i].tag, num(top[i].count)});
        };
        emit("*", occ.overall);
        for (const auto& [twin, counts] : occ.per_twin) emit(twin, counts);
        bundle.files["strategy_occurrence.csv"] = csv.str();
        md << "## Strategies\n\n";
        auto top = top_k(occ.overall, 5);
        if (top.empty()) md << "No strategy decisions in the corpus.\n";
        for (const auto& s : top) md << "- " << s.tag << ": " << s.count << "\n";
        md << "\n";
    }

    if (wanted(options, "alignment") && !alignment.empty()) {
        md << "## Strategy alignment\n\n";
        for (auto by : {GroupBy::Turn, GroupBy::Participant, GroupBy::Week}) {
            auto table = aggregate_alignment(alignment, by, options.alignment_range);
            Csv csv({std::string(to_string(by)), "count", "smp_strategy", "smp_baseline"});
            for (const auto& r : table.rows)
                csv.row({r.group, num(r.count), fixed(r.mean_strategy), fixed(r.mean_baseline)});
            bundle.files["alignment_" + std::string(to_string(by)) + ".csv"] = csv.str();
            if (by == GroupBy::Turn) {
                Csv x({"golden", "baseline", "count"});
                for (const auto& c : table.discrepancy) x.row({c.golden, c.baseline, num(c.count)});
                bundle.files["alignment_discrepancy.csv"] = x.str();
                double a = 0, b = 0;
                std::size_t n = 0;
                for (const auto& r : table.rows) {
                    a += r.mean_strategy * static_cast<double>(r.count);
                    b += r.mean_baseline * static_cast<double>(r.count);
                    n += r.count;
                }
                md << "Usable records: " << n << ", skipped: " << table.skipped << ", outside turns "
                   << options.alignment_range.first << ".." << options.alignment_range.last << ": "
                   << table.out_of_range << "\n\n";
                if (n)
                    md << "Mean SMP: strategy arm " << fixed(a / static_cast<double>(n), 4) << ", baseline "
                       << fixed(b / static_cast<double>(n), 4) << "\n\n";
            }
        }
    }

    bundle.files["summary.md"] = md.str();
    return bundle;
}

void write_report(const ReportBundle& bundle, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& [name, text] : bundle.files) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + (dir / name).string());
        out << text;
    }
}

}  // namespace stratchat

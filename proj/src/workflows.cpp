#include "stratchat/workflows.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "stratchat/demo_providers.hpp"
#include "stratchat/errors.hpp"

namespace stratchat {

using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

ProfileKind kind_of(const std::string& name) {
    if (name == "strategy_provider") return ProfileKind::StrategyProvider;
    if (name == "extractor") return ProfileKind::Extractor;
    if (name == "annotator") return ProfileKind::Annotator;
    if (name == "judge") return ProfileKind::Judge;
    return ProfileKind::Generator;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

}  // namespace

RuntimeConfig runtime_config_from_json(const json& j, const fs::path& base_dir) {
    RuntimeConfig c;
    try {
        if (j.contains("profiles"))
            for (const auto& [name, p] : j["profiles"].items()) c.profiles[name] = p;
        if (j.contains("pool")) c.pool_path = resolve(base_dir, j["pool"].get<std::string>());
        if (j.contains("prompts")) c.prompts_path = resolve(base_dir, j["prompts"].get<std::string>());
        if (j.contains("exchange_log")) c.exchange_log = resolve(base_dir, j["exchange_log"].get<std::string>());
        if (j.contains("api_key_env")) c.api_key_env = j["api_key_env"].get<std::string>();
        c.mock = j.value("mock", false);
        c.warmup_turns = j.value("warmup_turns", c.warmup_turns);
        c.topic_policy = j.value("topic_policy", c.topic_policy);
        c.max_attempts = j.value("max_attempts", c.max_attempts);
        auto v = j.value("validation", std::string("strict"));
        if (v == "strict")
            c.validation = ValidationMode::Strict;
        else if (v == "lenient")
            c.validation = ValidationMode::Lenient;
        else
            throw ConfigError("validation must be strict or lenient");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid runtime config: ") + e.what());
    }
    return c;
}

RuntimeConfig load_runtime_config(const fs::path& path) {
    return runtime_config_from_json(read_json_file(path), path.parent_path());
}

Runtime::Runtime(RuntimeConfig config) : config_(std::move(config)) {
    if (config_.pool_path)
        pool_ = std::make_shared<const StrategyPool>(load_pool_file(config_.pool_path->string()));
    else
        pool_ = std::shared_ptr<const StrategyPool>(&default_pool(), [](const StrategyPool*) {});
    if (config_.prompts_path)
        prompts_ = std::make_shared<const PromptPack>(load_prompt_pack(config_.prompts_path->string()));
    else
        prompts_ = std::shared_ptr<const PromptPack>(&default_prompt_pack(), [](const PromptPack*) {});

    for (const char* name : kProfileNames) profiles_[name] = default_profile(name, kind_of(name));
    for (const auto& [name, j] : config_.profiles) {
        auto base = profiles_.count(name) ? profiles_[name] : default_profile(name, ProfileKind::Generator);
        if (!j.contains("role")) base.role = name;
        profiles_[name] = profile_from_json(j, base);
    }

    std::shared_ptr<Transport> transport;
    RetryPolicy retry;
    retry.max_attempts = config_.max_attempts;
    Gateway::Sleeper sleeper;
    if (config_.mock) {
        mock_ = std::make_shared<MockTransport>();
        mock_->record_requests(false);
        install_demo_providers(*mock_, *pool_);
        transport = mock_;
        retry.initial_backoff = retry.max_backoff = std::chrono::milliseconds(0);
        sleeper = [](std::chrono::milliseconds) {};
    } else {
        transport = std::make_shared<HttpTransport>();
    }
    gateway_ = std::make_unique<Gateway>(transport, retry, sleeper);
    if (config_.exchange_log) gateway_->set_log(std::make_shared<ExchangeLog>(config_.exchange_log->string()));
}

const ProviderProfile& Runtime::profile(const std::string& name) const {
    auto it = profiles_.find(name);
    if (it == profiles_.end()) throw ConfigError("unknown provider profile '" + name + "'");
    return it->second;
}

SessionConfig Runtime::session_config(ModeratorMode mode) const {
    SessionConfig c;
    c.mode = mode;
    c.warmup_turns = config_.warmup_turns;
    c.pool = pool_;
    c.prompts = prompts_;
    c.strategy_provider = profile("strategy_provider");
    c.generator = profile(mode == ModeratorMode::Baseline ? "baseline_generator" : "generator");
    if (!c.strategy_provider.structured_output) c.extractor = profile("extractor");
    c.validation = config_.validation;
    c.topic_policy = config_.topic_policy;
    return normalized(std::move(c));
}

std::vector<TwinProfile> demo_twins(int count) {
    static const char* personas[] = {
        "You are 78, a retired schoolteacher who loves gardening and talks about your grandchildren.",
        "You are 82, a former factory worker, a little hard of hearing, and you keep answers short.",
        "You are 75 and live alone since your husband passed; you enjoy the radio and old films.",
        "You are 80, a retired nurse with mild memory problems who sometimes repeats stories.",
        "You are 73, an avid walker who worries about rising prices at the market.",
        "You are 85, a former dancer, cheerful and chatty, fond of music from your youth.",
        "You are 77, a retired engineer who reads about railways and likes precise questions.",
        "You are 79, recently moved to assisted living and often feel lonely in the evenings.",
        "You are 74, a volunteer at your church who gets annoyed when buses run late.",
    };
    if (count < 1) throw ConfigError("need at least one twin");
    std::vector<TwinProfile> out;
    for (int i = 0; i < count; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "twin-%02d", i + 1);
        TwinProfile t;
        t.id = id;
        t.persona = personas[i % std::size(personas)];
        t.provider = default_profile(roles::kTwinPrefix + t.id, ProfileKind::Twin);
        t.opener = "A casual video chat with " + t.id + ".";
        out.push_back(std::move(t));
    }
    return out;
}

BatchResult run_simulate(const Runtime& rt, const SimulateOptions& o) {
    EpisodePlan plan;
    if (o.plan_file)
        plan = plan_from_json(read_json_file(*o.plan_file));
    else
        plan.twins = demo_twins(o.twins);
    if (o.episodes) plan.episodes_per_twin = *o.episodes;
    if (o.turns) plan.turns_per_episode = *o.turns;
    if (o.seed) plan.seed = *o.seed;
    if (o.workers) plan.workers = *o.workers;
    if (!o.arms.empty()) plan.arms = o.arms;
    plan.moderator = rt.session_config(ModeratorMode::Full);
    plan.baseline_generator = rt.profile("baseline_generator");
    return run_batch(plan, rt.gateway(), o.out_dir);
}

std::vector<AlignmentRecord> read_alignment_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<AlignmentRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(alignment_record_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return out;
}

EvalOfflineResult run_eval_offline(const Runtime& rt, const EvalOfflineOptions& o) {
    auto all = read_store_file(o.corpus.string());
    auto corpus = filter_corpus(all, o.min_turns);
    EvalOfflineResult result;
    result.conversations = corpus.size();
    result.filtered_out = all.size() - corpus.size();

    ModeratorEngine engine(rt.gateway(), rt.session_config(ModeratorMode::Full));
    ModeratorEngine baseline(rt.gateway(), rt.session_config(ModeratorMode::Baseline));
    const auto& annotator = rt.profile("annotator");

    std::vector<std::vector<AlignmentRecord>> per(corpus.size());
    std::vector<std::exception_ptr> errors(corpus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < corpus.size();) {
            try {
                per[i] = evaluate_dialogue(corpus[i], engine, baseline, annotator, o.turns);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(o.workers, 1)), corpus.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 1; i < n; ++i) threads.emplace_back(worker);
    if (n > 0) worker();
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (auto& v : per)
        for (auto& r : v) result.records.push_back(std::move(r));

    fs::create_directories(o.out_dir);
    std::string lines;
    for (const auto& r : result.records) lines += to_json(r).dump() + "\n";
    write_text(o.out_dir / kAlignmentFile, lines);
    for (auto by : {GroupBy::Turn, GroupBy::Participant, GroupBy::Week}) {
        auto table = aggregate_alignment(result.records, by, o.range);
        std::string csv = std::string(to_string(by)) + ",count,smp_strategy,smp_baseline\n";
        for (const auto& r : table.rows)
            csv += csv_field(r.group) + "," + std::to_string(r.count) + "," + fixed(r.mean_strategy) + "," +
                   fixed(r.mean_baseline) + "\n";
        write_text(o.out_dir / ("alignment_" + std::string(to_string(by)) + ".csv"), csv);
    }
    return result;
}

ReportBundle run_report(const Runtime& rt, const ReportRunOptions& o) {
    auto corpus = read_store_file(o.corpus.string());
    std::vector<AlignmentRecord> alignment;
    if (o.alignment) alignment = read_alignment_file(*o.alignment);
    auto options = o.report;
    options.prompts = &rt.prompts();
    if (o.judge && !options.judge) options.judge = rt.profile("judge");
    auto bundle = build_report(corpus, alignment, &rt.gateway(), rt.pool(), options);
    write_report(bundle, o.out_dir);
    return bundle;
}

std::vector<Conversation> ingest_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<Conversation> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            Conversation c;
            if (j.is_object()) {
                c = ingest_dialogue(j.at("messages"));
                c.id = j.value("id", "");
                c.meta.participant = j.value("participant", "");
                c.meta.session = j.value("session", "");
            } else {
                c = ingest_dialogue(j);
            }
            if (c.id.empty()) {
                char id[32];
                std::snprintf(id, sizeof id, "conv-%04zu", out.size() + 1);
                c.id = id;
            }
            c.meta.source = Source::Real;
            out.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw ParseError(lineno, e.what());
        } catch (const IngestionError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return out;
}

}  // namespace stratchat

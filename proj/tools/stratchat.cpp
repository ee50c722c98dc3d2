// stratchat command-line entry point.
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "stratchat/errors.hpp"
#include "stratchat/service.hpp"
#include "stratchat/workflows.hpp"

using namespace stratchat;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct Globals {
    std::string config;
    bool mock = false;
};

Runtime make_runtime(const Globals& g) {
    RuntimeConfig cfg = g.config.empty() ? RuntimeConfig{} : load_runtime_config(g.config);
    if (g.mock) cfg.mock = true;
    return Runtime(std::move(cfg));
}

HttpService* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_pool(const Globals& g, const std::string& action, const std::string& arg, const std::string& tags) {
    if (action == "validate") {
        auto pool = load_pool_file(arg);
        std::cout << "ok: " << pool.size() << " strategies (" << pool.count(Direction::Backward) << " backward, "
                  << pool.count(Direction::Forward) << " forward), version " << pool.version() << "\n";
        return 0;
    }
    auto rt = make_runtime(g);
    const auto& pool = rt.pool();
    if (action == "list") {
        for (const auto& s : pool.entries())
            std::cout << s.tag << "\t" << to_string(s.direction) << "\t" << s.name << "\n";
    } else if (action == "show") {
        const auto& s = pool.lookup(arg);
        std::cout << s.name << " (" << s.tag << ")\n"
                  << "direction: " << to_string(s.direction) << "\n"
                  << "definition: " << s.definition << "\n"
                  << "example: " << s.example << "\n";
    } else if (action == "render") {
        auto subset = split_list(tags);
        if (subset.empty())
            std::cout << render_context(pool);
        else
            std::cout << render_context(pool, std::span<const std::string>(subset));
    } else {
        throw ConfigError("unknown pool action '" + action + "'");
    }
    return 0;
}

int cmd_chat(const Globals& g, const std::string& mode, bool trace, const std::string& opener) {
    auto rt = make_runtime(g);
    SessionService service(rt);
    SessionRequest req;
    req.mode = moderator_mode_from_string(mode);
    req.trace = trace;
    if (!opener.empty()) req.opener = opener;
    auto show = [&](const nlohmann::json& turn) {
        std::cout << "moderator> " << turn["utterance"].get<std::string>() << "\n";
        if (trace) {
            std::cout << "  [" << turn["kind"].get<std::string>();
            if (!turn["tags"].empty()) {
                std::cout << " " << turn["tags"][0].get<std::string>();
                for (std::size_t i = 1; i < turn["tags"].size(); ++i) std::cout << "+" << turn["tags"][i].get<std::string>();
            }
            if (!turn["emotion"].is_null()) std::cout << ", user seems " << turn["emotion"].get<std::string>();
            std::cout << "]\n";
        }
    };
    auto created = service.create_session(req);
    auto id = created["id"].get<std::string>();
    show(created["turn"]);
    std::string line;
    while (std::cout << "you> " << std::flush, std::getline(std::cin, line)) {
        if (line == "/quit" || line == "/exit") break;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            show(service.post_message(id, line)["turn"]);
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
        }
    }
    service.close(id);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Strategy-guided conversational moderator and its evaluation workbench"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-c,--config", g.config, "Runtime config file (JSON)");
    app.add_flag("--mock", g.mock, "Use the built-in deterministic demo providers instead of remote endpoints");

    // pool
    auto* pool = app.add_subcommand("pool", "Inspect or validate a strategy pool");
    std::string pool_action, pool_arg, pool_tags;
    pool->add_option("action", pool_action, "list | show | render | validate")->required()
        ->check(CLI::IsMember({"list", "show", "render", "validate"}));
    pool->add_option("arg", pool_arg, "Tag or name (show), pool file (validate)");
    pool->add_option("--tags", pool_tags, "Comma-separated subset for render");

    // chat
    auto* chat = app.add_subcommand("chat", "Interactive session in the terminal");
    std::string chat_mode = "full", chat_opener;
    bool chat_trace = false;
    chat->add_option("--mode", chat_mode, "full | no_emotion | baseline")
        ->check(CLI::IsMember({"full", "no_emotion", "baseline"}));
    chat->add_flag("--trace", chat_trace, "Show turn kinds, strategies and inferred emotions");
    chat->add_option("--opener", chat_opener, "Session context given to the moderator");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run moderator arms against simulated users");
    SimulateOptions so;
    std::string plan_file, arms;
    int episodes = 0, turns = 0, workers = 0;
    std::uint64_t seed = 0;
    sim->add_option("--out", so.out_dir, "Corpus directory")->required();
    sim->add_option("--plan", plan_file, "Plan file (JSON); defaults to the built-in twins");
    sim->add_option("--twins", so.twins, "Number of built-in twins when no plan is given");
    auto* o_eps = sim->add_option("--episodes", episodes, "Episodes per twin and arm");
    auto* o_turns = sim->add_option("--turns", turns, "Single-speaker turns per episode");
    auto* o_seed = sim->add_option("--seed", seed, "Plan seed");
    auto* o_workers = sim->add_option("--workers", workers, "Concurrent episodes");
    sim->add_option("--arms", arms, "Comma-separated moderator modes");

    // eval-offline
    auto* ev = app.add_subcommand("eval-offline", "Strategy alignment (SMP) against a real corpus");
    EvalOfflineOptions eo;
    ev->add_option("--corpus", eo.corpus, "Conversation store (JSONL)")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", eo.out_dir, "Output directory")->required();
    ev->add_option("--min-turns", eo.min_turns, "Drop conversations shorter than this");
    ev->add_option("--first-turn", eo.turns.first_turn, "First moderator turn to evaluate (0-based)");
    ev->add_option("--last-turn", eo.turns.last_turn, "Last moderator turn to evaluate");
    ev->add_option("--range-first", eo.range.first, "First turn kept in the aggregated tables");
    ev->add_option("--range-last", eo.range.last, "Last turn kept in the aggregated tables");
    ev->add_option("--workers", eo.workers, "Conversations evaluated concurrently");

    // report
    auto* rep = app.add_subcommand("report", "Metrics bundle for a corpus");
    ReportRunOptions ro;
    std::string alignment, aspects, metrics;
    bool no_judge = false;
    rep->add_option("--corpus", ro.corpus, "Conversation store (JSONL)")->required()->check(CLI::ExistingFile);
    rep->add_option("--alignment", alignment, "Alignment records from eval-offline");
    rep->add_option("--out", ro.out_dir, "Output directory")->required();
    rep->add_option("--seed", ro.report.seed, "Seed for same-twin pairing");
    rep->add_option("--aspects", aspects, "Comma-separated judge aspects");
    rep->add_option("--metrics", metrics, "Comma-separated subset: verbosity,win_rate,progression,emotion,strategy,alignment");
    rep->add_option("--first-cut", ro.report.first_cut, "First progression cut (turns)");
    rep->add_option("--last-cut", ro.report.last_cut, "Last progression cut (turns)");
    rep->add_option("--warmup", ro.report.warmup_turns, "Warm-up turns excluded from progression curves");
    rep->add_option("--workers", ro.report.workers, "Concurrent judge calls");
    rep->add_flag("--no-judge", no_judge, "Skip judged win rates");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP session service");
    std::string host = "127.0.0.1", store;
    int port = 8080;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->add_option("--store", store, "Directory where session transcripts are written");

    // ingest
    auto* ing = app.add_subcommand("ingest", "Convert raw chat logs into the conversation store");
    std::string in_file, out_file;
    std::size_t ingest_min = 0;
    ing->add_option("--in", in_file, "Raw logs, one dialogue per line")->required()->check(CLI::ExistingFile);
    ing->add_option("--out", out_file, "Conversation store to write")->required();
    ing->add_option("--min-turns", ingest_min, "Drop conversations shorter than this");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pool) return cmd_pool(g, pool_action, pool_arg, pool_tags);
        if (*chat) return cmd_chat(g, chat_mode, chat_trace, chat_opener);
        if (*sim) {
            auto rt = make_runtime(g);
            if (!plan_file.empty()) so.plan_file = plan_file;
            if (*o_eps) so.episodes = episodes;
            if (*o_turns) so.turns = turns;
            if (*o_seed) so.seed = seed;
            if (*o_workers) so.workers = workers;
            for (const auto& a : split_list(arms)) so.arms.push_back(moderator_mode_from_string(a));
            auto r = run_simulate(rt, so);
            std::cout << "generated " << r.generated << ", reused " << r.reused << ", aborted " << r.aborted
                      << "; manifest " << (r.manifest.complete() ? "complete" : "incomplete") << "\n";
            return r.manifest.complete() ? 0 : 1;
        }
        if (*ev) {
            auto rt = make_runtime(g);
            auto r = run_eval_offline(rt, eo);
            std::size_t skipped = 0;
            for (const auto& rec : r.records) skipped += rec.skipped();
            std::cout << r.conversations << " conversations evaluated (" << r.filtered_out << " below "
                      << eo.min_turns << " turns), " << r.records.size() << " records, " << skipped << " skipped\n";
            return 0;
        }
        if (*rep) {
            auto rt = make_runtime(g);
            if (!alignment.empty()) ro.alignment = alignment;
            if (!aspects.empty()) {
                ro.report.aspects.clear();
                for (const auto& a : split_list(aspects)) ro.report.aspects.push_back(aspect_from_string(a));
            }
            for (const auto& m : split_list(metrics)) ro.report.metrics.insert(m);
            ro.judge = !no_judge;
            auto bundle = run_report(rt, ro);
            std::cout << "wrote " << bundle.files.size() << " files to " << ro.out_dir.string() << "\n";
            return 0;
        }
        if (*serve) {
            auto rt = make_runtime(g);
            std::optional<std::string> key;
            if (rt.config().api_key_env) {
                const char* v = std::getenv(rt.config().api_key_env->c_str());
                if (!v || !*v) throw ConfigError("environment variable " + *rt.config().api_key_env + " is not set");
                key = v;
            }
            SessionService sessions(rt, store.empty() ? std::nullopt : std::optional<fs::path>(store));
            HttpService server(sessions, key);
            int bound = server.bind(host, port);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            server.serve();
            g_server = nullptr;
            return 0;
        }
        if (*ing) {
            auto corpus = ingest_file(in_file);
            auto kept = filter_corpus(corpus, ingest_min);
            write_store_file(out_file, kept);
            std::cout << "ingested " << corpus.size() << " conversations, kept " << kept.size() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

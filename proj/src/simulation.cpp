#include "stratchat/simulation.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "stratchat/demo_providers.hpp"
#include "stratchat/errors.hpp"
#include "stratchat/prompt_pack.hpp"

namespace stratchat {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_plan(const EpisodePlan& plan) {
    if (plan.twins.empty()) throw ConfigError("plan has no twins");
    if (plan.episodes_per_twin < 1) throw ConfigError("episodes_per_twin must be >= 1");
    if (plan.turns_per_episode < 1) throw ConfigError("turns_per_episode must be >= 1");
    if (plan.arms.empty()) throw ConfigError("plan has no arms");
    if (plan.workers < 1) throw ConfigError("workers must be >= 1");
    std::set<std::string> ids;
    for (const auto& t : plan.twins) {
        if (t.id.empty()) throw ConfigError("twin id must not be empty");
        if (!ids.insert(t.id).second) throw ConfigError("duplicate twin id '" + t.id + "'");
        validate_profile(t.provider);
    }
    std::set<ModeratorMode> arms(plan.arms.begin(), plan.arms.end());
    if (arms.size() != plan.arms.size()) throw ConfigError("plan lists an arm twice");
}

EpisodePlan plan_from_json(const json& j) {
    EpisodePlan plan;
    try {
        for (const auto& t : j.at("twins")) {
            TwinProfile twin;
            twin.id = t.at("id").get<std::string>();
            twin.persona = t.value("persona", "");
            twin.opener = t.value("opener", "");
            auto base = default_profile(roles::kTwinPrefix + twin.id, ProfileKind::Twin);
            twin.provider = t.contains("provider") ? profile_from_json(t["provider"], base) : base;
            plan.twins.push_back(std::move(twin));
        }
        plan.episodes_per_twin = j.value("episodes_per_twin", plan.episodes_per_twin);
        plan.turns_per_episode = j.value("turns_per_episode", plan.turns_per_episode);
        plan.seed = j.value("seed", plan.seed);
        plan.workers = j.value("workers", plan.workers);
        if (j.contains("arms")) {
            plan.arms.clear();
            for (const auto& a : j["arms"]) plan.arms.push_back(moderator_mode_from_string(a.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid plan: ") + e.what());
    }
    return plan;
}

json plan_summary(const EpisodePlan& plan) {
    json twins = json::array();
    for (const auto& t : plan.twins) twins.push_back(t.id);
    json arms = json::array();
    for (auto a : plan.arms) arms.push_back(to_string(a));
    return {{"twins", twins},
            {"arms", arms},
            {"episodes_per_twin", plan.episodes_per_twin},
            {"turns_per_episode", plan.turns_per_episode},
            {"seed", plan.seed},
            {"warmup_turns", plan.moderator.warmup_turns}};
}

std::uint64_t episode_seed(std::uint64_t plan_seed, const std::string& twin, int episode) {
    // splitmix64 finaliser over the combined inputs
    std::uint64_t z = plan_seed ^ fnv1a(twin) ^ (static_cast<std::uint64_t>(episode) * 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string episode_id(const std::string& twin, ModeratorMode arm, int episode) {
    char num[16];
    std::snprintf(num, sizeof num, "%03d", episode);
    return twin + "-" + std::string(to_string(arm)) + "-" + num;
}

std::vector<ChatMessage> twin_messages(const Conversation& conv, const TwinProfile& twin, const PromptPack& prompts) {
    std::vector<ChatMessage> msgs = {{"system", prompts.render(prompt::kTwin, {{"persona", twin.persona}})}};
    for (const auto& t : conv.turns) msgs.push_back({t.speaker == Speaker::Moderator ? "user" : "assistant", t.text});
    return msgs;
}

namespace {

template <typename F>
std::optional<std::string> provider_failure(F&& f) {
    try {
        f();
        return std::nullopt;
    } catch (const TransportError& e) {
        return std::string(e.what());
    } catch (const ProviderError& e) {
        return std::string(e.what());
    } catch (const EmptyResponseError& e) {
        return std::string(e.what());
    } catch (const MalformedOutputError& e) {
        return std::string(e.what());
    } catch (const StrategyValidationError& e) {
        return std::string(e.what());
    }
}

}  // namespace

Conversation run_episode(Session& session, const TwinProfile& twin, int turns, std::uint64_t seed) {
    if (session.started()) throw SessionError("run_episode needs a fresh session");
    if (turns < 1) throw RangeError("an episode needs at least one turn");
    const auto& gateway = session.engine().gateway();
    const auto& prompts = *session.engine().config().prompts;
    const auto target = static_cast<std::size_t>(turns);

    Conversation conv;
    std::optional<std::string> failure = provider_failure([&] { session.start(); });
    if (!failure) {
        while (session.conversation().turns.size() < target) {
            std::string reply;
            failure = provider_failure([&] {
                reply = gateway.chat_complete(twin.provider, twin_messages(session.conversation(), twin, prompts)).response;
            });
            if (failure) {
                conv = session.conversation();
                conv.turns.pop_back();  // unanswered moderator turn
                break;
            }
            if (session.conversation().turns.size() + 1 >= target) {
                conv = session.conversation();
                append_turn(conv, Speaker::User, reply);
                break;
            }
            failure = provider_failure([&] { session.next_turn(reply); });
            if (failure) {
                conv = session.conversation();
                append_turn(conv, Speaker::User, reply);
                break;
            }
        }
    }
    if (conv.turns.empty() && !failure) conv = session.conversation();
    if (failure) {
        conv.id = session.conversation().id;
        conv.opener = session.conversation().opener;
        conv.meta.arm = session.conversation().meta.arm;
        conv.meta.aborted = true;
        conv.extra["abort_reason"] = *failure;
    }
    conv.meta.participant = twin.id;
    conv.meta.source = Source::Simulated;
    conv.meta.seed = seed;
    return conv;
}

bool Manifest::complete() const {
    for (const auto& e : entries)
        if (e.status != "complete") return false;
    return true;
}

const ManifestEntry* Manifest::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

json to_json(const Manifest& m) {
    json entries = json::array();
    for (const auto& e : m.entries)
        entries.push_back({{"id", e.id},
                           {"twin", e.twin},
                           {"arm", e.arm},
                           {"episode", e.episode},
                           {"seed", e.seed},
                           {"status", e.status},
                           {"turns", e.turns}});
    return {{"plan", m.plan}, {"complete", m.complete()}, {"entries", entries}};
}

Manifest manifest_from_json(const json& j) {
    try {
        Manifest m;
        m.plan = j.value("plan", json::object());
        for (const auto& e : j.at("entries"))
            m.entries.push_back({e.at("id").get<std::string>(), e.at("twin").get<std::string>(),
                                 e.at("arm").get<std::string>(), e.at("episode").get<int>(),
                                 e.at("seed").get<std::uint64_t>(), e.at("status").get<std::string>(),
                                 e.value("turns", std::size_t{0})});
        return m;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid manifest: ") + e.what());
    }
}

namespace {

struct Job {
    const TwinProfile* twin;
    ModeratorMode arm;
    int episode;
    std::uint64_t seed;
    std::string id;
};

// Completed conversations from a previous run. Lines that do not parse (a
// write cut short by an interruption) are ignored and regenerated.
std::map<std::string, Conversation> load_existing(const fs::path& path) {
    std::map<std::string, Conversation> out;
    std::ifstream in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto c = parse_conversation(line, lineno);
            out[c.id] = std::move(c);
        } catch (const Error&) {
        }
    }
    return out;
}

void write_text_atomically(const fs::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
}

}  // namespace

BatchResult run_batch(const EpisodePlan& plan, const Gateway& gateway, const fs::path& corpus_dir) {
    validate_plan(plan);
    fs::create_directories(corpus_dir);
    const auto store_path = corpus_dir / kCorpusFile;
    const auto manifest_path = corpus_dir / kManifestFile;

    auto existing = load_existing(store_path);
    std::vector<Job> jobs;
    for (const auto& twin : plan.twins)
        for (auto arm : plan.arms)
            for (int e = 0; e < plan.episodes_per_twin; ++e)
                jobs.push_back({&twin, arm, e, episode_seed(plan.seed, twin.id, e), episode_id(twin.id, arm, e)});

    BatchResult result;
    std::vector<std::optional<Conversation>> done(jobs.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto it = existing.find(jobs[i].id);
        if (it != existing.end() && !it->second.meta.aborted) {
            done[i] = std::move(it->second);
            ++result.reused;
        } else {
            todo.push_back(i);
        }
    }

    auto build_manifest = [&] {
        Manifest m;
        m.plan = plan_summary(plan);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto& j = jobs[i];
            ManifestEntry e{j.id, j.twin->id, std::string(to_string(j.arm)), j.episode, j.seed, "missing", 0};
            if (done[i]) {
                e.status = done[i]->meta.aborted ? "aborted" : "complete";
                e.turns = done[i]->turns.size();
            }
            m.entries.push_back(std::move(e));
        }
        return m;
    };
    write_text_atomically(manifest_path, to_json(build_manifest()).dump(2) + "\n");

    std::mutex store_mu;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(todo.size());
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < todo.size();) {
            const auto& job = jobs[todo[k]];
            try {
                SessionConfig cfg = plan.moderator;
                cfg.mode = job.arm;
                if (job.arm == ModeratorMode::Baseline && plan.baseline_generator) cfg.generator = *plan.baseline_generator;
                std::optional<std::string> opener;
                if (!job.twin->opener.empty()) opener = job.twin->opener;
                Session session(gateway, cfg, job.id, opener);
                auto conv = run_episode(session, *job.twin, plan.turns_per_episode, job.seed);
                conv.meta.episode = job.episode;
                conv.extra["mode"] = to_string(job.arm);
                {
                    std::lock_guard lock(store_mu);
                    std::ofstream out(store_path, std::ios::binary | std::ios::app);
                    out << serialize(conv) << '\n';
                }
                done[todo[k]] = std::move(conv);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(plan.workers), todo.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    if (n_threads > 0) worker();
    for (auto& t : pool) t.join();

    std::vector<Conversation> corpus;
    for (const auto& c : done)
        if (c) corpus.push_back(*c);
    std::string text;
    for (const auto& c : corpus) text += serialize(c) + "\n";
    write_text_atomically(store_path, text);
    result.manifest = build_manifest();
    write_text_atomically(manifest_path, to_json(result.manifest).dump(2) + "\n");

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (std::size_t k = 0; k < todo.size(); ++k) {
        if (!done[todo[k]]) continue;
        ++result.generated;
        if (done[todo[k]]->meta.aborted) ++result.aborted;
    }
    return result;
}

}  // namespace stratchat

#include "crseval/engine.hpp"

#include <atomic>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "crseval/agents.hpp"
#include "crseval/errors.hpp"
#include "crseval/jsonl.hpp"
#include "crseval/rng.hpp"
#include "crseval/text.hpp"

namespace crseval::engine {

using nlohmann::json;

std::string SystemClock::now_iso() const {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* mode_name(Mode mode) {
    return mode == Mode::target_free ? "target_free" : "target_biased";
}

Mode mode_from_name(const std::string& name) {
    if (name == "target_free") return Mode::target_free;
    if (name == "target_biased") return Mode::target_biased;
    throw ConfigError("unknown simulation mode: " + name);
}

void SimulationConfig::validate() const {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (max_turns < 1) throw ConfigError("max_turns must be >= 1");
    if (n_targets < 1) throw ConfigError("n_targets must be >= 1");
    if (reflection_window < 0) throw ConfigError("reflection_window must be >= 0");
    if (target_fraction <= 0.0 || target_fraction > 1.0) {
        throw ConfigError("target_fraction must be in (0, 1]");
    }
    if (narrative_token_budget < 1) throw ConfigError("narrative_token_budget must be >= 1");
    if (plot_truncation_chars < 1) throw ConfigError("plot_truncation_chars must be >= 1");
}

json SimulationConfig::snapshot() const {
    return json{{"mode", mode_name(mode)},
                {"K", K},
                {"max_turns", max_turns},
                {"n_targets", n_targets},
                {"seed", seed},
                {"reflection_window", reflection_window},
                {"target_fraction", target_fraction},
                {"inline_slates", inline_slates},
                {"narrative_token_budget", narrative_token_budget},
                {"plot_truncation_chars", plot_truncation_chars},
                {"backend", backend_desc},
                {"adapter", adapter_desc}};
}

SimulationConfig SimulationConfig::from_snapshot(const json& j) {
    SimulationConfig c;
    c.mode = mode_from_name(j.value("mode", std::string(mode_name(c.mode))));
    c.K = j.value("K", c.K);
    c.max_turns = j.value("max_turns", c.max_turns);
    c.n_targets = j.value("n_targets", c.n_targets);
    c.seed = j.value("seed", c.seed);
    c.reflection_window = j.value("reflection_window", c.reflection_window);
    c.target_fraction = j.value("target_fraction", c.target_fraction);
    c.inline_slates = j.value("inline_slates", c.inline_slates);
    c.narrative_token_budget = j.value("narrative_token_budget", c.narrative_token_budget);
    c.plot_truncation_chars = j.value("plot_truncation_chars", c.plot_truncation_chars);
    c.backend_desc = j.value("backend", c.backend_desc);
    c.adapter_desc = j.value("adapter", c.adapter_desc);
    return c;
}

std::string transcript_path(const std::string& out_dir, const std::string& user_id) {
    std::string safe;
    for (char ch : user_id) {
        bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                  (ch >= '0' && ch <= '9') || ch == '-' || ch == '_' || ch == '.';
        safe += ok ? ch : '_';
    }
    return (std::filesystem::path(out_dir) / (safe + ".jsonl")).string();
}

namespace {

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

json bias_to_json(const BiasSplit& b) {
    return json{{"selected", b.selected}, {"residual", b.residual}, {"fraction", b.fraction}};
}

BiasSplit bias_from_json(const json& j) {
    BiasSplit b;
    b.selected = j.at("selected").get<std::vector<std::string>>();
    b.residual = j.at("residual").get<std::vector<std::string>>();
    b.fraction = j.value("fraction", 0.5);
    return b;
}

json turn_event(const TurnRecord& rec) {
    json ev{{"event", "turn"},
            {"turn", rec.turn},
            {"user", dialogue::to_json(rec.user)},
            {"system", dialogue::to_json(rec.system)},
            {"slate", rec.slate},
            {"slate_seen", rec.slate_seen},
            {"slate_unseen", rec.slate_unseen}};
    ev["reflection"] = rec.reflection ? pref::to_json(*rec.reflection) : json(nullptr);
    return ev;
}

TurnRecord turn_from_event(const json& ev) {
    TurnRecord rec;
    rec.turn = ev.at("turn").get<int>();
    rec.user = dialogue::utterance_from_json(ev.at("user"));
    rec.system = dialogue::utterance_from_json(ev.at("system"));
    rec.slate = ev.at("slate").get<std::vector<std::string>>();
    rec.slate_seen = ev.at("slate_seen").get<std::vector<std::string>>();
    rec.slate_unseen = ev.at("slate_unseen").get<std::vector<std::string>>();
    if (ev.contains("reflection") && !ev.at("reflection").is_null()) {
        rec.reflection = pref::reflected_from_json(ev.at("reflection"));
    }
    return rec;
}

// Event stream with the byte offset up to which the file is authoritative:
// everything past the last turn event (or the header) is replaceable.
struct RawEvents {
    json header;
    std::vector<json> turns;
    std::optional<json> end;
    std::streamoff keep = 0;
};

RawEvents load_events(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open transcript: " + path);
    RawEvents out;
    bool have_header = false;
    std::string line;
    std::streamoff consumed = 0;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        consumed += static_cast<std::streamoff>(line.size()) + (in.eof() ? 0 : 1);
        if (blank(line)) continue;
        json ev = json::parse(line, nullptr, false);
        if (ev.is_discarded()) {
            // A torn final line is the expected residue of a crash.
            if (in.peek() == EOF) break;
            throw ParseError(path, line_no, "malformed transcript event");
        }
        std::string type = ev.value("event", "");
        if (type == "header") {
            if (have_header) throw ParseError(path, line_no, "duplicate transcript header");
            out.header = std::move(ev);
            have_header = true;
            out.keep = consumed;
        } else if (type == "turn") {
            if (!have_header) throw ParseError(path, line_no, "turn event before header");
            out.turns.push_back(std::move(ev));
            out.keep = consumed;
        } else if (type == "end") {
            out.end = std::move(ev);
        } else if (type == "prompt") {
            // Audit-only; carries no dialogue state.
        } else {
            throw ParseError(path, line_no, "unknown transcript event: " + type);
        }
    }
    if (!have_header) throw DataError("transcript has no header: " + path);
    return out;
}

Transcript transcript_from_raw(const RawEvents& raw, const std::string& path) {
    Transcript tr;
    tr.path = path;
    tr.config = SimulationConfig::from_snapshot(raw.header.at("config"));
    tr.split = corpus::split_from_json(raw.header.at("split"));
    tr.general = pref::general_from_json(raw.header.at("general"));
    tr.started_at = raw.header.value("started_at", "");
    if (raw.header.contains("bias")) tr.bias = bias_from_json(raw.header.at("bias"));
    for (const auto& ev : raw.turns) tr.turns.push_back(turn_from_event(ev));
    if (raw.end) {
        tr.status = raw.end->value("status", "aborted");
        tr.abort_reason = raw.end->value("reason", "");
        tr.ended_at = raw.end->value("ended_at", "");
    } else {
        tr.status = "crashed";
    }
    return tr;
}

// Shared persistence state for one dialogue run.
struct EventLog {
    jsonl::Writer writer;
    bool header_out;
    int current_turn = 0;
    std::vector<json> pending; // prompts issued before the header exists

    EventLog(const std::string& path, bool append)
        : writer(path, append), header_out(append) {}

    void prompt(const agents::GenerationRequest& req) {
        json msgs = json::array();
        for (const auto& m : req.messages) {
            msgs.push_back(json{{"role", m.role}, {"content", m.content}});
        }
        json ev{{"event", "prompt"},
                {"turn", current_turn},
                {"stage", agents::stage_name(req.stage)},
                {"messages", std::move(msgs)}};
        if (header_out) writer.write(ev);
        else pending.push_back(std::move(ev));
    }

    void header(const json& ev) {
        writer.write(ev);
        header_out = true;
        for (const auto& p : pending) writer.write(p);
        pending.clear();
    }
};

// Runs turns tr.turns.size()+1 .. max_turns, appending to the log. Agent
// errors end the transcript with a recorded reason instead of escaping.
void continue_turns(Transcript& tr, const corpus::UserRecord& user,
                    const SimulationConfig& config, const EngineEnv& env, const Clock& clock,
                    EventLog& log, const pref::PrefContext& ctx,
                    dialogue::DialogueContext& context,
                    std::vector<pref::ReflectedPreference>& reflections,
                    const pref::PreferenceProfile& profile,
                    const pref::ForbiddenTitles& forbidden) {
    auto write_end = [&](const std::string& status, const std::string& reason) {
        tr.ended_at = clock.now_iso();
        json ev{{"event", "end"},
                {"status", status},
                {"turns", tr.turns.size()},
                {"ended_at", tr.ended_at}};
        if (!reason.empty()) ev["reason"] = reason;
        log.writer.write(ev);
        tr.status = status;
        tr.abort_reason = reason;
    };

    const bool reflect_on = config.mode == Mode::target_free;
    std::set<std::string> seen_set(tr.split.seen.begin(), tr.split.seen.end());

    try {
        for (int t = static_cast<int>(tr.turns.size()) + 1; t <= config.max_turns; ++t) {
            log.current_turn = t;

            size_t w = std::min(reflections.size(), static_cast<size_t>(config.reflection_window));
            std::vector<pref::ReflectedPreference> window(reflections.end() - w, reflections.end());

            dialogue::Utterance u =
                agents::user_turn(profile, context, window, *env.simulator, ctx, forbidden);
            context.add_user(u.text);

            adapters::TurnReply reply = adapters::crs_turn(*env.crs, context, *env.catalog, config.K);

            TurnRecord rec;
            rec.turn = t;
            rec.user = u;
            rec.slate = reply.item_ids;
            for (const auto& id : rec.slate) {
                (seen_set.count(id) ? rec.slate_seen : rec.slate_unseen).push_back(id);
            }

            std::string stored = reply.utterance;
            if (config.inline_slates) {
                stored += "\n[slate]";
                for (const auto& id : rec.slate) stored += " " + id;
            }
            context.add_system(stored);
            rec.system = dialogue::Utterance{"system", t, stored};

            if (reflect_on && t >= 2) {
                std::vector<corpus::ItemRecord> slate_items;
                for (const auto& id : rec.slate) slate_items.push_back(env.catalog->at(id));
                rec.reflection = pref::reflect(slate_items, tr.split, user, profile.general,
                                               context.render(), t, *env.simulator, ctx);
                reflections.push_back(*rec.reflection);
            }

            log.writer.write(turn_event(rec));
            tr.turns.push_back(std::move(rec));

            if (config.crash_after_turn == t) {
                tr.status = "crashed";
                return;
            }
        }
    } catch (const Error& e) {
        write_end("aborted", e.what());
        return;
    }
    write_end("complete", "");
}

} // namespace

corpus::UserSplit apply_history_size(const corpus::UserSplit& split, int history_size) {
    if (history_size < 0) throw ConfigError("history_size must be >= 0");
    corpus::UserSplit out = split;
    if (history_size > 0 && out.seen.size() > static_cast<size_t>(history_size)) {
        out.seen.assign(out.seen.end() - history_size, out.seen.end());
    }
    return out;
}

BiasSetup setup_target_biased(const corpus::UserRecord& user, const corpus::UserSplit& split,
                              const corpus::Catalog& catalog, double fraction, uint64_t seed,
                              agents::TextBackend& backend, const pref::PrefContext& ctx) {
    if (split.targets.size() < 2) throw DataError("biased setup needs at least 2 target items");
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("target fraction must be in (0, 1]");

    size_t n = split.targets.size();
    auto n_selected = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
    if (n_selected > n) n_selected = n;

    SeededRng rng(derive_seed(seed, "bias:" + user.user_id));
    auto drawn = sample_without_replacement(split.targets, n_selected, rng);
    std::set<std::string> chosen(drawn.begin(), drawn.end());

    BiasSetup setup;
    setup.split.fraction = fraction;
    for (const auto& id : split.targets) {
        (chosen.count(id) ? setup.split.selected : setup.split.residual).push_back(id);
    }

    std::vector<corpus::ItemRecord> items;
    for (const auto& id : setup.split.selected) items.push_back(catalog.at(id));
    setup.general = pref::generate_target_biased_preference(items, backend, ctx);
    setup.general.user_id = user.user_id;
    return setup;
}

Transcript run_dialogue(const corpus::UserRecord& user, const corpus::UserSplit& split,
                        const SimulationConfig& config, const EngineEnv& env,
                        const std::string& out_path) {
    config.validate();
    if (!env.catalog || !env.simulator || !env.crs) {
        throw ConfigError("dialogue run needs a catalog, a simulator backend, and a recommender");
    }
    if (split.user_id != user.user_id) {
        throw DataError("split belongs to " + split.user_id + ", not " + user.user_id);
    }
    for (const auto& id : split.seen) env.catalog->at(id);
    for (const auto& id : split.targets) env.catalog->at(id);

    SystemClock system_clock;
    const Clock& clock = env.clock ? *env.clock : system_clock;

    Transcript tr;
    tr.config = config;
    tr.split = split;
    tr.path = out_path;
    tr.started_at = clock.now_iso();

    EventLog log(out_path, /*append=*/false);

    pref::PrefContext ctx;
    ctx.library = env.library;
    ctx.narrative_token_budget = config.narrative_token_budget;
    ctx.plot_truncation_chars = config.plot_truncation_chars;
    ctx.prompt_sink = [&log](const agents::GenerationRequest& req) { log.prompt(req); };

    auto write_header = [&] {
        json ev{{"event", "header"},
                {"user_id", user.user_id},
                {"config", config.snapshot()},
                {"split", corpus::to_json(split)},
                {"general", pref::to_json(tr.general)},
                {"started_at", tr.started_at}};
        if (tr.bias) ev["bias"] = bias_to_json(*tr.bias);
        log.header(ev);
    };

    pref::PreferenceProfile profile;
    profile.user_id = user.user_id;
    pref::ForbiddenTitles forbidden;

    try {
        if (config.mode == Mode::target_free) {
            forbidden = pref::ForbiddenTitles::from_items(*env.catalog, split.targets);
            std::vector<corpus::ItemRecord> seen_items;
            for (const auto& id : split.seen) seen_items.push_back(env.catalog->at(id));
            for (const auto& id : split.seen) {
                const auto* interaction = user.find_interaction(id);
                if (!interaction) {
                    throw DataError("split lists item " + id + " that user " + user.user_id +
                                    " never interacted with");
                }
                if (blank(interaction->review)) continue; // nothing to extract from
                profile.binary.push_back(pref::extract_binary_preferences(
                    interaction->review, env.catalog->at(id), *env.simulator, ctx));
            }
            if (profile.binary.empty()) {
                throw DataError("user " + user.user_id + " has no reviews to build a profile from");
            }
            profile.general = pref::generate_general_preference(profile.binary, seen_items,
                                                                *env.simulator, ctx, forbidden);
            profile.general.user_id = user.user_id;
            pref::validate_target_free(profile.general, split.targets);
        } else {
            BiasSetup setup = setup_target_biased(user, split, *env.catalog,
                                                  config.target_fraction, config.seed,
                                                  *env.simulator, ctx);
            profile.general = setup.general;
            tr.bias = setup.split;
            forbidden = pref::ForbiddenTitles{}; // bias mode leaks attributes by design
        }
    } catch (const Error& e) {
        tr.general = profile.general;
        write_header();
        tr.ended_at = clock.now_iso();
        log.writer.write(json{{"event", "end"},
                              {"status", "aborted"},
                              {"turns", 0},
                              {"ended_at", tr.ended_at},
                              {"reason", e.what()}});
        tr.status = "aborted";
        tr.abort_reason = e.what();
        return tr;
    }

    tr.general = profile.general;
    write_header();

    dialogue::DialogueContext context;
    std::vector<pref::ReflectedPreference> reflections;
    continue_turns(tr, user, config, env, clock, log, ctx, context, reflections, profile, forbidden);
    return tr;
}

Transcript resume_dialogue(const corpus::UserRecord& user, const EngineEnv& env,
                           const std::string& path) {
    if (!env.catalog || !env.simulator || !env.crs) {
        throw ConfigError("dialogue resume needs a catalog, a simulator backend, and a recommender");
    }
    RawEvents raw = load_events(path);
    Transcript tr = transcript_from_raw(raw, path);
    if (tr.complete()) return tr;
    if (tr.split.user_id != user.user_id) {
        throw DataError("transcript belongs to " + tr.split.user_id + ", not " + user.user_id);
    }

    // An abort during profile setup leaves no state worth continuing from
    // (the header carries an empty profile); rebuild from the recorded split.
    if (tr.general.narrative.empty() && !tr.bias) {
        return run_dialogue(user, tr.split, tr.config, env, path);
    }

    // Drop the stale tail (aborted end event, in-flight prompts, torn line).
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    if (!ec && static_cast<std::streamoff>(size) > raw.keep) {
        std::filesystem::resize_file(path, static_cast<uintmax_t>(raw.keep));
    }

    SimulationConfig config = tr.config;
    config.validate();

    SystemClock system_clock;
    const Clock& clock = env.clock ? *env.clock : system_clock;

    EventLog log(path, /*append=*/true);

    pref::PrefContext ctx;
    ctx.library = env.library;
    ctx.narrative_token_budget = config.narrative_token_budget;
    ctx.plot_truncation_chars = config.plot_truncation_chars;
    ctx.prompt_sink = [&log](const agents::GenerationRequest& req) { log.prompt(req); };

    pref::PreferenceProfile profile;
    profile.user_id = user.user_id;
    profile.general = tr.general;

    pref::ForbiddenTitles forbidden;
    if (config.mode == Mode::target_free) {
        forbidden = pref::ForbiddenTitles::from_items(*env.catalog, tr.split.targets);
    }

    dialogue::DialogueContext context;
    std::vector<pref::ReflectedPreference> reflections;
    for (const auto& rec : tr.turns) {
        context.add_user(rec.user.text);
        context.add_system(rec.system.text);
        if (rec.reflection) reflections.push_back(*rec.reflection);
    }

    tr.status.clear();
    tr.abort_reason.clear();
    continue_turns(tr, user, config, env, clock, log, ctx, context, reflections, profile, forbidden);
    return tr;
}

Transcript read_transcript(const std::string& path) {
    return transcript_from_raw(load_events(path), path);
}

size_t CohortResult::completed() const {
    size_t n = 0;
    for (const auto& t : transcripts) n += t.complete() ? 1 : 0;
    return n;
}

CohortResult run_cohort(const std::vector<corpus::UserRecord>& users,
                        const std::vector<corpus::UserSplit>& splits,
                        const SimulationConfig& config, const EngineEnv& env,
                        const std::string& out_dir, int parallelism) {
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    config.validate();

    std::map<std::string, const corpus::UserSplit*> by_user;
    for (const auto& s : splits) by_user[s.user_id] = &s;
    for (const auto& u : users) {
        if (!by_user.count(u.user_id)) throw DataError("no split for user " + u.user_id);
    }

    std::filesystem::create_directories(out_dir);

    const size_t n = users.size();
    std::vector<std::optional<Transcript>> slots(n);
    std::vector<std::string> hard_failures(n);
    std::atomic<size_t> cursor{0};

    auto worker = [&] {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            const auto& user = users[i];
            try {
                slots[i] = run_dialogue(user, *by_user.at(user.user_id), config, env,
                                        transcript_path(out_dir, user.user_id));
            } catch (const std::exception& e) {
                hard_failures[i] = e.what();
            }
        }
    };

    if (parallelism == 1 || n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        int n_threads = std::min<int>(parallelism, static_cast<int>(n));
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    CohortResult result;
    for (size_t i = 0; i < n; ++i) {
        if (slots[i]) {
            if (!slots[i]->complete()) {
                result.failures.push_back({users[i].user_id, slots[i]->status == "crashed"
                                                                 ? "crashed"
                                                                 : slots[i]->abort_reason});
            }
            result.transcripts.push_back(std::move(*slots[i]));
        } else {
            result.failures.push_back({users[i].user_id, hard_failures[i]});
        }
    }
    return result;
}

std::vector<LeakageHit> scan_transcript_for_leakage(const std::string& path,
                                                    const corpus::Catalog& catalog) {
    std::vector<LeakageHit> hits;
    pref::ForbiddenTitles forbidden;
    jsonl::for_each(path, [&](size_t line, const json& ev) {
        std::string type = ev.value("event", "");
        if (type == "header") {
            corpus::UserSplit split = corpus::split_from_json(ev.at("split"));
            forbidden = pref::ForbiddenTitles::from_items(catalog, split.targets);
            std::string hit = forbidden.first_hit(ev.at("general").at("narrative").get<std::string>());
            if (!hit.empty()) hits.push_back({path, line, "narrative", hit});
        } else if (type == "prompt") {
            for (const auto& m : ev.at("messages")) {
                std::string hit = forbidden.first_hit(m.at("content").get<std::string>());
                if (!hit.empty()) hits.push_back({path, line, "prompt", hit});
            }
        } else if (type == "turn") {
            std::string hit = forbidden.first_hit(ev.at("user").at("text").get<std::string>());
            if (!hit.empty()) hits.push_back({path, line, "user_utterance", hit});
        }
    });
    return hits;
}

} // namespace crseval::engine

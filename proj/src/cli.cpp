#include "crseval/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "crseval/adapters.hpp"
#include "crseval/agents.hpp"
#include "crseval/corpus.hpp"
#include "crseval/engine.hpp"
#include "crseval/jsonl.hpp"
#include "crseval/judge.hpp"
#include "crseval/metrics.hpp"
#include "crseval/prompts.hpp"
#include "crseval/runconfig.hpp"
#include "crseval/text.hpp"

namespace fs = std::filesystem;

namespace crseval::cli {

using nlohmann::json;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::upstream: return 3;
        case ErrorKind::data: return 4;
    }
    return 4;
}

namespace {

std::vector<std::string> list_jsonl(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<engine::Transcript> load_transcripts(const std::string& dir) {
    std::vector<engine::Transcript> out;
    for (const auto& path : list_jsonl(dir)) out.push_back(engine::read_transcript(path));
    if (out.empty()) throw DataError("no transcripts found in " + dir);
    return out;
}

std::string default_sibling(const std::string& transcripts_dir, const std::string& name) {
    fs::path dir = fs::path(transcripts_dir).lexically_normal();
    fs::path parent = dir.parent_path();
    return (parent.empty() ? fs::path(name) : parent / name).string();
}

struct BackendFlags {
    std::string kind = "stub";
    std::string model;
    std::string endpoint;
    std::string script;
    uint64_t stub_seed = 0;

    runcfg::BackendSelection selection() const {
        runcfg::BackendSelection sel;
        sel.kind = kind;
        sel.model = model;
        sel.endpoint = endpoint;
        sel.script = script;
        sel.stub_seed = stub_seed;
        return sel;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--backend", kind, "Text backend: stub, remote, or scripted")
            ->check(CLI::IsMember({"stub", "remote", "scripted"}));
        cmd->add_option("--model", model, "Model name for the remote backend");
        cmd->add_option("--endpoint", endpoint, "Base URL for the remote backend");
        cmd->add_option("--script", script, "Reply script for the scripted backend");
        cmd->add_option("--stub-seed", stub_seed, "Seed for the deterministic stub");
    }
};

void print_per_turn(const metrics::MetricsReport& report) {
    std::cout << std::left << std::setw(6) << "t" << std::setw(14) << "recall_at_K"
              << std::setw(12) << "pc" << std::setw(12) << "pcir" << "n_users\n";
    for (const auto& row : report.per_turn) {
        std::cout << std::left << std::setw(6) << row.t << std::setw(14) << std::setprecision(6)
                  << row.recall_at_K << std::setw(12) << row.pc << std::setw(12) << row.pcir
                  << row.n_users << "\n";
    }
}

// ---- ingest ----

struct IngestOpts {
    std::string items;
    std::string users;
    std::string out_dir;
    int k_min = 10;
    int rating_min = 1;
    int rating_max = 10;
    bool force = false;
};

int cmd_ingest(const IngestOpts& opts) {
    fs::path out(opts.out_dir);
    if (fs::exists(out / "users.jsonl") && !opts.force) {
        throw ConfigError((out / "users.jsonl").string() +
                          " exists; pass --force to overwrite");
    }

    corpus::Catalog catalog = corpus::ingest_catalog(opts.items);
    corpus::RatingScale scale{opts.rating_min, opts.rating_max};
    std::vector<corpus::UserRecord> raw = corpus::ingest_users(opts.users, scale);

    corpus::AlignmentReport report;
    std::vector<corpus::UserRecord> aligned = corpus::align_users(raw, catalog, opts.k_min, &report);

    fs::create_directories(out);
    corpus::write_catalog(catalog, (out / "items.jsonl").string());
    corpus::write_users(aligned, (out / "users.jsonl").string());

    json summary{{"items", catalog.size()},
                 {"users_in", report.users_in},
                 {"users_kept", report.users_kept},
                 {"users_dropped", report.users_dropped},
                 {"interactions_in", report.interactions_in},
                 {"interactions_kept", report.interactions_kept},
                 {"interactions_dropped_unresolved", report.interactions_dropped_unresolved},
                 {"interactions_dropped_duplicate", report.interactions_dropped_duplicate},
                 {"k_min", opts.k_min}};
    std::ofstream rep((out / "report.json").string(), std::ios::trunc);
    rep << summary.dump(2) << "\n";

    std::cout << "items: " << catalog.size() << "\n"
              << "users kept: " << report.users_kept << " / " << report.users_in
              << " (dropped " << report.users_dropped << ")\n"
              << "interactions kept: " << report.interactions_kept << " / "
              << report.interactions_in << " (unresolved "
              << report.interactions_dropped_unresolved << ", duplicate "
              << report.interactions_dropped_duplicate << ")\n";
    return 0;
}

// ---- simulate ----

struct SimulateOpts {
    std::string config_path;
    bool resume = false;
    bool force = false;
    int parallelism = 0; // 0 = use config
    bool fixed_clock = false;
};

int run_one_simulation(runcfg::RunConfig cfg, const std::string& label, const fs::path& out,
                       const SimulateOpts& opts) {
    fs::path manifest_path = out / "manifest.json";
    fs::path transcripts_dir = out / "transcripts";
    if (fs::exists(manifest_path) && !opts.resume && !opts.force) {
        throw ConfigError(manifest_path.string() +
                          " exists; pass --force to overwrite or --resume to continue");
    }

    corpus::Catalog catalog = corpus::ingest_catalog(cfg.items_path);
    std::vector<corpus::UserRecord> users =
        corpus::align_users(corpus::ingest_users(cfg.users_path), catalog, cfg.k_min);
    if (users.empty()) {
        throw DataError("no users survive alignment with k_min=" + std::to_string(cfg.k_min));
    }

    std::vector<corpus::UserSplit> splits;
    if (!cfg.splits_path.empty()) {
        auto loaded = corpus::read_splits(cfg.splits_path);
        std::map<std::string, corpus::UserSplit> by_user;
        for (auto& s : loaded) by_user[s.user_id] = s;
        for (const auto& u : users) {
            auto it = by_user.find(u.user_id);
            if (it == by_user.end()) throw DataError("splits file lacks user " + u.user_id);
            splits.push_back(it->second);
        }
    } else {
        for (const auto& u : users) {
            splits.push_back(corpus::split_user(u, cfg.sim.n_targets, cfg.sim.seed,
                                                cfg.split_policy));
        }
    }
    for (auto& s : splits) s = engine::apply_history_size(s, cfg.history_size);

    fs::create_directories(transcripts_dir);
    corpus::write_splits(splits, (out / "splits.jsonl").string());

    auto backend = runcfg::make_backend(cfg.backend);
    if (cfg.adapter.kind == adapters::AdapterKind::remote_http && cfg.adapter.endpoint.empty()) {
        const char* ep = std::getenv(runcfg::kEnvCrsEndpoint);
        if (ep && *ep) cfg.adapter.endpoint = ep;
    }
    auto adapter = adapters::make_adapter(cfg.adapter, catalog, users);
    prompts::PromptLibrary library = cfg.templates_dir.empty()
                                         ? prompts::PromptLibrary::builtin()
                                         : prompts::PromptLibrary::from_dir(cfg.templates_dir);

    engine::FixedClock fixed;
    engine::SystemClock system_clock;
    const engine::Clock& clock =
        cfg.fixed_clock ? static_cast<const engine::Clock&>(fixed)
                        : static_cast<const engine::Clock&>(system_clock);

    engine::EngineEnv env;
    env.catalog = &catalog;
    env.simulator = backend.get();
    env.crs = adapter.get();
    env.library = &library;
    env.clock = &clock;

    cfg.sim.backend_desc = backend->describe();
    cfg.sim.adapter_desc = adapter->describe();

    runcfg::RunManifest manifest;
    std::string digest = text::to_hex(text::fnv1a64(cfg.to_json().dump()));
    manifest.run_id = label.empty() ? "run-" + digest : label + "-" + digest;
    manifest.version = runcfg::tool_version();
    manifest.config = cfg.to_json();
    manifest.corpus_digests = {{"items", runcfg::file_digest(cfg.items_path)},
                               {"users", runcfg::file_digest(cfg.users_path)}};
    manifest.started_at = clock.now_iso();
    manifest.stages["simulate"] = "running";
    manifest.write(manifest_path.string()); // before any transcript

    engine::CohortResult result;
    if (opts.resume) {
        std::map<std::string, const corpus::UserSplit*> by_user;
        for (const auto& s : splits) by_user[s.user_id] = &s;
        for (const auto& u : users) {
            std::string path = engine::transcript_path(transcripts_dir.string(), u.user_id);
            try {
                engine::Transcript tr = fs::exists(path)
                                            ? engine::resume_dialogue(u, env, path)
                                            : engine::run_dialogue(u, *by_user.at(u.user_id),
                                                                   cfg.sim, env, path);
                if (!tr.complete()) result.failures.push_back({u.user_id, tr.abort_reason});
                result.transcripts.push_back(std::move(tr));
            } catch (const Error& e) {
                result.failures.push_back({u.user_id, e.what()});
            }
        }
    } else {
        result = engine::run_cohort(users, splits, cfg.sim, env, transcripts_dir.string(),
                                    cfg.parallelism);
    }

    manifest.ended_at = clock.now_iso();
    manifest.stages["simulate"] =
        result.failures.empty() ? "complete"
                                : "complete_with_failures:" + std::to_string(result.failures.size());
    manifest.write(manifest_path.string());

    std::string run_name = label.empty() ? out.string() : label;
    std::cout << run_name << ": " << result.completed() << "/" << users.size()
              << " dialogues complete -> " << transcripts_dir.string() << "\n";
    for (const auto& f : result.failures) {
        std::cout << "  failed " << f.user_id << ": " << f.reason << "\n";
    }
    return 0;
}

int cmd_simulate(const SimulateOpts& opts) {
    runcfg::RunConfig base = runcfg::RunConfig::load(opts.config_path);
    if (opts.parallelism > 0) base.parallelism = opts.parallelism;
    if (opts.fixed_clock) base.fixed_clock = true;
    if (base.items_path.empty() || base.users_path.empty()) {
        throw ConfigError("config needs corpus.items and corpus.users");
    }
    if (base.out_dir.empty()) throw ConfigError("config needs out_dir");

    for (const auto& run : runcfg::expand_sweeps(base)) {
        fs::path out(run.config.out_dir);
        if (!run.label.empty()) out /= run.label;
        run_one_simulation(run.config, run.label, out, opts);
    }
    return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
    std::string transcripts_dir;
    std::string out_dir;
    std::string label;
    int K = 0; // 0 = take from transcripts
    std::string norm = "targets";
};

int cmd_evaluate(const EvaluateOpts& opts) {
    auto transcripts = load_transcripts(opts.transcripts_dir);
    int K = opts.K > 0 ? opts.K : transcripts.front().config.K;
    metrics::RecallNorm norm = opts.norm == "min_k_targets" ? metrics::RecallNorm::min_k_targets
                                                            : metrics::RecallNorm::targets;

    metrics::MetricsReport report = metrics::compute_report(transcripts, K, norm);

    std::string out_dir =
        opts.out_dir.empty() ? default_sibling(opts.transcripts_dir, "metrics") : opts.out_dir;
    fs::create_directories(out_dir);
    std::string label = opts.label;
    if (label.empty()) {
        fs::path parent = fs::path(opts.transcripts_dir).lexically_normal().parent_path();
        label = parent.filename().string();
        if (label.empty()) label = "run";
    }

    metrics::write_per_turn_csv((fs::path(out_dir) / "per_turn.csv").string(), report);
    metrics::write_long_csv((fs::path(out_dir) / "per_turn_long.csv").string(), label, report);

    bool all_biased = std::all_of(transcripts.begin(), transcripts.end(),
                                  [](const engine::Transcript& t) { return t.bias.has_value(); });
    if (all_biased) {
        metrics::BiasReport bias = metrics::bias_decomposition(transcripts);
        metrics::write_bias_csv((fs::path(out_dir) / "bias.csv").string(), bias);
        std::cout << "bias gap at final turn: " << std::setprecision(6) << bias.gap << "\n";
    }

    print_per_turn(report);
    if (report.incomplete > 0) {
        std::cout << report.incomplete << " transcript(s) ended early and drop out of later turns\n";
    }
    std::cout << "metrics -> " << out_dir << "\n";
    return 0;
}

// ---- judge ----

struct JudgeOpts {
    std::string transcripts_dir;
    std::string out_dir;
    BackendFlags backend;
};

int cmd_judge(const JudgeOpts& opts) {
    auto transcripts = load_transcripts(opts.transcripts_dir);
    auto backend = runcfg::make_backend(opts.backend.selection(), /*judge_role=*/true);

    std::string out_dir =
        opts.out_dir.empty() ? default_sibling(opts.transcripts_dir, "judgments") : opts.out_dir;
    fs::create_directories(out_dir);

    jsonl::Writer judgments((fs::path(out_dir) / "judgments.jsonl").string());
    jsonl::Writer prompt_log((fs::path(out_dir) / "judge_prompts.jsonl").string());

    std::vector<judge::JudgeScores> scores;
    size_t skipped = 0;
    for (const auto& tr : transcripts) {
        if (tr.turns.empty()) {
            ++skipped;
            continue;
        }
        pref::PrefContext ctx;
        ctx.prompt_sink = [&](const agents::GenerationRequest& req) {
            json msgs = json::array();
            for (const auto& m : req.messages) {
                msgs.push_back(json{{"role", m.role}, {"content", m.content}});
            }
            prompt_log.write(json{{"user_id", tr.split.user_id},
                                  {"stage", agents::stage_name(req.stage)},
                                  {"messages", std::move(msgs)}});
        };
        judge::JudgeScores s = judge::judge_transcript(tr, tr.general, *backend, ctx);
        judgments.write(judge::to_json(s));
        scores.push_back(std::move(s));
    }
    if (scores.empty()) throw DataError("no judgeable transcripts (all lack completed turns)");

    auto stats = judge::aggregate_judgments(scores);
    judge::write_aggregate_csv((fs::path(out_dir) / "aggregate.csv").string(), stats);

    for (const auto& st : stats) {
        std::cout << std::left << std::setw(16) << st.dimension << "mean " << std::setprecision(4)
                  << st.mean << "  std " << st.stddev << "  n " << st.n << "\n";
    }
    if (skipped > 0) std::cout << skipped << " transcript(s) skipped (no completed turns)\n";
    std::cout << "judgments -> " << out_dir << "\n";
    return 0;
}

// ---- pairwise ----

struct PairwiseOpts {
    std::string items;
    std::string users;
    std::string splits;
    std::string variant = "general_prefs";
    std::string out_csv = "pairwise.csv";
    uint64_t seed = 0;
    int n_targets = 5;
    int k_min = 10;
    BackendFlags backend;
};

int cmd_pairwise(const PairwiseOpts& opts) {
    corpus::Catalog catalog = corpus::ingest_catalog(opts.items);
    std::vector<corpus::UserRecord> users =
        corpus::align_users(corpus::ingest_users(opts.users), catalog, opts.k_min);
    if (users.empty()) throw DataError("no users survive alignment");

    std::vector<corpus::UserSplit> splits;
    if (!opts.splits.empty()) {
        splits = corpus::read_splits(opts.splits);
    } else {
        for (const auto& u : users) {
            splits.push_back(corpus::split_user(u, opts.n_targets, opts.seed));
        }
    }

    metrics::ProfileVariant variant = metrics::variant_from_name(opts.variant);
    auto backend = runcfg::make_backend(opts.backend.selection());
    pref::PrefContext ctx;

    std::map<std::string, const corpus::UserSplit*> split_by_user;
    for (const auto& s : splits) split_by_user[s.user_id] = &s;

    std::map<std::string, std::string> profiles;
    for (const auto& user : users) {
        auto it = split_by_user.find(user.user_id);
        if (it == split_by_user.end()) throw DataError("no split for user " + user.user_id);
        const auto& split = *it->second;

        if (variant == metrics::ProfileVariant::raw_reviews) {
            std::string text;
            for (const auto& id : split.seen) {
                const auto* inter = user.find_interaction(id);
                if (!inter || inter->review.empty()) continue;
                if (!text.empty()) text += "\n";
                text += catalog.at(id).title + ": " + inter->review;
            }
            profiles[user.user_id] = text;
            continue;
        }

        std::vector<pref::BinaryPreference> binary;
        std::vector<corpus::ItemRecord> seen_items;
        for (const auto& id : split.seen) {
            seen_items.push_back(catalog.at(id));
            const auto* inter = user.find_interaction(id);
            if (!inter || inter->review.empty()) continue;
            binary.push_back(pref::extract_binary_preferences(inter->review, catalog.at(id),
                                                              *backend, ctx));
        }
        if (variant == metrics::ProfileVariant::binary_prefs) {
            std::string text;
            for (const auto& b : binary) {
                if (!text.empty()) text += "\n";
                text += b.item_id + " likes:";
                for (const auto& l : b.likes) text += " " + l + ";";
                text += " dislikes:";
                for (const auto& d : b.dislikes) text += " " + d + ";";
            }
            profiles[user.user_id] = text;
        } else {
            auto forbidden = pref::ForbiddenTitles::from_items(catalog, split.targets);
            profiles[user.user_id] =
                pref::generate_general_preference(binary, seen_items, *backend, ctx, forbidden)
                    .narrative;
        }
    }

    metrics::PairSelector selector = [&](const std::string& profile,
                                         const corpus::ItemRecord& a,
                                         const corpus::ItemRecord& b) {
        return agents::pairwise_select(profile, a, b, *backend, ctx);
    };

    metrics::PairwiseReport report = metrics::pairwise_accuracy(
        users, splits, catalog, variant, profiles, selector, opts.seed);
    metrics::write_pairwise_csv(opts.out_csv, {report});

    std::cout << metrics::variant_name(report.variant) << ": accuracy "
              << std::setprecision(4) << report.accuracy << " over " << report.n_pairs
              << " pairs (" << report.n_ties_excluded << " ties excluded) -> " << opts.out_csv
              << "\n";
    return 0;
}

// ---- report ----

struct ReportOpts {
    std::vector<std::string> run_dirs;
    std::string out_csv = "report.csv";
    std::vector<int> turns{1, 5, 10, 15, 20};
};

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV: " + path);
    std::vector<std::string> header;
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);

    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        std::map<std::string, std::string> row;
        for (size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_report(const ReportOpts& opts) {
    struct RunRow {
        std::string name;
        std::map<int, double> pc;
        double pcir_final = 0.0;
        int final_turn = 0;
        std::map<std::string, double> judge_means;
        std::vector<std::map<std::string, std::string>> per_turn;
    };

    std::vector<RunRow> rows;
    std::set<int> turn_columns;
    std::vector<std::string> judge_dims;

    for (const auto& dir : opts.run_dirs) {
        fs::path metrics_csv = fs::path(dir) / "metrics" / "per_turn.csv";
        if (!fs::exists(metrics_csv)) {
            throw ConfigError("no metrics in " + dir + "; run `crseval evaluate --transcripts " +
                              (fs::path(dir) / "transcripts").string() + "` first");
        }
        RunRow row;
        row.name = fs::path(dir).lexically_normal().filename().string();
        if (row.name.empty()) row.name = dir;
        row.per_turn = read_csv(metrics_csv.string());
        for (const auto& r : row.per_turn) {
            int t = std::stoi(r.at("t"));
            double pc = std::stod(r.at("pc"));
            row.pc[t] = pc;
            if (t > row.final_turn) {
                row.final_turn = t;
                row.pcir_final = std::stod(r.at("pcir"));
            }
        }
        for (int t : opts.turns) {
            if (row.pc.count(t)) turn_columns.insert(t);
        }
        turn_columns.insert(row.final_turn);

        fs::path judge_csv = fs::path(dir) / "judgments" / "aggregate.csv";
        if (fs::exists(judge_csv)) {
            for (const auto& r : read_csv(judge_csv.string())) {
                row.judge_means[r.at("dimension")] = std::stod(r.at("mean"));
                if (std::find(judge_dims.begin(), judge_dims.end(), r.at("dimension")) ==
                    judge_dims.end()) {
                    judge_dims.push_back(r.at("dimension"));
                }
            }
        }
        rows.push_back(std::move(row));
    }

    std::ofstream out(opts.out_csv, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + opts.out_csv);
    out << "run";
    for (int t : turn_columns) out << ",pc@" << t;
    out << ",pcir_final";
    for (const auto& d : judge_dims) out << "," << d << "_mean";
    out << "\n";
    for (const auto& row : rows) {
        out << row.name;
        for (int t : turn_columns) {
            out << ',';
            if (row.pc.count(t)) out << std::setprecision(12) << row.pc.at(t);
        }
        out << ',' << std::setprecision(12) << row.pcir_final;
        for (const auto& d : judge_dims) {
            out << ',';
            if (row.judge_means.count(d)) out << std::setprecision(12) << row.judge_means.at(d);
        }
        out << "\n";
    }

    // Long-format companion for external plotting.
    fs::path long_path = fs::path(opts.out_csv).replace_extension().string() + "_long.csv";
    std::ofstream lout(long_path, std::ios::trunc);
    lout << "run,metric,t,value\n";
    for (const auto& row : rows) {
        for (const auto& r : row.per_turn) {
            lout << row.name << ",recall_at_K," << r.at("t") << ',' << r.at("recall_at_K") << "\n";
            lout << row.name << ",pc," << r.at("t") << ',' << r.at("pc") << "\n";
            lout << row.name << ",pcir," << r.at("t") << ',' << r.at("pcir") << "\n";
        }
    }

    std::cout << std::left << std::setw(28) << "run";
    for (int t : turn_columns) std::cout << std::setw(10) << ("pc@" + std::to_string(t));
    std::cout << std::setw(12) << "pcir_final";
    for (const auto& d : judge_dims) std::cout << std::setw(18) << (d + "_mean");
    std::cout << "\n";
    for (const auto& row : rows) {
        std::cout << std::left << std::setw(28) << row.name;
        for (int t : turn_columns) {
            std::ostringstream cell;
            if (row.pc.count(t)) cell << std::setprecision(4) << row.pc.at(t);
            std::cout << std::setw(10) << cell.str();
        }
        std::cout << std::setw(12) << std::setprecision(4) << row.pcir_final;
        for (const auto& d : judge_dims) {
            std::ostringstream cell;
            if (row.judge_means.count(d)) cell << std::setprecision(4) << row.judge_means.at(d);
            std::cout << std::setw(18) << cell.str();
        }
        std::cout << "\n";
    }
    std::cout << "report -> " << opts.out_csv << " and " << long_path.string() << "\n";
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Target-free user simulation for conversational recommenders"};
    app.require_subcommand(1);

    IngestOpts ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Align a raw corpus against its catalog");
    ingest_cmd->add_option("--items", ingest.items, "Item catalog JSONL")->required();
    ingest_cmd->add_option("--users", ingest.users, "User interactions JSONL")->required();
    ingest_cmd->add_option("--out-dir", ingest.out_dir, "Output directory")->required();
    ingest_cmd->add_option("--k-min", ingest.k_min, "Minimum interactions per kept user");
    ingest_cmd->add_option("--rating-min", ingest.rating_min, "Lowest valid rating");
    ingest_cmd->add_option("--rating-max", ingest.rating_max, "Highest valid rating");
    ingest_cmd->add_flag("--force", ingest.force, "Overwrite existing outputs");

    SimulateOpts simulate;
    auto* sim_cmd = app.add_subcommand("simulate", "Run simulated dialogues per a run config");
    sim_cmd->add_option("--config", simulate.config_path, "Run config JSON")->required();
    sim_cmd->add_flag("--resume", simulate.resume, "Continue crashed or aborted transcripts");
    sim_cmd->add_flag("--force", simulate.force, "Overwrite an existing run directory");
    sim_cmd->add_option("--parallelism", simulate.parallelism, "Override config parallelism");
    sim_cmd->add_flag("--fixed-clock", simulate.fixed_clock,
                      "Stamp transcripts with a fixed timestamp for byte-stable output");

    EvaluateOpts evaluate;
    auto* eval_cmd = app.add_subcommand("evaluate", "Compute coverage metrics from transcripts");
    eval_cmd->add_option("--transcripts", evaluate.transcripts_dir, "Transcript directory")
        ->required();
    eval_cmd->add_option("--out", evaluate.out_dir, "Metrics output directory");
    eval_cmd->add_option("--k", evaluate.K, "Recall cutoff (default: slate size from the run)");
    eval_cmd->add_option("--norm", evaluate.norm, "Recall normalization")
        ->check(CLI::IsMember({"targets", "min_k_targets"}));
    eval_cmd->add_option("--label", evaluate.label, "Run label for the long-format CSV");

    JudgeOpts judge_opts;
    auto* judge_cmd = app.add_subcommand("judge", "Score transcripts against the rubric");
    judge_cmd->add_option("--transcripts", judge_opts.transcripts_dir, "Transcript directory")
        ->required();
    judge_cmd->add_option("--out", judge_opts.out_dir, "Judgment output directory");
    judge_opts.backend.attach(judge_cmd);

    PairwiseOpts pairwise;
    auto* pair_cmd = app.add_subcommand("pairwise", "Profile quality via pairwise target ranking");
    pair_cmd->add_option("--items", pairwise.items, "Item catalog JSONL")->required();
    pair_cmd->add_option("--users", pairwise.users, "User interactions JSONL")->required();
    pair_cmd->add_option("--splits", pairwise.splits, "Precomputed splits JSONL");
    pair_cmd->add_option("--variant", pairwise.variant, "Profile variant")
        ->check(CLI::IsMember({"raw_reviews", "binary_prefs", "general_prefs"}));
    pair_cmd->add_option("--out", pairwise.out_csv, "Report CSV path");
    pair_cmd->add_option("--seed", pairwise.seed, "Seed for splits and presentation order");
    pair_cmd->add_option("--n-targets", pairwise.n_targets, "Targets per user when splitting");
    pair_cmd->add_option("--k-min", pairwise.k_min, "Minimum interactions per kept user");
    pairwise.backend.attach(pair_cmd);

    ReportOpts report;
    auto* report_cmd = app.add_subcommand("report", "Combine evaluated runs into one table");
    report_cmd->add_option("run_dirs", report.run_dirs, "Run directories to compare")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--out", report.out_csv, "Combined CSV path");
    report_cmd->add_option("--turns", report.turns, "Turns to column in the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (ingest_cmd->parsed()) return cmd_ingest(ingest);
    if (sim_cmd->parsed()) return cmd_simulate(simulate);
    if (eval_cmd->parsed()) return cmd_evaluate(evaluate);
    if (judge_cmd->parsed()) return cmd_judge(judge_opts);
    if (pair_cmd->parsed()) return cmd_pairwise(pairwise);
    if (report_cmd->parsed()) return cmd_report(report);
    return 2;
}

} // namespace crseval::cli

#include "crseval/runconfig.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crseval/errors.hpp"
#include "crseval/text.hpp"

namespace crseval::runcfg {

using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& scope) {
    std::string unknown;
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            unknown += unknown.empty() ? key : ", " + key;
        }
    }
    if (!unknown.empty()) {
        std::string expected;
        for (const auto& k : known) expected += expected.empty() ? k : ", " + k;
        throw ConfigError("unknown " + scope + " keys: " + unknown + " (known keys: " + expected +
                          ")");
    }
}

corpus::SplitMode split_mode_from_name(const std::string& name) {
    if (name == "random") return corpus::SplitMode::random;
    if (name == "chronological") return corpus::SplitMode::chronological;
    throw ConfigError("unknown split policy: " + name);
}

const char* split_mode_name(corpus::SplitMode mode) {
    return mode == corpus::SplitMode::random ? "random" : "chronological";
}

metrics::RecallNorm recall_norm_from_name(const std::string& name) {
    if (name == "targets") return metrics::RecallNorm::targets;
    if (name == "min_k_targets") return metrics::RecallNorm::min_k_targets;
    throw ConfigError("unknown recall normalization: " + name);
}

const char* recall_norm_name(metrics::RecallNorm norm) {
    return norm == metrics::RecallNorm::targets ? "targets" : "min_k_targets";
}

} // namespace

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    reject_unknown_keys(j, {"mode", "K", "max_turns", "n_targets", "seed", "reflection_window",
                            "target_fraction", "inline_slates", "narrative_token_budget",
                            "plot_truncation_chars", "backend", "adapter", "corpus", "out_dir",
                            "templates_dir", "split_policy", "k_min", "history_size",
                            "parallelism", "fixed_clock", "recall_norm", "sweeps"},
                        "config");

    RunConfig c;
    c.sim.mode = engine::mode_from_name(j.value("mode", "target_free"));
    c.sim.K = j.value("K", c.sim.K);
    c.sim.max_turns = j.value("max_turns", c.sim.max_turns);
    c.sim.n_targets = j.value("n_targets", c.sim.n_targets);
    c.sim.seed = j.value("seed", c.sim.seed);
    c.sim.reflection_window = j.value("reflection_window", c.sim.reflection_window);
    c.sim.target_fraction = j.value("target_fraction", c.sim.target_fraction);
    c.sim.inline_slates = j.value("inline_slates", c.sim.inline_slates);
    c.sim.narrative_token_budget = j.value("narrative_token_budget", c.sim.narrative_token_budget);
    c.sim.plot_truncation_chars = j.value("plot_truncation_chars", c.sim.plot_truncation_chars);

    if (j.contains("backend")) {
        const json& b = j.at("backend");
        reject_unknown_keys(b, {"kind", "model", "endpoint", "script", "stub_seed"}, "backend");
        c.backend.kind = b.value("kind", c.backend.kind);
        c.backend.model = b.value("model", c.backend.model);
        c.backend.endpoint = b.value("endpoint", c.backend.endpoint);
        c.backend.script = b.value("script", c.backend.script);
        c.backend.stub_seed = b.value("stub_seed", c.backend.stub_seed);
    }

    if (j.contains("adapter")) {
        const json& a = j.at("adapter");
        reject_unknown_keys(a, {"kind", "endpoint", "script", "embedding_dim", "timeout_s"},
                            "adapter");
        c.adapter.kind = adapters::adapter_kind_from_name(
            a.value("kind", std::string(adapters::adapter_kind_name(c.adapter.kind))));
        c.adapter.endpoint = a.value("endpoint", c.adapter.endpoint);
        c.adapter.script_path = a.value("script", c.adapter.script_path);
        c.adapter.embedding_dim = a.value("embedding_dim", c.adapter.embedding_dim);
        c.adapter.timeout_s = a.value("timeout_s", c.adapter.timeout_s);
    }

    if (j.contains("corpus")) {
        const json& co = j.at("corpus");
        reject_unknown_keys(co, {"items", "users", "splits"}, "corpus");
        c.items_path = co.value("items", "");
        c.users_path = co.value("users", "");
        c.splits_path = co.value("splits", "");
    }

    c.out_dir = j.value("out_dir", "");
    c.templates_dir = j.value("templates_dir", "");
    c.split_policy = split_mode_from_name(j.value("split_policy", "random"));
    c.k_min = j.value("k_min", c.k_min);
    c.history_size = j.value("history_size", c.history_size);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.fixed_clock = j.value("fixed_clock", c.fixed_clock);
    c.recall_norm = recall_norm_from_name(j.value("recall_norm", "targets"));

    if (j.contains("sweeps")) {
        const json& s = j.at("sweeps");
        reject_unknown_keys(s, {"K", "max_turns", "history_size", "n_targets"}, "sweeps");
        for (const auto& [key, values] : s.items()) {
            if (!values.is_array() || values.empty()) {
                throw ConfigError("sweep '" + key + "' must be a non-empty array");
            }
            for (const auto& v : values) {
                if (!v.is_number_integer()) {
                    throw ConfigError("sweep '" + key + "' must hold integers");
                }
                c.sweeps[key].push_back(v.get<long>());
            }
        }
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
    return from_json(j);
}

json RunConfig::to_json() const {
    json j = sim.snapshot();
    j.erase("backend"); // descriptors are set per run, not config inputs
    j.erase("adapter");
    j["backend"] = json{{"kind", backend.kind},
                        {"model", backend.model},
                        {"endpoint", backend.endpoint},
                        {"script", backend.script},
                        {"stub_seed", backend.stub_seed}};
    j["adapter"] = json{{"kind", adapters::adapter_kind_name(adapter.kind)},
                        {"endpoint", adapter.endpoint},
                        {"script", adapter.script_path},
                        {"embedding_dim", adapter.embedding_dim},
                        {"timeout_s", adapter.timeout_s}};
    j["corpus"] = json{{"items", items_path}, {"users", users_path}, {"splits", splits_path}};
    j["out_dir"] = out_dir;
    j["templates_dir"] = templates_dir;
    j["split_policy"] = split_mode_name(split_policy);
    j["k_min"] = k_min;
    j["history_size"] = history_size;
    j["parallelism"] = parallelism;
    j["fixed_clock"] = fixed_clock;
    j["recall_norm"] = recall_norm_name(recall_norm);
    if (!sweeps.empty()) {
        json s = json::object();
        for (const auto& [key, values] : sweeps) s[key] = values;
        j["sweeps"] = s;
    }
    return j;
}

std::vector<ExpandedRun> expand_sweeps(const RunConfig& config) {
    std::vector<ExpandedRun> runs{{"", config}};
    runs[0].config.sweeps.clear();

    for (const auto& [key, values] : config.sweeps) {
        std::vector<ExpandedRun> next;
        for (const auto& base : runs) {
            for (long v : values) {
                ExpandedRun run = base;
                if (key == "K") run.config.sim.K = static_cast<int>(v);
                else if (key == "max_turns") run.config.sim.max_turns = static_cast<int>(v);
                else if (key == "n_targets") run.config.sim.n_targets = static_cast<int>(v);
                else if (key == "history_size") run.config.history_size = static_cast<int>(v);
                else throw ConfigError("unsupported sweep parameter: " + key);
                run.label += (run.label.empty() ? "" : "_") + key + "=" + std::to_string(v);
                next.push_back(std::move(run));
            }
        }
        runs = std::move(next);
    }
    return runs;
}

void RunManifest::write(const std::string& path) const {
    json j{{"run_id", run_id},
           {"version", version},
           {"config", config},
           {"corpus_digests", corpus_digests},
           {"started_at", started_at},
           {"ended_at", ended_at},
           {"stages", stages}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("manifest is not valid JSON: " + path);
    RunManifest m;
    m.run_id = j.value("run_id", "");
    m.version = j.value("version", "");
    m.config = j.value("config", json::object());
    if (j.contains("corpus_digests")) {
        for (const auto& [k, v] : j.at("corpus_digests").items()) {
            m.corpus_digests[k] = v.get<std::string>();
        }
    }
    m.started_at = j.value("started_at", "");
    m.ended_at = j.value("ended_at", "");
    if (j.contains("stages")) {
        for (const auto& [k, v] : j.at("stages").items()) m.stages[k] = v.get<std::string>();
    }
    return m;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return text::to_hex(text::fnv1a64(buf.str()));
}

std::string tool_version() { return "crseval 0.1.0"; }

std::unique_ptr<agents::TextBackend> make_backend(const BackendSelection& sel, bool judge_role) {
    if (sel.kind == "stub") {
        return std::make_unique<agents::StubBackend>(sel.stub_seed);
    }
    if (sel.kind == "scripted") {
        if (sel.script.empty()) throw ConfigError("scripted backend needs a script path");
        return std::make_unique<agents::ScriptedBackend>(agents::ScriptedBackend::from_file(sel.script));
    }
    if (sel.kind == "remote") {
        agents::RemoteChatConfig cfg;
        const char* ep_var = judge_role ? kEnvJudgeEndpoint : kEnvLlmEndpoint;
        const char* key_var = judge_role ? kEnvJudgeApiKey : kEnvLlmApiKey;
        const char* model_var = judge_role ? kEnvJudgeModel : kEnvLlmModel;
        cfg.endpoint = sel.endpoint.empty() ? env_or(ep_var, env_or(kEnvLlmEndpoint, ""))
                                            : sel.endpoint;
        cfg.model = sel.model.empty() ? env_or(model_var, env_or(kEnvLlmModel, "")) : sel.model;
        cfg.api_key = env_or(key_var, env_or(kEnvLlmApiKey, ""));
        if (cfg.endpoint.empty()) {
            throw ConfigError(std::string("remote backend needs an endpoint (config or ") +
                              ep_var + ")");
        }
        if (cfg.model.empty()) {
            throw ConfigError(std::string("remote backend needs a model (config or ") +
                              model_var + ")");
        }
        return std::make_unique<agents::RemoteChatBackend>(std::move(cfg));
    }
    throw ConfigError("unknown backend kind: " + sel.kind);
}

} // namespace crseval::runcfg

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "crseval/adapters.hpp"
#include "crseval/backend.hpp"
#include "crseval/corpus.hpp"
#include "crseval/engine.hpp"
#include "crseval/metrics.hpp"

namespace crseval::runcfg {

// Credentials and endpoints resolvable from the environment. Keys never
// appear in config files, which are meant to be shared.
inline constexpr const char* kEnvLlmEndpoint = "CRSEVAL_LLM_ENDPOINT";
inline constexpr const char* kEnvLlmApiKey = "CRSEVAL_LLM_API_KEY";
inline constexpr const char* kEnvLlmModel = "CRSEVAL_LLM_MODEL";
inline constexpr const char* kEnvJudgeEndpoint = "CRSEVAL_JUDGE_ENDPOINT";
inline constexpr const char* kEnvJudgeApiKey = "CRSEVAL_JUDGE_API_KEY";
inline constexpr const char* kEnvJudgeModel = "CRSEVAL_JUDGE_MODEL";
inline constexpr const char* kEnvCrsEndpoint = "CRSEVAL_CRS_ENDPOINT";

struct BackendSelection {
    std::string kind = "stub"; // stub | remote | scripted
    std::string model;         // remote; falls back to the environment
    std::string endpoint;      // remote; falls back to the environment
    std::string script;        // scripted
    uint64_t stub_seed = 0;
};

// Runtime knobs loaded from a JSON run-config file. Unknown keys are a hard
// schema error so typos cannot silently fall back to defaults.
struct RunConfig {
    engine::SimulationConfig sim;
    BackendSelection backend;
    adapters::AdapterConfig adapter;

    std::string items_path;
    std::string users_path;
    std::string splits_path; // optional: precomputed splits
    std::string out_dir;
    std::string templates_dir; // optional prompt overrides

    corpus::SplitMode split_policy = corpus::SplitMode::random;
    int k_min = 10;
    int history_size = 0; // 0 = full history
    int parallelism = 1;
    bool fixed_clock = false;
    metrics::RecallNorm recall_norm = metrics::RecallNorm::targets;

    // parameter name -> swept values; expanded into one run per combination
    std::map<std::string, std::vector<long>> sweeps;

    static RunConfig load(const std::string& path);
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// One concrete run expanded from the sweep grid. An empty label means the
// config had no sweeps.
struct ExpandedRun {
    std::string label;
    RunConfig config;
};

std::vector<ExpandedRun> expand_sweeps(const RunConfig& config);

struct RunManifest {
    std::string run_id;
    std::string version;
    nlohmann::json config;
    std::map<std::string, std::string> corpus_digests;
    std::string started_at;
    std::string ended_at;
    std::map<std::string, std::string> stages; // stage -> status

    void write(const std::string& path) const;
    static RunManifest read(const std::string& path);
};

// FNV-1a over the raw bytes, hex-encoded.
std::string file_digest(const std::string& path);

std::string tool_version();

std::unique_ptr<agents::TextBackend> make_backend(const BackendSelection& sel,
                                                  bool judge_role = false);

} // namespace crseval::runcfg

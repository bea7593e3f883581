#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crseval/adapters.hpp"
#include "crseval/backend.hpp"
#include "crseval/corpus.hpp"
#include "crseval/dialogue.hpp"
#include "crseval/preference.hpp"
#include "crseval/prompts.hpp"

namespace crseval::engine {

// Timestamp source. Runs that must be byte-reproducible inject FixedClock.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::string now_iso() const = 0;
};

class SystemClock : public Clock {
public:
    std::string now_iso() const override;
};

class FixedClock : public Clock {
public:
    explicit FixedClock(std::string value = "1970-01-01T00:00:00Z") : value_(std::move(value)) {}
    std::string now_iso() const override { return value_; }

private:
    std::string value_;
};

enum class Mode { target_free, target_biased };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct SimulationConfig {
    Mode mode = Mode::target_free;
    int K = 4;
    int max_turns = 20;
    int n_targets = 5;
    uint64_t seed = 0;
    int reflection_window = 3;     // reflections visible to the user prompt
    double target_fraction = 0.5;  // biased mode: share of targets behind the profile
    bool inline_slates = false;    // append slate ids to stored recommender utterances
    int narrative_token_budget = 160;
    size_t plot_truncation_chars = 1200;
    std::string backend_desc;
    std::string adapter_desc;

    // Fault injection for crash-resume tests: stop after persisting this
    // turn, skipping the end event. 0 disables. Never serialized.
    int crash_after_turn = 0;

    void validate() const; // throws ConfigError
    nlohmann::json snapshot() const;
    static SimulationConfig from_snapshot(const nlohmann::json& j);
};

struct TurnRecord {
    int turn = 0;
    dialogue::Utterance user;
    dialogue::Utterance system;
    std::vector<std::string> slate;        // P_t, slate order preserved
    std::vector<std::string> slate_seen;   // slate ∩ split.seen
    std::vector<std::string> slate_unseen; // remainder
    std::optional<pref::ReflectedPreference> reflection;
};

// Selected/residual halves of the target set in biased mode.
struct BiasSplit {
    std::vector<std::string> selected;
    std::vector<std::string> residual;
    double fraction = 0.5;
};

struct Transcript {
    SimulationConfig config;
    corpus::UserSplit split;
    pref::GeneralPreference general;
    std::optional<BiasSplit> bias;
    std::vector<TurnRecord> turns;
    std::string status;       // "complete" | "aborted" | "crashed"
    std::string abort_reason; // set when aborted
    std::string started_at;
    std::string ended_at;     // empty when crashed
    std::string path;         // file the transcript was written to / read from

    bool complete() const { return status == "complete"; }
};

// Everything a dialogue run borrows from the caller. Backend and adapter
// must be safe to share across concurrently running dialogues.
struct EngineEnv {
    const corpus::Catalog* catalog = nullptr;
    agents::TextBackend* simulator = nullptr;
    adapters::CrsAdapter* crs = nullptr;
    const prompts::PromptLibrary* library = nullptr; // null = builtin
    const Clock* clock = nullptr;                    // null = system clock
};

std::string transcript_path(const std::string& out_dir, const std::string& user_id);

// Build the biased-mode profile: sample ⌈fraction·|Y|⌉ targets, synthesize
// an attribute-only narrative from them, return both halves.
struct BiasSetup {
    pref::GeneralPreference general;
    BiasSplit split;
};
BiasSetup setup_target_biased(const corpus::UserRecord& user, const corpus::UserSplit& split,
                              const corpus::Catalog& catalog, double fraction, uint64_t seed,
                              agents::TextBackend& backend, const pref::PrefContext& ctx);

// Keep only the most recent `history_size` seen items (interaction order);
// 0 keeps everything.
corpus::UserSplit apply_history_size(const corpus::UserSplit& split, int history_size);

// Run one full dialogue, persisting events to `out_path` as they happen so
// a crash loses at most the turn in flight. Agent-level errors abort the
// run with the reason recorded in the transcript instead of throwing.
Transcript run_dialogue(const corpus::UserRecord& user, const corpus::UserSplit& split,
                        const SimulationConfig& config, const EngineEnv& env,
                        const std::string& out_path);

// Continue a crashed or aborted run to max_turns. Drops any trailing end
// event or partial line, then appends; completed turns are never rewritten.
// A transcript that already completed is returned as-is.
Transcript resume_dialogue(const corpus::UserRecord& user, const EngineEnv& env,
                           const std::string& path);

Transcript read_transcript(const std::string& path);

struct CohortFailure {
    std::string user_id;
    std::string reason;
};

struct CohortResult {
    std::vector<Transcript> transcripts; // one per user, aborted ones included
    std::vector<CohortFailure> failures; // users whose run did not complete

    size_t completed() const;
};

// One dialogue per user, fanned out over `parallelism` worker threads.
// Failures are isolated per user; output is deterministic for deterministic
// agents regardless of parallelism.
CohortResult run_cohort(const std::vector<corpus::UserRecord>& users,
                        const std::vector<corpus::UserSplit>& splits,
                        const SimulationConfig& config, const EngineEnv& env,
                        const std::string& out_dir, int parallelism);

struct LeakageHit {
    std::string path;
    size_t line = 0;
    std::string where; // "narrative" | "prompt" | "user_utterance"
    std::string title; // normalized title that matched
};

// Offline audit: scan a persisted transcript for any held-out title in the
// narrative, any simulator prompt, or any user utterance.
std::vector<LeakageHit> scan_transcript_for_leakage(const std::string& path,
                                                    const corpus::Catalog& catalog);

} // namespace crseval::engine

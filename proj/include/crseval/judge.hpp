#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "crseval/backend.hpp"
#include "crseval/engine.hpp"
#include "crseval/preference.hpp"

namespace crseval::judge {

struct JudgeScores {
    std::string user_id;
    int proactiveness = 0;  // 1..5
    int coherence = 0;      // 1..5
    int personalization = 0; // 1..5
    std::string proactiveness_rationale;
    std::string coherence_rationale;
    std::string personalization_rationale;
    std::string judge_model;
};

nlohmann::json to_json(const JudgeScores& s);
JudgeScores scores_from_json(const nlohmann::json& j);

// One backend call scores all three rubric dimensions, rationale before
// score. Strict integer 1–5 parse with one retry; out-of-range is never
// coerced.
JudgeScores judge_transcript(const engine::Transcript& transcript,
                             const pref::GeneralPreference& general,
                             agents::TextBackend& backend, const pref::PrefContext& ctx);

struct DimensionStats {
    std::string dimension;
    double mean = 0.0;
    double stddev = 0.0; // population
    size_t n = 0;
};

// Per-dimension mean and population standard deviation.
std::vector<DimensionStats> aggregate_judgments(const std::vector<JudgeScores>& scores);

void write_aggregate_csv(const std::string& path, const std::vector<DimensionStats>& stats);

} // namespace crseval::judge

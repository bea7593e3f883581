#include "crseval/judge.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crseval/errors.hpp"
#include "crseval/prompts.hpp"

namespace crseval::judge {

using nlohmann::json;

json to_json(const JudgeScores& s) {
    return json{{"user_id", s.user_id},
                {"proactiveness", s.proactiveness},
                {"coherence", s.coherence},
                {"personalization", s.personalization},
                {"proactiveness_rationale", s.proactiveness_rationale},
                {"coherence_rationale", s.coherence_rationale},
                {"personalization_rationale", s.personalization_rationale},
                {"judge_model", s.judge_model}};
}

JudgeScores scores_from_json(const json& j) {
    JudgeScores s;
    s.user_id = j.at("user_id").get<std::string>();
    s.proactiveness = j.at("proactiveness").get<int>();
    s.coherence = j.at("coherence").get<int>();
    s.personalization = j.at("personalization").get<int>();
    s.proactiveness_rationale = j.value("proactiveness_rationale", "");
    s.coherence_rationale = j.value("coherence_rationale", "");
    s.personalization_rationale = j.value("personalization_rationale", "");
    s.judge_model = j.value("judge_model", "");
    return s;
}

namespace {

json extract_json_object(const std::string& raw) {
    json parsed = json::parse(raw, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    size_t open = raw.find('{');
    size_t close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close <= open) {
        return json(json::value_t::discarded);
    }
    return json::parse(raw.substr(open, close - open + 1), nullptr, false);
}

// Integer 1..5, exactly as emitted. "4.0", "four", or 6 all fail.
int strict_score(const json& dim, const std::string& raw) {
    if (!dim.is_object() || !dim.contains("score")) throw JudgeParseError(raw);
    const json& v = dim["score"];
    if (!v.is_number_integer()) throw JudgeParseError(raw);
    int score = v.get<int>();
    if (score < 1 || score > 5) throw JudgeParseError(raw);
    return score;
}

std::string rationale_of(const json& dim) {
    return dim.is_object() ? dim.value("rationale", "") : "";
}

JudgeScores parse_judgment(const std::string& raw) {
    json parsed = extract_json_object(raw);
    if (parsed.is_discarded() || !parsed.is_object()) throw JudgeParseError(raw);
    const char* dims[] = {"proactiveness", "coherence", "personalization"};
    for (const char* d : dims) {
        if (!parsed.contains(d)) throw JudgeParseError(raw);
    }
    JudgeScores s;
    s.proactiveness = strict_score(parsed["proactiveness"], raw);
    s.coherence = strict_score(parsed["coherence"], raw);
    s.personalization = strict_score(parsed["personalization"], raw);
    s.proactiveness_rationale = rationale_of(parsed["proactiveness"]);
    s.coherence_rationale = rationale_of(parsed["coherence"]);
    s.personalization_rationale = rationale_of(parsed["personalization"]);
    return s;
}

std::string render_dialogue(const engine::Transcript& transcript) {
    std::string out;
    for (const auto& rec : transcript.turns) {
        if (!out.empty()) out += "\n";
        out += "User: " + rec.user.text + "\nSystem: " + rec.system.text;
    }
    return out;
}

} // namespace

JudgeScores judge_transcript(const engine::Transcript& transcript,
                             const pref::GeneralPreference& general,
                             agents::TextBackend& backend, const pref::PrefContext& ctx) {
    if (transcript.turns.empty()) {
        throw DataError("cannot judge a transcript with no completed turns");
    }

    const auto& lib = ctx.prompts();
    agents::GenerationRequest req;
    req.stage = agents::Stage::judge;
    req.slots = {{"general_preferences", general.narrative},
                 {"dialogue_history", render_dialogue(transcript)},
                 {"rubric_proactiveness", lib.get("rubric_proactiveness")},
                 {"rubric_coherence", lib.get("rubric_coherence")},
                 {"rubric_personalization", lib.get("rubric_personalization")}};
    req.messages = {{"system", "You are a rigorous evaluator of recommendation dialogues."},
                    {"user", prompts::render(lib.get("judge"), req.slots)}};

    std::string raw;
    for (int attempt = 0; attempt <= ctx.max_parse_retries; ++attempt) {
        if (ctx.prompt_sink) ctx.prompt_sink(req);
        raw = agents::backend_generate(backend, req);
        try {
            JudgeScores s = parse_judgment(raw);
            s.user_id = transcript.split.user_id;
            s.judge_model = backend.describe();
            return s;
        } catch (const JudgeParseError&) {
            if (attempt == ctx.max_parse_retries) throw;
        }
    }
    throw JudgeParseError(raw); // unreachable
}

std::vector<DimensionStats> aggregate_judgments(const std::vector<JudgeScores>& scores) {
    if (scores.empty()) throw DataError("no judgments to aggregate");

    auto stats_for = [&](const std::string& name, auto getter) {
        DimensionStats st;
        st.dimension = name;
        st.n = scores.size();
        double sum = 0.0;
        for (const auto& s : scores) sum += getter(s);
        st.mean = sum / static_cast<double>(st.n);
        double var = 0.0;
        for (const auto& s : scores) {
            double d = getter(s) - st.mean;
            var += d * d;
        }
        st.stddev = std::sqrt(var / static_cast<double>(st.n));
        return st;
    };

    return {stats_for("proactiveness", [](const JudgeScores& s) { return s.proactiveness; }),
            stats_for("coherence", [](const JudgeScores& s) { return s.coherence; }),
            stats_for("personalization", [](const JudgeScores& s) { return s.personalization; })};
}

void write_aggregate_csv(const std::string& path, const std::vector<DimensionStats>& stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write CSV: " + path);
    out << "dimension,mean,stddev,n\n";
    for (const auto& st : stats) {
        out << st.dimension << ',' << std::setprecision(12) << st.mean << ','
            << std::setprecision(12) << st.stddev << ',' << st.n << '\n';
    }
}

} // namespace crseval::judge

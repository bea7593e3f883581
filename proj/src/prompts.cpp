#include "crseval/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "crseval/errors.hpp"

namespace crseval::prompts {

namespace fs = std::filesystem;

std::string render(const std::string& tmpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        size_t close = tmpl.find('}', open);
        if (close == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        std::string name = tmpl.substr(open + 1, close - open - 1);
        auto it = slots.find(name);
        if (it != slots.end()) {
            out += it->second;
        } else {
            out.append(tmpl, open, close - open + 1);
        }
        pos = close + 1;
    }
    return out;
}

namespace {

const char* kPreferenceExtraction = R"(You are helping profile a movie watcher from one of their reviews.

Movie: {item_title}
Review:
{review}

Distill the review into short preference phrases. Reply with a single JSON
object of the form {"likes": ["..."], "dislikes": ["..."]} and nothing else.
Each phrase must be a few words, concrete, and grounded in the review text.
At least one of the two lists must be non-empty.
)";

const char* kGeneralPreference = R"(You are summarizing a movie watcher's overall taste.

Their per-movie preference phrases, one per line:
Likes:
{likes}
Dislikes:
{dislikes}

Write a descriptive narrative of this person's general movie preferences,
focusing on the most representative features. Do not mention any movie
titles. Keep it under {token_budget} words. Reply with the narrative text
only.
)";

const char* kTargetBiasedPreference = R"(You are writing a movie-taste profile from item attributes alone.

Genres: {genres}
Directors: {directors}
Stars: {stars}
Plot excerpts:
{plots}

Write a narrative of this person's movie preferences using only the
attribute information above. Never mention or guess any movie title. Keep it
under {token_budget} words. Reply with the narrative text only.
)";

const char* kReflection = R"(You are role-playing a movie watcher with these general preferences:
{general_preferences}

Dialogue so far:
{dialogue_history}

The recommender just presented these movies:
{slate_with_plots}

Your past reviews for the ones you have already watched:
{seen_reviews}

For each presented movie, give your reaction as short like/dislike phrases.
For movies you have watched, recap your stored review. For the others, react
in line with your general preferences. Reply with a single JSON object:
{"items": [{"item_id": "...", "likes": ["..."], "dislikes": ["..."]}, ...]}
covering every presented movie exactly once, and nothing else.
)";

const char* kUserResponse = R"(You are role-playing a movie watcher with these general preferences:
{general_preferences}

Dialogue so far:
{dialogue_history}

Your recent reactions to presented movies:
{reflections}

Continue the conversation as the watcher. If the dialogue is empty, open it
by requesting recommendations that match your general preferences. Never
mention a movie you have not been shown. Reply with your next message only.
)";

const char* kPairwiseSelection = R"(You are role-playing a movie watcher with this preference profile:
{profile}

Two movies:
[0] {item_a}
[1] {item_b}

Which one aligns more closely with the profile? Reply with the single digit
0 or 1 and nothing else.
)";

const char* kJudge = R"(You are auditing a conversation between a user and a recommender system.

The user's general preferences:
{general_preferences}

Full dialogue:
{dialogue_history}

Score the recommender on three dimensions using the rubrics below. Judge
proactiveness and coherence from the dialogue alone; judge personalization
by how well suggestions and explanations align with the stated preferences.

Proactiveness rubric:
{rubric_proactiveness}

Coherence rubric:
{rubric_coherence}

Personalization rubric:
{rubric_personalization}

Reply with a single JSON object, giving the rationale before each score:
{"proactiveness": {"rationale": "...", "score": 1-5},
 "coherence": {"rationale": "...", "score": 1-5},
 "personalization": {"rationale": "...", "score": 1-5}}
and nothing else. Scores must be integers from 1 to 5.
)";

const char* kRubricProactiveness = R"(5: Consistently drives the conversation: asks clarifying questions, probes for unstated tastes, and volunteers fresh directions.
4: Frequently asks relevant questions or suggests new angles, with minor lulls.
3: Occasionally asks questions or offers new directions, but mostly reacts.
2: Rarely takes initiative; mostly repeats or waits for the user to steer.
1: Never guides the conversation; contributes nothing beyond bare responses.
)";

const char* kRubricCoherence = R"(5: Every response follows naturally from the dialogue; fluent, no abrupt transitions.
4: Responses are consistent with the context with only minor awkwardness.
3: Generally on-topic but with noticeable disjointed or mechanical turns.
2: Frequent non-sequiturs or repetitive, canned phrasing.
1: Responses largely ignore the conversation context.
)";

const char* kRubricPersonalization = R"(5: Suggestions and explanations clearly build on the user's stated and implied preferences throughout.
4: Most suggestions connect to the user's preferences, with occasional generic picks.
3: A mix of tailored and generic suggestions; explanations only loosely tied to preferences.
2: Mostly generic recommendations with token references to the user's tastes.
1: Recommendations ignore the user's preferences entirely.
)";

} // namespace

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    lib.templates_ = {
        {"preference_extraction", kPreferenceExtraction},
        {"general_preference", kGeneralPreference},
        {"target_biased_preference", kTargetBiasedPreference},
        {"reflection", kReflection},
        {"user_response", kUserResponse},
        {"pairwise_selection", kPairwiseSelection},
        {"judge", kJudge},
        {"rubric_proactiveness", kRubricProactiveness},
        {"rubric_coherence", kRubricCoherence},
        {"rubric_personalization", kRubricPersonalization},
    };
    return lib;
}

PromptLibrary PromptLibrary::from_dir(const std::string& dir) {
    PromptLibrary lib = builtin();
    if (!fs::is_directory(dir)) throw ConfigError("template directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        std::ostringstream oss;
        oss << in.rdbuf();
        lib.templates_[entry.path().stem().string()] = oss.str();
    }
    return lib;
}

const std::string& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("unknown prompt template: " + name);
    return it->second;
}

bool PromptLibrary::has(const std::string& name) const {
    return templates_.count(name) != 0;
}

void PromptLibrary::set(const std::string& name, std::string body) {
    templates_[name] = std::move(body);
}

std::vector<std::string> PromptLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

void PromptLibrary::write_dir(const std::string& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, body] : templates_) {
        std::ofstream out(fs::path(dir) / (name + ".txt"));
        out << body;
    }
}

} // namespace crseval::prompts

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crseval/backend.hpp"
#include "crseval/corpus.hpp"
#include "crseval/prompts.hpp"

namespace crseval::pref {

enum class PreferenceSource { extracted_from_review, reflected_on_unseen, review_recap };

const char* source_name(PreferenceSource s);
PreferenceSource source_from_name(const std::string& name);

struct BinaryPreference {
    std::string item_id;
    std::vector<std::string> likes;
    std::vector<std::string> dislikes;
    PreferenceSource source = PreferenceSource::extracted_from_review;
};

struct GeneralPreference {
    std::string user_id;
    std::string narrative;
    std::vector<std::string> provenance; // item ids the narrative was built from
};

struct ReflectedPreference {
    int turn = 0;
    std::vector<BinaryPreference> per_item; // one entry per slate item
};

// What a user simulator is initialized with.
struct PreferenceProfile {
    std::string user_id;
    std::vector<BinaryPreference> binary; // per seen item
    GeneralPreference general;
};

// Observer for every prompt sent on behalf of the user simulator, so runs
// can persist them verbatim for leakage audits.
using PromptSink = std::function<void(const agents::GenerationRequest&)>;

struct PrefContext {
    const prompts::PromptLibrary* library = nullptr;
    int narrative_token_budget = 160;
    size_t plot_truncation_chars = 1200;
    int max_parse_retries = 1; // extra attempts after the first
    PromptSink prompt_sink;    // optional

    const prompts::PromptLibrary& prompts() const;
};

// Normalized titles the simulator must never utter; empty in biased mode.
struct ForbiddenTitles {
    std::vector<std::string> normalized;

    static ForbiddenTitles from_items(const corpus::Catalog& catalog,
                                      const std::vector<std::string>& item_ids);
    // First forbidden title found in `text`, or empty.
    std::string first_hit(const std::string& text) const;
};

// Turn one review into structured likes/dislikes via the backend. Strict
// parse with retries; failure carries the raw backend output.
BinaryPreference extract_binary_preferences(const std::string& review,
                                            const corpus::ItemRecord& item,
                                            agents::TextBackend& backend,
                                            const PrefContext& ctx);

// Synthesize the general-preference narrative from seen-item preferences.
// A narrative containing a forbidden title is regenerated once, then fails.
GeneralPreference generate_general_preference(const std::vector<BinaryPreference>& seen_prefs,
                                              const std::vector<corpus::ItemRecord>& seen_items,
                                              agents::TextBackend& backend,
                                              const PrefContext& ctx,
                                              const ForbiddenTitles& forbidden);

// Attribute-only narrative for biased simulation. The rendered prompt is
// asserted to contain no target title even though the attributes come from
// the targets themselves.
GeneralPreference generate_target_biased_preference(const std::vector<corpus::ItemRecord>& target_items,
                                                    agents::TextBackend& backend,
                                                    const PrefContext& ctx);

// Per-turn reaction to the presented slate: review recaps for seen items,
// preference-aligned likes/dislikes for unseen ones. Reflection begins at
// turn 2.
ReflectedPreference reflect(const std::vector<corpus::ItemRecord>& slate,
                            const corpus::UserSplit& split, const corpus::UserRecord& user,
                            const GeneralPreference& general,
                            const std::string& dialogue_history, int turn,
                            agents::TextBackend& backend, const PrefContext& ctx);

// Throws DataError when provenance intersects the target set.
void validate_target_free(const GeneralPreference& general,
                          const std::vector<std::string>& targets);

nlohmann::json to_json(const BinaryPreference& p);
BinaryPreference binary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneralPreference& g);
GeneralPreference general_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReflectedPreference& r);
ReflectedPreference reflected_from_json(const nlohmann::json& j);

} // namespace crseval::pref

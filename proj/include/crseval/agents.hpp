#pragma once

#include <string>
#include <vector>

#include "crseval/backend.hpp"
#include "crseval/dialogue.hpp"
#include "crseval/preference.hpp"

namespace crseval::agents {

// Text rendering of recent reflections for the user-response prompt.
std::string render_reflections(const std::vector<pref::ReflectedPreference>& reflections);

// Newline-joined like-phrases from the most recent reflection; empty when
// there is nothing to react to yet.
std::string latest_reflection_likes(const std::vector<pref::ReflectedPreference>& reflections);

// "Title (genres): plot" card used where an item must be described in full.
std::string item_card(const corpus::ItemRecord& item, size_t plot_chars);

// Produce the next user utterance u_t. The opening turn speaks from the
// general narrative alone; later turns react to the rolling reflections.
// Utterances naming a forbidden title are regenerated once, then rejected.
dialogue::Utterance user_turn(const pref::PreferenceProfile& profile,
                              const dialogue::DialogueContext& context,
                              const std::vector<pref::ReflectedPreference>& reflections,
                              TextBackend& backend, const pref::PrefContext& ctx,
                              const pref::ForbiddenTitles& forbidden);

// Ask the backend which of two items fits the profile better. Returns 0 or
// 1; strict single-digit parse with one retry.
int pairwise_select(const std::string& profile_text, const corpus::ItemRecord& item_a,
                    const corpus::ItemRecord& item_b, TextBackend& backend,
                    const pref::PrefContext& ctx);

} // namespace crseval::agents

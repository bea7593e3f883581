#include "crseval/agents.hpp"

#include "crseval/errors.hpp"
#include "crseval/text.hpp"

namespace crseval::agents {

namespace {

const char* kSimulatorSystem = "You are simulating a movie watcher with persistent personal tastes.";

std::string join_phrases(const std::vector<std::string>& phrases) {
    std::string out;
    for (size_t i = 0; i < phrases.size(); ++i) {
        if (i) out += ", ";
        out += phrases[i];
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string render_reflections(const std::vector<pref::ReflectedPreference>& reflections) {
    std::string out;
    for (const auto& r : reflections) {
        for (const auto& p : r.per_item) {
            std::string line = "Turn " + std::to_string(r.turn) + ", item " + p.item_id + ":";
            if (!p.likes.empty()) line += " liked " + join_phrases(p.likes) + ";";
            if (!p.dislikes.empty()) line += " disliked " + join_phrases(p.dislikes) + ";";
            if (!out.empty()) out += "\n";
            out += line;
        }
    }
    return out.empty() ? "(no reactions yet)" : out;
}

std::string latest_reflection_likes(const std::vector<pref::ReflectedPreference>& reflections) {
    if (reflections.empty()) return "";
    std::string out;
    for (const auto& p : reflections.back().per_item) {
        for (const auto& like : p.likes) {
            if (!out.empty()) out += "\n";
            out += like;
        }
    }
    return out;
}

std::string item_card(const corpus::ItemRecord& item, size_t plot_chars) {
    std::string card = item.title;
    if (!item.genres.empty()) card += " (" + join_phrases(item.genres) + ")";
    if (!item.plot.empty()) card += ": " + text::truncate_chars(item.plot, plot_chars);
    return card;
}

dialogue::Utterance user_turn(const pref::PreferenceProfile& profile,
                              const dialogue::DialogueContext& context,
                              const std::vector<pref::ReflectedPreference>& reflections,
                              TextBackend& backend, const pref::PrefContext& ctx,
                              const pref::ForbiddenTitles& forbidden) {
    if (context.next_role() != "user") {
        throw DataError("user turn requires an empty dialogue or one ending with a recommender reply");
    }

    GenerationRequest req;
    req.stage = Stage::user_response;
    req.slots = {{"general_preferences", profile.general.narrative},
                 {"dialogue_history", context.render()},
                 {"reflections", render_reflections(reflections)},
                 {"latest_reflection_likes", latest_reflection_likes(reflections)}};
    req.messages = {{"system", kSimulatorSystem},
                    {"user", prompts::render(ctx.prompts().get("user_response"), req.slots)}};

    std::string reply;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (ctx.prompt_sink) ctx.prompt_sink(req);
        reply = trim(backend_generate(backend, req));
        if (reply.empty()) throw DataError("backend produced an empty user utterance");
        std::string hit = forbidden.first_hit(reply);
        if (hit.empty()) break;
        if (attempt == 1) {
            throw LeakageError("user utterance mentions held-out title '" + hit + "'");
        }
    }

    dialogue::Utterance u;
    u.role = "user";
    u.turn = context.completed_turns() + 1;
    u.text = reply;
    return u;
}

int pairwise_select(const std::string& profile_text, const corpus::ItemRecord& item_a,
                    const corpus::ItemRecord& item_b, TextBackend& backend,
                    const pref::PrefContext& ctx) {
    GenerationRequest req;
    req.stage = Stage::pairwise_selection;
    req.slots = {{"profile", profile_text},
                 {"item_a", item_card(item_a, ctx.plot_truncation_chars)},
                 {"item_b", item_card(item_b, ctx.plot_truncation_chars)}};
    req.messages = {{"system", kSimulatorSystem},
                    {"user", prompts::render(ctx.prompts().get("pairwise_selection"), req.slots)}};

    std::string raw;
    for (int attempt = 0; attempt <= ctx.max_parse_retries; ++attempt) {
        if (ctx.prompt_sink) ctx.prompt_sink(req);
        raw = trim(backend_generate(backend, req));
        if (raw == "0") return 0;
        if (raw == "1") return 1;
    }
    throw PreferenceParseError(raw);
}

} // namespace crseval::agents

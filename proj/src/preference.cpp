#include "crseval/preference.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "crseval/errors.hpp"
#include "crseval/text.hpp"

namespace crseval::pref {

using agents::GenerationRequest;
using agents::Message;
using agents::Stage;
using corpus::ItemRecord;
using nlohmann::json;

const char* source_name(PreferenceSource s) {
    switch (s) {
        case PreferenceSource::extracted_from_review: return "extracted_from_review";
        case PreferenceSource::reflected_on_unseen: return "reflected_on_unseen";
        case PreferenceSource::review_recap: return "review_recap";
    }
    return "unknown";
}

PreferenceSource source_from_name(const std::string& name) {
    if (name == "extracted_from_review") return PreferenceSource::extracted_from_review;
    if (name == "reflected_on_unseen") return PreferenceSource::reflected_on_unseen;
    if (name == "review_recap") return PreferenceSource::review_recap;
    throw DataError("unknown preference source: " + name);
}

const prompts::PromptLibrary& PrefContext::prompts() const {
    static const prompts::PromptLibrary fallback = prompts::PromptLibrary::builtin();
    return library ? *library : fallback;
}

ForbiddenTitles ForbiddenTitles::from_items(const corpus::Catalog& catalog,
                                            const std::vector<std::string>& item_ids) {
    ForbiddenTitles out;
    for (const auto& id : item_ids) {
        std::string norm = text::normalize_title(catalog.at(id).title);
        if (!norm.empty()) out.normalized.push_back(norm);
    }
    return out;
}

std::string ForbiddenTitles::first_hit(const std::string& body) const {
    for (const auto& title : normalized) {
        if (text::contains_normalized(body, title)) return title;
    }
    return {};
}

namespace {

const char* kSimulatorSystem = "You are simulating a movie watcher with persistent personal tastes.";

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        if (!out.empty()) out += "\n";
        out += l;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

GenerationRequest build_request(Stage stage, const std::string& template_name,
                                std::map<std::string, std::string> slots,
                                const PrefContext& ctx) {
    GenerationRequest req;
    req.stage = stage;
    req.slots = std::move(slots);
    req.messages = {{"system", kSimulatorSystem},
                    {"user", prompts::render(ctx.prompts().get(template_name), req.slots)}};
    return req;
}

std::string generate_logged(agents::TextBackend& backend, const GenerationRequest& req,
                            const PrefContext& ctx) {
    if (ctx.prompt_sink) ctx.prompt_sink(req);
    return agents::backend_generate(backend, req);
}

// Extract the outermost JSON object/array from free text; LLMs wrap JSON in
// prose often enough that strict-parse-then-scan is the practical contract.
json parse_json_block(const std::string& raw) {
    json parsed = json::parse(raw, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    size_t open = raw.find_first_of("{[");
    size_t close = raw.find_last_of("}]");
    if (open == std::string::npos || close == std::string::npos || close <= open) {
        return json(json::value_t::discarded);
    }
    return json::parse(raw.substr(open, close - open + 1), nullptr, false);
}

std::vector<std::string> clean_phrases(const json& arr) {
    if (!arr.is_array()) throw DataError("phrase list is not an array");
    std::vector<std::string> out;
    for (const auto& v : arr) {
        if (!v.is_string()) throw DataError("phrase is not a string");
        std::string phrase = trim(v.get<std::string>());
        if (phrase.empty()) throw DataError("empty phrase");
        out.push_back(phrase);
    }
    return out;
}

BinaryPreference parse_binary_block(const std::string& raw, const std::string& item_id,
                                    PreferenceSource source) {
    json parsed = parse_json_block(raw);
    if (parsed.is_discarded() || !parsed.is_object()) {
        throw PreferenceParseError(raw);
    }
    BinaryPreference pref;
    pref.item_id = item_id;
    pref.source = source;
    try {
        pref.likes = clean_phrases(parsed.value("likes", json::array()));
        pref.dislikes = clean_phrases(parsed.value("dislikes", json::array()));
    } catch (const DataError&) {
        throw PreferenceParseError(raw);
    }
    if (pref.likes.empty() && pref.dislikes.empty()) throw PreferenceParseError(raw);
    return pref;
}

} // namespace

BinaryPreference extract_binary_preferences(const std::string& review, const ItemRecord& item,
                                            agents::TextBackend& backend,
                                            const PrefContext& ctx) {
    if (trim(review).empty()) throw DataError("cannot extract preferences from an empty review");

    auto req = build_request(Stage::preference_extraction, "preference_extraction",
                             {{"item_title", item.title}, {"review", review}}, ctx);

    std::string raw;
    for (int attempt = 0; attempt <= ctx.max_parse_retries; ++attempt) {
        raw = generate_logged(backend, req, ctx);
        try {
            return parse_binary_block(raw, item.item_id, PreferenceSource::extracted_from_review);
        } catch (const PreferenceParseError&) {
            if (attempt == ctx.max_parse_retries) throw;
        }
    }
    throw PreferenceParseError(raw); // unreachable
}

GeneralPreference generate_general_preference(const std::vector<BinaryPreference>& seen_prefs,
                                              const std::vector<ItemRecord>& seen_items,
                                              agents::TextBackend& backend,
                                              const PrefContext& ctx,
                                              const ForbiddenTitles& forbidden) {
    if (seen_prefs.empty()) throw DataError("general preference requires at least one seen preference");
    std::set<std::string> seen_ids;
    for (const auto& item : seen_items) seen_ids.insert(item.item_id);
    for (const auto& pref : seen_prefs) {
        if (seen_ids.count(pref.item_id) == 0) {
            throw DataError("preference for item outside the seen set: " + pref.item_id);
        }
    }

    std::vector<std::string> likes, dislikes;
    std::vector<std::string> provenance;
    for (const auto& pref : seen_prefs) {
        provenance.push_back(pref.item_id);
        likes.insert(likes.end(), pref.likes.begin(), pref.likes.end());
        dislikes.insert(dislikes.end(), pref.dislikes.begin(), pref.dislikes.end());
    }

    auto req = build_request(Stage::general_preference, "general_preference",
                             {{"likes", join_lines(likes)},
                              {"dislikes", join_lines(dislikes)},
                              {"token_budget", std::to_string(ctx.narrative_token_budget)}},
                             ctx);

    // One regeneration on leakage, then hard failure.
    std::string narrative;
    for (int attempt = 0; attempt < 2; ++attempt) {
        narrative = trim(generate_logged(backend, req, ctx));
        if (narrative.empty()) throw PreferenceParseError("(empty narrative)");
        narrative = text::truncate_words(narrative, static_cast<size_t>(ctx.narrative_token_budget));
        std::string hit = forbidden.first_hit(narrative);
        if (hit.empty()) break;
        if (attempt == 1) {
            throw LeakageError("general-preference narrative mentions forbidden title '" + hit + "'");
        }
    }

    GeneralPreference general;
    general.user_id = ""; // caller fills user attribution
    general.narrative = narrative;
    general.provenance = std::move(provenance);
    return general;
}

GeneralPreference generate_target_biased_preference(const std::vector<ItemRecord>& target_items,
                                                    agents::TextBackend& backend,
                                                    const PrefContext& ctx) {
    if (target_items.empty()) throw DataError("target-biased preference requires at least one item");

    std::vector<std::string> genres, directors, stars, plots;
    std::set<std::string> seen_genre, seen_director, seen_star;
    std::vector<std::string> provenance;
    for (const auto& item : target_items) {
        provenance.push_back(item.item_id);
        for (const auto& g : item.genres) {
            if (seen_genre.insert(g).second) genres.push_back(g);
        }
        for (const auto& d : item.directors) {
            if (seen_director.insert(d).second) directors.push_back(d);
        }
        for (const auto& s : item.stars) {
            if (seen_star.insert(s).second) stars.push_back(s);
        }
        if (!item.plot.empty()) {
            plots.push_back(text::truncate_chars(item.plot, ctx.plot_truncation_chars));
        }
    }

    auto req = build_request(Stage::target_biased_preference, "target_biased_preference",
                             {{"genres", join(genres, ", ")},
                              {"directors", join(directors, ", ")},
                              {"stars", join(stars, ", ")},
                              {"plots", join_lines(plots)},
                              {"token_budget", std::to_string(ctx.narrative_token_budget)}},
                             ctx);

    // Titles must be absent from the constructed prompt even though every
    // attribute above derives from the targets.
    for (const auto& item : target_items) {
        std::string norm = text::normalize_title(item.title);
        for (const auto& msg : req.messages) {
            if (text::contains_normalized(msg.content, norm)) {
                throw DataError("target title '" + item.title +
                                "' leaked into the attribute-only prompt");
            }
        }
    }

    std::string narrative = trim(generate_logged(backend, req, ctx));
    if (narrative.empty()) throw PreferenceParseError("(empty narrative)");
    narrative = text::truncate_words(narrative, static_cast<size_t>(ctx.narrative_token_budget));

    GeneralPreference general;
    general.narrative = narrative;
    general.provenance = std::move(provenance);
    return general;
}

ReflectedPreference reflect(const std::vector<ItemRecord>& slate, const corpus::UserSplit& split,
                            const corpus::UserRecord& user, const GeneralPreference& general,
                            const std::string& dialogue_history, int turn,
                            agents::TextBackend& backend, const PrefContext& ctx) {
    if (turn < 2) throw DataError("reflection begins after the initial interaction (turn >= 2)");
    if (slate.empty()) throw DataError("cannot reflect on an empty slate");

    std::set<std::string> seen_set(split.seen.begin(), split.seen.end());

    std::vector<std::string> slate_lines, review_lines;
    json slate_json = json::array();
    std::set<std::string> slate_ids;
    for (const auto& item : slate) {
        slate_ids.insert(item.item_id);
        bool seen = seen_set.count(item.item_id) != 0;
        std::string line = "- [" + item.item_id + "] " + item.title;
        if (!item.genres.empty()) line += " (" + join(item.genres, ", ") + ")";
        if (!item.plot.empty()) {
            line += " - " + text::truncate_chars(item.plot, ctx.plot_truncation_chars);
        }
        slate_lines.push_back(line);
        std::string review;
        if (seen) {
            const auto* interaction = user.find_interaction(item.item_id);
            if (!interaction) {
                throw DataError("seen slate item " + item.item_id + " has no stored interaction for user " +
                                user.user_id);
            }
            review = interaction->review;
            review_lines.push_back(item.title + ": " + review);
        }
        slate_json.push_back(json{{"item_id", item.item_id},
                                  {"title", item.title},
                                  {"genres", item.genres},
                                  {"seen", seen},
                                  {"review", review}});
    }

    auto req = build_request(Stage::reflection, "reflection",
                             {{"general_preferences", general.narrative},
                              {"dialogue_history", dialogue_history},
                              {"slate_with_plots", join_lines(slate_lines)},
                              {"seen_reviews", review_lines.empty() ? "(none)" : join_lines(review_lines)},
                              {"slate_json", slate_json.dump()}},
                             ctx);

    auto parse_reflection = [&](const std::string& raw) {
        json parsed = parse_json_block(raw);
        if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("items")) {
            throw PreferenceParseError(raw);
        }
        std::map<std::string, BinaryPreference> by_id;
        for (const auto& entry : parsed["items"]) {
            if (!entry.is_object() || !entry.contains("item_id")) throw PreferenceParseError(raw);
            std::string id = entry["item_id"].get<std::string>();
            if (slate_ids.count(id) == 0 || by_id.count(id) != 0) throw PreferenceParseError(raw);
            PreferenceSource source = seen_set.count(id) != 0 ? PreferenceSource::review_recap
                                                              : PreferenceSource::reflected_on_unseen;
            by_id[id] = parse_binary_block(entry.dump(), id, source);
        }
        if (by_id.size() != slate.size()) throw PreferenceParseError(raw);

        ReflectedPreference reflected;
        reflected.turn = turn;
        for (const auto& item : slate) reflected.per_item.push_back(by_id.at(item.item_id));
        return reflected;
    };

    std::string raw;
    for (int attempt = 0; attempt <= ctx.max_parse_retries; ++attempt) {
        raw = generate_logged(backend, req, ctx);
        try {
            return parse_reflection(raw);
        } catch (const PreferenceParseError&) {
            if (attempt == ctx.max_parse_retries) throw;
        }
    }
    throw PreferenceParseError(raw); // unreachable
}

void validate_target_free(const GeneralPreference& general,
                          const std::vector<std::string>& targets) {
    std::set<std::string> target_set(targets.begin(), targets.end());
    for (const auto& id : general.provenance) {
        if (target_set.count(id) != 0) {
            throw DataError("target-free profile built from target item " + id);
        }
    }
}

json to_json(const BinaryPreference& p) {
    return json{{"item_id", p.item_id},
                {"likes", p.likes},
                {"dislikes", p.dislikes},
                {"source", source_name(p.source)}};
}

BinaryPreference binary_from_json(const json& j) {
    BinaryPreference p;
    p.item_id = j.at("item_id").get<std::string>();
    p.likes = j.at("likes").get<std::vector<std::string>>();
    p.dislikes = j.at("dislikes").get<std::vector<std::string>>();
    p.source = source_from_name(j.at("source").get<std::string>());
    return p;
}

json to_json(const GeneralPreference& g) {
    return json{{"user_id", g.user_id}, {"narrative", g.narrative}, {"provenance", g.provenance}};
}

GeneralPreference general_from_json(const json& j) {
    GeneralPreference g;
    g.user_id = j.at("user_id").get<std::string>();
    g.narrative = j.at("narrative").get<std::string>();
    g.provenance = j.at("provenance").get<std::vector<std::string>>();
    return g;
}

json to_json(const ReflectedPreference& r) {
    json items = json::array();
    for (const auto& p : r.per_item) items.push_back(to_json(p));
    return json{{"turn", r.turn}, {"items", std::move(items)}};
}

ReflectedPreference reflected_from_json(const json& j) {
    ReflectedPreference r;
    r.turn = j.at("turn").get<int>();
    for (const auto& e : j.at("items")) r.per_item.push_back(binary_from_json(e));
    return r;
}

} // namespace crseval::pref

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "crseval/backend.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include "crseval/errors.hpp"
#include "crseval/jsonl.hpp"
#include "crseval/text.hpp"

namespace crseval::agents {

using nlohmann::json;

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::preference_extraction: return "preference_extraction";
        case Stage::general_preference: return "general_preference";
        case Stage::target_biased_preference: return "target_biased_preference";
        case Stage::reflection: return "reflection";
        case Stage::user_response: return "user_response";
        case Stage::pairwise_selection: return "pairwise_selection";
        case Stage::judge: return "judge";
    }
    return "unknown";
}

std::string backend_generate(TextBackend& backend, const GenerationRequest& request) {
    if (request.messages.empty()) throw DataError("generation request with no messages");
    return backend.generate(request);
}

// ---------------------------------------------------------------------------
// Deterministic stub
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "the", "and", "with", "that", "this", "from", "have", "has",  "was",
        "were", "are", "is",  "its", "for", "but", "very", "into", "over",
        "a",   "an",  "of",  "to",  "in",  "on",  "at",  "as",   "by",
        "it",  "be",  "i",   "my",  "me",  "so",  "too", "they", "them",
        "you", "your", "one", "all", "out", "had", "been", "just", "film",
        "movie", "really", "about", "there", "their", "when", "which", "while",
    };
    return words;
}

const std::set<std::string>& negative_cues() {
    static const std::set<std::string> cues = {
        "boring", "bad",    "disappointing", "worst",   "dull", "weak",
        "poor",   "hate",   "hated",         "annoying", "tedious",
        "mess",   "flat",   "predictable",   "unsatisfying",
    };
    return cues;
}

std::vector<std::string> content_words(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& tok : text::tokenize(s)) {
        if (tok.size() < 3) continue;
        if (stopwords().count(tok) != 0) continue;
        out.push_back(tok);
    }
    return out;
}

// Group consecutive words into short phrases of up to three words.
std::vector<std::string> chunk_phrases(const std::vector<std::string>& words, size_t max_chunks) {
    std::vector<std::string> chunks;
    for (size_t i = 0; i < words.size() && chunks.size() < max_chunks; i += 3) {
        std::string phrase = words[i];
        for (size_t j = i + 1; j < std::min(words.size(), i + 3); ++j) phrase += " " + words[j];
        chunks.push_back(phrase);
    }
    return chunks;
}

json stub_extract(const std::string& review) {
    auto words = content_words(review);
    size_t neg_at = words.size();
    for (size_t i = 0; i < words.size(); ++i) {
        if (negative_cues().count(words[i]) != 0) {
            neg_at = i;
            break;
        }
    }
    std::vector<std::string> like_words(words.begin(), words.begin() + neg_at);
    std::vector<std::string> dislike_words(words.begin() + neg_at, words.end());
    auto likes = chunk_phrases(like_words, 3);
    auto dislikes = chunk_phrases(dislike_words, 3);
    if (likes.empty() && dislikes.empty()) likes.push_back("understated charm");
    return json{{"likes", likes}, {"dislikes", dislikes}};
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string line;
    while (std::getline(iss, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

std::string stub_general(const std::map<std::string, std::string>& slots) {
    auto likes = split_lines(slots.count("likes") ? slots.at("likes") : "");
    auto dislikes = split_lines(slots.count("dislikes") ? slots.at("dislikes") : "");
    if (likes.size() > 8) likes.resize(8);
    if (dislikes.size() > 4) dislikes.resize(4);
    std::string narrative = "Enjoys " + (likes.empty() ? std::string("a broad mix") : join(likes, ", ")) + ".";
    if (!dislikes.empty()) narrative += " Tends to avoid " + join(dislikes, ", ") + ".";
    return narrative;
}

std::string stub_target_biased(const std::map<std::string, std::string>& slots) {
    auto get = [&](const char* k) { return slots.count(k) ? slots.at(k) : std::string{}; };
    std::string narrative = "Drawn to " + (get("genres").empty() ? "varied" : get("genres")) + " stories";
    if (!get("directors").empty()) narrative += "; favors work by " + get("directors");
    if (!get("stars").empty()) narrative += "; admires performances from " + get("stars");
    narrative += ".";
    return narrative;
}

std::string first_phrase(const std::string& s) {
    size_t cut = s.find_first_of(".;");
    std::string phrase = cut == std::string::npos ? s : s.substr(0, cut);
    const std::string prefix = "Enjoys ";
    if (phrase.rfind(prefix, 0) == 0) phrase = phrase.substr(prefix.size());
    return phrase;
}

std::string stub_reflection(const std::map<std::string, std::string>& slots) {
    std::string narrative =
        slots.count("general_preferences") ? slots.at("general_preferences") : "";
    std::string narrative_lower = text::to_lower(narrative);
    json out = json::array();
    json slate = json::parse(slots.count("slate_json") ? slots.at("slate_json") : "[]");
    for (const auto& entry : slate) {
        json rec{{"item_id", entry.at("item_id").get<std::string>()},
                 {"likes", json::array()},
                 {"dislikes", json::array()}};
        if (entry.value("seen", false)) {
            json extracted = stub_extract(entry.value("review", std::string{}));
            rec["likes"] = extracted["likes"];
            rec["dislikes"] = extracted["dislikes"];
        } else {
            std::vector<std::string> matched;
            for (const auto& g : entry.value("genres", std::vector<std::string>{})) {
                if (!g.empty() && narrative_lower.find(text::to_lower(g)) != std::string::npos) {
                    matched.push_back(text::to_lower(g) + " elements");
                }
            }
            if (!matched.empty()) {
                rec["likes"] = matched;
            } else {
                auto genres = entry.value("genres", std::vector<std::string>{});
                if (!genres.empty()) {
                    rec["dislikes"] = std::vector<std::string>{text::to_lower(genres[0]) + " focus"};
                } else {
                    rec["dislikes"] = std::vector<std::string>{"unfamiliar style"};
                }
            }
        }
        out.push_back(std::move(rec));
    }
    return json{{"items", out}}.dump();
}

std::string stub_user_response(const std::map<std::string, std::string>& slots) {
    auto get = [&](const char* k) { return slots.count(k) ? slots.at(k) : std::string{}; };
    bool opening = get("dialogue_history").empty();
    std::string narrative_phrase = first_phrase(get("general_preferences"));
    if (opening) {
        return "Hi! I'm looking for movie recommendations. I generally enjoy " +
               narrative_phrase + ".";
    }
    std::string latest = get("latest_reflection_likes");
    if (!latest.empty()) {
        auto liked = split_lines(latest);
        return "Thanks for these. I'd enjoy more with " + liked.front() + ".";
    }
    return "Could you suggest something else along the lines of " + narrative_phrase + "?";
}

std::string stub_pairwise(const std::map<std::string, std::string>& slots) {
    auto get = [&](const char* k) { return slots.count(k) ? slots.at(k) : std::string{}; };
    auto profile_tokens = text::tokenize(get("profile"));
    std::set<std::string> profile(profile_tokens.begin(), profile_tokens.end());
    auto overlap = [&](const std::string& s) {
        size_t n = 0;
        for (const auto& tok : text::tokenize(s)) {
            if (profile.count(tok) != 0) ++n;
        }
        return n;
    };
    return overlap(get("item_b")) > overlap(get("item_a")) ? "1" : "0";
}

std::string stub_judge() {
    json out{
        {"proactiveness", {{"rationale", "Asks about tastes and keeps proposing new angles."}, {"score", 4}}},
        {"coherence", {{"rationale", "Replies follow the flow of the dialogue without abrupt jumps."}, {"score", 5}}},
        {"personalization", {{"rationale", "Suggestions connect to some stated preferences but not all."}, {"score", 3}}},
    };
    return out.dump();
}

} // namespace

std::string StubBackend::generate(const GenerationRequest& request) {
    switch (request.stage) {
        case Stage::preference_extraction: {
            auto it = request.slots.find("review");
            return stub_extract(it == request.slots.end() ? "" : it->second).dump();
        }
        case Stage::general_preference: return stub_general(request.slots);
        case Stage::target_biased_preference: return stub_target_biased(request.slots);
        case Stage::reflection: return stub_reflection(request.slots);
        case Stage::user_response: return stub_user_response(request.slots);
        case Stage::pairwise_selection: return stub_pairwise(request.slots);
        case Stage::judge: return stub_judge();
    }
    // Fallback: a stable function of the rendered messages.
    uint64_t h = seed_;
    for (const auto& m : request.messages) h = text::fnv1a64(m.role + "\x1f" + m.content, h);
    return "stub:" + text::to_hex(h);
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies)
    : queue_(replies.begin(), replies.end()) {}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::vector<std::string> replies;
    jsonl::for_each(path, [&](size_t, const json& obj) {
        replies.push_back(obj.at("reply").get<std::string>());
    });
    return ScriptedBackend(std::move(replies));
}

void ScriptedBackend::push(const std::string& reply) { queue_.push_back(reply); }

std::string ScriptedBackend::generate(const GenerationRequest&) {
    if (queue_.empty()) throw ScriptExhausted("scripted backend queue is empty");
    std::string reply = std::move(queue_.front());
    queue_.pop_front();
    return reply;
}

// ---------------------------------------------------------------------------
// Remote chat backend
// ---------------------------------------------------------------------------

int BackoffPolicy::delay_ms(int attempt, uint64_t jitter_seed) const {
    double d = base_ms * std::pow(factor, attempt - 1);
    if (jitter) {
        // +-25%, derived from the seed so even jittered schedules replay.
        uint64_t h = text::fnv1a64(std::to_string(attempt), jitter_seed);
        double frac = static_cast<double>(h % 1000) / 1000.0; // [0,1)
        d *= 0.75 + 0.5 * frac;
    }
    return static_cast<int>(d);
}

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttplibTransport(const std::string& base_url, int timeout_s) : client_(base_url) {
        client_.set_connection_timeout(timeout_s);
        client_.set_read_timeout(timeout_s);
        client_.set_write_timeout(timeout_s);
    }

    HttpResponse post(const std::string& path, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
        httplib::Headers hs;
        for (const auto& [k, v] : headers) hs.emplace(k, v);
        auto result = client_.Post(path, hs, body, "application/json");
        if (!result) return HttpResponse{0, "", httplib::to_string(result.error())};
        return HttpResponse{result->status, result->body, ""};
    }

private:
    httplib::Client client_;
};

} // namespace

bool retryable_status(int status) {
    return status == 0 || status == 429 || status >= 500;
}

SleepFn default_sleep() {
    return [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url,
                                                      int timeout_s) {
    return std::make_unique<HttplibTransport>(base_url, timeout_s);
}

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config,
                                     std::unique_ptr<HttpTransport> transport, SleepFn sleep)
    : config_(std::move(config)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (!transport_) {
        if (config_.endpoint.empty()) throw ConfigError("remote_chat backend requires an endpoint");
        transport_ = make_httplib_transport(config_.endpoint, config_.timeout_s);
    }
    if (!sleep_) sleep_ = default_sleep();
}

json RemoteChatBackend::build_request_body(const RemoteChatConfig& config,
                                           const std::vector<Message>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"model", config.model},
                {"temperature", config.temperature},
                {"messages", std::move(msgs)}};
}

std::string RemoteChatBackend::generate(const GenerationRequest& request) {
    std::string body = build_request_body(config_, request.messages).dump();
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    HttpResponse last;
    for (int attempt = 1; attempt <= config_.backoff.max_attempts; ++attempt) {
        last = transport_->post(config_.path, body, headers);
        if (last.status == 200) {
            json parsed = json::parse(last.body, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
                throw BackendUnavailable("malformed chat completion response: " + last.body);
            }
            return parsed["choices"][0].at("message").at("content").get<std::string>();
        }
        if (!retryable_status(last.status)) {
            throw BackendUnavailable("chat backend returned status " + std::to_string(last.status) +
                                     ": " + last.body);
        }
        if (attempt < config_.backoff.max_attempts) {
            sleep_(config_.backoff.delay_ms(attempt));
        }
    }
    std::string detail = last.status == 0 ? last.error : "status " + std::to_string(last.status);
    throw BackendUnavailable("chat backend unavailable after " +
                             std::to_string(config_.backoff.max_attempts) + " attempts (" + detail + ")");
}

} // namespace crseval::agents

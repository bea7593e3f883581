#pragma once

// Shared fixtures: toy corpora, scripted/recorded doubles, and brute-force
// oracles the test suites check library results against.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "crseval/adapters.hpp"
#include "crseval/backend.hpp"
#include "crseval/corpus.hpp"
#include "crseval/engine.hpp"
#include "crseval/metrics.hpp"
#include "crseval/rng.hpp"
#include "crseval/text.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using nlohmann::json;

// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = fs::temp_directory_path() /
                ("crseval_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

inline std::string write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
    return path;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Toy corpus
// ---------------------------------------------------------------------------

inline crseval::corpus::ItemRecord item(const std::string& id, const std::string& title,
                                        std::vector<std::string> genres = {},
                                        const std::string& plot = "",
                                        std::vector<std::string> directors = {},
                                        std::vector<std::string> stars = {}) {
    crseval::corpus::ItemRecord it;
    it.item_id = id;
    it.title = title;
    it.genres = std::move(genres);
    it.plot = plot;
    it.directors = std::move(directors);
    it.stars = std::move(stars);
    return it;
}

inline crseval::corpus::InteractionRecord interaction(const std::string& item_id, int rating,
                                                      const std::string& review,
                                                      std::optional<int64_t> ts = std::nullopt) {
    crseval::corpus::InteractionRecord rec;
    rec.item_id = item_id;
    rec.rating = rating;
    rec.review = review;
    rec.timestamp = ts;
    return rec;
}

// Small mixed-genre catalog used by unit tests.
inline crseval::corpus::Catalog toy_catalog() {
    crseval::corpus::Catalog c;
    c.add(item("m1", "Midnight Heist (1998)", {"Crime", "Thriller"},
               "A crew of safecrackers plans one last vault job under a city curfew.",
               {"R. Vos"}, {"A. Keller"}));
    c.add(item("m2", "Garden of Echoes", {"Drama"},
               "An estranged botanist returns home to tend her late mother's greenhouse.",
               {"L. Ames"}, {"B. Osei"}));
    c.add(item("m3", "Starlight Circuit", {"SciFi", "Adventure"},
               "Rival pilots race antique ships through a collapsing nebula.",
               {"R. Vos"}, {"C. Iwu"}));
    c.add(item("m4", "The Paper Lantern", {"Romance", "Drama"},
               "Two calligraphers exchange letters across a festival season.",
               {"M. Duarte"}, {"D. Laurent"}));
    c.add(item("m5", "Iron Harvest", {"War", "Drama"},
               "A field medic keeps a battalion together during a frozen retreat.",
               {"L. Ames"}, {"E. Marsh"}));
    c.add(item("m6", "Whistlestop", {"Comedy"},
               "A small-town stationmaster fakes a railway festival to save the line.",
               {"J. Park"}, {"F. Ngata"}));
    c.add(item("m7", "Cobalt Reef", {"Documentary"},
               "Divers chart a reef recovering after a decade of storm damage.",
               {"T. Brandt"}, {}));
    c.add(item("m8", "Hollow Crown Road", {"Horror", "Thriller"},
               "A night bus takes a detour through a town that is not on any map.",
               {"M. Duarte"}, {"G. Petrov"}));
    return c;
}

// ---------------------------------------------------------------------------
// Cohort corpus for end-to-end runs: 10 reviewed "regular" users plus filler
// users that pin the popularity top of the catalog to non-target items.
// ---------------------------------------------------------------------------

struct CohortCorpus {
    crseval::corpus::Catalog catalog;
    std::vector<crseval::corpus::UserRecord> cohort;  // users the engine runs
    std::vector<crseval::corpus::UserRecord> all;     // cohort + fillers (popularity source)
    std::vector<crseval::corpus::UserSplit> splits;   // hand-built: targets never popular
};

inline CohortCorpus cohort_corpus(int n_users = 10) {
    CohortCorpus cc;

    const std::vector<std::string> genres = {"Crime", "Drama", "SciFi", "Romance", "War",
                                             "Comedy", "Horror", "Mystery", "Western", "Noir"};
    // Ten heavily-interacted items that dominate the popularity ranking.
    for (int i = 1; i <= 10; ++i) {
        cc.catalog.add(item("b" + std::to_string(i), "Beacon Square " + std::to_string(i),
                            {genres[(i - 1) % genres.size()]},
                            "A sprawling ensemble piece set around a city square, part " +
                                std::to_string(i) + "."));
    }
    // Twenty lightly-interacted items; cohort targets come from these.
    for (int i = 1; i <= 20; ++i) {
        cc.catalog.add(item("r" + std::to_string(i), "Quiet Orchard " + std::to_string(i),
                            {genres[(i - 1) % genres.size()], "Drama"},
                            "A slow-burning character study in an orchard town, part " +
                                std::to_string(i) + "."));
    }

    // Reviews built from genre vocabulary; no review mentions any title.
    auto review_for = [&](const std::string& genre, int flavor) {
        std::string g = crseval::text::to_lower(genre);
        switch (flavor % 3) {
            case 0: return "Loved the " + g + " pacing and the patient, textured world.";
            case 1: return "The " + g + " tension lands well, with sharp dialogue throughout.";
            default: return "A rich " + g + " mood, though the ending felt predictable and flat.";
        }
    };

    for (int u = 1; u <= n_users; ++u) {
        crseval::corpus::UserRecord user;
        user.user_id = "u" + std::to_string(u);
        crseval::corpus::UserSplit split;
        split.user_id = user.user_id;
        split.rng_seed = 7;

        // Two popular items in the seen history (u1 gets b1/b2, u2 gets b2/b3, ...).
        for (int j = 0; j < 2; ++j) {
            std::string id = "b" + std::to_string((u - 1 + j) % 10 + 1);
            user.interactions.push_back(
                interaction(id, 7 + j, review_for(cc.catalog.at(id).genres[0], u + j)));
            split.seen.push_back(id);
        }
        // Eight seen regular items and five target regular items per user.
        for (int j = 0; j < 13; ++j) {
            std::string id = "r" + std::to_string((u * 3 + j) % 20 + 1);
            if (std::find(split.seen.begin(), split.seen.end(), id) != split.seen.end() ||
                std::find(split.targets.begin(), split.targets.end(), id) != split.targets.end()) {
                continue; // wrap-around duplicate; sizes checked below
            }
            user.interactions.push_back(
                interaction(id, 4 + (u + j) % 6, review_for(cc.catalog.at(id).genres[0], u + j)));
            (j < 8 ? split.seen : split.targets).push_back(id);
        }
        cc.cohort.push_back(user);
        cc.splits.push_back(split);
    }

    cc.all = cc.cohort;
    // Twenty filler users interacting with every popular item: counts 20+ vs
    // at most a handful for any regular item.
    for (int f = 1; f <= 20; ++f) {
        crseval::corpus::UserRecord filler;
        filler.user_id = "filler" + std::to_string(f);
        for (int i = 1; i <= 10; ++i) {
            filler.interactions.push_back(interaction("b" + std::to_string(i), 8, ""));
        }
        cc.all.push_back(filler);
    }
    return cc;
}

// ---------------------------------------------------------------------------
// Test doubles
// ---------------------------------------------------------------------------

// Canned HTTP responses plus a log of every request sent.
class RecordedTransport : public crseval::agents::HttpTransport {
public:
    struct Sent {
        std::string path;
        std::string body;
        std::vector<std::pair<std::string, std::string>> headers;
    };

    void push_response(int status, const std::string& body, const std::string& error = "") {
        responses_.push_back({status, body, error});
    }

    crseval::agents::HttpResponse post(
        const std::string& path, const std::string& body,
        const std::vector<std::pair<std::string, std::string>>& headers) override {
        sent.push_back({path, body, headers});
        if (responses_.empty()) return {0, "", "no canned response left"};
        auto rsp = responses_.front();
        responses_.erase(responses_.begin());
        return rsp;
    }

    std::vector<Sent> sent;

private:
    std::vector<crseval::agents::HttpResponse> responses_;
};

// Collects requested sleep durations instead of sleeping.
struct SleepRecorder {
    std::shared_ptr<std::vector<int>> delays = std::make_shared<std::vector<int>>();
    crseval::agents::SleepFn fn() {
        auto d = delays;
        return [d](int ms) { d->push_back(ms); };
    }
};

// Ranks items by token overlap between the latest user utterance and the
// item's title/genres, padding with item_id order. Deterministic stand-in
// for a CRS that actually listens.
class KeywordMatchCrs : public crseval::adapters::CrsAdapter {
public:
    explicit KeywordMatchCrs(const crseval::corpus::Catalog& catalog) : catalog_(catalog) {}

    crseval::adapters::TurnReply respond(const crseval::dialogue::DialogueContext& context,
                                         int k) override {
        std::string last_user;
        for (auto it = context.utterances().rbegin(); it != context.utterances().rend(); ++it) {
            if (it->role == "user") {
                last_user = it->text;
                break;
            }
        }
        std::set<std::string> query;
        for (const auto& tok : crseval::text::tokenize(last_user)) query.insert(tok);

        std::vector<std::pair<long, std::string>> scored;
        for (const auto& it : catalog_.items()) {
            std::string body = it.title;
            for (const auto& g : it.genres) body += " " + g;
            long score = 0;
            for (const auto& tok : crseval::text::tokenize(body)) {
                if (query.count(tok) != 0) ++score;
            }
            scored.emplace_back(score, it.item_id);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });

        crseval::adapters::TurnReply reply;
        reply.utterance = "I looked for matches to what you said.";
        for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i) {
            reply.item_ids.push_back(scored[i].second);
        }
        return reply;
    }

    std::string describe() const override { return "keyword_match"; }

private:
    const crseval::corpus::Catalog& catalog_;
};

// Draws K distinct random items per turn.
class RandomCrs : public crseval::adapters::CrsAdapter {
public:
    RandomCrs(const crseval::corpus::Catalog& catalog, uint64_t seed)
        : rng_(seed) {
        for (const auto& it : catalog.items()) ids_.push_back(it.item_id);
    }

    crseval::adapters::TurnReply respond(const crseval::dialogue::DialogueContext&,
                                         int k) override {
        crseval::adapters::TurnReply reply;
        reply.utterance = "Here are a few picks.";
        reply.item_ids =
            crseval::sample_without_replacement(ids_, static_cast<size_t>(k), rng_);
        return reply;
    }

    std::string describe() const override { return "random"; }

private:
    std::vector<std::string> ids_;
    crseval::SeededRng rng_;
};

// ---------------------------------------------------------------------------
// Metric oracles and synthetic fixtures
// ---------------------------------------------------------------------------

// Brute-force PC: materialize the cumulative union per user from scratch and
// average exact per-user fractions. Mirrors the definition, not the library.
inline crseval::metrics::Rational pc_oracle(const std::vector<crseval::metrics::UserSlates>& users,
                                            int t) {
    using crseval::metrics::Rational;
    if (t == 0) return Rational(0);
    Rational sum(0);
    long long n = 0;
    for (const auto& u : users) {
        if (u.slates.size() < static_cast<size_t>(t)) continue;
        std::set<std::string> covered;
        for (int x = 1; x <= t; ++x) {
            covered.insert(u.slates[x - 1].begin(), u.slates[x - 1].end());
        }
        std::set<std::string> targets(u.targets.begin(), u.targets.end());
        long long hits = 0;
        for (const auto& y : targets) hits += covered.count(y) ? 1 : 0;
        sum += Rational(hits, static_cast<long long>(targets.size()));
        ++n;
    }
    return n == 0 ? Rational(0) : sum / Rational(n);
}

// Random cohort: up to `max_users` users, each with 1..max_turns slates of
// `slate_size` drawn from an item universe, and 1..8 targets.
inline std::vector<crseval::metrics::UserSlates> random_cohort(crseval::SeededRng& rng,
                                                               size_t max_users = 10,
                                                               int max_turns = 20,
                                                               int slate_size = 4,
                                                               size_t universe = 50) {
    std::vector<std::string> items;
    for (size_t i = 0; i < universe; ++i) items.push_back("i" + std::to_string(i));

    size_t n_users = 1 + rng.bounded(max_users);
    std::vector<crseval::metrics::UserSlates> cohort;
    for (size_t u = 0; u < n_users; ++u) {
        crseval::metrics::UserSlates us;
        us.user_id = "su" + std::to_string(u);
        size_t n_targets = 1 + rng.bounded(8);
        us.targets = crseval::sample_without_replacement(items, n_targets, rng);
        size_t turns = 1 + rng.bounded(static_cast<size_t>(max_turns));
        for (size_t t = 0; t < turns; ++t) {
            us.slates.push_back(
                crseval::sample_without_replacement(items, static_cast<size_t>(slate_size), rng));
        }
        cohort.push_back(std::move(us));
    }
    return cohort;
}

} // namespace testsupport

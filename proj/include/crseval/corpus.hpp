#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace crseval::corpus {

struct ItemRecord {
    std::string item_id;
    std::string title;
    std::vector<std::string> genres;
    std::vector<std::string> directors;
    std::vector<std::string> stars;
    std::string plot; // may be empty
};

struct InteractionRecord {
    std::string item_id;
    int rating = 0; // stars on the source site's scale
    std::string review;
    std::optional<int64_t> timestamp; // epoch seconds
};

struct UserRecord {
    std::string user_id;
    std::vector<InteractionRecord> interactions;

    const InteractionRecord* find_interaction(const std::string& item_id) const;
};

// Per-user partition of the interaction history into the set the simulator
// is initialized from (seen) and the held-out set metrics score against
// (targets).
struct UserSplit {
    std::string user_id;
    std::vector<std::string> seen;
    std::vector<std::string> targets;
    uint64_t rng_seed = 0;
};

struct RatingScale {
    int min = 1;
    int max = 10; // IMDB-style default
};

// Catalog keyed by item_id, preserving ingest order for stable iteration.
class Catalog {
public:
    void add(ItemRecord item); // throws DuplicateIdError
    bool contains(const std::string& item_id) const;
    const ItemRecord& at(const std::string& item_id) const; // throws DataError
    const ItemRecord* find(const std::string& item_id) const;
    size_t size() const { return items_.size(); }
    const std::vector<ItemRecord>& items() const { return items_; }

private:
    std::vector<ItemRecord> items_;
    std::map<std::string, size_t> index_;
};

struct AlignmentReport {
    size_t users_in = 0;
    size_t users_kept = 0;
    size_t users_dropped = 0;
    size_t interactions_in = 0;
    size_t interactions_kept = 0;
    size_t interactions_dropped_unresolved = 0;
    size_t interactions_dropped_duplicate = 0;
};

// One item object per line; duplicate ids and malformed lines are hard
// errors carrying the id / line number.
Catalog ingest_catalog(const std::string& path);

// One user object per line. Ratings outside the scale are hard errors.
std::vector<UserRecord> ingest_users(const std::string& path,
                                     const RatingScale& scale = {});

// Keep only interactions that resolve in the catalog, collapse repeat
// interactions with one item to the latest (by timestamp, else last
// occurrence), and drop users left with fewer than k_min interactions.
std::vector<UserRecord> align_users(const std::vector<UserRecord>& users,
                                    const Catalog& catalog, int k_min,
                                    AlignmentReport* report = nullptr);

// Restrict `catalog` to items shared with `other`. Matches by item_id; when
// an id is absent on the other side, falls back to normalized-title + year
// alignment keys.
Catalog intersect_catalogs(const Catalog& catalog, const Catalog& other,
                           size_t* matched_by_title = nullptr);

enum class SplitMode { random, chronological };

// Sample n_targets interactions as the target set; the rest is seen.
// Deterministic for a fixed (user, n_targets, seed). Chronological mode
// holds out the latest items instead of sampling.
UserSplit split_user(const UserRecord& user, int n_targets, uint64_t seed,
                     SplitMode mode = SplitMode::random);

// Serialization (corpus line formats and the splits file).
nlohmann::json to_json(const ItemRecord& item);
ItemRecord item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UserRecord& user);
UserRecord user_from_json(const nlohmann::json& j, const RatingScale& scale);
nlohmann::json to_json(const UserSplit& split);
UserSplit split_from_json(const nlohmann::json& j);

void write_catalog(const Catalog& catalog, const std::string& path);
void write_users(const std::vector<UserRecord>& users, const std::string& path);
void write_splits(const std::vector<UserSplit>& splits, const std::string& path);
std::vector<UserSplit> read_splits(const std::string& path);

} // namespace crseval::corpus

#include "crseval/corpus.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "crseval/errors.hpp"
#include "crseval/jsonl.hpp"
#include "crseval/rng.hpp"
#include "crseval/text.hpp"

namespace crseval::corpus {

using nlohmann::json;

const InteractionRecord* UserRecord::find_interaction(const std::string& item_id) const {
    for (const auto& it : interactions) {
        if (it.item_id == item_id) return &it;
    }
    return nullptr;
}

void Catalog::add(ItemRecord item) {
    if (index_.count(item.item_id) != 0) throw DuplicateIdError(item.item_id);
    index_[item.item_id] = items_.size();
    items_.push_back(std::move(item));
}

bool Catalog::contains(const std::string& item_id) const {
    return index_.count(item_id) != 0;
}

const ItemRecord& Catalog::at(const std::string& item_id) const {
    auto it = index_.find(item_id);
    if (it == index_.end()) throw DataError("unknown item_id: " + item_id);
    return items_[it->second];
}

const ItemRecord* Catalog::find(const std::string& item_id) const {
    auto it = index_.find(item_id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
    return out;
}

} // namespace

json to_json(const ItemRecord& item) {
    return json{{"item_id", item.item_id}, {"title", item.title},
                {"genres", item.genres},   {"directors", item.directors},
                {"stars", item.stars},     {"plot", item.plot}};
}

ItemRecord item_from_json(const json& j) {
    ItemRecord item;
    item.item_id = j.at("item_id").get<std::string>();
    item.title = j.at("title").get<std::string>();
    if (item.item_id.empty()) throw DataError("empty item_id");
    if (item.title.empty()) throw DataError("empty title for item " + item.item_id);
    item.genres = string_list(j, "genres");
    item.directors = string_list(j, "directors");
    item.stars = string_list(j, "stars");
    item.plot = j.value("plot", std::string{});
    return item;
}

json to_json(const UserRecord& user) {
    json inters = json::array();
    for (const auto& it : user.interactions) {
        json o{{"item_id", it.item_id}, {"rating", it.rating}, {"review", it.review}};
        if (it.timestamp) o["timestamp"] = *it.timestamp;
        inters.push_back(std::move(o));
    }
    return json{{"user_id", user.user_id}, {"interactions", std::move(inters)}};
}

UserRecord user_from_json(const json& j, const RatingScale& scale) {
    UserRecord user;
    user.user_id = j.at("user_id").get<std::string>();
    if (user.user_id.empty()) throw DataError("empty user_id");
    for (const auto& o : j.at("interactions")) {
        InteractionRecord rec;
        rec.item_id = o.at("item_id").get<std::string>();
        rec.rating = o.at("rating").get<int>();
        if (rec.rating < scale.min || rec.rating > scale.max) {
            throw DataError("rating " + std::to_string(rec.rating) + " outside scale [" +
                            std::to_string(scale.min) + "," + std::to_string(scale.max) +
                            "] for user " + user.user_id);
        }
        rec.review = o.value("review", std::string{});
        if (o.contains("timestamp") && !o.at("timestamp").is_null()) {
            rec.timestamp = o.at("timestamp").get<int64_t>();
        }
        user.interactions.push_back(std::move(rec));
    }
    return user;
}

json to_json(const UserSplit& split) {
    return json{{"user_id", split.user_id},
                {"seed", split.rng_seed},
                {"seen", split.seen},
                {"targets", split.targets}};
}

UserSplit split_from_json(const json& j) {
    UserSplit s;
    s.user_id = j.at("user_id").get<std::string>();
    s.rng_seed = j.at("seed").get<uint64_t>();
    s.seen = j.at("seen").get<std::vector<std::string>>();
    s.targets = j.at("targets").get<std::vector<std::string>>();
    return s;
}

Catalog ingest_catalog(const std::string& path) {
    Catalog catalog;
    jsonl::for_each(path, [&](size_t line_no, const json& obj) {
        ItemRecord item;
        try {
            item = item_from_json(obj);
        } catch (const DataError& e) {
            throw ParseError(path, line_no, e.what());
        } catch (const json::exception& e) {
            throw ParseError(path, line_no, e.what());
        }
        catalog.add(std::move(item)); // duplicate id propagates as a hard error
    });
    return catalog;
}

std::vector<UserRecord> ingest_users(const std::string& path, const RatingScale& scale) {
    std::vector<UserRecord> users;
    std::unordered_set<std::string> seen_ids;
    jsonl::for_each(path, [&](size_t line_no, const json& obj) {
        UserRecord user;
        try {
            user = user_from_json(obj, scale);
        } catch (const DataError& e) {
            throw ParseError(path, line_no, e.what());
        } catch (const json::exception& e) {
            throw ParseError(path, line_no, e.what());
        }
        if (!seen_ids.insert(user.user_id).second) {
            throw ParseError(path, line_no, "duplicate user_id: " + user.user_id);
        }
        users.push_back(std::move(user));
    });
    return users;
}

std::vector<UserRecord> align_users(const std::vector<UserRecord>& users,
                                    const Catalog& catalog, int k_min,
                                    AlignmentReport* report) {
    if (k_min < 1) throw ConfigError("k_min must be >= 1");
    AlignmentReport local;
    local.users_in = users.size();

    std::vector<UserRecord> kept;
    for (const auto& user : users) {
        local.interactions_in += user.interactions.size();

        // Resolve against the catalog, keeping one interaction per item:
        // the latest by timestamp, else the last occurrence.
        std::vector<InteractionRecord> resolved;
        std::unordered_map<std::string, size_t> by_item;
        for (const auto& rec : user.interactions) {
            if (!catalog.contains(rec.item_id)) {
                ++local.interactions_dropped_unresolved;
                continue;
            }
            auto it = by_item.find(rec.item_id);
            if (it == by_item.end()) {
                by_item[rec.item_id] = resolved.size();
                resolved.push_back(rec);
            } else {
                ++local.interactions_dropped_duplicate;
                InteractionRecord& held = resolved[it->second];
                bool replace = true;
                if (held.timestamp && rec.timestamp) replace = *rec.timestamp >= *held.timestamp;
                if (replace) held = rec;
            }
        }

        if (resolved.size() < static_cast<size_t>(k_min)) {
            ++local.users_dropped;
            continue;
        }
        local.interactions_kept += resolved.size();
        ++local.users_kept;
        kept.push_back(UserRecord{user.user_id, std::move(resolved)});
    }

    if (report) *report = local;
    return kept;
}

Catalog intersect_catalogs(const Catalog& catalog, const Catalog& other,
                           size_t* matched_by_title) {
    std::unordered_set<std::string> other_keys;
    for (const auto& item : other.items()) {
        if (auto key = text::alignment_key(item.title)) other_keys.insert(*key);
    }
    size_t title_matches = 0;
    Catalog out;
    for (const auto& item : catalog.items()) {
        if (other.contains(item.item_id)) {
            out.add(item);
            continue;
        }
        auto key = text::alignment_key(item.title);
        if (key && other_keys.count(*key) != 0) {
            out.add(item);
            ++title_matches;
        }
    }
    if (matched_by_title) *matched_by_title = title_matches;
    return out;
}

UserSplit split_user(const UserRecord& user, int n_targets, uint64_t seed, SplitMode mode) {
    if (n_targets < 1) throw ConfigError("n_targets must be >= 1");
    if (static_cast<size_t>(n_targets) >= user.interactions.size()) {
        throw DataError("n_targets (" + std::to_string(n_targets) +
                        ") must be smaller than the interaction count (" +
                        std::to_string(user.interactions.size()) + ") for user " +
                        user.user_id);
    }

    std::vector<std::string> ids;
    ids.reserve(user.interactions.size());
    for (const auto& rec : user.interactions) ids.push_back(rec.item_id);

    UserSplit split;
    split.user_id = user.user_id;
    split.rng_seed = seed;

    std::set<std::string> target_set;
    if (mode == SplitMode::chronological) {
        // Hold out the latest items; interactions without timestamps keep
        // their original order via stable sort.
        std::vector<size_t> order(ids.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            int64_t ta = user.interactions[a].timestamp.value_or(0);
            int64_t tb = user.interactions[b].timestamp.value_or(0);
            return ta < tb;
        });
        for (size_t i = order.size() - static_cast<size_t>(n_targets); i < order.size(); ++i) {
            target_set.insert(ids[order[i]]);
        }
    } else {
        SeededRng rng(derive_seed(seed, "split:" + user.user_id));
        auto sampled = sample_without_replacement(ids, static_cast<size_t>(n_targets), rng);
        target_set.insert(sampled.begin(), sampled.end());
    }

    for (const auto& id : ids) {
        if (target_set.count(id) != 0) {
            split.targets.push_back(id);
        } else {
            split.seen.push_back(id);
        }
    }
    return split;
}

void write_catalog(const Catalog& catalog, const std::string& path) {
    jsonl::Writer w(path);
    for (const auto& item : catalog.items()) w.write(to_json(item));
}

void write_users(const std::vector<UserRecord>& users, const std::string& path) {
    jsonl::Writer w(path);
    for (const auto& user : users) w.write(to_json(user));
}

void write_splits(const std::vector<UserSplit>& splits, const std::string& path) {
    jsonl::Writer w(path);
    for (const auto& split : splits) w.write(to_json(split));
}

std::vector<UserSplit> read_splits(const std::string& path) {
    std::vector<UserSplit> splits;
    jsonl::for_each(path, [&](size_t line_no, const json& obj) {
        try {
            splits.push_back(split_from_json(obj));
        } catch (const json::exception& e) {
            throw ParseError(path, line_no, e.what());
        }
    });
    return splits;
}

} // namespace crseval::corpus

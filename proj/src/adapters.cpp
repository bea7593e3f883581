#include "crseval/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "crseval/errors.hpp"
#include "crseval/jsonl.hpp"
#include "crseval/text.hpp"

namespace crseval::adapters {

using nlohmann::json;

void validate_slate(const std::vector<std::string>& item_ids, const corpus::Catalog& catalog,
                    int k, const std::string& adapter_name) {
    if (static_cast<int>(item_ids.size()) != k) {
        throw AdapterContractViolation(adapter_name + " returned " +
                                       std::to_string(item_ids.size()) + " items, expected " +
                                       std::to_string(k));
    }
    std::set<std::string> seen;
    for (const auto& id : item_ids) {
        if (!seen.insert(id).second) {
            throw AdapterContractViolation(adapter_name + " repeated item " + id + " in one slate");
        }
        if (!catalog.contains(id)) {
            throw AdapterContractViolation(adapter_name + " returned unknown item " + id);
        }
    }
}

TurnReply crs_turn(CrsAdapter& adapter, const dialogue::DialogueContext& context,
                   const corpus::Catalog& catalog, int k) {
    if (context.next_role() != "system") {
        throw DataError("recommender turn requires the dialogue to end with a user utterance");
    }
    TurnReply reply = adapter.respond(context, k);
    validate_slate(reply.item_ids, catalog, k, adapter.describe());
    return reply;
}

namespace {

std::string titles_sentence(const corpus::Catalog& catalog, const std::vector<std::string>& ids,
                            const std::string& lead) {
    std::string out = lead;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += i + 1 == ids.size() ? ", and " : ", ";
        out += catalog.at(ids[i]).title;
    }
    out += ".";
    return out;
}

} // namespace

std::map<std::string, long> interaction_counts(const std::vector<corpus::UserRecord>& users) {
    std::map<std::string, long> counts;
    for (const auto& user : users) {
        for (const auto& it : user.interactions) ++counts[it.item_id];
    }
    return counts;
}

PopularityAdapter::PopularityAdapter(const corpus::Catalog& catalog,
                                     const std::vector<corpus::UserRecord>& users)
    : PopularityAdapter(catalog, interaction_counts(users)) {}

PopularityAdapter::PopularityAdapter(const corpus::Catalog& catalog,
                                     const std::map<std::string, long>& counts)
    : catalog_(catalog) {
    for (const auto& item : catalog.items()) ranking_.push_back(item.item_id);
    std::sort(ranking_.begin(), ranking_.end(), [&](const std::string& a, const std::string& b) {
        long ca = counts.count(a) ? counts.at(a) : 0;
        long cb = counts.count(b) ? counts.at(b) : 0;
        if (ca != cb) return ca > cb;
        return a < b;
    });
}

TurnReply PopularityAdapter::respond(const dialogue::DialogueContext&, int k) {
    if (k < 1 || static_cast<size_t>(k) > ranking_.size()) {
        throw AdapterContractViolation("popularity adapter cannot produce a slate of " +
                                       std::to_string(k) + " from " +
                                       std::to_string(ranking_.size()) + " items");
    }
    TurnReply reply;
    reply.item_ids.assign(ranking_.begin(), ranking_.begin() + k);
    reply.utterance = titles_sentence(catalog_, reply.item_ids,
                                      "Here are some widely loved picks: ");
    return reply;
}

HashEmbedder::HashEmbedder(size_t dim) : dim_(dim) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<double> HashEmbedder::embed(const std::string& body) const {
    std::vector<double> vec(dim_, 0.0);
    for (const auto& token : text::tokenize(body)) {
        uint64_t h = text::fnv1a64(token);
        size_t idx = static_cast<size_t>(h % dim_);
        double sign = (h >> 63) ? -1.0 : 1.0;
        vec[idx] += sign;
    }
    return vec;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("cosine over mismatched dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string EmbeddingRetrievalAdapter::item_text(const corpus::ItemRecord& item) {
    std::string body = item.title;
    for (const auto& g : item.genres) body += " " + g;
    for (const auto& d : item.directors) body += " " + d;
    for (const auto& s : item.stars) body += " " + s;
    if (!item.plot.empty()) body += " " + item.plot;
    return body;
}

EmbeddingRetrievalAdapter::EmbeddingRetrievalAdapter(const corpus::Catalog& catalog, size_t dim)
    : catalog_(catalog), embedder_(dim) {
    for (const auto& item : catalog.items()) {
        item_vectors_.emplace_back(item.item_id, embedder_.embed(item_text(item)));
    }
}

TurnReply EmbeddingRetrievalAdapter::respond(const dialogue::DialogueContext& context, int k) {
    if (k < 1 || static_cast<size_t>(k) > item_vectors_.size()) {
        throw AdapterContractViolation("embedding adapter cannot produce a slate of " +
                                       std::to_string(k) + " from " +
                                       std::to_string(item_vectors_.size()) + " items");
    }
    std::vector<double> query = embedder_.embed(context.render());

    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(item_vectors_.size());
    for (const auto& [id, vec] : item_vectors_) scored.emplace_back(cosine(query, vec), id);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    TurnReply reply;
    for (int i = 0; i < k; ++i) reply.item_ids.push_back(scored[i].second);
    reply.utterance = titles_sentence(catalog_, reply.item_ids,
                                      "Based on what you've told me, you might enjoy: ");
    return reply;
}

void ScriptedCrs::push(TurnReply reply) { queue_.push_back(std::move(reply)); }

std::unique_ptr<ScriptedCrs> ScriptedCrs::from_file(const std::string& path) {
    auto crs = std::make_unique<ScriptedCrs>();
    jsonl::for_each(path, [&](size_t, const json& obj) {
        TurnReply reply;
        reply.utterance = obj.at("utterance").get<std::string>();
        reply.item_ids = obj.at("items").get<std::vector<std::string>>();
        crs->push(std::move(reply));
    });
    return crs;
}

TurnReply ScriptedCrs::respond(const dialogue::DialogueContext&, int) {
    if (next_ >= queue_.size()) throw ScriptExhausted("scripted recommender has no turn " +
                                                      std::to_string(next_ + 1));
    return queue_[next_++];
}

json RemoteCrsAdapter::build_request_body(const RemoteCrsConfig& config,
                                          const dialogue::DialogueContext& context, int k) {
    json turns = json::array();
    for (const auto& u : context.utterances()) {
        turns.push_back(json{{"role", u.role}, {"text", u.text}});
    }
    return json{{"protocol", config.protocol}, {"dialogue", std::move(turns)}, {"k", k}};
}

RemoteCrsAdapter::RemoteCrsAdapter(RemoteCrsConfig config, const corpus::Catalog& catalog,
                                   std::shared_ptr<agents::HttpTransport> transport,
                                   agents::SleepFn sleep)
    : config_(std::move(config)), catalog_(catalog), transport_(std::move(transport)),
      sleep_(std::move(sleep)) {
    if (!transport_) {
        if (config_.endpoint.empty()) throw ConfigError("remote recommender needs an endpoint");
        transport_ = agents::make_httplib_transport(config_.endpoint, config_.timeout_s);
    }
    if (!sleep_) sleep_ = agents::default_sleep();
}

TurnReply RemoteCrsAdapter::respond(const dialogue::DialogueContext& context, int k) {
    std::string body = build_request_body(config_, context, k).dump();
    std::vector<std::pair<std::string, std::string>> headers;

    agents::HttpResponse rsp;
    for (int attempt = 1; attempt <= config_.backoff.max_attempts; ++attempt) {
        rsp = transport_->post(config_.path, body, headers);
        if (rsp.status == 200) {
            json parsed = json::parse(rsp.body, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("utterance") || !parsed.contains("items")) {
                throw AdapterContractViolation(describe() + " returned a malformed turn payload");
            }
            TurnReply reply;
            reply.utterance = parsed["utterance"].get<std::string>();
            reply.item_ids = parsed["items"].get<std::vector<std::string>>();
            return reply;
        }
        if (!agents::retryable_status(rsp.status)) {
            throw AdapterUnavailable(describe() + " answered status " + std::to_string(rsp.status));
        }
        if (attempt < config_.backoff.max_attempts) {
            sleep_(config_.backoff.delay_ms(attempt, 0));
        }
    }
    throw AdapterUnavailable(describe() + " unavailable after " +
                             std::to_string(config_.backoff.max_attempts) + " attempts: " +
                             (rsp.error.empty() ? "status " + std::to_string(rsp.status) : rsp.error));
}

const char* adapter_kind_name(AdapterKind kind) {
    switch (kind) {
        case AdapterKind::remote_http: return "remote_http";
        case AdapterKind::embedding_retrieval: return "embedding_retrieval";
        case AdapterKind::popularity: return "popularity";
        case AdapterKind::scripted: return "scripted";
    }
    return "unknown";
}

AdapterKind adapter_kind_from_name(const std::string& name) {
    if (name == "remote_http") return AdapterKind::remote_http;
    if (name == "embedding_retrieval") return AdapterKind::embedding_retrieval;
    if (name == "popularity") return AdapterKind::popularity;
    if (name == "scripted") return AdapterKind::scripted;
    throw ConfigError("unknown recommender kind: " + name);
}

std::unique_ptr<CrsAdapter> make_adapter(const AdapterConfig& config,
                                         const corpus::Catalog& catalog,
                                         const std::vector<corpus::UserRecord>& users) {
    switch (config.kind) {
        case AdapterKind::popularity:
            return std::make_unique<PopularityAdapter>(catalog, users);
        case AdapterKind::embedding_retrieval:
            return std::make_unique<EmbeddingRetrievalAdapter>(catalog, config.embedding_dim);
        case AdapterKind::scripted:
            if (config.script_path.empty()) throw ConfigError("scripted recommender needs a script path");
            return ScriptedCrs::from_file(config.script_path);
        case AdapterKind::remote_http: {
            RemoteCrsConfig remote;
            remote.endpoint = config.endpoint;
            remote.timeout_s = config.timeout_s;
            return std::make_unique<RemoteCrsAdapter>(std::move(remote), catalog);
        }
    }
    throw ConfigError("unhandled recommender kind");
}

} // namespace crseval::adapters

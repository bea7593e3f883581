#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crseval/backend.hpp"
#include "crseval/corpus.hpp"
#include "crseval/dialogue.hpp"

namespace crseval::adapters {

// One recommender turn: utterance r_t plus the top-K slate P_t.
struct TurnReply {
    std::string utterance;
    std::vector<std::string> item_ids;
};

class CrsAdapter {
public:
    virtual ~CrsAdapter() = default;
    // context ends with the user utterance the reply answers.
    virtual TurnReply respond(const dialogue::DialogueContext& context, int k) = 0;
    virtual std::string describe() const = 0;
};

// Enforces the slate contract: exactly k distinct ids, all resolvable.
void validate_slate(const std::vector<std::string>& item_ids, const corpus::Catalog& catalog,
                    int k, const std::string& adapter_name);

// Runs one recommender turn and validates the slate before anyone consumes it.
TurnReply crs_turn(CrsAdapter& adapter, const dialogue::DialogueContext& context,
                   const corpus::Catalog& catalog, int k);

// Most-interacted items first; ties broken by item_id ascending. Ignores the
// dialogue entirely, which is exactly what makes it a useful floor.
class PopularityAdapter : public CrsAdapter {
public:
    PopularityAdapter(const corpus::Catalog& catalog,
                      const std::vector<corpus::UserRecord>& users);
    PopularityAdapter(const corpus::Catalog& catalog,
                      const std::map<std::string, long>& interaction_counts);

    TurnReply respond(const dialogue::DialogueContext& context, int k) override;
    std::string describe() const override { return "popularity"; }

    const std::vector<std::string>& ranking() const { return ranking_; }

private:
    const corpus::Catalog& catalog_;
    std::vector<std::string> ranking_; // full catalog, best first
};

std::map<std::string, long> interaction_counts(const std::vector<corpus::UserRecord>& users);

// Deterministic feature-hash embedding: each token hashes to a coordinate,
// signed by one hash bit. Stands in for a remote embedding endpoint.
class HashEmbedder {
public:
    explicit HashEmbedder(size_t dim = 256);
    std::vector<double> embed(const std::string& text) const;
    size_t dim() const { return dim_; }

private:
    size_t dim_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Ranks the catalog by cosine similarity between each item's text and the
// rendered dialogue. Ties broken by item_id ascending.
class EmbeddingRetrievalAdapter : public CrsAdapter {
public:
    EmbeddingRetrievalAdapter(const corpus::Catalog& catalog, size_t dim = 256);

    TurnReply respond(const dialogue::DialogueContext& context, int k) override;
    std::string describe() const override { return "embedding_retrieval"; }

    static std::string item_text(const corpus::ItemRecord& item);

private:
    const corpus::Catalog& catalog_;
    HashEmbedder embedder_;
    std::vector<std::pair<std::string, std::vector<double>>> item_vectors_;
};

// Replays canned turns, one per respond() call. Used by fixtures that need an
// exact scripted CRS (bias demonstrations, wire-free loop tests).
class ScriptedCrs : public CrsAdapter {
public:
    void push(TurnReply reply);
    // JSONL, one {"utterance":..., "items":[...]} object per turn.
    static std::unique_ptr<ScriptedCrs> from_file(const std::string& path);

    TurnReply respond(const dialogue::DialogueContext& context, int k) override;
    std::string describe() const override { return "scripted"; }
    size_t remaining() const { return queue_.size(); }

private:
    std::vector<TurnReply> queue_;
    size_t next_ = 0;
};

// HTTP adapter speaking the versioned wire contract:
//   POST {protocol, dialogue: [{role, text}...], k} -> {utterance, items}.
struct RemoteCrsConfig {
    std::string endpoint;
    std::string path = "/crs/turn";
    int protocol = 1;
    int timeout_s = 60;
    agents::BackoffPolicy backoff;
};

class RemoteCrsAdapter : public CrsAdapter {
public:
    RemoteCrsAdapter(RemoteCrsConfig config, const corpus::Catalog& catalog,
                     std::shared_ptr<agents::HttpTransport> transport = nullptr,
                     agents::SleepFn sleep = nullptr);

    TurnReply respond(const dialogue::DialogueContext& context, int k) override;
    std::string describe() const override { return "remote_http:" + config_.endpoint; }

    static nlohmann::json build_request_body(const RemoteCrsConfig& config,
                                             const dialogue::DialogueContext& context, int k);

private:
    RemoteCrsConfig config_;
    const corpus::Catalog& catalog_;
    std::shared_ptr<agents::HttpTransport> transport_;
    agents::SleepFn sleep_;
};

enum class AdapterKind { remote_http, embedding_retrieval, popularity, scripted };

const char* adapter_kind_name(AdapterKind kind);
AdapterKind adapter_kind_from_name(const std::string& name);

struct AdapterConfig {
    AdapterKind kind = AdapterKind::popularity;
    std::string endpoint;    // remote_http
    std::string script_path; // scripted
    size_t embedding_dim = 256;
    int timeout_s = 60;
};

std::unique_ptr<CrsAdapter> make_adapter(const AdapterConfig& config,
                                         const corpus::Catalog& catalog,
                                         const std::vector<corpus::UserRecord>& users);

} // namespace crseval::adapters

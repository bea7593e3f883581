#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace crseval::agents {

struct Message {
    std::string role; // "system" | "user" | "assistant"
    std::string content;
};

// Pipeline stage a generation request belongs to. Sent nowhere on the wire;
// used for prompt audit logs and by the deterministic stub to pick which
// output shape to synthesize.
enum class Stage {
    preference_extraction,
    general_preference,
    target_biased_preference,
    reflection,
    user_response,
    pairwise_selection,
    judge,
};

const char* stage_name(Stage s);

struct GenerationRequest {
    Stage stage = Stage::user_response;
    std::vector<Message> messages;
    // Raw placeholder values the prompt was rendered from. The deterministic
    // stub synthesizes from these instead of re-parsing rendered text.
    std::map<std::string, std::string> slots;
};

class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
    virtual std::string describe() const = 0;
};

std::string backend_generate(TextBackend& backend, const GenerationRequest& request);

// Pure function of (stage, slots, message hash). Outputs are parseable by
// the strict preference/judge parsers so a full pipeline can run offline.
class StubBackend : public TextBackend {
public:
    explicit StubBackend(uint64_t seed = 0) : seed_(seed) {}
    std::string generate(const GenerationRequest& request) override;
    std::string describe() const override { return "deterministic_stub"; }

private:
    uint64_t seed_;
};

// Pops queued replies in order; an empty queue is a hard ScriptExhausted.
class ScriptedBackend : public TextBackend {
public:
    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<std::string> replies);
    static ScriptedBackend from_file(const std::string& path);

    void push(const std::string& reply);
    std::string generate(const GenerationRequest& request) override;
    std::string describe() const override { return "scripted"; }
    size_t remaining() const { return queue_.size(); }

private:
    std::deque<std::string> queue_;
};

// Exponential backoff: base_ms, base_ms*factor, ... up to max_attempts
// total tries. Jitter stays off by default so retry schedules are testable.
struct BackoffPolicy {
    int max_attempts = 5;
    int base_ms = 1000;
    double factor = 2.0;
    bool jitter = false;

    int delay_ms(int attempt, uint64_t jitter_seed = 0) const;
};

struct HttpResponse {
    int status = 0;       // 0 = transport-level failure
    std::string body;
    std::string error;    // transport failure detail
};

// Transient failures worth another attempt: transport errors, 429, 5xx.
bool retryable_status(int status);

// POST transport behind the chat backend and the remote CRS adapter, so
// tests can record requests and replay canned responses.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(const std::string& base_url,
                                                      int timeout_s);

using SleepFn = std::function<void(int /*ms*/)>;

// Real wall-clock sleep; tests inject a recorder instead.
SleepFn default_sleep();

struct RemoteChatConfig {
    std::string endpoint;     // base URL, e.g. https://api.openai.com
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key;      // from the environment, never config files
    double temperature = 0.0; // 0 for reproducible runs
    int timeout_s = 60;
    BackoffPolicy backoff;
};

// Speaks the de-facto chat-completions contract: one POST per generate with
// {model, temperature, messages}; retries 429/5xx/transport failures on the
// backoff schedule, then throws BackendUnavailable.
class RemoteChatBackend : public TextBackend {
public:
    RemoteChatBackend(RemoteChatConfig config,
                      std::unique_ptr<HttpTransport> transport = nullptr,
                      SleepFn sleep = nullptr);

    std::string generate(const GenerationRequest& request) override;
    std::string describe() const override { return "remote_chat:" + config_.model; }

    static nlohmann::json build_request_body(const RemoteChatConfig& config,
                                             const std::vector<Message>& messages);

private:
    RemoteChatConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    SleepFn sleep_;
};

} // namespace crseval::agents

#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matforge/error.hpp"

namespace matforge {

struct ImagePart {
    std::vector<uint8_t> bytes;
    std::string mime = "image/png";
};

struct PromptPart {
    std::string text;                // set when this is a text part
    std::optional<ImagePart> image;  // set when this is an image part
};

struct PromptPayload {
    std::string system;
    std::vector<std::vector<PromptPart>> user_turns; // >= 1 turn
    double temperature = 0.0;                        // pinned for determinism
    int max_tokens = 512;
};

constexpr size_t kMaxImageBytes = 20u * 1024u * 1024u;

struct MLLMResponse {
    std::string raw_text;
    std::optional<nlohmann::json> parsed; // first JSON object, fences stripped
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

// One HTTP-ish exchange as the transports see it.
struct TransportResult {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportResult post(const nlohmann::json& request) = 0;
};

// Live OpenAI-compatible endpoint (chat completions). Reads nothing from the
// environment itself; the pipeline wires env vars through.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, std::string api_key, std::string model);
    TransportResult post(const nlohmann::json& request) override;
    const std::string& model() const { return model_; }

private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
};

// Scripted transport for tests; pops one entry per call.
class MockTransport : public Transport {
public:
    void push_status(int status, std::string body);
    void push_text(const std::string& text); // wraps into a chat completion body
    void push_json_text(const nlohmann::json& value);
    TransportResult post(const nlohmann::json& request) override;
    int calls() const { return calls_; }
    const std::vector<nlohmann::json>& requests() const { return requests_; }

private:
    std::vector<TransportResult> queue_;
    std::vector<nlohmann::json> requests_;
    size_t next_ = 0;
    int calls_ = 0;
};

// Replays a recorded session log in order; refuses requests that diverge
// from the recording.
class ReplayTransport : public Transport {
public:
    explicit ReplayTransport(const std::filesystem::path& session_log);
    TransportResult post(const nlohmann::json& request) override;

private:
    struct Entry {
        std::string request_digest;
        int status;
        std::string body;
    };
    std::vector<Entry> entries_;
    size_t next_ = 0;
};

struct RetryPolicy {
    std::vector<double> delays_s = {1.0, 2.0, 4.0}; // between attempts
    std::function<void(double)> sleep;              // injectable for tests
};

class MllmClient {
public:
    MllmClient(std::unique_ptr<Transport> transport, std::filesystem::path session_log = {},
               RetryPolicy retry = {});

    // Sends the payload; retries 429/5xx on the backoff schedule; 401/403 is
    // an immediate AuthError. Every attempt is appended to the session log.
    MLLMResponse complete(const PromptPayload& payload);

    int requests_sent() const { return requests_sent_; }
    void set_inflight_cap(int cap) { inflight_cap_ = cap > 0 ? cap : 1; }

private:
    std::unique_ptr<Transport> transport_;
    std::filesystem::path session_log_;
    RetryPolicy retry_;
    std::mutex mutex_;
    std::condition_variable inflight_cv_;
    int inflight_cap_ = 2;
    int inflight_ = 0;
    int requests_sent_ = 0;
    int log_seq_ = 0;
};

// Digest used to pair replayed requests with recorded ones.
std::string request_digest(const nlohmann::json& request);

nlohmann::json build_chat_request(const PromptPayload& payload, const std::string& model);

// Picks the element of `valid` named by the response's JSON "choice" field,
// else the unique valid string appearing verbatim in the raw text
// (case-insensitive). Zero or multiple candidates -> NoValidChoice.
std::string extract_choice(const MLLMResponse& resp, const std::vector<std::string>& valid);

std::string base64_encode(const uint8_t* data, size_t len);

} // namespace matforge

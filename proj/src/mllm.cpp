#include "matforge/mllm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#if __has_include(<openssl/ssl.h>)
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace matforge {

std::string base64_encode(const uint8_t* data, size_t len) {
    static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t chunk = uint32_t(data[i]) << 16;
        if (i + 1 < len) chunk |= uint32_t(data[i + 1]) << 8;
        if (i + 2 < len) chunk |= uint32_t(data[i + 2]);
        out.push_back(table[(chunk >> 18) & 63]);
        out.push_back(table[(chunk >> 12) & 63]);
        out.push_back(i + 1 < len ? table[(chunk >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? table[chunk & 63] : '=');
    }
    return out;
}

nlohmann::json build_chat_request(const PromptPayload& payload, const std::string& model) {
    if (payload.user_turns.empty())
        throw Error(ErrorCode::MalformedResponse, "prompt payload needs at least one user turn");

    nlohmann::json messages = nlohmann::json::array();
    if (!payload.system.empty())
        messages.push_back({{"role", "system"}, {"content", payload.system}});
    for (const auto& turn : payload.user_turns) {
        nlohmann::json content = nlohmann::json::array();
        for (const PromptPart& part : turn) {
            if (part.image) {
                if (part.image->bytes.size() > kMaxImageBytes)
                    throw Error(ErrorCode::TransportError, "image part exceeds 20 MB");
                std::string url = "data:" + part.image->mime + ";base64," +
                                  base64_encode(part.image->bytes.data(), part.image->bytes.size());
                content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
            } else {
                content.push_back({{"type", "text"}, {"text", part.text}});
            }
        }
        messages.push_back({{"role", "user"}, {"content", content}});
    }
    return {
        {"model", model},
        {"temperature", payload.temperature},
        {"max_tokens", payload.max_tokens},
        {"messages", messages},
    };
}

std::string request_digest(const nlohmann::json& request) {
    // order-stable dump hashed with FNV-1a; enough to catch replay divergence
    std::string dump = request.dump();
    uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : dump) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)hash);
    return buf;
}

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, std::string api_key, std::string model)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)) {}

TransportResult HttpTransport::post(const nlohmann::json& request) {
    // split scheme://host[:port] from any path prefix
    std::string url = base_url_;
    while (!url.empty() && url.back() == '/') url.pop_back();
    size_t scheme_end = url.find("://");
    size_t path_start = scheme_end == std::string::npos ? url.find('/')
                                                        : url.find('/', scheme_end + 3);
    std::string host = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);

    httplib::Client client(host);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(prefix + "/chat/completions", headers, request.dump(),
                           "application/json");
    if (!res)
        throw Error(ErrorCode::TransportError,
                    "POST " + base_url_ + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

void MockTransport::push_status(int status, std::string body) {
    queue_.push_back({status, std::move(body)});
}

void MockTransport::push_text(const std::string& text) {
    nlohmann::json body = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
        {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}},
    };
    queue_.push_back({200, body.dump()});
}

void MockTransport::push_json_text(const nlohmann::json& value) { push_text(value.dump()); }

TransportResult MockTransport::post(const nlohmann::json& request) {
    ++calls_;
    requests_.push_back(request);
    if (next_ >= queue_.size())
        throw Error(ErrorCode::TransportError, "mock transport queue exhausted");
    return queue_[next_++];
}

ReplayTransport::ReplayTransport(const std::filesystem::path& session_log) {
    std::ifstream in(session_log);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open session log " + session_log.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json entry = nlohmann::json::parse(line, nullptr, false);
        if (entry.is_discarded())
            throw Error(ErrorCode::MalformedResponse, "bad session log line");
        entries_.push_back({entry.value("request_digest", ""), entry.value("status", 0),
                            entry.value("response_body", "")});
    }
}

TransportResult ReplayTransport::post(const nlohmann::json& request) {
    if (next_ >= entries_.size())
        throw Error(ErrorCode::TransportError, "session log exhausted during replay");
    const Entry& entry = entries_[next_++];
    if (!entry.request_digest.empty() && entry.request_digest != request_digest(request))
        throw Error(ErrorCode::TransportError,
                    "replay divergence at request " + std::to_string(next_ - 1));
    return {entry.status, entry.body};
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

MllmClient::MllmClient(std::unique_ptr<Transport> transport, std::filesystem::path session_log,
                       RetryPolicy retry)
    : transport_(std::move(transport)), session_log_(std::move(session_log)),
      retry_(std::move(retry)) {
    if (!retry_.sleep)
        retry_.sleep = [](double seconds) {
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        };
}

namespace {

std::optional<nlohmann::json> extract_json_object(const std::string& text) {
    // strip markdown fences, then take the first balanced {...}
    std::string body = text;
    size_t fence = body.find("```");
    if (fence != std::string::npos) {
        size_t start = body.find('\n', fence);
        size_t end = body.find("```", fence + 3);
        if (start != std::string::npos && end != std::string::npos && start < end)
            body = body.substr(start + 1, end - start - 1);
    }
    size_t open = body.find('{');
    if (open == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    for (size_t i = open; i < body.size(); ++i) {
        char c = body[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        if (c == '{') ++depth;
        if (c == '}') {
            --depth;
            if (depth == 0) {
                nlohmann::json parsed =
                    nlohmann::json::parse(body.substr(open, i - open + 1), nullptr, false);
                if (parsed.is_discarded()) return std::nullopt;
                return parsed;
            }
        }
    }
    return std::nullopt;
}

} // namespace

MLLMResponse MllmClient::complete(const PromptPayload& payload) {
    nlohmann::json request = build_chat_request(payload, "");
    // HttpTransport fills its configured model; other transports ignore it
    if (auto* http = dynamic_cast<HttpTransport*>(transport_.get()))
        request["model"] = http->model();

    {
        std::unique_lock<std::mutex> lock(mutex_);
        inflight_cv_.wait(lock, [&] { return inflight_ < inflight_cap_; });
        ++inflight_;
    }
    struct InflightGuard {
        MllmClient* client;
        ~InflightGuard() {
            std::lock_guard<std::mutex> lock(client->mutex_);
            --client->inflight_;
            client->inflight_cv_.notify_one();
        }
    } guard{this};

    size_t max_attempts = retry_.delays_s.size() + 1;
    TransportResult result{};
    for (size_t attempt = 0; attempt < max_attempts; ++attempt) {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++requests_sent_;
        }
        result = transport_->post(request);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (!session_log_.empty()) {
                if (session_log_.has_parent_path())
                    std::filesystem::create_directories(session_log_.parent_path());
                std::ofstream log(session_log_, std::ios::app);
                nlohmann::json entry = {
                    {"seq", log_seq_++},
                    {"request_digest", request_digest(request)},
                    {"request", request},
                    {"status", result.status},
                    {"response_body", result.body},
                };
                log << entry.dump() << "\n";
            }
        }
        if (result.status == 401 || result.status == 403)
            throw Error(ErrorCode::AuthError, "authentication rejected (HTTP " +
                                                  std::to_string(result.status) + ")");
        if (result.status == 429 || result.status >= 500) {
            if (attempt + 1 < max_attempts) {
                retry_.sleep(retry_.delays_s[attempt]);
                continue;
            }
            throw Error(result.status == 429 ? ErrorCode::RateLimited : ErrorCode::TransportError,
                        "HTTP " + std::to_string(result.status) + " after " +
                            std::to_string(max_attempts) + " attempts");
        }
        break;
    }
    if (result.status != 200)
        throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(result.status));

    nlohmann::json body = nlohmann::json::parse(result.body, nullptr, false);
    if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array() ||
        body["choices"].empty())
        throw Error(ErrorCode::MalformedResponse, "response has no choices");
    const nlohmann::json& first = body["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content"))
        throw Error(ErrorCode::MalformedResponse, "choice has no message content");

    MLLMResponse resp;
    resp.raw_text = first["message"]["content"].get<std::string>();
    resp.parsed = extract_json_object(resp.raw_text);
    if (body.contains("usage")) {
        resp.prompt_tokens = body["usage"].value("prompt_tokens", 0);
        resp.completion_tokens = body["usage"].value("completion_tokens", 0);
    }
    return resp;
}

// ---------------------------------------------------------------------------
// Choice extraction
// ---------------------------------------------------------------------------

namespace {

std::string lowered(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return s;
}

} // namespace

std::string extract_choice(const MLLMResponse& resp, const std::vector<std::string>& valid) {
    if (valid.empty()) throw Error(ErrorCode::NoValidChoice, "empty valid set");

    if (resp.parsed && resp.parsed->is_object() && resp.parsed->contains("choice")) {
        const nlohmann::json& choice = (*resp.parsed)["choice"];
        std::string named;
        if (choice.is_string())
            named = lowered(choice.get<std::string>());
        else if (choice.is_number_integer())
            named = std::to_string(choice.get<int64_t>());
        for (const std::string& v : valid)
            if (lowered(v) == named) return v;
    }

    std::string text = lowered(resp.raw_text);
    std::vector<const std::string*> hits;
    for (const std::string& v : valid) {
        if (text.find(lowered(v)) != std::string::npos) hits.push_back(&v);
    }
    if (hits.size() == 1) return *hits[0];
    throw Error(ErrorCode::NoValidChoice,
                hits.empty() ? "no valid option mentioned"
                             : "multiple valid options mentioned (" + std::to_string(hits.size()) + ")");
}

} // namespace matforge

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "emoeval/dialogue.hpp"
#include "emoeval/rng.hpp"
#include "emoeval/scorer.hpp"

namespace emoeval {

/// Transient failure that survived every retry.
class TransportError : public ClientError {
public:
    using ClientError::ClientError;
};

/// Rejected request that retrying cannot fix (4xx other than 429, malformed
/// response body).
class PermanentError : public ClientError {
public:
    using ClientError::ClientError;
};

struct ClientConfig {
    std::string endpoint;   // e.g. "http://127.0.0.1:8080"
    std::string model;
    std::string token_env;  // name of the env var holding the auth token
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int max_tokens = 512;
    double temperature = 1.0;
    double initial_backoff_seconds = 0.5;
    int max_inflight = 8;  // concurrent requests per handle
    std::string debug_log_path;  // empty disables request logging

    void validate() const {
        if (timeout_seconds <= 0.0)
            throw std::invalid_argument("ClientConfig: timeout must be > 0");
        if (max_retries < 0) throw std::invalid_argument("ClientConfig: retries must be >= 0");
        if (max_tokens <= 0) throw std::invalid_argument("ClientConfig: token cap must be > 0");
        if (max_inflight < 1)
            throw std::invalid_argument("ClientConfig: in-flight limit must be >= 1");
    }
};

struct ChatExchange {
    std::vector<ChatMessage> request;
    std::string response;
    double latency_seconds = 0.0;
    int attempts = 0;
};

using Sleeper = std::function<void(double seconds)>;

namespace detail {

inline void default_sleep(double seconds) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

inline std::string auth_token(const ClientConfig& config) {
    if (config.token_env.empty()) return {};
    const char* value = std::getenv(config.token_env.c_str());
    return value == nullptr ? std::string() : std::string(value);
}

inline ClientConfig checked(ClientConfig config) {
    config.validate();
    return config;
}

inline std::string redact(std::string text, const std::string& secret) {
    if (secret.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(secret, pos)) != std::string::npos) {
        text.replace(pos, secret.size(), "***");
        pos += 3;
    }
    return text;
}

/// RAII slot in a per-handle in-flight budget.
class RequestSlot {
public:
    explicit RequestSlot(std::counting_semaphore<>& budget) : budget_(budget) {
        budget_.acquire();
    }
    RequestSlot(const RequestSlot&) = delete;
    RequestSlot& operator=(const RequestSlot&) = delete;
    ~RequestSlot() { budget_.release(); }

private:
    std::counting_semaphore<>& budget_;
};

class DebugLog {
public:
    explicit DebugLog(std::string path) : path_(std::move(path)) {}

    void write(const nlohmann::json& record, const std::string& secret) {
        if (path_.empty()) return;
        std::lock_guard<std::mutex> lock(mutex_);
        std::ofstream out(path_, std::ios::app);
        out << redact(record.dump(), secret) << '\n';
    }

private:
    std::string path_;
    std::mutex mutex_;
};

struct HttpReply {
    int status = 0;
    std::string body;
    std::string retry_after;
};

/// Shared retry loop: transient failures (transport, 5xx, 429) back off
/// exponentially, 429 additionally honours a server Retry-After hint; any
/// other 4xx aborts immediately.
inline HttpReply request_with_retries(const ClientConfig& config,
                                      const std::function<std::optional<HttpReply>()>& attempt_fn,
                                      const Sleeper& sleep, int& attempts_out) {
    std::string last_failure = "no attempt made";
    double backoff = config.initial_backoff_seconds;
    for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
        attempts_out = attempt;
        const std::optional<HttpReply> reply = attempt_fn();
        if (!reply) {
            last_failure = "transport failure";
        } else if (reply->status >= 200 && reply->status < 300) {
            return *reply;
        } else if (reply->status == 429 || reply->status >= 500) {
            last_failure = "HTTP " + std::to_string(reply->status);
        } else {
            throw PermanentError("request to " + config.endpoint + " rejected with HTTP " +
                                 std::to_string(reply->status));
        }
        if (attempt <= config.max_retries) {
            double delay = backoff;
            if (reply && reply->status == 429 && !reply->retry_after.empty()) {
                try {
                    delay = std::max(delay, std::stod(reply->retry_after));
                } catch (const std::exception&) {
                }
            }
            sleep(delay);
            backoff *= 2.0;
        }
    }
    throw TransportError("request to " + config.endpoint + " failed after " +
                         std::to_string(attempts_out) + " attempt(s): " + last_failure);
}

}  // namespace detail

/// Chat-completion backend speaking the de-facto HTTP shape: a role-tagged
/// message list in, the first choice's message text out.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ClientConfig config, Sleeper sleeper = detail::default_sleep)
        : config_(detail::checked(std::move(config))),
          sleeper_(std::move(sleeper)),
          log_(config_.debug_log_path),
          inflight_(config_.max_inflight) {}

    ChatExchange exchange(const std::vector<ChatMessage>& messages) {
        if (messages.empty()) throw std::invalid_argument("chat: messages must be non-empty");
        const detail::RequestSlot slot(inflight_);
        nlohmann::json body;
        body["model"] = config_.model;
        body["max_tokens"] = config_.max_tokens;
        body["temperature"] = config_.temperature;
        body["messages"] = nlohmann::json::array();
        for (const ChatMessage& m : messages)
            body["messages"].push_back({{"role", m.role}, {"content", m.content}});

        const auto started = std::chrono::steady_clock::now();
        ChatExchange result;
        result.request = messages;
        const std::string payload = body.dump();
        const detail::HttpReply reply = detail::request_with_retries(
            config_, [&]() { return post_json("/v1/chat/completions", payload); }, sleeper_,
            result.attempts);
        result.latency_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(reply.body);
        } catch (const nlohmann::json::parse_error&) {
            throw PermanentError("chat response from " + config_.endpoint + " is not JSON");
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
            !parsed["choices"][0]["message"].contains("content"))
            throw PermanentError("chat response from " + config_.endpoint +
                                 " lacks choices[0].message.content");
        result.response = parsed["choices"][0]["message"]["content"].get<std::string>();
        if (result.response.empty())
            throw PermanentError("chat response from " + config_.endpoint + " is empty");

        log_.write({{"kind", "chat"},
                    {"model", config_.model},
                    {"attempts", result.attempts},
                    {"request", payload},
                    {"response", reply.body}},
                   detail::auth_token(config_));
        return result;
    }

    std::string chat(const std::vector<ChatMessage>& messages) override {
        return exchange(messages).response;
    }

private:
    std::optional<detail::HttpReply> post_json(const std::string& path,
                                               const std::string& payload) {
        httplib::Client client(config_.endpoint);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        httplib::Headers headers;
        const std::string token = detail::auth_token(config_);
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        httplib::Result res = client.Post(path, headers, payload, "application/json");
        if (!res) return std::nullopt;
        return detail::HttpReply{res->status, res->body, res->get_header_value("Retry-After")};
    }

    ClientConfig config_;
    Sleeper sleeper_;
    detail::DebugLog log_;
    std::counting_semaphore<> inflight_;
};

/// Scorer backend: POST /v1/score {prompt, assertion} -> {logit}.
class HttpScorer : public AssertionScorer {
public:
    explicit HttpScorer(ClientConfig config, Sleeper sleeper = detail::default_sleep)
        : config_(detail::checked(std::move(config))),
          sleeper_(std::move(sleeper)),
          log_(config_.debug_log_path),
          inflight_(config_.max_inflight) {}

    double score(const std::string& prompt, const std::string& assertion) override {
        if (prompt.empty()) throw std::invalid_argument("score: prompt must be non-empty");
        if (assertion.empty()) throw std::invalid_argument("score: assertion must be non-empty");
        const detail::RequestSlot slot(inflight_);
        nlohmann::json body;
        body["model"] = config_.model;
        body["prompt"] = prompt;
        body["assertion"] = assertion;
        const std::string payload = body.dump();

        int attempts = 0;
        const detail::HttpReply reply = detail::request_with_retries(
            config_,
            [&]() -> std::optional<detail::HttpReply> {
                httplib::Client client(config_.endpoint);
                client.set_connection_timeout(
                    std::chrono::duration<double>(config_.timeout_seconds));
                client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
                httplib::Headers headers;
                const std::string token = detail::auth_token(config_);
                if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
                httplib::Result res = client.Post("/v1/score", headers, payload,
                                                  "application/json");
                if (!res) return std::nullopt;
                return detail::HttpReply{res->status, res->body,
                                         res->get_header_value("Retry-After")};
            },
            sleeper_, attempts);

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(reply.body);
        } catch (const nlohmann::json::parse_error&) {
            throw PermanentError("score response from " + config_.endpoint + " is not JSON");
        }
        if (!parsed.contains("logit") || !parsed["logit"].is_number())
            throw PermanentError("score response from " + config_.endpoint + " lacks 'logit'");
        const double logit = parsed["logit"].get<double>();

        log_.write({{"kind", "score"},
                    {"attempts", attempts},
                    {"request", payload},
                    {"response", reply.body}},
                   detail::auth_token(config_));
        return logit;
    }

private:
    ClientConfig config_;
    Sleeper sleeper_;
    detail::DebugLog log_;
    std::counting_semaphore<> inflight_;
};

inline std::string chat(const ClientConfig& config, const std::vector<ChatMessage>& messages) {
    HttpChatClient client(config);
    return client.chat(messages);
}

inline double score_assertion(const ClientConfig& config, const std::string& prompt,
                              const std::string& assertion) {
    HttpScorer scorer(config);
    return scorer.score(prompt, assertion);
}

/// Deterministic playback double: returns playlist entries in order, errors
/// once the playlist runs out. Access is serialized so playback order is
/// stable even when the handle is shared.
class ScriptedChatClient : public ChatClient {
public:
    explicit ScriptedChatClient(std::vector<std::string> playlist)
        : playlist_(std::move(playlist)) {
        if (playlist_.empty())
            throw std::invalid_argument("ScriptedChatClient: playlist must be non-empty");
    }

    std::string chat(const std::vector<ChatMessage>& messages) override {
        if (messages.empty()) throw std::invalid_argument("chat: messages must be non-empty");
        std::lock_guard<std::mutex> lock(mutex_);
        if (served_ >= playlist_.size())
            throw TransportError("scripted playlist exhausted at turn " +
                                 std::to_string(served_ + 1));
        return playlist_[served_++];
    }

    [[nodiscard]] std::size_t served() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return served_;
    }

private:
    std::vector<std::string> playlist_;
    mutable std::mutex mutex_;
    std::size_t served_ = 0;
};

inline std::unique_ptr<ChatClient> scripted_chat(std::vector<std::string> playlist) {
    return std::make_unique<ScriptedChatClient>(std::move(playlist));
}

/// Deterministic rule double whose reply is a pure function of the request,
/// so shared use across parallel dialogues cannot perturb outputs.
class TemplateChatClient : public ChatClient {
public:
    explicit TemplateChatClient(std::string voice) : voice_(std::move(voice)) {}

    std::string chat(const std::vector<ChatMessage>& messages) override {
        if (messages.empty()) throw std::invalid_argument("chat: messages must be non-empty");
        std::uint64_t hash = 0xcbf29ce484222325ULL;
        std::size_t dialogue_messages = 0;
        for (const ChatMessage& m : messages) {
            hash = mix64(hash ^ fnv1a64(m.role) ^ fnv1a64(m.content));
            if (m.role != "system") ++dialogue_messages;
        }
        const std::size_t turn = dialogue_messages / 2 + 1;
        char tag[17];
        std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(hash));
        return voice_ + " message for turn " + std::to_string(turn) + " [" + tag + "]";
    }

private:
    std::string voice_;
};

/// Pass-through decorator capturing every request, used to audit the exact
/// contexts a role received.
class RecordingChatClient : public ChatClient {
public:
    explicit RecordingChatClient(ChatClient& inner) : inner_(inner) {}

    std::string chat(const std::vector<ChatMessage>& messages) override {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            requests_.push_back(messages);
        }
        return inner_.chat(messages);
    }

    [[nodiscard]] std::vector<std::vector<ChatMessage>> requests() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return requests_;
    }

private:
    ChatClient& inner_;
    mutable std::mutex mutex_;
    std::vector<std::vector<ChatMessage>> requests_;
};

/// Rule scorer with a hidden ground truth v* in [0, 1]: the positive
/// assertion scores scale * (2 v* - 1), the negative one its negation.
class SyntheticScorer : public AssertionScorer {
public:
    explicit SyntheticScorer(double hidden_truth, double scale = 10.0)
        : hidden_truth_(hidden_truth), scale_(scale) {
        if (hidden_truth < 0.0 || hidden_truth > 1.0)
            throw std::invalid_argument("SyntheticScorer: hidden truth must lie in [0, 1]");
    }

    double score(const std::string& prompt, const std::string& assertion) override {
        check_inputs(prompt, assertion);
        const double base = scale_ * (2.0 * hidden_truth_ - 1.0);
        return assertion == kPositiveAssertion ? base : -base;
    }

protected:
    static void check_inputs(const std::string& prompt, const std::string& assertion) {
        if (prompt.empty()) throw std::invalid_argument("score: prompt must be non-empty");
        if (assertion.empty()) throw std::invalid_argument("score: assertion must be non-empty");
        if (assertion != kPositiveAssertion && assertion != kNegativeAssertion)
            throw std::invalid_argument("score: unknown assertion text");
    }

private:
    double hidden_truth_;
    double scale_;
};

/// Returns the same logit for every request; the softmax of an equal pair is
/// exactly one half.
class ConstantScorer : public AssertionScorer {
public:
    explicit ConstantScorer(double logit = 0.0) : logit_(logit) {}

    double score(const std::string& prompt, const std::string& assertion) override {
        if (prompt.empty()) throw std::invalid_argument("score: prompt must be non-empty");
        if (assertion.empty()) throw std::invalid_argument("score: assertion must be non-empty");
        return logit_;
    }

private:
    double logit_;
};

/// Deterministic scorer whose logit gap tracks the emotion-hypothesis phrase
/// found in the prompt (bucket 1..5 maps to gaps -2s..+2s), plus an optional
/// prompt-hash jitter so different dialogues produce varied trajectories.
class DescriptorSensitiveScorer : public AssertionScorer {
public:
    explicit DescriptorSensitiveScorer(double scale = 2.0, double jitter = 0.0)
        : scale_(scale), jitter_(jitter) {}

    double score(const std::string& prompt, const std::string& assertion) override {
        if (prompt.empty()) throw std::invalid_argument("score: prompt must be non-empty");
        if (assertion.empty()) throw std::invalid_argument("score: assertion must be non-empty");
        static const std::string phrases[5] = {
            "a very negative emotion", "a somewhat negative emotion", "a neutral emotion",
            "a somewhat positive emotion", "a very positive emotion"};
        int bucket = 3;
        for (int b = 1; b <= 5; ++b) {
            if (prompt.find(phrases[b - 1]) != std::string::npos) {
                bucket = b;
                break;
            }
        }
        double gap = scale_ * static_cast<double>(bucket - 3);
        if (jitter_ != 0.0) {
            const double u =
                static_cast<double>(mix64(fnv1a64(prompt)) >> 11) * 0x1.0p-53;
            gap += jitter_ * (2.0 * u - 1.0);
        }
        if (assertion == kPositiveAssertion) return 0.5 * gap;
        if (assertion == kNegativeAssertion) return -0.5 * gap;
        throw std::invalid_argument("score: unknown assertion text");
    }

private:
    double scale_;
    double jitter_;
};

}  // namespace emoeval

#pragma once

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "convsearch/error.hpp"
#include "convsearch/http.hpp"

namespace convsearch {

struct DecodingConfig {
    double temperature = 0.0;
    std::optional<int> max_tokens;
};

/// One chat-completion backend. Implementations must tolerate concurrent calls.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::string& model_id, const std::string& prompt,
                                 const DecodingConfig& decoding) = 0;
};

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

/// SHA-256 over a length-prefixed model id followed by the prompt bytes.
inline std::string cache_key(std::string_view model_id, std::string_view prompt) {
    std::string material = std::to_string(model_id.size());
    material += ':';
    material += model_id;
    material += prompt;
    return sha256_hex(material);
}

struct LLMExchange {
    std::string model_id;
    std::string prompt;
    std::string response;
    std::string cache_key;
};

/// Directory of exchange records, one pretty-printed JSON file per key.
/// Writes go through a temp file and rename, so readers never see partial records.
class ExchangeCache {
public:
    explicit ExchangeCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& directory() const noexcept { return dir_; }

    std::optional<LLMExchange> find(const std::string& key) const {
        {
            std::lock_guard lock(mutex_);
            if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        }
        std::ifstream in(path_for(key), std::ios::binary);
        if (!in) return std::nullopt;
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corrupt cache record " + path_for(key).string() + ": " + e.what());
        }
        LLMExchange ex{j.at("model_id").get<std::string>(), j.at("prompt").get<std::string>(),
                       j.at("response").get<std::string>(), j.at("cache_key").get<std::string>()};
        std::lock_guard lock(mutex_);
        memo_.emplace(key, ex);
        return ex;
    }

    void store(const LLMExchange& ex) {
        nlohmann::json j = {{"cache_key", ex.cache_key}, {"model_id", ex.model_id}, {"prompt", ex.prompt},
                            {"response", ex.response}};
        auto target = path_for(ex.cache_key);
        auto tmp = target;
        tmp += ".tmp." + unique_suffix();
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write cache record " + tmp.string());
            out << j.dump(2) << '\n';
            if (!out) throw Error("cannot write cache record " + tmp.string());
        }
        std::filesystem::rename(tmp, target);
        std::lock_guard lock(mutex_);
        memo_[ex.cache_key] = ex;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
            if (entry.path().extension() == ".json") ++n;
        }
        return n;
    }

private:
    std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

    static std::string unique_suffix() {
        static std::atomic<unsigned long> counter{0};
        std::ostringstream s;
        s << std::this_thread::get_id() << '.' << counter.fetch_add(1);
        return s.str();
    }

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, LLMExchange> memo_;
};

enum class LlmMode { record, replay, live };

inline LlmMode parse_llm_mode(std::string_view s) {
    if (s == "record") return LlmMode::record;
    if (s == "replay") return LlmMode::replay;
    if (s == "live") return LlmMode::live;
    throw ConfigError("unknown llm mode '" + std::string(s) + "' (expected record, replay or live)");
}

inline std::string_view to_string(LlmMode mode) {
    switch (mode) {
        case LlmMode::record: return "record";
        case LlmMode::replay: return "replay";
        case LlmMode::live: return "live";
    }
    return "?";
}

struct GatewayStats {
    std::size_t network_calls = 0;
    std::size_t cache_hits = 0;
};

/// Routes completions through the cache according to the mode:
///  record  cache hit returns; miss calls the client and stores the result
///  replay  cache only; a miss raises CacheMiss and never touches the network
///  live    always calls the client, no cache reads or writes
class LlmGateway {
public:
    LlmGateway(LlmMode mode, std::string model_id, std::shared_ptr<ChatClient> client,
               std::shared_ptr<ExchangeCache> cache, DecodingConfig decoding = {}, int max_retries = 0)
        : mode_(mode), model_id_(std::move(model_id)), client_(std::move(client)), cache_(std::move(cache)),
          decoding_(decoding), max_retries_(max_retries) {
        if (mode_ != LlmMode::live && !cache_) throw ConfigError("llm mode " + std::string(to_string(mode_)) + " needs a cache");
        if (mode_ != LlmMode::replay && !client_) throw ConfigError("llm mode " + std::string(to_string(mode_)) + " needs a client");
    }

    std::string complete(const std::string& prompt) {
        std::string key = cache_key(model_id_, prompt);
        if (mode_ != LlmMode::live) {
            if (auto hit = cache_->find(key)) {
                cache_hits_.fetch_add(1);
                return hit->response;
            }
            if (mode_ == LlmMode::replay) throw CacheMiss(key);
        }
        std::string response = call_with_retries(prompt);
        if (mode_ == LlmMode::record) cache_->store({model_id_, prompt, response, key});
        return response;
    }

    LlmMode mode() const noexcept { return mode_; }
    const std::string& model_id() const noexcept { return model_id_; }
    GatewayStats stats() const { return {network_calls_.load(), cache_hits_.load()}; }

private:
    std::string call_with_retries(const std::string& prompt) {
        for (int attempt = 0;; ++attempt) {
            try {
                network_calls_.fetch_add(1);
                return client_->complete(model_id_, prompt, decoding_);
            } catch (const TransportError&) {
                if (attempt >= max_retries_) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(200) * (1 << attempt));
            }
        }
    }

    LlmMode mode_;
    std::string model_id_;
    std::shared_ptr<ChatClient> client_;
    std::shared_ptr<ExchangeCache> cache_;
    DecodingConfig decoding_;
    int max_retries_;
    std::atomic<std::size_t> network_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// OpenAI-style `/v1/chat/completions` adapter: {model, messages, temperature}.
class OpenAiChatClient : public ChatClient {
public:
    struct Options {
        std::string endpoint = "https://api.openai.com/v1/chat/completions";
        std::string api_key_env = "OPENAI_API_KEY";
        double requests_per_minute = 0.0;
        std::chrono::seconds timeout{120};
    };

    explicit OpenAiChatClient(Options options)
        : options_(std::move(options)), url_(split_url(options_.endpoint)), limiter_(options_.requests_per_minute) {}

    static nlohmann::json request_body(const std::string& model_id, const std::string& prompt,
                                       const DecodingConfig& decoding) {
        nlohmann::json body = {{"model", model_id},
                               {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                               {"temperature", decoding.temperature}};
        if (decoding.max_tokens) body["max_tokens"] = *decoding.max_tokens;
        return body;
    }

    std::string complete(const std::string& model_id, const std::string& prompt,
                         const DecodingConfig& decoding) override {
        httplib::Headers headers;
        if (!options_.api_key_env.empty()) {
            if (const char* key = std::getenv(options_.api_key_env.c_str()); key && *key) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        limiter_.acquire();
        std::string raw = post_json(url_, request_body(model_id, prompt, decoding).dump(), headers, options_.timeout);
        try {
            auto j = nlohmann::json::parse(raw);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed chat-completion response: ") + e.what());
        }
    }

private:
    Options options_;
    Url url_;
    RateLimiter limiter_;
};

}  // namespace convsearch

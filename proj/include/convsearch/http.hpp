#pragma once

// cpp-httplib with TLS enabled, shared by every remote adapter.
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "convsearch/error.hpp"

namespace convsearch {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline Url split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("url must include a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

/// Spaces requests so at most `per_minute` start in any minute. 0 disables.
class RateLimiter {
public:
    explicit RateLimiter(double per_minute = 0.0) : per_minute_(per_minute) {}

    void acquire() {
        if (per_minute_ <= 0.0) return;
        using clock = std::chrono::steady_clock;
        auto interval = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(60.0 / per_minute_));
        clock::time_point slot;
        {
            std::lock_guard lock(mutex_);
            auto now = clock::now();
            slot = std::max(now, next_);
            next_ = slot + interval;
        }
        std::this_thread::sleep_until(slot);
    }

private:
    double per_minute_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
};

/// POSTs a JSON body and returns the response body. Non-2xx and connection
/// failures become TransportError.
inline std::string post_json(const Url& url, const std::string& body, const httplib::Headers& headers,
                             std::chrono::seconds timeout) {
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) throw TransportError("request to " + url.origin + url.path + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError("request to " + url.origin + url.path + " returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

}  // namespace convsearch

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

// Private helpers shared by the remote embedding and chat-completion
// clients. Not installed.

#pragma once

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>

#include "obsx/errors.hpp"

namespace obsx::detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // leading '/', "/" when absent
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint URL must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::string env_or_empty(const std::string& name) {
    if (name.empty()) return {};
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string();
}

template <typename T>
struct AttemptResult {
    std::optional<T> value;
    std::string error;
    bool permanent = false;
};

/// Runs `fn` up to `max_attempts` times with exponential backoff between
/// transient failures. Permanent failures raise ProtocolError immediately;
/// exhausting the budget raises TransportError carrying the attempt count.
template <typename T, typename F>
T with_retries(int max_attempts, int backoff_ms, F&& fn, int* attempts_out = nullptr) {
    if (max_attempts < 1) max_attempts = 1;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        AttemptResult<T> r = fn();
        if (r.value) {
            if (attempts_out) *attempts_out = attempt;
            return std::move(*r.value);
        }
        if (r.permanent) {
            if (attempts_out) *attempts_out = attempt;
            throw ProtocolError(r.error);
        }
        last_error = r.error;
        if (attempt < max_attempts) {
            auto delay = std::chrono::milliseconds(backoff_ms) * (1LL << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
    }
    if (attempts_out) *attempts_out = max_attempts;
    throw TransportError("request failed after " + std::to_string(max_attempts) +
                             " attempts: " + last_error,
                         max_attempts);
}

}  // namespace obsx::detail

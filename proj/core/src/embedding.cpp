// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "obsx/log.hpp"
#include "obsx/text.hpp"

namespace obsx {

namespace {
using nlohmann::json;

constexpr std::uint64_t kAltSeed = 14695981039346656037ULL ^ 0x9e3779b97f4a7c15ULL;
constexpr char kCacheMagic[] = "obsx-emb v1";

std::string sanitize_component(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '.' || c == '_' || c == '-';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("_") : out;
}

std::string encode_hex_doubles(const EmbeddingVector& v) {
    std::string out;
    out.reserve(v.size() * 16);
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        out += hex64(bits);
    }
    return out;
}

std::optional<EmbeddingVector> decode_hex_doubles(std::string_view hex, std::size_t n) {
    if (hex.size() != n * 16) return std::nullopt;
    EmbeddingVector v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (std::size_t j = 0; j < 16; ++j) {
            char c = hex[i * 16 + j];
            int digit;
            if (c >= '0' && c <= '9') digit = c - '0';
            else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
            else return std::nullopt;
            bits = (bits << 4) | static_cast<std::uint64_t>(digit);
        }
        std::memcpy(&v[i], &bits, sizeof(bits));
    }
    return v;
}
}  // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.empty() || b.empty()) {
        log_warn("cosine: empty/zero vector, returning 0.0");
        return 0.0;
    }
    if (a.size() != b.size())
        throw ConfigError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        log_warn("cosine: zero vector, returning 0.0");
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

LocalHashEmbedder::LocalHashEmbedder(int dim, std::string model_id)
    : dim_(dim), model_(std::move(model_id)) {
    if (dim_ <= 0) throw ConfigError("local_hash embedder needs a positive dim");
}

std::vector<EmbeddingVector> LocalHashEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector v(static_cast<std::size_t>(dim_), 0.0);
        for (const auto& token : tokenize(text)) {
            auto bucket = fnv1a64(token) % static_cast<std::uint64_t>(dim_);
            v[static_cast<std::size_t>(bucket)] += 1.0;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

RemoteEmbeddingClient::RemoteEmbeddingClient(EmbeddingProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw ConfigError("remote embedding provider needs an endpoint");
}

std::vector<EmbeddingVector> RemoteEmbeddingClient::embed_batch(
    const std::vector<std::string>& texts) {
    auto url = detail::split_url(cfg_.endpoint);
    const std::string token = detail::env_or_empty(cfg_.auth_env);

    json body;
    body["model"] = cfg_.model_id;
    json input = json::array();
    for (const auto& t : texts) {
        if (cfg_.truncate_chars > 0 && t.size() > static_cast<std::size_t>(cfg_.truncate_chars))
            input.push_back(t.substr(0, static_cast<std::size_t>(cfg_.truncate_chars)));
        else
            input.push_back(t);
    }
    body["input"] = std::move(input);
    const std::string payload = body.dump();

    auto call = [&]() -> detail::AttemptResult<std::vector<EmbeddingVector>> {
        httplib::Client cli(url.base);
        cli.set_connection_timeout(30);
        cli.set_read_timeout(300);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res) return {std::nullopt, "connection failed: " + httplib::to_string(res.error()), false};
        if (res->status == 429 || res->status >= 500)
            return {std::nullopt, "HTTP " + std::to_string(res->status), false};
        if (res->status != 200)
            return {std::nullopt,
                    "embeddings API returned HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200),
                    true};

        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array() ||
            doc["data"].size() != texts.size())
            return {std::nullopt,
                    "malformed embeddings response: " + res->body.substr(0, 200), true};

        std::vector<EmbeddingVector> vecs(texts.size());
        for (std::size_t pos = 0; pos < doc["data"].size(); ++pos) {
            const auto& item = doc["data"][pos];
            if (!item.contains("embedding") || !item["embedding"].is_array())
                return {std::nullopt,
                        "malformed embeddings response: " + res->body.substr(0, 200), true};
            std::size_t idx = pos;
            if (item.contains("index") && item["index"].is_number_unsigned())
                idx = item["index"].get<std::size_t>();
            if (idx >= vecs.size())
                return {std::nullopt, "embedding index out of range in response", true};
            EmbeddingVector v;
            v.reserve(item["embedding"].size());
            for (const auto& x : item["embedding"]) {
                if (!x.is_number())
                    return {std::nullopt, "non-numeric embedding entry in response", true};
                v.push_back(x.get<double>());
            }
            vecs[idx] = std::move(v);
        }
        return {std::move(vecs), "", false};
    };

    return detail::with_retries<std::vector<EmbeddingVector>>(cfg_.max_attempts, cfg_.backoff_ms,
                                                              call);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg) {
    if (cfg.provider_kind == "local_hash")
        return std::make_unique<LocalHashEmbedder>(cfg.dim, cfg.model_id);
    if (cfg.provider_kind == "remote") return std::make_unique<RemoteEmbeddingClient>(cfg);
    throw ConfigError("unknown embedding provider kind: " + cfg.provider_kind);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path EmbeddingCache::entry_path(const std::string& kind, const std::string& model,
                                                 const std::string& text) const {
    const std::string sub = sanitize_component(kind) + "-" + sanitize_component(model);
    const std::string name = hex64(fnv1a64(text)) + hex64(fnv1a64(text, kAltSeed)) + ".emb";
    return dir_ / sub / name;
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& kind,
                                                   const std::string& model,
                                                   const std::string& text) const {
    const auto path = entry_path(kind, model, text);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;

    auto corrupt = [&](const char* why) -> std::optional<EmbeddingVector> {
        log_warn("embedding cache: corrupt entry (" + std::string(why) + "): " + path.string());
        return std::nullopt;
    };

    std::string line;
    if (!std::getline(in, line) || line != kCacheMagic) return corrupt("bad magic");
    if (!std::getline(in, line) || line != "kind=" + kind) return corrupt("kind mismatch");
    if (!std::getline(in, line) || line != "model=" + model) return corrupt("model mismatch");
    if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) return corrupt("missing dim");
    std::size_t dim = 0;
    try {
        dim = std::stoul(line.substr(4));
    } catch (...) {
        return corrupt("bad dim");
    }
    if (!std::getline(in, line) || line.rfind("text_bytes=", 0) != 0)
        return corrupt("missing text_bytes");
    std::size_t text_len = 0;
    try {
        text_len = std::stoul(line.substr(11));
    } catch (...) {
        return corrupt("bad text_bytes");
    }
    std::string stored(text_len, '\0');
    if (!in.read(stored.data(), static_cast<std::streamsize>(text_len)))
        return corrupt("truncated text");
    if (stored != text) return std::nullopt;  // hash collision: treat as miss
    char nl;
    if (!in.get(nl) || nl != '\n') return corrupt("missing separator");
    if (!std::getline(in, line)) return corrupt("missing values");
    auto vec = decode_hex_doubles(line, dim);
    if (!vec) return corrupt("bad values");
    return vec;
}

void EmbeddingCache::put(const std::string& kind, const std::string& model,
                         const std::string& text, const EmbeddingVector& vec) const {
    const auto path = entry_path(kind, model, text);
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("embedding cache: cannot write " + tmp);
        out << kCacheMagic << '\n'
            << "kind=" << kind << '\n'
            << "model=" << model << '\n'
            << "dim=" << vec.size() << '\n'
            << "text_bytes=" << text.size() << '\n';
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out << '\n' << encode_hex_doubles(vec) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

EmbeddingService::EmbeddingService(std::shared_ptr<EmbeddingProvider> provider,
                                   std::shared_ptr<EmbeddingCache> cache)
    : provider_(std::move(provider)), cache_(std::move(cache)) {
    if (!provider_) throw ConfigError("EmbeddingService needs a provider");
}

void EmbeddingService::check_dim(const EmbeddingVector& v) {
    if (v.empty()) return;
    if (expected_dim_ == 0) {
        expected_dim_ = v.size();
        return;
    }
    if (v.size() != expected_dim_)
        throw ConfigError("embedding dimension mismatch: got " + std::to_string(v.size()) +
                          ", expected " + std::to_string(expected_dim_) + " for provider " +
                          provider_->kind() + "/" + provider_->model_id());
}

std::vector<EmbeddingVector> EmbeddingService::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: texts must be non-empty");
    for (const auto& t : texts)
        if (trim(t).empty())
            throw std::invalid_argument("embed: texts must be non-empty after trimming");

    std::lock_guard lock(mutex_);
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> misses;
    // slot[i] == -1: served from cache; otherwise index into `misses`
    std::vector<std::ptrdiff_t> slot(texts.size(), -1);

    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (cache_) {
            if (auto hit = cache_->get(provider_->kind(), provider_->model_id(), texts[i])) {
                check_dim(*hit);
                out[i] = std::move(*hit);
                continue;
            }
        }
        auto seen = std::find(misses.begin(), misses.end(), texts[i]);
        if (seen == misses.end()) {
            misses.push_back(texts[i]);
            slot[i] = static_cast<std::ptrdiff_t>(misses.size()) - 1;
        } else {
            slot[i] = seen - misses.begin();
        }
    }

    if (!misses.empty()) {
        provider_calls_.fetch_add(1);
        auto vecs = provider_->embed_batch(misses);
        if (vecs.size() != misses.size())
            throw ProtocolError("provider returned " + std::to_string(vecs.size()) +
                                " vectors for " + std::to_string(misses.size()) + " texts");
        for (std::size_t i = 0; i < misses.size(); ++i) {
            check_dim(vecs[i]);
            if (cache_) cache_->put(provider_->kind(), provider_->model_id(), misses[i], vecs[i]);
        }
        for (std::size_t i = 0; i < texts.size(); ++i)
            if (slot[i] >= 0) out[i] = vecs[static_cast<std::size_t>(slot[i])];
    }
    return out;
}

EmbeddingVector EmbeddingService::get_or_compute(const std::string& text) {
    return embed({text})[0];
}

EmbeddingVector EmbeddingService::embed_or_zero(const std::string& text) {
    if (trim(text).empty()) return {};
    return get_or_compute(text);
}

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "obsx/errors.hpp"

namespace obsx {

using EmbeddingVector = std::vector<double>;

/// Cosine similarity, summed left to right so it is exactly symmetric.
/// Zero or empty vectors yield 0.0 (logged); a dimension mismatch between
/// two non-empty vectors is a ConfigError.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct EmbeddingProviderConfig {
    std::string provider_kind = "local_hash";  // local_hash | remote
    std::string model_id = "local-hash-v1";
    std::string endpoint;                      // remote only
    int dim = 256;                             // local only
    std::string auth_env = "OBSX_EMBED_API_KEY";
    int max_attempts = 3;
    int backoff_ms = 1000;
    int truncate_chars = 0;                    // 0 = no truncation
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// One vector per input, order preserving. Inputs must be non-empty
    /// after trimming.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
    virtual const std::string& kind() const = 0;
    virtual const std::string& model_id() const = 0;
};

/// Deterministic offline embedder: lowercase, split on non-alphanumeric
/// runs, FNV-1a-hash each token into `dim` buckets, count, L2-normalize.
/// Texts with no tokens map to the zero vector.
class LocalHashEmbedder : public EmbeddingProvider {
public:
    explicit LocalHashEmbedder(int dim = 256, std::string model_id = "local-hash-v1");
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    const std::string& kind() const override { return kind_; }
    const std::string& model_id() const override { return model_; }
    int dim() const { return dim_; }

private:
    int dim_;
    std::string model_;
    std::string kind_ = "local_hash";
};

/// HTTP embeddings API client: POST {model, input: [texts]} to the endpoint,
/// expects {data: [{embedding: [...]}, ...]} with one entry per input.
/// Auth token read from the configured environment variable; never logged.
class RemoteEmbeddingClient : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingClient(EmbeddingProviderConfig cfg);
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    const std::string& kind() const override { return kind_; }
    const std::string& model_id() const override { return cfg_.model_id; }

private:
    EmbeddingProviderConfig cfg_;
    std::string kind_ = "remote";
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg);

/// On-disk vector cache keyed by (provider kind, model, text content).
/// Entries are versioned and store the full key text, so hash collisions
/// and corrupt entries degrade to recomputation.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path dir);
    std::optional<EmbeddingVector> get(const std::string& kind, const std::string& model,
                                       const std::string& text) const;
    void put(const std::string& kind, const std::string& model, const std::string& text,
             const EmbeddingVector& vec) const;
    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path entry_path(const std::string& kind, const std::string& model,
                                     const std::string& text) const;

private:
    std::filesystem::path dir_;
};

/// Provider + cache bundle. Serializes cache access, counts provider
/// batch calls, and enforces one dimension per provider+model.
class EmbeddingService {
public:
    explicit EmbeddingService(std::shared_ptr<EmbeddingProvider> provider,
                              std::shared_ptr<EmbeddingCache> cache = nullptr);

    /// Order-preserving batch embed with cache write-through.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    /// Single-text convenience over embed().
    EmbeddingVector get_or_compute(const std::string& text);

    /// Like get_or_compute, but maps texts that are empty after trimming to
    /// an empty vector instead of erroring (cosine treats it as zero).
    EmbeddingVector embed_or_zero(const std::string& text);

    std::size_t provider_calls() const { return provider_calls_.load(); }
    const EmbeddingProvider& provider() const { return *provider_; }

private:
    std::shared_ptr<EmbeddingProvider> provider_;
    std::shared_ptr<EmbeddingCache> cache_;
    std::mutex mutex_;
    std::atomic<std::size_t> provider_calls_{0};
    std::size_t expected_dim_ = 0;  // 0 until first vector is seen

    void check_dim(const EmbeddingVector& v);
};

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/retrieval.hpp"

#include <algorithm>

#include "obsx/text.hpp"

namespace obsx {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {
bool score_order(const ScoredExemplar& a, const ScoredExemplar& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.exemplar.case_id < b.exemplar.case_id;
}

bool transcript_sim_order(const ScoredExemplar& a, const ScoredExemplar& b) {
    if (a.s_t != b.s_t) return a.s_t > b.s_t;
    return a.exemplar.case_id < b.exemplar.case_id;
}
}  // namespace

std::vector<ScoredExemplar> retrieve_pool(const std::string& query,
                                          const std::vector<ExemplarRecord>& corpus,
                                          const RetrievalConfig& cfg, EmbeddingService& embedder) {
    if (corpus.empty()) throw ConfigError("retrieve_pool: empty exemplar corpus");

    const EmbeddingVector query_vec = embedder.embed_or_zero(query);

    std::vector<ScoredExemplar> scored;
    scored.reserve(corpus.size());
    for (const auto& ex : corpus) {
        ScoredExemplar se;
        se.exemplar = ex;
        se.s_t = cosine(query_vec, embedder.embed_or_zero(ex.transcript));
        scored.push_back(std::move(se));
    }
    std::stable_sort(scored.begin(), scored.end(), transcript_sim_order);

    const auto pool = std::min<std::size_t>(scored.size(),
                                            cfg.pool_size > 0 ? static_cast<std::size_t>(cfg.pool_size)
                                                              : scored.size());
    scored.resize(pool);
    return scored;
}

std::vector<ScoredExemplar> rerank(std::vector<ScoredExemplar> pool, const std::string& query,
                                   const RetrievalConfig& cfg, EmbeddingService& embedder) {
    if (pool.empty()) return pool;

    const EmbeddingVector query_vec = embedder.embed_or_zero(query);
    const auto query_tokens = token_set(query);

    for (auto& se : pool) {
        se.s_c = cosine(query_vec, embedder.embed_or_zero(se.exemplar.summary_text));
        se.s_l = jaccard(query_tokens, token_set(se.exemplar.transcript));
    }
    return order_by_score(std::move(pool), cfg.weights, cfg.top_k);
}

std::vector<ScoredExemplar> retrieve_top_k(const std::string& query,
                                           const std::vector<ExemplarRecord>& corpus,
                                           const RetrievalConfig& cfg, EmbeddingService& embedder) {
    return rerank(retrieve_pool(query, corpus, cfg, embedder), query, cfg, embedder);
}

std::vector<ScoredExemplar> order_by_score(std::vector<ScoredExemplar> items,
                                           const RetrievalWeights& weights, int k) {
    for (auto& se : items)
        se.score = weights.w_t * se.s_t + weights.w_c * se.s_c + weights.w_l * se.s_l;
    std::stable_sort(items.begin(), items.end(), score_order);
    if (k >= 0 && static_cast<std::size_t>(k) < items.size())
        items.resize(static_cast<std::size_t>(k));
    return items;
}

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <vector>

#include "obsx/corpus.hpp"
#include "obsx/embedding.hpp"

namespace obsx {

/// Weighted combination of transcript cosine (s_t), summary cosine (s_c),
/// and lexical Jaccard (s_l).
struct RetrievalWeights {
    double w_t = 0.70;
    double w_c = 0.25;
    double w_l = 0.05;
};

struct RetrievalConfig {
    int pool_size = 100;
    int top_k = 30;
    RetrievalWeights weights;
};

struct ScoredExemplar {
    ExemplarRecord exemplar;
    double s_t = 0.0;  // transcript embedding cosine
    double s_c = 0.0;  // concept-name summary embedding cosine
    double s_l = 0.0;  // token-set Jaccard vs exemplar transcript
    double score = 0.0;
};

/// |A ∩ B| / |A ∪ B|. Both sets empty yields 1.0: two degenerate texts are
/// treated as identical rather than maximally distant.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Candidate pool: top pool_size exemplars by transcript cosine, ties
/// broken by ascending case_id. pool_size is clamped to the corpus size.
std::vector<ScoredExemplar> retrieve_pool(const std::string& query,
                                          const std::vector<ExemplarRecord>& corpus,
                                          const RetrievalConfig& cfg, EmbeddingService& embedder);

/// Fills s_c and s_l for every pool entry, combines with the run weights,
/// and returns the top_k by score (descending, ties by ascending case_id).
std::vector<ScoredExemplar> rerank(std::vector<ScoredExemplar> pool, const std::string& query,
                                   const RetrievalConfig& cfg, EmbeddingService& embedder);

/// retrieve_pool + rerank in one call.
std::vector<ScoredExemplar> retrieve_top_k(const std::string& query,
                                           const std::vector<ExemplarRecord>& corpus,
                                           const RetrievalConfig& cfg, EmbeddingService& embedder);

/// Pure ordering core: recomputes score = w_t*s_t + w_c*s_c + w_l*s_l from
/// the stored components, sorts descending with the case_id tie-break, and
/// truncates to k (k < 0 keeps everything).
std::vector<ScoredExemplar> order_by_score(std::vector<ScoredExemplar> items,
                                           const RetrievalWeights& weights, int k);

}  // namespace obsx

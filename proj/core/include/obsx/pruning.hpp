// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "obsx/corpus.hpp"
#include "obsx/embedding.hpp"
#include "obsx/retrieval.hpp"

namespace obsx {

/// Where a candidate entered the set. A concept reachable through several
/// routes keeps the first tag in lexical -> semantic -> retrieval ->
/// pattern order; Pad marks concepts added only to reach min_size.
enum class CandidateSource { Lexical, Semantic, Retrieval, Pattern, Pad };

std::string_view candidate_source_name(CandidateSource s);

struct Candidate {
    std::string id;
    double score = 0.0;
    CandidateSource source = CandidateSource::Lexical;
};

/// Per-instance candidate concept set, ordered by descending score with
/// ascending-id tie-break. No duplicates; every id resolves in the schema.
struct CandidateSet {
    std::vector<Candidate> items;

    bool contains(std::string_view id) const;
    std::vector<std::string> ids() const;
    std::size_t size() const { return items.size(); }
};

struct PruningConfig {
    double semantic_threshold = 0.50;
    int target_budget = 60;
    int min_size = 30;
    int max_size = 90;
    int lexical_keep = 40;
    int truncate_options_at = 8;
    std::vector<std::string> pattern_ids;

    void validate() const;  // min_size <= target_budget <= max_size, etc.
};

/// Token overlap between the transcript and the concept name, plus a bonus
/// capped at +1 for overlap with the enumerated values of categorical
/// concepts. Zero when nothing is shared.
double lexical_score(const std::string& transcript, const Concept& concept_def);

/// Concept ids whose name embedding scores cosine >= semantic_threshold
/// against the transcript embedding.
std::vector<std::string> semantic_matches(const std::string& transcript, const Schema& schema,
                                          const PruningConfig& cfg, EmbeddingService& embedder);

/// Union of top-lexical, semantic, exemplar-gold, and pattern candidates,
/// sized to [min_size, max_size]. Trimming removes the lowest-scoring
/// unprotected candidates first, then exemplar-only ids, then patterns
/// last; padding appends next-best remaining concepts.
CandidateSet build_candidate_set(const std::string& transcript, const Schema& schema,
                                 const std::vector<ScoredExemplar>& exemplars,
                                 const PruningConfig& cfg, EmbeddingService& embedder);

/// The sizing step of build_candidate_set, exposed on its own: trims `cs`
/// to max_size respecting the protection order and pads from `pad_pool`
/// (already scored, best first) up to min_size. Protection is by
/// membership: ids in cfg.pattern_ids outrank ids in exemplar_ids, which
/// outrank everything else. Idempotent.
CandidateSet size_candidates(CandidateSet cs, const std::vector<Candidate>& pad_pool,
                             const PruningConfig& cfg,
                             const std::vector<std::string>& exemplar_ids);

/// One line per candidate: id | name | value_type [| options]. Option lists
/// longer than truncate_options_at are cut and marked with "...".
std::string render_candidate_table(const CandidateSet& cs, const Schema& schema,
                                   const PruningConfig& cfg);

/// Full-schema block for unpruned prompting; truncate_options_at <= 0
/// renders complete option lists.
std::string render_schema_table(const Schema& schema, int truncate_options_at = 0);

/// Resolves pattern words/phrases against concept names: a concept matches
/// when its tokenized name contains the phrase's tokens contiguously.
std::vector<std::string> resolve_pattern_ids(const Schema& schema,
                                             const std::vector<std::string>& pattern_words);

/// Built-in vital-signs / common-assessment word list used when no pattern
/// file is configured.
std::vector<std::string> default_pattern_words();

}  // namespace obsx

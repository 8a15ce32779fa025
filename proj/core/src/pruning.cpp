// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/pruning.hpp"

#include <algorithm>
#include <set>

#include "obsx/log.hpp"
#include "obsx/text.hpp"

namespace obsx {

namespace {

bool candidate_order(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

/// Cosine of every concept name against the transcript embedding.
std::vector<double> name_similarities(const std::string& transcript, const Schema& schema,
                                      EmbeddingService& embedder) {
    std::vector<double> sims(schema.size(), 0.0);
    if (schema.size() == 0) return sims;
    const EmbeddingVector query_vec = embedder.embed_or_zero(transcript);

    std::vector<std::string> names;
    names.reserve(schema.size());
    for (const auto& c : schema.concepts()) names.push_back(c.name);
    // Names are schema-controlled and non-empty, but guard anyway.
    std::vector<EmbeddingVector> name_vecs(schema.size());
    std::vector<std::string> embeddable;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (!trim(names[i]).empty()) {
            embeddable.push_back(names[i]);
            where.push_back(i);
        }
    }
    if (!embeddable.empty()) {
        auto vecs = embedder.embed(embeddable);
        for (std::size_t i = 0; i < where.size(); ++i) name_vecs[where[i]] = std::move(vecs[i]);
    }
    for (std::size_t i = 0; i < schema.size(); ++i)
        sims[i] = cosine(query_vec, name_vecs[i]);
    return sims;
}

}  // namespace

std::string_view candidate_source_name(CandidateSource s) {
    switch (s) {
        case CandidateSource::Lexical: return "lexical";
        case CandidateSource::Semantic: return "semantic";
        case CandidateSource::Retrieval: return "retrieval";
        case CandidateSource::Pattern: return "pattern";
        case CandidateSource::Pad: return "pad";
    }
    return "lexical";
}

bool CandidateSet::contains(std::string_view id) const {
    return std::any_of(items.begin(), items.end(),
                       [&](const Candidate& c) { return c.id == id; });
}

std::vector<std::string> CandidateSet::ids() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& c : items) out.push_back(c.id);
    return out;
}

void PruningConfig::validate() const {
    if (min_size < 0 || max_size < 0 || target_budget < 0)
        throw ConfigError("pruning sizes must be non-negative");
    if (!(min_size <= target_budget && target_budget <= max_size))
        throw ConfigError("pruning config requires min_size <= target_budget <= max_size");
    if (lexical_keep < 0) throw ConfigError("lexical_keep must be non-negative");
    if (semantic_threshold < -1.0 - 1e-9)
        log_warn("semantic_threshold below -1 always matches everything");
}

double lexical_score(const std::string& transcript, const Concept& concept_def) {
    const auto transcript_tokens = token_set(transcript);
    if (transcript_tokens.empty()) return 0.0;

    double score = 0.0;
    for (const auto& t : token_set(concept_def.name))
        if (transcript_tokens.count(t)) score += 1.0;

    if (concept_def.categorical()) {
        // Bonus capped at +1 so long option lists cannot outweigh name hits.
        for (const auto& value : concept_def.allowable_values) {
            bool hit = false;
            for (const auto& t : token_set(value)) {
                if (transcript_tokens.count(t)) {
                    hit = true;
                    break;
                }
            }
            if (hit) {
                score += 1.0;
                break;
            }
        }
    }
    return score;
}

std::vector<std::string> semantic_matches(const std::string& transcript, const Schema& schema,
                                          const PruningConfig& cfg, EmbeddingService& embedder) {
    auto sims = name_similarities(transcript, schema, embedder);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (sims[i] >= cfg.semantic_threshold) out.push_back(schema.concepts()[i].id);
    return out;
}

CandidateSet size_candidates(CandidateSet cs, const std::vector<Candidate>& pad_pool,
                             const PruningConfig& cfg,
                             const std::vector<std::string>& exemplar_ids) {
    std::set<std::string> patterns(cfg.pattern_ids.begin(), cfg.pattern_ids.end());
    std::set<std::string> exemplars(exemplar_ids.begin(), exemplar_ids.end());

    std::sort(cs.items.begin(), cs.items.end(), candidate_order);

    // Trim from the tail of the output ordering: unprotected first, then
    // exemplar-only ids, patterns last.
    auto protection = [&](const Candidate& c) {
        if (patterns.count(c.id)) return 2;
        if (exemplars.count(c.id)) return 1;
        return 0;
    };
    while (cs.items.size() > static_cast<std::size_t>(cfg.max_size)) {
        bool removed = false;
        for (int cls = 0; cls <= 2 && !removed; ++cls) {
            for (auto it = cs.items.rbegin(); it != cs.items.rend(); ++it) {
                if (protection(*it) == cls) {
                    cs.items.erase(std::next(it).base());
                    removed = true;
                    break;
                }
            }
        }
        if (!removed) break;  // unreachable, keeps the loop total
    }

    if (cs.items.size() < static_cast<std::size_t>(cfg.min_size)) {
        std::set<std::string> present;
        for (const auto& c : cs.items) present.insert(c.id);
        for (const auto& p : pad_pool) {
            if (cs.items.size() >= static_cast<std::size_t>(cfg.min_size)) break;
            if (present.count(p.id)) continue;
            Candidate pad = p;
            pad.source = CandidateSource::Pad;
            cs.items.push_back(std::move(pad));
            present.insert(p.id);
        }
        std::sort(cs.items.begin(), cs.items.end(), candidate_order);
    }
    return cs;
}

CandidateSet build_candidate_set(const std::string& transcript, const Schema& schema,
                                 const std::vector<ScoredExemplar>& exemplars,
                                 const PruningConfig& cfg, EmbeddingService& embedder) {
    cfg.validate();
    const auto& concepts = schema.concepts();

    std::vector<double> lex(concepts.size(), 0.0);
    for (std::size_t i = 0; i < concepts.size(); ++i)
        lex[i] = lexical_score(transcript, concepts[i]);

    const auto sims = name_similarities(transcript, schema, embedder);

    // Combined per-concept score: lexical overlap, or the semantic cosine
    // when it passes the threshold and is larger.
    auto combined = [&](std::size_t i) {
        double s = lex[i];
        if (sims[i] >= cfg.semantic_threshold) s = std::max(s, sims[i]);
        return s;
    };

    auto index_of = [&](std::string_view id) -> std::ptrdiff_t {
        const Concept* c = schema.find(id);
        if (!c) return -1;
        return c - concepts.data();
    };

    CandidateSet cs;
    std::set<std::string> present;
    auto add = [&](std::size_t idx, CandidateSource src) {
        const std::string& id = concepts[idx].id;
        if (!present.insert(id).second) return;
        cs.items.push_back(Candidate{id, combined(idx), src});
    };

    // Top lexical candidates (positive scores only).
    {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < concepts.size(); ++i)
            if (lex[i] > 0.0) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (lex[a] != lex[b]) return lex[a] > lex[b];
            return concepts[a].id < concepts[b].id;
        });
        if (order.size() > static_cast<std::size_t>(cfg.lexical_keep))
            order.resize(static_cast<std::size_t>(cfg.lexical_keep));
        for (auto i : order) add(i, CandidateSource::Lexical);
    }

    // Semantic schema matches.
    for (std::size_t i = 0; i < concepts.size(); ++i)
        if (sims[i] >= cfg.semantic_threshold) add(i, CandidateSource::Semantic);

    // Retrieval expansion: gold concept ids of the retrieved exemplars.
    std::vector<std::string> exemplar_ids;
    for (const auto& se : exemplars) {
        for (const auto& pair : se.exemplar.std_pairs) {
            auto idx = index_of(pair.id);
            if (idx < 0) {
                log_warn("candidate set: exemplar gold id '" + pair.id + "' not in schema");
                continue;
            }
            add(static_cast<std::size_t>(idx), CandidateSource::Retrieval);
            exemplar_ids.push_back(concepts[static_cast<std::size_t>(idx)].id);
        }
    }

    // Injected common-observation patterns.
    std::vector<std::string> pattern_ids_resolved;
    for (const auto& pid : cfg.pattern_ids) {
        auto idx = index_of(pid);
        if (idx < 0) {
            log_warn("candidate set: pattern id '" + pid + "' not in schema");
            continue;
        }
        add(static_cast<std::size_t>(idx), CandidateSource::Pattern);
        pattern_ids_resolved.push_back(concepts[static_cast<std::size_t>(idx)].id);
    }

    // Pad pool: every remaining concept_def, best first.
    std::vector<Candidate> pad_pool;
    for (std::size_t i = 0; i < concepts.size(); ++i)
        if (!present.count(concepts[i].id))
            pad_pool.push_back(Candidate{concepts[i].id, combined(i), CandidateSource::Pad});
    std::sort(pad_pool.begin(), pad_pool.end(), candidate_order);

    PruningConfig sized_cfg = cfg;
    sized_cfg.pattern_ids = pattern_ids_resolved;
    return size_candidates(std::move(cs), pad_pool, sized_cfg, exemplar_ids);
}

namespace {
std::string concept_row(const Concept& c, int truncate_at) {
    std::string line = c.id + " | " + c.name + " | " + std::string(value_type_name(c.value_type));
    if (c.categorical()) {
        line += " | ";
        const std::size_t limit =
            truncate_at > 0 ? std::min<std::size_t>(c.allowable_values.size(),
                                                    static_cast<std::size_t>(truncate_at))
                            : c.allowable_values.size();
        for (std::size_t i = 0; i < limit; ++i) {
            if (i) line += "; ";
            line += c.allowable_values[i];
        }
        if (limit < c.allowable_values.size()) line += "; ...";
    }
    return line;
}
}  // namespace

std::string render_candidate_table(const CandidateSet& cs, const Schema& schema,
                                   const PruningConfig& cfg) {
    std::string out;
    for (const auto& cand : cs.items) {
        const Concept* c = schema.find(cand.id);
        if (!c) continue;  // candidate sets are schema-subset by construction
        out += concept_row(*c, cfg.truncate_options_at);
        out += '\n';
    }
    return out;
}

std::string render_schema_table(const Schema& schema, int truncate_options_at) {
    std::string out;
    for (const auto& c : schema.concepts()) {
        out += concept_row(c, truncate_options_at);
        out += '\n';
    }
    return out;
}

std::vector<std::string> resolve_pattern_ids(const Schema& schema,
                                             const std::vector<std::string>& pattern_words) {
    std::vector<std::vector<std::string>> phrases;
    for (const auto& w : pattern_words) {
        auto tokens = tokenize(w);
        if (!tokens.empty()) phrases.push_back(std::move(tokens));
    }

    std::vector<std::string> out;
    for (const auto& c : schema.concepts()) {
        const auto name_tokens = tokenize(c.name);
        bool matched = false;
        for (const auto& phrase : phrases) {
            if (phrase.size() > name_tokens.size()) continue;
            for (std::size_t start = 0; start + phrase.size() <= name_tokens.size(); ++start) {
                if (std::equal(phrase.begin(), phrase.end(), name_tokens.begin() + start)) {
                    matched = true;
                    break;
                }
            }
            if (matched) break;
        }
        if (matched) out.push_back(c.id);
    }
    return out;
}

std::vector<std::string> default_pattern_words() {
    return {"temperature", "pulse",    "respiration", "oxygen",
            "blood pressure", "pain", "mobility",    "cognitive"};
}

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obsx/corpus.hpp"

namespace obsx {

/// One comparable scoring atom. Multi-select observations contribute one
/// atom per selected choice; numeric values are compared as floats when
/// parseable, else as strings.
struct MatchItem {
    std::string case_id;
    std::string concept_id;  // canonicalized per the run's IdMode
    bool is_numeric = false;
    double number = 0.0;
    std::string text;

    /// Equality key for (concept_id, atom_value) matching.
    std::string value_key() const;
};

std::vector<MatchItem> atomize(const std::string& case_id, const Observation& obs,
                               IdMode id_mode = IdMode::Raw);

struct ScoreOptions {
    IdMode id_mode = IdMode::Raw;
    double numeric_epsilon = 0.0;  // 0 = exact float equality
    bool set_mode = false;         // dedupe atoms per side before matching
    bool use_pearson = false;      // correlation choice for analyze_errors
    int top_concepts = 10;         // rows in the per-concept error tables
};

/// Micro-aggregated counts and percentage metrics. All three metrics are 0
/// when their denominators are 0.
struct MetricsReport {
    std::size_t tp = 0, fp = 0, fn = 0;

    double precision() const;  // percent
    double recall() const;     // percent
    double f1() const;         // percent
};

/// Rounds to two decimals (the paper-style reporting precision).
double round2(double x);

using CasePredictions = std::map<std::string, std::vector<Observation>>;

/// Per-case multiset matching on (concept_id, atom_value): tp = matched
/// atoms, fp = unmatched predicted, fn = unmatched gold. Case ids present
/// on one side only count fully as fp or fn (warned, never skipped).
MetricsReport score(const CasePredictions& pred, const CasePredictions& gold,
                    const ScoreOptions& opts = {});

struct ConceptErrorCount {
    std::string concept_id;
    std::size_t count = 0;
};

struct CaseErrorRow {
    std::string case_id;
    std::size_t tp = 0, fp = 0, fn = 0;
    std::size_t gold_count = 0, pred_count = 0;
    std::size_t words = 0;
};

/// FP atoms split into spurious-concept (id absent from the case's gold)
/// vs wrong-value; FN atoms into missed-concept vs wrong-value. Plus
/// per-concept tallies (descending) and rank correlations of per-case
/// error counts against gold size, prediction size, and transcript words.
struct ErrorBreakdown {
    std::size_t fp_spurious_concept = 0;
    std::size_t fp_wrong_value = 0;
    std::size_t fn_missed_concept = 0;
    std::size_t fn_wrong_value = 0;
    std::vector<ConceptErrorCount> fp_by_concept;
    std::vector<ConceptErrorCount> fn_by_concept;
    std::optional<double> rho_errors_gold;
    std::optional<double> rho_errors_pred;
    std::optional<double> rho_errors_words;
    std::string correlation_kind;  // "spearman" or "pearson"
};

ErrorBreakdown analyze_errors(const CasePredictions& pred, const CasePredictions& gold,
                              const std::vector<CaseInstance>& cases,
                              const ScoreOptions& opts = {},
                              std::vector<CaseErrorRow>* per_case = nullptr);

/// Spearman rank correlation with average ranks on ties; nullopt when
/// either series is constant or shorter than 2.
std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys);
std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace obsx

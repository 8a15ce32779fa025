// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "obsx/corpus.hpp"

namespace obsx {

/// The untrusted (id, value) shape parsed out of model output. No
/// invariants hold until validate().
struct PredictionPair {
    std::string id;
    nlohmann::json value;
};

struct ParseOutcome {
    std::vector<PredictionPair> pairs;
    bool parse_ok = true;    // false when no list could be recovered
    std::string note;        // what failed or which repairs fired
};

/// Deterministic cleanup of near-JSON model output, applied in order:
/// strip code fences, excise text outside the first '['..matching ']',
/// remove trailing commas, normalize curly quotes; then parse. Total:
/// never throws, unparseable input yields an empty list with parse_ok
/// false.
ParseOutcome repair_and_parse(std::string_view raw_text);

struct ValidationOptions {
    IdMode id_mode = IdMode::Raw;
    /// Default categorical matching is trim + case-insensitive, replaced by
    /// the canonical casing; this switches to exact matching.
    bool case_sensitive = false;
    /// Accept one trailing unit token on numeric strings ("95%" -> 95).
    bool strip_unit_suffix = false;
};

struct ValidationReport {
    std::size_t kept = 0;
    std::size_t dropped_unknown_id = 0;
    std::size_t dropped_bad_value = 0;
    std::size_t dropped_duplicate = 0;
    std::size_t coerced_numeric = 0;      // numeric strings converted to numbers
    std::size_t coerced_categorical = 0;  // trim/case/list/dedup normalization applied
    std::vector<std::string> notes;

    std::size_t input_total() const {
        return kept + dropped_unknown_id + dropped_bad_value + dropped_duplicate;
    }
    void merge(const ValidationReport& other);
};

struct ValidationResult {
    std::vector<StdPair> pairs;  // schema-normalized, first valid occurrence per id
    ValidationReport report;
};

/// Schema validation and normalization: unknown ids dropped; single_select
/// values matched against allowable_values and replaced by canonical
/// casing; multi_select coerced to deduplicated lists of allowed choices;
/// numeric strings converted when possible (else kept as raw strings);
/// duplicate ids resolved by keeping the first valid occurrence.
ValidationResult validate(const std::vector<PredictionPair>& pairs, const Schema& schema,
                          const ValidationOptions& opts = {});

/// Deterministic expansion of validated pairs into full Observations with
/// name/value_type copied from the schema. An unresolvable id here is an
/// internal invariant violation and throws.
std::vector<Observation> expand(const std::vector<StdPair>& pairs, const Schema& schema);

/// Converts validated pairs back to the untrusted shape (for re-validation
/// round-trips and audit-prompt serialization).
std::vector<PredictionPair> to_prediction_pairs(const std::vector<StdPair>& pairs);

/// Strict numeric literal: optional sign, digits, at most one decimal
/// point. With allow_unit_suffix, one trailing non-numeric token (with or
/// without a separating space) is ignored.
std::optional<double> parse_numeric(std::string_view text, bool allow_unit_suffix);

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "obsx/errors.hpp"

namespace obsx {

/// Value type of an observation concept.
enum class ValueType { SingleSelect, MultiSelect, Numeric, String };

std::string_view value_type_name(ValueType t);
std::optional<ValueType> value_type_from_name(std::string_view name);

/// How concept ids are compared. Numeric mode strips leading zeros from
/// all-digit ids ("03" == "3"), which absorbs the leading-zero mismatches
/// some reference encodings exhibit.
enum class IdMode { Raw, Numeric };

std::string canonical_id(std::string_view id, IdMode mode);

/// One observation concept: id, display name, value type, and (for the
/// categorical types) the allowed value list.
struct Concept {
    std::string id;
    std::string name;
    ValueType value_type = ValueType::String;
    std::vector<std::string> allowable_values;  // non-empty iff categorical

    bool categorical() const {
        return value_type == ValueType::SingleSelect || value_type == ValueType::MultiSelect;
    }
};

/// The full concept registry. Immutable after construction; ids are unique
/// under the chosen IdMode and lookup goes through canonical_id().
class Schema {
public:
    Schema() = default;
    Schema(std::vector<Concept> concepts, IdMode id_mode);

    const std::vector<Concept>& concepts() const { return concepts_; }
    std::size_t size() const { return concepts_.size(); }
    IdMode id_mode() const { return id_mode_; }

    /// Returns the concept for `id` (canonicalized), or nullptr.
    const Concept* find(std::string_view id) const;

private:
    std::vector<Concept> concepts_;
    std::unordered_map<std::string, std::size_t> by_id_;
    IdMode id_mode_ = IdMode::Raw;
};

/// A validated observation value: one string, a deduplicated list of
/// strings, or a finite number. Numeric concepts whose value could not be
/// parsed keep the raw string.
using ObservationValue = std::variant<std::string, std::vector<std::string>, double>;

bool observation_value_equal(const ObservationValue& a, const ObservationValue& b);
nlohmann::json observation_value_to_json(const ObservationValue& v);

/// Shape-level coercion of a trusted JSON value into the typed form for
/// `concept_def`: multi-select scalars become one-element lists, numeric
/// strings are parsed when possible. No allowable-value matching (that is
/// validate()'s job for model output). nullopt when the shape is unusable.
std::optional<ObservationValue> coerce_value_shape(const nlohmann::json& value,
                                                   const Concept& concept_def);

/// A fully expanded extracted item. name and value_type always mirror the
/// schema entry for id.
struct Observation {
    std::string id;
    std::string name;
    ValueType value_type = ValueType::String;
    ObservationValue value;
};

bool operator==(const Observation& a, const Observation& b);

/// One corpus record: case id, transcript, and (train/dev) gold observations.
struct CaseInstance {
    std::string case_id;
    std::string transcript;
    std::optional<std::vector<Observation>> gold;
};

/// Compact (id, value) pair used for gold standardization, prompt examples,
/// and validated predictions.
struct StdPair {
    std::string id;
    ObservationValue value;
};

/// Serializes pairs as the JSON list of {"id", "value"} objects the model
/// is asked to produce.
std::string std_pairs_to_json(const std::vector<StdPair>& pairs);

/// A training case prepared for retrieval: standardized gold pairs plus the
/// concept-name summary view ("name1 | name2 | ...", gold order, each name
/// once).
struct ExemplarRecord {
    std::string case_id;
    std::string transcript;
    std::vector<StdPair> std_pairs;
    std::string summary_text;
};

struct LoadOptions {
    IdMode id_mode = IdMode::Raw;
    /// strict: malformed lines and unresolvable gold ids abort the load.
    /// lenient (default): skip and count them.
    bool strict = false;
};

struct LoadStats {
    std::size_t malformed_lines = 0;
    std::size_t dropped_gold_items = 0;
    std::size_t dropped_duplicate_gold = 0;
};

/// Loads the schema document: a JSON array of concept records (an object
/// with a "concepts" array is also accepted). Duplicate ids, unknown value
/// types, missing fields, and empty allowable sets are LoadErrors naming
/// the offending concept.
Schema load_schema(const std::filesystem::path& path, IdMode id_mode = IdMode::Raw);
Schema parse_schema(const std::string& content, IdMode id_mode = IdMode::Raw,
                    const std::string& origin = "<schema>");

/// Loads a JSONL split. Gold items are re-expanded to canonical
/// (name, value_type) from the schema; items whose id does not resolve are
/// dropped with a warning (or fail the load under strict).
std::vector<CaseInstance> load_split(const std::filesystem::path& path, const Schema& schema,
                                     const LoadOptions& opts = {}, LoadStats* stats = nullptr);
std::vector<CaseInstance> parse_split(const std::string& content, const Schema& schema,
                                      const LoadOptions& opts = {}, LoadStats* stats = nullptr,
                                      const std::string& origin = "<split>");

/// Serializes a split back to JSONL (round-trips through load_split).
std::string split_to_jsonl(const std::vector<CaseInstance>& cases);

/// Precondition: case.gold is present.
ExemplarRecord build_exemplar(const CaseInstance& instance, const Schema& schema);

/// Builds exemplars for every case that has gold; cases without gold are
/// skipped with a warning.
std::vector<ExemplarRecord> build_exemplars(const std::vector<CaseInstance>& cases,
                                            const Schema& schema);

struct SplitStats {
    std::size_t instances = 0;
    std::size_t total_gold = 0;
    std::size_t distinct_gold_ids = 0;
};

SplitStats split_stats(const std::vector<CaseInstance>& cases);

/// Submission-shape record {id, name, value_type, value}, key order fixed.
nlohmann::ordered_json observation_to_json(const Observation& obs);

}  // namespace obsx

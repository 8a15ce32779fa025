// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/postprocess.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "obsx/log.hpp"
#include "obsx/text.hpp"

namespace obsx {

namespace {
using nlohmann::json;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Step 1: when a fenced block exists, keep its inner content (dropping an
/// optional language tag after the opening marker).
std::string strip_code_fences(std::string_view s) {
    auto open = s.find("```");
    if (open == std::string_view::npos) return std::string(s);
    std::size_t inner_start = open + 3;
    while (inner_start < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[inner_start])) || s[inner_start] == '_' ||
            s[inner_start] == '-'))
        ++inner_start;
    auto close = s.find("```", inner_start);
    if (close == std::string_view::npos) {
        std::string out(s.substr(0, open));
        out += s.substr(inner_start);
        return out;
    }
    return std::string(s.substr(inner_start, close - inner_start));
}

/// Step 2: keep only the first '[' through its matching ']' (string-aware);
/// falls back to the last ']' when the list is truncated.
std::optional<std::string> excise_list(std::string_view s) {
    auto start = s.find('[');
    if (start == std::string_view::npos) return std::nullopt;

    int depth = 0;
    bool in_string = false, escape = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (escape)
                escape = false;
            else if (c == '\\')
                escape = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            --depth;
            if (depth == 0) return std::string(s.substr(start, i - start + 1));
        }
    }
    auto last = s.rfind(']');
    if (last != std::string_view::npos && last > start)
        return std::string(s.substr(start, last - start + 1));
    return std::nullopt;
}

/// Step 3: drop commas directly before a closing bracket/brace.
std::string remove_trailing_commas(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_string = false, escape = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            out.push_back(c);
            if (escape)
                escape = false;
            else if (c == '\\')
                escape = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == ']' || s[j] == '}')) continue;  // skip the comma
        }
        out.push_back(c);
    }
    return out;
}

/// Step 4: curly quotes to straight quotes.
std::string normalize_quotes(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
            static_cast<unsigned char>(s[i + 1]) == 0x80) {
            unsigned char third = static_cast<unsigned char>(s[i + 2]);
            if (third == 0x9C || third == 0x9D) {
                out.push_back('"');
                i += 2;
                continue;
            }
            if (third == 0x98 || third == 0x99) {
                out.push_back('\'');
                i += 2;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

std::optional<std::string> id_from_value(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
    if (j.is_number_float()) return format_double(j.get<double>());
    return std::nullopt;
}

std::optional<std::string> scalar_string(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return format_double(j.get<double>());
    if (j.is_boolean()) return std::string(j.get<bool>() ? "true" : "false");
    return std::nullopt;
}

/// Case-insensitive (unless case_sensitive) trimmed match against the
/// allowable list; returns the canonical entry.
std::optional<std::string> match_choice(const std::string& raw,
                                        const std::vector<std::string>& allowable,
                                        bool case_sensitive) {
    const std::string trimmed = trim(raw);
    if (case_sensitive) {
        for (const auto& a : allowable)
            if (trimmed == a) return a;
        return std::nullopt;
    }
    const std::string folded = to_lower_ascii(trimmed);
    for (const auto& a : allowable)
        if (folded == to_lower_ascii(a)) return a;
    return std::nullopt;
}

std::optional<double> parse_strict_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = 0;
    if (s[i] == '+' || s[i] == '-') ++i;
    std::size_t digits = 0;
    while (i < s.size() && is_digit(s[i])) {
        ++i;
        ++digits;
    }
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && is_digit(s[i])) {
            ++i;
            ++digits;
        }
    }
    if (digits == 0 || i != s.size()) return std::nullopt;
    return std::strtod(std::string(s).c_str(), nullptr);
}
}  // namespace

ParseOutcome repair_and_parse(std::string_view raw_text) {
    ParseOutcome outcome;

    std::string s = strip_code_fences(raw_text);
    auto list = excise_list(s);
    if (!list) {
        outcome.parse_ok = false;
        outcome.note = "no JSON list found in output";
        return outcome;
    }
    s = remove_trailing_commas(*list);
    s = normalize_quotes(s);

    json doc = json::parse(s, nullptr, false);
    if (doc.is_discarded()) {
        outcome.parse_ok = false;
        outcome.note = "output not parseable after repairs";
        return outcome;
    }
    if (doc.is_object()) doc = json::array({std::move(doc)});
    if (!doc.is_array()) {
        outcome.parse_ok = false;
        outcome.note = "repaired output is not a JSON list";
        return outcome;
    }

    std::size_t skipped = 0;
    for (auto& item : doc) {
        if (!item.is_object() || !item.contains("id") || !item.contains("value")) {
            ++skipped;
            continue;
        }
        auto id = id_from_value(item["id"]);
        if (!id) {
            ++skipped;
            continue;
        }
        outcome.pairs.push_back(PredictionPair{std::move(*id), std::move(item["value"])});
    }
    if (skipped > 0)
        outcome.note = std::to_string(skipped) + " list item(s) without usable id/value skipped";
    return outcome;
}

void ValidationReport::merge(const ValidationReport& other) {
    kept += other.kept;
    dropped_unknown_id += other.dropped_unknown_id;
    dropped_bad_value += other.dropped_bad_value;
    dropped_duplicate += other.dropped_duplicate;
    coerced_numeric += other.coerced_numeric;
    coerced_categorical += other.coerced_categorical;
    notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

ValidationResult validate(const std::vector<PredictionPair>& pairs, const Schema& schema,
                          const ValidationOptions& opts) {
    ValidationResult result;
    auto& report = result.report;
    std::set<std::string> seen;  // canonical ids already kept

    for (const auto& pair : pairs) {
        const Concept* concept_def = schema.find(canonical_id(pair.id, opts.id_mode));
        if (!concept_def) {
            ++report.dropped_unknown_id;
            report.notes.push_back("unknown concept id '" + pair.id + "'");
            continue;
        }

        bool coerced_cat = false;
        bool coerced_num = false;
        std::optional<ObservationValue> value;
        const json& v = pair.value;

        switch (concept_def->value_type) {
            case ValueType::SingleSelect: {
                auto s = scalar_string(v);
                if (!s) break;
                auto canonical = match_choice(*s, concept_def->allowable_values, opts.case_sensitive);
                if (!canonical) break;
                coerced_cat = (*canonical != *s) || !v.is_string();
                value = ObservationValue(*canonical);
                break;
            }
            case ValueType::MultiSelect: {
                std::vector<std::string> raw_choices;
                bool changed = false;
                if (v.is_array()) {
                    for (const auto& e : v) {
                        auto s = scalar_string(e);
                        if (s)
                            raw_choices.push_back(*s);
                        else
                            changed = true;  // non-scalar element dropped
                    }
                } else {
                    auto s = scalar_string(v);
                    if (!s) break;
                    raw_choices.push_back(*s);
                    changed = true;  // scalar converted to list
                }
                std::vector<std::string> choices;
                for (const auto& raw : raw_choices) {
                    auto canonical =
                        match_choice(raw, concept_def->allowable_values, opts.case_sensitive);
                    if (!canonical) {
                        changed = true;  // disallowed choice filtered
                        continue;
                    }
                    if (*canonical != raw) changed = true;
                    if (std::find(choices.begin(), choices.end(), *canonical) != choices.end()) {
                        changed = true;  // duplicate removed
                        continue;
                    }
                    choices.push_back(*canonical);
                }
                if (choices.empty()) break;
                coerced_cat = changed;
                value = ObservationValue(std::move(choices));
                break;
            }
            case ValueType::Numeric: {
                if (v.is_number()) {
                    value = ObservationValue(v.get<double>());
                } else if (v.is_string()) {
                    const std::string s = v.get<std::string>();
                    if (auto d = parse_numeric(s, opts.strip_unit_suffix)) {
                        value = ObservationValue(*d);
                        coerced_num = true;
                    } else {
                        // "converted to numbers when possible": keep the raw
                        // string otherwise and let the evaluator compare as
                        // string.
                        value = ObservationValue(s);
                        report.notes.push_back("numeric id '" + concept_def->id +
                                               "' kept unparseable value as string");
                    }
                }
                break;
            }
            case ValueType::String: {
                if (v.is_string()) {
                    value = ObservationValue(v.get<std::string>());
                } else if (v.is_number() || v.is_boolean()) {
                    value = ObservationValue(*scalar_string(v));
                    report.notes.push_back("string id '" + concept_def->id +
                                           "' scalar value stringified");
                }
                break;
            }
        }

        if (!value) {
            ++report.dropped_bad_value;
            report.notes.push_back("id '" + concept_def->id + "' (" +
                                   std::string(value_type_name(concept_def->value_type)) +
                                   "): value rejected: " + v.dump().substr(0, 80));
            continue;
        }
        if (!seen.insert(canonical_id(concept_def->id, opts.id_mode)).second) {
            ++report.dropped_duplicate;
            report.notes.push_back("duplicate id '" + concept_def->id +
                                   "': kept first valid occurrence");
            continue;
        }
        ++report.kept;
        if (coerced_cat) ++report.coerced_categorical;
        if (coerced_num) ++report.coerced_numeric;
        result.pairs.push_back(StdPair{concept_def->id, std::move(*value)});
    }
    return result;
}

std::vector<Observation> expand(const std::vector<StdPair>& pairs, const Schema& schema) {
    std::vector<Observation> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const Concept* concept_def = schema.find(pair.id);
        if (!concept_def)
            throw Error("expand: id '" + pair.id +
                        "' does not resolve in the schema (validate() must run first)");
        out.push_back(Observation{concept_def->id, concept_def->name, concept_def->value_type, pair.value});
    }
    return out;
}

std::vector<PredictionPair> to_prediction_pairs(const std::vector<StdPair>& pairs) {
    std::vector<PredictionPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs)
        out.push_back(PredictionPair{p.id, observation_value_to_json(p.value)});
    return out;
}

std::optional<double> parse_numeric(std::string_view text, bool allow_unit_suffix) {
    const std::string t = trim(text);
    if (auto d = parse_strict_number(t)) return d;
    if (!allow_unit_suffix) return std::nullopt;

    std::size_t i = 0;
    if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
    std::size_t digits = 0;
    while (i < t.size() && is_digit(t[i])) {
        ++i;
        ++digits;
    }
    if (i < t.size() && t[i] == '.') {
        ++i;
        while (i < t.size() && is_digit(t[i])) {
            ++i;
            ++digits;
        }
    }
    if (digits == 0) return std::nullopt;
    const std::string rest = trim(t.substr(i));
    if (rest.empty()) return std::nullopt;
    if (rest.find(' ') != std::string::npos || rest.find('\t') != std::string::npos)
        return std::nullopt;  // more than one trailing token
    if (is_digit(rest[0]) || rest[0] == '.') return std::nullopt;
    return parse_strict_number(t.substr(0, i));
}

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "obsx/log.hpp"
#include "obsx/text.hpp"

namespace obsx {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_of_offset(const std::string& content, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < content.size(); ++i)
        if (content[i] == '\n') ++line;
    return line;
}

/// Accepts string or integral ids and normalizes to string.
std::optional<std::string> id_from_json(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
    if (j.is_number_float()) return format_double(j.get<double>());
    return std::nullopt;
}

std::optional<std::string> scalar_to_string(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return format_double(j.get<double>());
    if (j.is_boolean()) return std::string(j.get<bool>() ? "true" : "false");
    return std::nullopt;
}

}  // namespace

std::optional<ObservationValue> coerce_value_shape(const nlohmann::json& v,
                                                   const Concept& concept_def) {
    switch (concept_def.value_type) {
        case ValueType::SingleSelect:
        case ValueType::String: {
            auto s = scalar_to_string(v);
            if (!s) return std::nullopt;
            return ObservationValue(*s);
        }
        case ValueType::MultiSelect: {
            std::vector<std::string> out;
            if (v.is_array()) {
                for (const auto& e : v) {
                    auto s = scalar_to_string(e);
                    if (!s) return std::nullopt;
                    if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
                }
            } else {
                auto s = scalar_to_string(v);
                if (!s) return std::nullopt;
                out.push_back(*s);
            }
            if (out.empty()) return std::nullopt;
            return ObservationValue(std::move(out));
        }
        case ValueType::Numeric: {
            if (v.is_number()) return ObservationValue(v.get<double>());
            if (v.is_string()) {
                const std::string s = v.get<std::string>();
                const std::string t = trim(s);
                char* end = nullptr;
                double d = std::strtod(t.c_str(), &end);
                if (!t.empty() && end == t.c_str() + t.size()) return ObservationValue(d);
                return ObservationValue(s);  // unparseable numeric keeps the raw string
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::string_view value_type_name(ValueType t) {
    switch (t) {
        case ValueType::SingleSelect: return "single_select";
        case ValueType::MultiSelect: return "multi_select";
        case ValueType::Numeric: return "numeric";
        case ValueType::String: return "string";
    }
    return "string";
}

std::optional<ValueType> value_type_from_name(std::string_view name) {
    if (name == "single_select") return ValueType::SingleSelect;
    if (name == "multi_select") return ValueType::MultiSelect;
    if (name == "numeric") return ValueType::Numeric;
    if (name == "string") return ValueType::String;
    return std::nullopt;
}

std::string canonical_id(std::string_view id, IdMode mode) {
    if (mode == IdMode::Raw) return std::string(id);
    if (id.empty()) return std::string(id);
    for (char c : id)
        if (c < '0' || c > '9') return std::string(id);
    std::size_t i = 0;
    while (i + 1 < id.size() && id[i] == '0') ++i;
    return std::string(id.substr(i));
}

Schema::Schema(std::vector<Concept> concepts, IdMode id_mode)
    : concepts_(std::move(concepts)), id_mode_(id_mode) {
    by_id_.reserve(concepts_.size());
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
        const std::string key = canonical_id(concepts_[i].id, id_mode_);
        auto [it, inserted] = by_id_.emplace(key, i);
        if (!inserted) {
            throw LoadError("duplicate concept id '" + concepts_[i].id + "' (conflicts with '" +
                            concepts_[it->second].id + "' under the active id mode)");
        }
    }
}

const Concept* Schema::find(std::string_view id) const {
    auto it = by_id_.find(canonical_id(id, id_mode_));
    if (it == by_id_.end()) return nullptr;
    return &concepts_[it->second];
}

bool observation_value_equal(const ObservationValue& a, const ObservationValue& b) {
    return a == b;
}

nlohmann::json observation_value_to_json(const ObservationValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    if (const auto* list = std::get_if<std::vector<std::string>>(&v)) return *list;
    double d = std::get<double>(v);
    if (d == std::floor(d) && std::fabs(d) < 9.007199254740992e15)
        return static_cast<std::int64_t>(d);
    return d;
}

bool operator==(const Observation& a, const Observation& b) {
    return a.id == b.id && a.name == b.name && a.value_type == b.value_type &&
           a.value == b.value;
}

std::string std_pairs_to_json(const std::vector<StdPair>& pairs) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : pairs) {
        ordered_json obj;
        obj["id"] = p.id;
        obj["value"] = observation_value_to_json(p.value);
        arr.push_back(std::move(obj));
    }
    return arr.dump();
}

Schema load_schema(const std::filesystem::path& path, IdMode id_mode) {
    return parse_schema(read_file(path), id_mode, path.string());
}

Schema parse_schema(const std::string& content, IdMode id_mode, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& e) {
        throw LoadError(origin + ": schema parse error at line " +
                        std::to_string(line_of_offset(content, e.byte)) + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("concepts")) doc = doc["concepts"];
    if (!doc.is_array())
        throw LoadError(origin + ": schema document must be an array of concept records");

    std::vector<Concept> concepts;
    concepts.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& rec = doc[i];
        const std::string where = origin + ": concept #" + std::to_string(i);
        if (!rec.is_object()) throw LoadError(where + ": record is not an object");

        Concept c;
        if (!rec.contains("id")) throw LoadError(where + ": missing field 'id'");
        auto id = id_from_json(rec["id"]);
        if (!id) throw LoadError(where + ": field 'id' must be a string or number");
        c.id = *id;

        const std::string who = where + " (id '" + c.id + "')";
        if (!rec.contains("name") || !rec["name"].is_string())
            throw LoadError(who + ": missing or non-string field 'name'");
        c.name = rec["name"].get<std::string>();

        if (!rec.contains("value_type") || !rec["value_type"].is_string())
            throw LoadError(who + ": missing or non-string field 'value_type'");
        auto vt = value_type_from_name(rec["value_type"].get<std::string>());
        if (!vt)
            throw LoadError(who + ": unknown value_type tag '" +
                            rec["value_type"].get<std::string>() + "'");
        c.value_type = *vt;

        if (c.categorical()) {
            if (!rec.contains("allowable_values") || !rec["allowable_values"].is_array())
                throw LoadError(who + ": categorical concept needs an 'allowable_values' array");
            for (const auto& av : rec["allowable_values"]) {
                auto s = scalar_to_string(av);
                if (!s) throw LoadError(who + ": allowable value is not a scalar");
                c.allowable_values.push_back(*s);
            }
            if (c.allowable_values.empty())
                throw LoadError(who + ": empty allowable value set for categorical concept");
            std::set<std::string> seen;
            for (const auto& v : c.allowable_values)
                if (!seen.insert(v).second)
                    throw LoadError(who + ": duplicate allowable value '" + v + "'");
        } else if (rec.contains("allowable_values") && !rec["allowable_values"].is_null() &&
                   !(rec["allowable_values"].is_array() && rec["allowable_values"].empty())) {
            log_warn(who + ": ignoring allowable_values on non-categorical concept");
        }
        concepts.push_back(std::move(c));
    }
    return Schema(std::move(concepts), id_mode);
}

std::vector<CaseInstance> load_split(const std::filesystem::path& path, const Schema& schema,
                                     const LoadOptions& opts, LoadStats* stats) {
    return parse_split(read_file(path), schema, opts, stats, path.string());
}

std::vector<CaseInstance> parse_split(const std::string& content, const Schema& schema,
                                      const LoadOptions& opts, LoadStats* stats,
                                      const std::string& origin) {
    LoadStats local;
    std::vector<CaseInstance> cases;
    std::set<std::string> seen_ids;

    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            if (opts.strict) throw LoadError(where + ": malformed record: " + e.what());
            log_warn(where + ": skipping malformed line: " + e.what());
            ++local.malformed_lines;
            continue;
        }

        auto fail_or_skip = [&](const std::string& msg) {
            if (opts.strict) throw LoadError(where + ": " + msg);
            log_warn(where + ": skipping record: " + msg);
            ++local.malformed_lines;
        };

        if (!rec.is_object() || !rec.contains("id") || !rec.contains("transcript")) {
            fail_or_skip("record needs 'id' and 'transcript' fields");
            continue;
        }
        auto id = id_from_json(rec["id"]);
        if (!id || !rec["transcript"].is_string()) {
            fail_or_skip("'id' must be scalar and 'transcript' a string");
            continue;
        }
        if (!seen_ids.insert(*id).second) {
            fail_or_skip("duplicate case id '" + *id + "' in split");
            continue;
        }

        CaseInstance inst;
        inst.case_id = *id;
        inst.transcript = rec["transcript"].get<std::string>();

        if (rec.contains("observations") && !rec["observations"].is_null()) {
            if (!rec["observations"].is_array()) {
                fail_or_skip("'observations' must be an array");
                continue;
            }
            std::vector<Observation> gold;
            std::set<std::string> seen_concepts;
            for (const auto& item : rec["observations"]) {
                std::optional<std::string> oid;
                if (item.is_object() && item.contains("id")) oid = id_from_json(item["id"]);
                if (!oid || !item.contains("value")) {
                    if (opts.strict)
                        throw LoadError(where + ": gold item needs 'id' and 'value'");
                    log_warn(where + ": dropping gold item without id/value");
                    ++local.dropped_gold_items;
                    continue;
                }
                const Concept* concept_def = schema.find(*oid);
                if (!concept_def) {
                    if (opts.strict)
                        throw LoadError(where + ": case '" + inst.case_id +
                                        "': gold id '" + *oid + "' not in schema");
                    log_warn(where + ": case '" + inst.case_id + "': dropping gold item with unknown id '" +
                             *oid + "'");
                    ++local.dropped_gold_items;
                    continue;
                }
                if (!seen_concepts.insert(canonical_id(concept_def->id, schema.id_mode())).second) {
                    if (opts.strict)
                        throw LoadError(where + ": case '" + inst.case_id +
                                        "': duplicated gold concept id '" + concept_def->id + "'");
                    log_warn(where + ": case '" + inst.case_id +
                             "': dropping duplicated gold concept id '" + concept_def->id + "'");
                    ++local.dropped_duplicate_gold;
                    continue;
                }
                auto value = coerce_value_shape(item["value"], *concept_def);
                if (!value) {
                    if (opts.strict)
                        throw LoadError(where + ": case '" + inst.case_id +
                                        "': gold value for id '" + concept_def->id +
                                        "' has an unusable shape");
                    log_warn(where + ": case '" + inst.case_id +
                             "': dropping gold item with unusable value shape (id '" +
                             concept_def->id + "')");
                    ++local.dropped_gold_items;
                    continue;
                }
                // Re-expanded from the schema: file-provided name/value_type
                // are ignored.
                gold.push_back(Observation{concept_def->id, concept_def->name, concept_def->value_type,
                                           std::move(*value)});
            }
            inst.gold = std::move(gold);
        }
        cases.push_back(std::move(inst));
    }

    if (stats) *stats = local;
    return cases;
}

std::string split_to_jsonl(const std::vector<CaseInstance>& cases) {
    std::string out;
    for (const auto& c : cases) {
        ordered_json rec;
        rec["id"] = c.case_id;
        rec["transcript"] = c.transcript;
        if (c.gold) {
            ordered_json arr = ordered_json::array();
            for (const auto& obs : *c.gold) arr.push_back(observation_to_json(obs));
            rec["observations"] = std::move(arr);
        }
        out += rec.dump();
        out += '\n';
    }
    return out;
}

ExemplarRecord build_exemplar(const CaseInstance& instance, const Schema& schema) {
    if (!instance.gold)
        throw std::invalid_argument("build_exemplar: case '" + instance.case_id +
                                    "' has no gold observations");
    ExemplarRecord rec;
    rec.case_id = instance.case_id;
    rec.transcript = instance.transcript;

    std::vector<std::string> names;
    for (const auto& obs : *instance.gold) {
        rec.std_pairs.push_back(StdPair{obs.id, obs.value});
        const Concept* concept_def = schema.find(obs.id);
        const std::string& name = concept_def ? concept_def->name : obs.name;
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) rec.summary_text += " | ";
        rec.summary_text += names[i];
    }
    return rec;
}

std::vector<ExemplarRecord> build_exemplars(const std::vector<CaseInstance>& cases,
                                            const Schema& schema) {
    std::vector<ExemplarRecord> out;
    out.reserve(cases.size());
    for (const auto& c : cases) {
        if (!c.gold) {
            log_warn("build_exemplars: skipping case '" + c.case_id + "' without gold");
            continue;
        }
        out.push_back(build_exemplar(c, schema));
    }
    return out;
}

SplitStats split_stats(const std::vector<CaseInstance>& cases) {
    SplitStats s;
    s.instances = cases.size();
    std::set<std::string> distinct;
    for (const auto& c : cases) {
        if (!c.gold) continue;
        s.total_gold += c.gold->size();
        for (const auto& obs : *c.gold) distinct.insert(obs.id);
    }
    s.distinct_gold_ids = distinct.size();
    return s;
}

nlohmann::ordered_json observation_to_json(const Observation& obs) {
    ordered_json rec;
    rec["id"] = obs.id;
    rec["name"] = obs.name;
    rec["value_type"] = std::string(value_type_name(obs.value_type));
    rec["value"] = observation_value_to_json(obs.value);
    return rec;
}

}  // namespace obsx

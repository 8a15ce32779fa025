// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "obsx/text.hpp"

namespace obsx {

namespace {

const char* kFirstSystem =
    "You extract structured observations from nurse-patient conversation transcripts.\n"
    "Respond with a single JSON list and nothing else: no prose, no code fences, no "
    "explanations.\n"
    "Each element must be an object with exactly two keys: \"id\" (a concept id from the "
    "schema) and \"value\".\n"
    "Do not output duplicate ids.\n"
    "Omit any observation that is not supported by evidence in the transcript.\n"
    "For single_select concepts choose exactly one allowed value. For multi_select "
    "concepts output a JSON list of allowed values. Numeric concepts take plain numbers. "
    "String concepts take short free text.\n";

const char* kFirstUser =
    "Observation schema (id | name | value_type | allowed values):\n"
    "{{schema_block}}\n"
    "{{examples_block}}"
    "Transcript:\n"
    "{{transcript}}\n"
    "\n"
    "Return the JSON list of {\"id\", \"value\"} observations now.\n";

const char* kAuditSystem =
    "You audit structured observations extracted from nurse-patient conversation "
    "transcripts.\n"
    "Respond with a single JSON list and nothing else: no prose, no code fences, no "
    "explanations.\n"
    "Each element must be an object with exactly two keys: \"id\" (a concept id from the "
    "schema) and \"value\".\n"
    "Do not output duplicate ids.\n"
    "Omit any observation that is not supported by evidence in the transcript.\n"
    "Given the transcript, the schema, and a first-pass extraction: remove items not "
    "supported by the transcript, correct schema adherence issues (unknown ids, "
    "disallowed or mistyped values), and add only clearly supported missing "
    "observations.\n";

const char* kAuditUser =
    "Observation schema (id | name | value_type | allowed values):\n"
    "{{schema_block}}\n"
    "{{examples_block}}"
    "Transcript:\n"
    "{{transcript}}\n"
    "\n"
    "First-pass extraction:\n"
    "{{first_pass_block}}\n"
    "\n"
    "Return the corrected JSON list of {\"id\", \"value\"} observations now.\n";

std::string read_if_exists(const std::filesystem::path& p, const char* fallback) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string render_examples_block(const std::vector<ScoredExemplar>& exemplars,
                                  ExemplarOrder order) {
    if (exemplars.empty()) return "";
    std::vector<const ScoredExemplar*> ordered;
    ordered.reserve(exemplars.size());
    for (const auto& e : exemplars) ordered.push_back(&e);
    // Inputs arrive ranked best-first; ascending order reverses so the most
    // similar exemplar ends up adjacent to the query transcript.
    if (order == ExemplarOrder::AscendingScore) std::reverse(ordered.begin(), ordered.end());

    std::string out = "Examples:\n";
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + " transcript:\n";
        out += ordered[i]->exemplar.transcript;
        out += "\nExample " + std::to_string(i + 1) + " output:\n";
        out += std_pairs_to_json(ordered[i]->exemplar.std_pairs);
        out += "\n\n";
    }
    return out;
}

void check_ceiling(const PromptBundle& bundle, const PromptConfig& cfg,
                   const std::vector<std::pair<std::string, std::size_t>>& section_sizes) {
    const std::size_t total = bundle.system_text.size() + bundle.user_text.size();
    if (total <= cfg.char_ceiling) return;
    // Name the section at which the running total crossed the ceiling.
    std::size_t acc = bundle.system_text.size();
    std::string section = "system";
    if (acc <= cfg.char_ceiling) {
        for (const auto& [name, size] : section_sizes) {
            acc += size;
            if (acc > cfg.char_ceiling) {
                section = name;
                break;
            }
        }
    }
    throw PromptSizeError("rendered prompt is " + std::to_string(total) +
                              " chars, over the ceiling of " + std::to_string(cfg.char_ceiling) +
                              " (crossed in section '" + section + "')",
                          section);
}

}  // namespace

std::string_view schema_mode_name(SchemaMode m) {
    return m == SchemaMode::Full ? "full" : "pruned";
}

std::string_view prompt_pass_name(PromptPass p) {
    return p == PromptPass::First ? "first" : "audit";
}

PromptTemplates PromptTemplates::builtin() {
    return PromptTemplates{kFirstSystem, kFirstUser, kAuditSystem, kAuditUser};
}

PromptTemplates PromptTemplates::load_dir(const std::filesystem::path& dir) {
    PromptTemplates t;
    t.first_system = read_if_exists(dir / "first_system.txt", kFirstSystem);
    t.first_user = read_if_exists(dir / "first_user.txt", kFirstUser);
    t.audit_system = read_if_exists(dir / "audit_system.txt", kAuditSystem);
    t.audit_user = read_if_exists(dir / "audit_user.txt", kAuditUser);
    return t;
}

PromptBundle render_first_pass(const std::string& transcript, const std::string& schema_block,
                               const std::vector<ScoredExemplar>& exemplars, SchemaMode mode,
                               const PromptConfig& cfg) {
    const std::string examples = render_examples_block(exemplars, cfg.exemplar_order);

    PromptBundle bundle;
    bundle.mode = mode;
    bundle.pass = PromptPass::First;
    bundle.system_text = cfg.templates.first_system;
    bundle.user_text = substitute_placeholders(cfg.templates.first_user,
                                               {{"schema_block", schema_block},
                                                {"examples_block", examples},
                                                {"transcript", transcript}});
    check_ceiling(bundle, cfg,
                  {{"schema_block", schema_block.size()},
                   {"examples_block", examples.size()},
                   {"transcript", transcript.size()}});
    return bundle;
}

PromptBundle render_audit(const std::string& transcript, const std::string& schema_block,
                          const std::vector<ScoredExemplar>& exemplars,
                          const std::vector<StdPair>& first_pass, SchemaMode mode,
                          const PromptConfig& cfg) {
    const std::string examples = render_examples_block(exemplars, cfg.exemplar_order);
    const std::string first_pass_block = std_pairs_to_json(first_pass);

    PromptBundle bundle;
    bundle.mode = mode;
    bundle.pass = PromptPass::Audit;
    bundle.system_text = cfg.templates.audit_system;
    bundle.user_text = substitute_placeholders(cfg.templates.audit_user,
                                               {{"schema_block", schema_block},
                                                {"examples_block", examples},
                                                {"transcript", transcript},
                                                {"first_pass_block", first_pass_block}});
    check_ceiling(bundle, cfg,
                  {{"schema_block", schema_block.size()},
                   {"examples_block", examples.size()},
                   {"transcript", transcript.size()},
                   {"first_pass_block", first_pass_block.size()}});
    return bundle;
}

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "obsx/corpus.hpp"
#include "obsx/retrieval.hpp"

namespace obsx {

enum class SchemaMode { Full, Pruned };
enum class PromptPass { First, Audit };
enum class ExemplarOrder { AscendingScore, DescendingScore };

std::string_view schema_mode_name(SchemaMode m);
std::string_view prompt_pass_name(PromptPass p);

/// The four template texts. Placeholders: {{schema_block}},
/// {{examples_block}}, {{transcript}}, {{first_pass_block}} (audit user
/// template only).
struct PromptTemplates {
    std::string first_system;
    std::string first_user;
    std::string audit_system;
    std::string audit_user;

    static PromptTemplates builtin();
    /// Loads <dir>/first_system.txt etc.; missing files fall back to the
    /// builtin text for that slot.
    static PromptTemplates load_dir(const std::filesystem::path& dir);
};

struct PromptConfig {
    PromptTemplates templates = PromptTemplates::builtin();
    ExemplarOrder exemplar_order = ExemplarOrder::AscendingScore;
    std::size_t char_ceiling = 400000;
};

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    SchemaMode mode = SchemaMode::Full;
    PromptPass pass = PromptPass::First;
};

/// Renders the extraction prompt: schema block, optional exemplar blocks
/// (transcript followed by its gold output), then the query transcript and
/// the output instruction. Exemplars are ordered by the configured
/// direction (default ascending score, so the most similar sits next to
/// the query). Exceeding the character ceiling raises PromptSizeError
/// naming the section that crossed it.
PromptBundle render_first_pass(const std::string& transcript, const std::string& schema_block,
                               const std::vector<ScoredExemplar>& exemplars, SchemaMode mode,
                               const PromptConfig& cfg);

/// Renders the audit prompt: same schema block as the first pass, the
/// serialized first-pass pairs, and the audit directives.
PromptBundle render_audit(const std::string& transcript, const std::string& schema_block,
                          const std::vector<ScoredExemplar>& exemplars,
                          const std::vector<StdPair>& first_pass, SchemaMode mode,
                          const PromptConfig& cfg);

}  // namespace obsx

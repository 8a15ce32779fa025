// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "obsx/backend.hpp"
#include "obsx/corpus.hpp"
#include "obsx/embedding.hpp"
#include "obsx/evaluation.hpp"
#include "obsx/postprocess.hpp"
#include "obsx/prompting.hpp"
#include "obsx/pruning.hpp"
#include "obsx/retrieval.hpp"

namespace obsx {

struct PromptFileConfig {
    std::string template_dir;                  // empty = builtin templates
    std::string exemplar_order = "ascending";  // ascending | descending
    std::size_t char_ceiling = 400000;
    bool dump_prompts = false;
};

/// Full run configuration. Every field has a default except the paths.
/// The ablation axes (rag_enabled, schema_mode, second_pass) select the
/// pipeline variants without code changes.
struct RunConfig {
    std::string schema_path;
    std::string train_path;   // retrieval corpus; optional when rag is off
    std::string input_path;   // split to extract from
    std::string cache_dir = ".obsx-cache";
    std::string out_dir = "obsx-run";

    std::string id_mode = "raw";  // raw | numeric
    bool strict_load = false;

    EmbeddingProviderConfig embedding;
    BackendConfig backend;
    RetrievalConfig retrieval;
    bool rag_enabled = true;
    std::string schema_mode = "full";  // full | pruned
    PruningConfig pruning;
    std::string pattern_words_path;  // word list resolved to pattern ids at startup
    PromptFileConfig prompt;
    bool second_pass = false;
    int parallelism = 4;
    std::string notes;

    // validation knobs (id mode is shared with the loader)
    bool validation_case_sensitive = false;
    bool validation_strip_unit_suffix = false;

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static RunConfig load_file(const std::filesystem::path& path, std::string* raw_bytes = nullptr);

    void validate() const;
    IdMode id_mode_enum() const;
    SchemaMode schema_mode_enum() const;
    ValidationOptions validation_options() const;
    PromptConfig prompt_config() const;
};

/// Pattern word list file: one word or phrase per line, '#' comments.
std::vector<std::string> load_pattern_words(const std::filesystem::path& path);

/// pattern_ids from the config when given, else resolved from the word
/// file (or the built-in defaults) against the loaded schema.
PruningConfig resolve_pruning_config(const RunConfig& cfg, const Schema& schema);

struct CaseRunRecord {
    std::string case_id;
    std::string status = "ok";  // ok | generation_failed | prompt_too_large |
                                // audit_failed_kept_first_pass
    int exemplars = 0;
    int generations = 0;
    int attempts = 0;
    bool parse_failed_first = false;
    bool parse_failed_audit = false;
    ValidationReport validation;
    std::size_t predictions = 0;
    double latency_ms = 0.0;
};

struct RunManifest {
    nlohmann::json config;  // resolved config snapshot
    std::string started_at;
    std::string finished_at;
    double duration_ms = 0.0;
    std::vector<CaseRunRecord> cases;
    std::size_t parse_failures = 0;
    std::size_t failed_cases = 0;
    ValidationReport validation_totals;

    nlohmann::json to_json() const;
};

struct ExtractOutputs {
    std::filesystem::path predictions_path;
    std::filesystem::path manifest_path;
    RunManifest manifest;
};

/// End-to-end extraction: retrieve (optional), build the schema block per
/// mode, prompt, generate, repair/validate/expand, optionally audit, and
/// write predictions + manifest (plus raw generations, and prompts when
/// dump_prompts is set) under out_dir. `config_bytes`, when non-empty, is
/// written verbatim as the config snapshot.
ExtractOutputs run_extract(const RunConfig& cfg, const std::string& config_bytes = "");

struct EvalConfig {
    std::string id_mode = "raw";
    double numeric_epsilon = 0.0;
    bool set_mode = false;
    bool use_pearson = false;
    int top_concepts = 10;
    bool strict_load = false;
    std::string per_case_csv;  // optional output path
    std::string out_dir;       // optional: writes report.json there
};

struct EvaluateOutputs {
    MetricsReport metrics;
    ErrorBreakdown breakdown;
    std::vector<CaseErrorRow> per_case;
    nlohmann::json report;
};

EvaluateOutputs run_evaluate(const std::filesystem::path& predictions_path,
                             const std::filesystem::path& gold_split_path,
                             const std::filesystem::path& schema_path, const EvalConfig& cfg);

/// Human-readable rendering of the evaluate report.
std::string format_report(const nlohmann::json& report);

struct SweepRow {
    int k = 0;
    MetricsReport metrics;
    std::string error;  // non-empty when this k failed
};

/// One extraction+evaluation per k, reusing the embedding cache. The input
/// split must carry gold. Individual k failures are recorded and the sweep
/// continues.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<int>& k_values);

/// Warms the embedding cache: train transcripts and summaries (when rag is
/// enabled), concept names (when pruned), and input transcripts. Returns
/// the number of texts embedded.
std::size_t run_index(const RunConfig& cfg);

/// Predictions file IO (JSONL of {case_id, observations:[{id,name,
/// value_type,value}]}). The reader accepts "id" as an alias for "case_id"
/// and resolves types against the schema; unknown ids keep shape-inferred
/// types so they still count as false positives.
void write_predictions_file(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, std::vector<Observation>>>& rows);
CasePredictions load_predictions_file(const std::filesystem::path& path, const Schema& schema);

/// Gold side of a split as scoring input (cases without gold contribute
/// empty lists).
CasePredictions gold_predictions(const std::vector<CaseInstance>& cases);

}  // namespace obsx

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "obsx/log.hpp"
#include "obsx/text.hpp"

namespace obsx {

namespace {
using nlohmann::json;
using nlohmann::ordered_json;

std::string now_iso8601() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j[key].is_null()) return fallback;
    return j[key].get<T>();
}

std::string read_file_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

json validation_report_json(const ValidationReport& r) {
    return json{{"kept", r.kept},
                {"dropped_unknown_id", r.dropped_unknown_id},
                {"dropped_bad_value", r.dropped_bad_value},
                {"dropped_duplicate", r.dropped_duplicate},
                {"coerced_numeric", r.coerced_numeric},
                {"coerced_categorical", r.coerced_categorical}};
}

struct RawGeneration {
    std::string case_id;
    std::string pass;
    std::string raw_text;
    int attempts = 1;
    double latency_ms = 0.0;
};

struct CaseOutcome {
    CaseRunRecord record;
    std::vector<Observation> observations;
    std::vector<RawGeneration> generations;
    std::vector<std::pair<std::string, PromptBundle>> prompts;  // (pass, bundle)
};

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    c.schema_path = get_or<std::string>(j, "schema_path", "");
    c.train_path = get_or<std::string>(j, "train_path", "");
    c.input_path = get_or<std::string>(j, "input_path", "");
    c.cache_dir = get_or<std::string>(j, "cache_dir", c.cache_dir);
    c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);
    c.id_mode = get_or<std::string>(j, "id_mode", c.id_mode);
    c.strict_load = get_or<bool>(j, "strict_load", c.strict_load);
    c.rag_enabled = get_or<bool>(j, "rag_enabled", c.rag_enabled);
    c.schema_mode = get_or<std::string>(j, "schema_mode", c.schema_mode);
    c.second_pass = get_or<bool>(j, "second_pass", c.second_pass);
    c.parallelism = get_or<int>(j, "parallelism", c.parallelism);
    c.notes = get_or<std::string>(j, "notes", c.notes);

    if (j.contains("embedding")) {
        const json& e = j["embedding"];
        c.embedding.provider_kind = get_or<std::string>(e, "provider", c.embedding.provider_kind);
        c.embedding.model_id = get_or<std::string>(e, "model_id", c.embedding.model_id);
        c.embedding.endpoint = get_or<std::string>(e, "endpoint", c.embedding.endpoint);
        c.embedding.dim = get_or<int>(e, "dim", c.embedding.dim);
        c.embedding.auth_env = get_or<std::string>(e, "auth_env", c.embedding.auth_env);
        c.embedding.max_attempts = get_or<int>(e, "max_attempts", c.embedding.max_attempts);
        c.embedding.backoff_ms = get_or<int>(e, "backoff_ms", c.embedding.backoff_ms);
        c.embedding.truncate_chars = get_or<int>(e, "truncate_chars", c.embedding.truncate_chars);
    }
    if (j.contains("backend")) {
        const json& b = j["backend"];
        c.backend.provider = get_or<std::string>(b, "provider", c.backend.provider);
        c.backend.script_path = get_or<std::string>(b, "script_path", c.backend.script_path);
        c.backend.endpoint = get_or<std::string>(b, "endpoint", c.backend.endpoint);
        c.backend.model_id = get_or<std::string>(b, "model_id", c.backend.model_id);
        c.backend.auth_env = get_or<std::string>(b, "auth_env", c.backend.auth_env);
        c.backend.max_attempts = get_or<int>(b, "max_attempts", c.backend.max_attempts);
        c.backend.backoff_ms = get_or<int>(b, "backoff_ms", c.backend.backoff_ms);
        c.backend.temperature = get_or<double>(b, "temperature", c.backend.temperature);
        c.backend.max_output_tokens =
            get_or<int>(b, "max_output_tokens", c.backend.max_output_tokens);
        c.backend.audit_mode = get_or<std::string>(b, "audit_mode", c.backend.audit_mode);
    }
    if (j.contains("retrieval")) {
        const json& r = j["retrieval"];
        c.retrieval.pool_size = get_or<int>(r, "pool_size", c.retrieval.pool_size);
        c.retrieval.top_k = get_or<int>(r, "top_k", c.retrieval.top_k);
        c.retrieval.weights.w_t = get_or<double>(r, "w_t", c.retrieval.weights.w_t);
        c.retrieval.weights.w_c = get_or<double>(r, "w_c", c.retrieval.weights.w_c);
        c.retrieval.weights.w_l = get_or<double>(r, "w_l", c.retrieval.weights.w_l);
    }
    if (j.contains("pruning")) {
        const json& p = j["pruning"];
        c.pruning.semantic_threshold =
            get_or<double>(p, "semantic_threshold", c.pruning.semantic_threshold);
        c.pruning.target_budget = get_or<int>(p, "target_budget", c.pruning.target_budget);
        c.pruning.min_size = get_or<int>(p, "min_size", c.pruning.min_size);
        c.pruning.max_size = get_or<int>(p, "max_size", c.pruning.max_size);
        c.pruning.lexical_keep = get_or<int>(p, "lexical_keep", c.pruning.lexical_keep);
        c.pruning.truncate_options_at =
            get_or<int>(p, "truncate_options_at", c.pruning.truncate_options_at);
        c.pruning.pattern_ids =
            get_or<std::vector<std::string>>(p, "pattern_ids", c.pruning.pattern_ids);
        c.pattern_words_path = get_or<std::string>(p, "pattern_words_path", c.pattern_words_path);
    }
    if (j.contains("prompt")) {
        const json& p = j["prompt"];
        c.prompt.template_dir = get_or<std::string>(p, "template_dir", c.prompt.template_dir);
        c.prompt.exemplar_order =
            get_or<std::string>(p, "exemplar_order", c.prompt.exemplar_order);
        c.prompt.char_ceiling = get_or<std::size_t>(p, "char_ceiling", c.prompt.char_ceiling);
        c.prompt.dump_prompts = get_or<bool>(p, "dump_prompts", c.prompt.dump_prompts);
    }
    if (j.contains("validation")) {
        const json& v = j["validation"];
        c.validation_case_sensitive =
            get_or<bool>(v, "case_sensitive", c.validation_case_sensitive);
        c.validation_strip_unit_suffix =
            get_or<bool>(v, "strip_unit_suffix", c.validation_strip_unit_suffix);
    }
    return c;
}

json RunConfig::to_json() const {
    json j;
    j["schema_path"] = schema_path;
    j["train_path"] = train_path;
    j["input_path"] = input_path;
    j["cache_dir"] = cache_dir;
    j["out_dir"] = out_dir;
    j["id_mode"] = id_mode;
    j["strict_load"] = strict_load;
    j["rag_enabled"] = rag_enabled;
    j["schema_mode"] = schema_mode;
    j["second_pass"] = second_pass;
    j["parallelism"] = parallelism;
    j["notes"] = notes;
    j["embedding"] = json{{"provider", embedding.provider_kind},
                          {"model_id", embedding.model_id},
                          {"endpoint", embedding.endpoint},
                          {"dim", embedding.dim},
                          {"auth_env", embedding.auth_env},
                          {"max_attempts", embedding.max_attempts},
                          {"backoff_ms", embedding.backoff_ms},
                          {"truncate_chars", embedding.truncate_chars}};
    j["backend"] = json{{"provider", backend.provider},
                        {"script_path", backend.script_path},
                        {"endpoint", backend.endpoint},
                        {"model_id", backend.model_id},
                        {"auth_env", backend.auth_env},
                        {"max_attempts", backend.max_attempts},
                        {"backoff_ms", backend.backoff_ms},
                        {"temperature", backend.temperature},
                        {"max_output_tokens", backend.max_output_tokens},
                        {"audit_mode", backend.audit_mode}};
    j["retrieval"] = json{{"pool_size", retrieval.pool_size},
                          {"top_k", retrieval.top_k},
                          {"w_t", retrieval.weights.w_t},
                          {"w_c", retrieval.weights.w_c},
                          {"w_l", retrieval.weights.w_l}};
    j["pruning"] = json{{"semantic_threshold", pruning.semantic_threshold},
                        {"target_budget", pruning.target_budget},
                        {"min_size", pruning.min_size},
                        {"max_size", pruning.max_size},
                        {"lexical_keep", pruning.lexical_keep},
                        {"truncate_options_at", pruning.truncate_options_at},
                        {"pattern_ids", pruning.pattern_ids},
                        {"pattern_words_path", pattern_words_path}};
    j["prompt"] = json{{"template_dir", prompt.template_dir},
                       {"exemplar_order", prompt.exemplar_order},
                       {"char_ceiling", prompt.char_ceiling},
                       {"dump_prompts", prompt.dump_prompts}};
    j["validation"] = json{{"case_sensitive", validation_case_sensitive},
                           {"strip_unit_suffix", validation_strip_unit_suffix}};
    return j;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path, std::string* raw_bytes) {
    const std::string content = read_file_or_throw(path);
    if (raw_bytes) *raw_bytes = content;
    json j = json::parse(content, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    return from_json(j);
}

void RunConfig::validate() const {
    if (schema_path.empty()) throw ConfigError("schema_path is required");
    if (input_path.empty()) throw ConfigError("input_path is required");
    if (rag_enabled && train_path.empty())
        throw ConfigError("train_path is required when rag_enabled");
    if (id_mode != "raw" && id_mode != "numeric")
        throw ConfigError("id_mode must be 'raw' or 'numeric'");
    if (schema_mode != "full" && schema_mode != "pruned")
        throw ConfigError("schema_mode must be 'full' or 'pruned'");
    if (schema_mode == "pruned") pruning.validate();
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (retrieval.top_k < 1 || retrieval.pool_size < 1)
        throw ConfigError("retrieval top_k and pool_size must be positive");
    if (retrieval.top_k > retrieval.pool_size)
        throw ConfigError("retrieval top_k must not exceed pool_size");
    if (prompt.exemplar_order != "ascending" && prompt.exemplar_order != "descending")
        throw ConfigError("prompt.exemplar_order must be 'ascending' or 'descending'");
}

IdMode RunConfig::id_mode_enum() const {
    return id_mode == "numeric" ? IdMode::Numeric : IdMode::Raw;
}

SchemaMode RunConfig::schema_mode_enum() const {
    return schema_mode == "pruned" ? SchemaMode::Pruned : SchemaMode::Full;
}

ValidationOptions RunConfig::validation_options() const {
    ValidationOptions v;
    v.id_mode = id_mode_enum();
    v.case_sensitive = validation_case_sensitive;
    v.strip_unit_suffix = validation_strip_unit_suffix;
    return v;
}

PromptConfig RunConfig::prompt_config() const {
    PromptConfig p;
    p.templates = prompt.template_dir.empty() ? PromptTemplates::builtin()
                                              : PromptTemplates::load_dir(prompt.template_dir);
    p.exemplar_order = prompt.exemplar_order == "descending" ? ExemplarOrder::DescendingScore
                                                             : ExemplarOrder::AscendingScore;
    p.char_ceiling = prompt.char_ceiling;
    return p;
}

std::vector<std::string> load_pattern_words(const std::filesystem::path& path) {
    const std::string content = read_file_or_throw(path);
    std::vector<std::string> words;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) words.push_back(line);
    }
    return words;
}

PruningConfig resolve_pruning_config(const RunConfig& cfg, const Schema& schema) {
    PruningConfig p = cfg.pruning;
    if (p.pattern_ids.empty()) {
        const auto words = cfg.pattern_words_path.empty()
                               ? default_pattern_words()
                               : load_pattern_words(cfg.pattern_words_path);
        p.pattern_ids = resolve_pattern_ids(schema, words);
    }
    return p;
}

json RunManifest::to_json() const {
    json j;
    j["config"] = config;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["duration_ms"] = duration_ms;
    j["determinism"] =
        "outputs are a pure function of (config, inputs, backend script, embedding cache); "
        "no random seeds are involved";
    json cases_json = json::array();
    for (const auto& c : cases) {
        json rec{{"case_id", c.case_id},
                 {"status", c.status},
                 {"exemplars", c.exemplars},
                 {"generations", c.generations},
                 {"attempts", c.attempts},
                 {"parse_failed_first", c.parse_failed_first},
                 {"parse_failed_audit", c.parse_failed_audit},
                 {"predictions", c.predictions},
                 {"latency_ms", c.latency_ms},
                 {"validation", validation_report_json(c.validation)}};
        cases_json.push_back(std::move(rec));
    }
    j["cases"] = std::move(cases_json);
    j["totals"] = json{{"cases", cases.size()},
                       {"failed_cases", failed_cases},
                       {"parse_failures", parse_failures},
                       {"validation", validation_report_json(validation_totals)}};
    return j;
}

ExtractOutputs run_extract(const RunConfig& cfg, const std::string& config_bytes) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const std::string started = now_iso8601();

    const IdMode mode = cfg.id_mode_enum();
    const LoadOptions load_opts{mode, cfg.strict_load};
    const Schema schema = load_schema(cfg.schema_path, mode);
    const std::vector<CaseInstance> input = load_split(cfg.input_path, schema, load_opts);

    std::vector<ExemplarRecord> corpus;
    if (cfg.rag_enabled) {
        const auto train = load_split(cfg.train_path, schema, load_opts);
        corpus = build_exemplars(train, schema);
        if (corpus.empty())
            throw ConfigError("rag_enabled but the train split yields no exemplars");
    }

    auto cache = std::make_shared<EmbeddingCache>(cfg.cache_dir);
    auto provider = std::shared_ptr<EmbeddingProvider>(make_embedding_provider(cfg.embedding));
    EmbeddingService embedder(provider, cache);

    auto backend = make_backend(cfg.backend, &input);
    const PruningConfig pruning = resolve_pruning_config(cfg, schema);
    const PromptConfig prompt_cfg = cfg.prompt_config();
    const ValidationOptions val_opts = cfg.validation_options();
    const SchemaMode schema_mode = cfg.schema_mode_enum();
    const std::string full_schema_block =
        schema_mode == SchemaMode::Full ? render_schema_table(schema, 0) : std::string();

    std::vector<CaseOutcome> outcomes(input.size());
    std::atomic<std::size_t> next{0};

    auto process_case = [&](std::size_t idx) {
        const CaseInstance& instance = input[idx];
        CaseOutcome out;
        out.record.case_id = instance.case_id;
        std::vector<StdPair> pairs;
        try {
            std::vector<ScoredExemplar> exemplars;
            if (cfg.rag_enabled)
                exemplars = retrieve_top_k(instance.transcript, corpus, cfg.retrieval, embedder);
            out.record.exemplars = static_cast<int>(exemplars.size());

            std::string schema_block;
            if (schema_mode == SchemaMode::Full) {
                schema_block = full_schema_block;
            } else {
                auto candidates =
                    build_candidate_set(instance.transcript, schema, exemplars, pruning, embedder);
                schema_block = render_candidate_table(candidates, schema, pruning);
            }

            const PromptBundle first =
                render_first_pass(instance.transcript, schema_block, exemplars, schema_mode,
                                  prompt_cfg);
            if (cfg.prompt.dump_prompts) out.prompts.emplace_back("first", first);

            GenerationRequest req;
            req.system_text = first.system_text;
            req.user_text = first.user_text;
            req.model_id = cfg.backend.model_id;
            req.temperature = cfg.backend.temperature;
            req.max_output_tokens = cfg.backend.max_output_tokens;
            req.case_id = instance.case_id;
            req.pass = PromptPass::First;

            const GenerationResult gen = backend->generate(req);
            out.generations.push_back(RawGeneration{instance.case_id, "first", gen.raw_text,
                                                    gen.attempts, gen.latency_ms});
            out.record.generations = 1;
            out.record.attempts = gen.attempts;
            out.record.latency_ms = gen.latency_ms;

            const ParseOutcome parsed = repair_and_parse(gen.raw_text);
            out.record.parse_failed_first = !parsed.parse_ok;
            ValidationResult validated = validate(parsed.pairs, schema, val_opts);
            pairs = std::move(validated.pairs);
            out.record.validation = std::move(validated.report);

            if (cfg.second_pass) {
                const PromptBundle audit = render_audit(instance.transcript, schema_block,
                                                        exemplars, pairs, schema_mode, prompt_cfg);
                if (cfg.prompt.dump_prompts) out.prompts.emplace_back("audit", audit);

                GenerationRequest audit_req = req;
                audit_req.system_text = audit.system_text;
                audit_req.user_text = audit.user_text;
                audit_req.pass = PromptPass::Audit;
                audit_req.first_pass_json = std_pairs_to_json(pairs);
                try {
                    const GenerationResult audit_gen = backend->generate(audit_req);
                    out.generations.push_back(RawGeneration{instance.case_id, "audit",
                                                            audit_gen.raw_text, audit_gen.attempts,
                                                            audit_gen.latency_ms});
                    out.record.generations = 2;
                    out.record.attempts += audit_gen.attempts;
                    out.record.latency_ms += audit_gen.latency_ms;

                    const ParseOutcome audit_parsed = repair_and_parse(audit_gen.raw_text);
                    out.record.parse_failed_audit = !audit_parsed.parse_ok;
                    // Audited output goes through the identical validation
                    // and expansion as the first pass.
                    ValidationResult audit_validated =
                        validate(audit_parsed.pairs, schema, val_opts);
                    pairs = std::move(audit_validated.pairs);
                    out.record.validation = std::move(audit_validated.report);
                } catch (const std::exception& e) {
                    out.record.status = "audit_failed_kept_first_pass";
                    log_warn("case '" + instance.case_id + "': audit generation failed (" +
                             e.what() + "), keeping first-pass predictions");
                }
            }
            out.observations = expand(pairs, schema);
            out.record.predictions = out.observations.size();
        } catch (const PromptSizeError& e) {
            out.record.status = "prompt_too_large";
            out.observations.clear();
            log_warn("case '" + instance.case_id + "': " + e.what());
        } catch (const std::exception& e) {
            out.record.status = "generation_failed";
            out.observations.clear();
            log_warn("case '" + instance.case_id + "': emitted empty predictions: " + e.what());
        }
        outcomes[idx] = std::move(out);
    };

    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), std::max<std::size_t>(input.size(), 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < input.size(); ++i) process_case(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= input.size()) return;
                    process_case(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // Write run artifacts.
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path out_dir(cfg.out_dir);

    write_file(out_dir / "config.json",
               config_bytes.empty() ? cfg.to_json().dump(2) + "\n" : config_bytes);
    write_file(out_dir / "resolved_config.json", cfg.to_json().dump(2) + "\n");

    std::vector<std::pair<std::string, std::vector<Observation>>> rows;
    rows.reserve(outcomes.size());
    for (const auto& o : outcomes) rows.emplace_back(o.record.case_id, o.observations);
    const auto predictions_path = out_dir / "predictions.jsonl";
    write_predictions_file(predictions_path, rows);

    {
        std::string raw;
        for (const auto& o : outcomes) {
            for (const auto& g : o.generations) {
                ordered_json rec;
                rec["case_id"] = g.case_id;
                rec["pass"] = g.pass;
                rec["raw_text"] = g.raw_text;
                rec["attempts"] = g.attempts;
                rec["latency_ms"] = g.latency_ms;
                raw += rec.dump();
                raw += '\n';
            }
        }
        write_file(out_dir / "raw_generations.jsonl", raw);
    }

    if (cfg.prompt.dump_prompts) {
        std::string dump;
        for (const auto& o : outcomes) {
            for (const auto& [pass, bundle] : o.prompts) {
                ordered_json rec;
                rec["case_id"] = o.record.case_id;
                rec["pass"] = pass;
                rec["system_text"] = bundle.system_text;
                rec["user_text"] = bundle.user_text;
                dump += rec.dump();
                dump += '\n';
            }
        }
        write_file(out_dir / "prompts.jsonl", dump);
    }

    RunManifest manifest;
    manifest.config = cfg.to_json();
    manifest.started_at = started;
    manifest.finished_at = now_iso8601();
    manifest.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count();
    for (auto& o : outcomes) {
        if (o.record.status == "generation_failed" || o.record.status == "prompt_too_large")
            ++manifest.failed_cases;
        if (o.record.parse_failed_first || o.record.parse_failed_audit) ++manifest.parse_failures;
        manifest.validation_totals.merge(o.record.validation);
        manifest.cases.push_back(std::move(o.record));
    }
    manifest.validation_totals.notes.clear();  // per-case notes live in the case records

    const auto manifest_path = out_dir / "manifest.json";
    write_file(manifest_path, manifest.to_json().dump(2) + "\n");

    return ExtractOutputs{predictions_path, manifest_path, std::move(manifest)};
}

void write_predictions_file(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::vector<Observation>>>& rows) {
    std::string out;
    for (const auto& [case_id, observations] : rows) {
        ordered_json rec;
        rec["case_id"] = case_id;
        ordered_json arr = ordered_json::array();
        for (const auto& obs : observations) arr.push_back(observation_to_json(obs));
        rec["observations"] = std::move(arr);
        out += rec.dump();
        out += '\n';
    }
    write_file(path, out);
}

CasePredictions load_predictions_file(const std::filesystem::path& path, const Schema& schema) {
    const std::string content = read_file_or_throw(path);
    CasePredictions predictions;

    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            log_warn(where + ": skipping malformed prediction line");
            continue;
        }
        std::string case_id;
        if (rec.contains("case_id") && rec["case_id"].is_string())
            case_id = rec["case_id"].get<std::string>();
        else if (rec.contains("id") && rec["id"].is_string())
            case_id = rec["id"].get<std::string>();
        else if (rec.contains("id") && rec["id"].is_number())
            case_id = format_double(rec["id"].get<double>());
        else {
            log_warn(where + ": skipping prediction line without case_id");
            continue;
        }

        auto& bucket = predictions[case_id];
        if (!rec.contains("observations") || !rec["observations"].is_array()) continue;
        for (const auto& item : rec["observations"]) {
            if (!item.is_object() || !item.contains("id") || !item.contains("value")) {
                log_warn(where + ": skipping observation without id/value");
                continue;
            }
            std::string oid;
            if (item["id"].is_string())
                oid = item["id"].get<std::string>();
            else if (item["id"].is_number())
                oid = format_double(item["id"].get<double>());
            else {
                log_warn(where + ": skipping observation with non-scalar id");
                continue;
            }

            const json& value = item["value"];
            const Concept* concept_def = schema.find(oid);
            if (concept_def) {
                auto coerced = coerce_value_shape(value, *concept_def);
                if (!coerced) {
                    log_warn(where + ": observation id '" + oid + "' has unusable value shape");
                    continue;
                }
                bucket.push_back(Observation{concept_def->id, concept_def->name, concept_def->value_type,
                                             std::move(*coerced)});
            } else {
                // Unknown id: keep it with a shape-inferred type so it still
                // scores as a false positive.
                Observation obs;
                obs.id = oid;
                if (value.is_array()) {
                    std::vector<std::string> list;
                    for (const auto& e : value) {
                        if (e.is_string()) list.push_back(e.get<std::string>());
                        else if (e.is_number()) list.push_back(format_double(e.get<double>()));
                    }
                    obs.value_type = ValueType::MultiSelect;
                    obs.value = std::move(list);
                } else if (value.is_number()) {
                    obs.value_type = ValueType::Numeric;
                    obs.value = value.get<double>();
                } else if (value.is_string()) {
                    obs.value_type = ValueType::String;
                    obs.value = value.get<std::string>();
                } else {
                    log_warn(where + ": skipping unknown-id observation with unusable value");
                    continue;
                }
                bucket.push_back(std::move(obs));
            }
        }
    }
    return predictions;
}

CasePredictions gold_predictions(const std::vector<CaseInstance>& cases) {
    CasePredictions gold;
    for (const auto& c : cases) gold[c.case_id] = c.gold ? *c.gold : std::vector<Observation>{};
    return gold;
}

EvaluateOutputs run_evaluate(const std::filesystem::path& predictions_path,
                             const std::filesystem::path& gold_split_path,
                             const std::filesystem::path& schema_path, const EvalConfig& cfg) {
    const IdMode mode = cfg.id_mode == "numeric" ? IdMode::Numeric : IdMode::Raw;
    const Schema schema = load_schema(schema_path, mode);
    const LoadOptions load_opts{mode, cfg.strict_load};
    const auto cases = load_split(gold_split_path, schema, load_opts);

    std::size_t with_gold = 0;
    for (const auto& c : cases)
        if (c.gold) ++with_gold;
    if (with_gold == 0)
        throw ConfigError("evaluate: no case in " + gold_split_path.string() +
                          " carries gold observations");

    const CasePredictions gold = gold_predictions(cases);
    const CasePredictions pred = load_predictions_file(predictions_path, schema);

    ScoreOptions opts;
    opts.id_mode = mode;
    opts.numeric_epsilon = cfg.numeric_epsilon;
    opts.set_mode = cfg.set_mode;
    opts.use_pearson = cfg.use_pearson;
    opts.top_concepts = cfg.top_concepts;

    EvaluateOutputs outputs;
    outputs.metrics = score(pred, gold, opts);
    outputs.breakdown = analyze_errors(pred, gold, cases, opts, &outputs.per_case);

    auto concept_rows = [&](const std::vector<ConceptErrorCount>& tallies) {
        ordered_json arr = ordered_json::array();
        int emitted = 0;
        for (const auto& t : tallies) {
            if (emitted++ >= cfg.top_concepts) break;
            const Concept* c = schema.find(t.concept_id);
            ordered_json row;
            row["id"] = t.concept_id;
            row["name"] = c ? c->name : "";
            row["value_type"] = c ? std::string(value_type_name(c->value_type)) : "";
            row["count"] = t.count;
            arr.push_back(std::move(row));
        }
        return arr;
    };
    auto rho_json = [](const std::optional<double>& rho) {
        return rho ? ordered_json(round2(*rho)) : ordered_json(nullptr);
    };

    ordered_json report;
    report["counts"] = ordered_json{{"tp", outputs.metrics.tp},
                                    {"fp", outputs.metrics.fp},
                                    {"fn", outputs.metrics.fn}};
    report["metrics"] = ordered_json{{"precision", round2(outputs.metrics.precision())},
                                     {"recall", round2(outputs.metrics.recall())},
                                     {"f1", round2(outputs.metrics.f1())}};
    report["error_taxonomy"] =
        ordered_json{{"fp_spurious_concept", outputs.breakdown.fp_spurious_concept},
                     {"fp_wrong_value", outputs.breakdown.fp_wrong_value},
                     {"fn_missed_concept", outputs.breakdown.fn_missed_concept},
                     {"fn_wrong_value", outputs.breakdown.fn_wrong_value}};
    report["top_fp_concepts"] = concept_rows(outputs.breakdown.fp_by_concept);
    report["top_fn_concepts"] = concept_rows(outputs.breakdown.fn_by_concept);
    report["correlations"] = ordered_json{{"kind", outputs.breakdown.correlation_kind},
                                          {"errors_vs_gold_count", rho_json(outputs.breakdown.rho_errors_gold)},
                                          {"errors_vs_pred_count", rho_json(outputs.breakdown.rho_errors_pred)},
                                          {"errors_vs_transcript_words", rho_json(outputs.breakdown.rho_errors_words)}};
    outputs.report = std::move(report);

    if (!cfg.per_case_csv.empty()) {
        std::string csv = "case_id,tp,fp,fn,gold_count,pred_count,words\n";
        for (const auto& row : outputs.per_case) {
            csv += csv_field(row.case_id) + "," + std::to_string(row.tp) + "," +
                   std::to_string(row.fp) + "," + std::to_string(row.fn) + "," +
                   std::to_string(row.gold_count) + "," + std::to_string(row.pred_count) + "," +
                   std::to_string(row.words) + "\n";
        }
        write_file(cfg.per_case_csv, csv);
    }
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_file(std::filesystem::path(cfg.out_dir) / "report.json",
                   outputs.report.dump(2) + "\n");
        write_file(std::filesystem::path(cfg.out_dir) / "report.txt",
                   format_report(outputs.report));
    }
    return outputs;
}

std::string format_report(const nlohmann::json& report) {
    std::ostringstream out;
    const auto& counts = report["counts"];
    const auto& metrics = report["metrics"];
    out << "counts: tp=" << counts["tp"] << " fp=" << counts["fp"] << " fn=" << counts["fn"]
        << "\n";
    out << "metrics: P=" << metrics["precision"] << " R=" << metrics["recall"]
        << " F1=" << metrics["f1"] << "\n";
    const auto& tax = report["error_taxonomy"];
    out << "false positives: spurious_concept=" << tax["fp_spurious_concept"]
        << " wrong_value=" << tax["fp_wrong_value"] << "\n";
    out << "false negatives: missed_concept=" << tax["fn_missed_concept"]
        << " wrong_value=" << tax["fn_wrong_value"] << "\n";
    auto table = [&](const char* title, const json& rows) {
        out << title << "\n";
        for (const auto& row : rows) {
            out << "  " << row["id"].get<std::string>() << "  "
                << row["name"].get<std::string>() << " (" << row["value_type"].get<std::string>()
                << "): " << row["count"] << "\n";
        }
    };
    table("top FP concepts:", report["top_fp_concepts"]);
    table("top FN concepts:", report["top_fn_concepts"]);
    const auto& corr = report["correlations"];
    auto rho = [&](const char* key) {
        return corr[key].is_null() ? std::string("n/a") : corr[key].dump();
    };
    out << "correlations (" << corr["kind"].get<std::string>()
        << "): errors~gold=" << rho("errors_vs_gold_count")
        << " errors~pred=" << rho("errors_vs_pred_count")
        << " errors~words=" << rho("errors_vs_transcript_words") << "\n";
    return out.str();
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<int>& k_values) {
    std::vector<SweepRow> rows;
    rows.reserve(k_values.size());

    for (int k : k_values) {
        SweepRow row;
        row.k = k;
        try {
            RunConfig sub = cfg;
            sub.retrieval.top_k = k;
            if (sub.retrieval.pool_size < k) sub.retrieval.pool_size = k;
            sub.out_dir = (std::filesystem::path(cfg.out_dir) / ("k" + std::to_string(k))).string();
            const auto outputs = run_extract(sub);

            EvalConfig ecfg;
            ecfg.id_mode = cfg.id_mode;
            ecfg.strict_load = cfg.strict_load;
            const auto eval =
                run_evaluate(outputs.predictions_path, cfg.input_path, cfg.schema_path, ecfg);
            row.metrics = eval.metrics;
        } catch (const std::exception& e) {
            row.error = e.what();
            log_warn("sweep k=" + std::to_string(k) + " failed: " + e.what());
        }
        rows.push_back(std::move(row));
    }

    std::filesystem::create_directories(cfg.out_dir);
    ordered_json doc = ordered_json::array();
    for (const auto& row : rows) {
        ordered_json rec;
        rec["k"] = row.k;
        if (row.error.empty()) {
            rec["tp"] = row.metrics.tp;
            rec["fp"] = row.metrics.fp;
            rec["fn"] = row.metrics.fn;
            rec["precision"] = round2(row.metrics.precision());
            rec["recall"] = round2(row.metrics.recall());
            rec["f1"] = round2(row.metrics.f1());
        } else {
            rec["error"] = row.error;
        }
        doc.push_back(std::move(rec));
    }
    write_file(std::filesystem::path(cfg.out_dir) / "sweep_results.json", doc.dump(2) + "\n");
    return rows;
}

std::size_t run_index(const RunConfig& cfg) {
    cfg.validate();
    const IdMode mode = cfg.id_mode_enum();
    const LoadOptions load_opts{mode, cfg.strict_load};
    const Schema schema = load_schema(cfg.schema_path, mode);

    auto cache = std::make_shared<EmbeddingCache>(cfg.cache_dir);
    auto provider = std::shared_ptr<EmbeddingProvider>(make_embedding_provider(cfg.embedding));
    EmbeddingService embedder(provider, cache);

    std::vector<std::string> texts;
    const auto input = load_split(cfg.input_path, schema, load_opts);
    for (const auto& c : input) texts.push_back(c.transcript);
    if (cfg.rag_enabled) {
        const auto train = load_split(cfg.train_path, schema, load_opts);
        for (const auto& ex : build_exemplars(train, schema)) {
            texts.push_back(ex.transcript);
            texts.push_back(ex.summary_text);
        }
    }
    if (cfg.schema_mode == "pruned")
        for (const auto& c : schema.concepts()) texts.push_back(c.name);

    std::vector<std::string> embeddable;
    for (auto& t : texts)
        if (!trim(t).empty()) embeddable.push_back(std::move(t));
    if (!embeddable.empty()) embedder.embed(embeddable);
    return embeddable.size();
}

}  // namespace obsx

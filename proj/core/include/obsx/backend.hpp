// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "obsx/corpus.hpp"
#include "obsx/prompting.hpp"

namespace obsx {

struct GenerationRequest {
    std::string system_text;
    std::string user_text;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    // Request metadata. Mocks key on case_id (not on prompt text) so tests
    // survive template edits; first_pass_json carries the serialized first
    // pass for audit requests.
    std::string case_id;
    PromptPass pass = PromptPass::First;
    std::string first_pass_json;
};

struct GenerationResult {
    std::string raw_text;  // verbatim model output; repair happens downstream
    double latency_ms = 0.0;
    int attempts = 1;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual GenerationResult generate(const GenerationRequest& req) = 0;
    virtual std::string name() const = 0;
};

struct BackendConfig {
    std::string provider = "scripted";  // scripted | gold | remote
    std::string script_path;            // scripted only
    std::string endpoint;               // remote only
    std::string model_id = "mock";
    std::string auth_env = "OBSX_LLM_API_KEY";
    int max_attempts = 3;
    int backoff_ms = 1000;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    /// "model": audit requests go to the model like first-pass ones.
    /// "echo": audit requests return the first pass unchanged (a no-op
    /// audit baseline for A/B-ing the second pass).
    std::string audit_mode = "model";
};

/// Offline mock: answers each request with the response stored for its
/// case_id, byte for byte.
class ScriptedBackend : public GenerationBackend {
public:
    explicit ScriptedBackend(std::map<std::string, std::string> responses);
    /// Script file: one JSON object mapping case_id -> response text.
    static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

    GenerationResult generate(const GenerationRequest& req) override;
    std::string name() const override { return "scripted"; }

private:
    std::map<std::string, std::string> responses_;
};

/// Oracle harness: answers every case with its gold (id, value) list
/// serialized as the expected JSON output. Every case must carry gold.
std::unique_ptr<GenerationBackend> scripted_backend_from_gold(
    const std::vector<CaseInstance>& split);

/// Identity-audit mock: audit-pass requests are answered with the request's
/// own serialized first pass; first-pass requests go to the inner backend.
class EchoAuditBackend : public GenerationBackend {
public:
    explicit EchoAuditBackend(std::shared_ptr<GenerationBackend> inner);
    GenerationResult generate(const GenerationRequest& req) override;
    std::string name() const override { return "echo-audit(" + inner_->name() + ")"; }

private:
    std::shared_ptr<GenerationBackend> inner_;
};

/// HTTP chat-completion client: POST {model, messages:[system, user],
/// temperature, max_tokens}; reads choices[0].message.content. Transient
/// failures (connection errors, 429, 5xx) are retried per the config
/// policy; malformed responses raise ProtocolError with a body excerpt.
class RemoteChatBackend : public GenerationBackend {
public:
    explicit RemoteChatBackend(BackendConfig cfg);
    GenerationResult generate(const GenerationRequest& req) override;
    std::string name() const override { return "remote(" + cfg_.model_id + ")"; }

private:
    BackendConfig cfg_;
};

/// Builds the configured backend. `gold_split` is only consulted for the
/// "gold" provider.
std::shared_ptr<GenerationBackend> make_backend(const BackendConfig& cfg,
                                                const std::vector<CaseInstance>* gold_split);

}  // namespace obsx

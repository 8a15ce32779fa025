// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/backend.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "obsx/log.hpp"

namespace obsx {

namespace {
using nlohmann::json;

double ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}
}  // namespace

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> responses)
    : responses_(std::move(responses)) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open mock script: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw LoadError("mock script " + path.string() + ": " + e.what());
    }
    if (!doc.is_object())
        throw LoadError("mock script " + path.string() +
                        " must be a JSON object mapping case_id to response text");
    std::map<std::string, std::string> responses;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_string())
            throw LoadError("mock script " + path.string() + ": response for case '" + key +
                            "' is not a string");
        responses[key] = value.get<std::string>();
    }
    return std::make_unique<ScriptedBackend>(std::move(responses));
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& req) {
    const auto start = std::chrono::steady_clock::now();
    auto it = responses_.find(req.case_id);
    if (it == responses_.end())
        throw Error("scripted backend has no response for case '" + req.case_id + "'");
    return GenerationResult{it->second, ms_since(start), 1};
}

std::unique_ptr<GenerationBackend> scripted_backend_from_gold(
    const std::vector<CaseInstance>& split) {
    std::map<std::string, std::string> responses;
    for (const auto& c : split) {
        if (!c.gold)
            throw ConfigError("gold backend: case '" + c.case_id + "' has no gold observations");
        std::vector<StdPair> pairs;
        pairs.reserve(c.gold->size());
        for (const auto& obs : *c.gold) pairs.push_back(StdPair{obs.id, obs.value});
        responses[c.case_id] = std_pairs_to_json(pairs);
    }
    return std::make_unique<ScriptedBackend>(std::move(responses));
}

EchoAuditBackend::EchoAuditBackend(std::shared_ptr<GenerationBackend> inner)
    : inner_(std::move(inner)) {
    if (!inner_) throw ConfigError("EchoAuditBackend needs an inner backend");
}

GenerationResult EchoAuditBackend::generate(const GenerationRequest& req) {
    if (req.pass == PromptPass::Audit) return GenerationResult{req.first_pass_json, 0.0, 1};
    return inner_->generate(req);
}

RemoteChatBackend::RemoteChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw ConfigError("remote backend needs an endpoint");
}

GenerationResult RemoteChatBackend::generate(const GenerationRequest& req) {
    const auto start = std::chrono::steady_clock::now();
    auto url = detail::split_url(cfg_.endpoint);
    const std::string token = detail::env_or_empty(cfg_.auth_env);

    json body;
    body["model"] = req.model_id.empty() ? cfg_.model_id : req.model_id;
    body["messages"] = json::array({json{{"role", "system"}, {"content", req.system_text}},
                                    json{{"role", "user"}, {"content", req.user_text}}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_output_tokens;
    const std::string payload = body.dump();

    auto call = [&]() -> detail::AttemptResult<std::string> {
        httplib::Client cli(url.base);
        cli.set_connection_timeout(30);
        cli.set_read_timeout(600);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res)
            return {std::nullopt, "connection failed: " + httplib::to_string(res.error()), false};
        if (res->status == 429 || res->status >= 500)
            return {std::nullopt, "HTTP " + std::to_string(res->status), false};
        if (res->status != 200)
            return {std::nullopt,
                    "chat API returned HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200),
                    true};

        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
            doc["choices"].empty() || !doc["choices"][0].contains("message") ||
            !doc["choices"][0]["message"].contains("content") ||
            !doc["choices"][0]["message"]["content"].is_string())
            return {std::nullopt, "malformed chat response: " + res->body.substr(0, 200), true};
        return {doc["choices"][0]["message"]["content"].get<std::string>(), "", false};
    };

    int attempts = 0;
    std::string text =
        detail::with_retries<std::string>(cfg_.max_attempts, cfg_.backoff_ms, call, &attempts);
    return GenerationResult{std::move(text), ms_since(start), attempts};
}

std::shared_ptr<GenerationBackend> make_backend(const BackendConfig& cfg,
                                                const std::vector<CaseInstance>* gold_split) {
    std::shared_ptr<GenerationBackend> backend;
    if (cfg.provider == "scripted") {
        if (cfg.script_path.empty())
            throw ConfigError("scripted backend needs backend.script_path");
        backend = ScriptedBackend::from_file(cfg.script_path);
    } else if (cfg.provider == "gold") {
        if (!gold_split)
            throw ConfigError("gold backend needs a split with gold observations");
        backend = scripted_backend_from_gold(*gold_split);
    } else if (cfg.provider == "remote") {
        backend = std::make_shared<RemoteChatBackend>(cfg);
    } else {
        throw ConfigError("unknown backend provider: " + cfg.provider);
    }
    if (cfg.audit_mode == "echo") return std::make_shared<EchoAuditBackend>(std::move(backend));
    if (cfg.audit_mode != "model")
        throw ConfigError("unknown backend audit_mode: " + cfg.audit_mode);
    return backend;
}

}  // namespace obsx

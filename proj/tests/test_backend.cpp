// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "obsx/backend.hpp"
#include "obsx/postprocess.hpp"
#include "test_support.hpp"

using namespace obsx;
using nlohmann::json;

namespace {

GenerationRequest request_for(const std::string& case_id, PromptPass pass = PromptPass::First) {
    GenerationRequest req;
    req.system_text = "system";
    req.user_text = "user";
    req.model_id = "mock";
    req.case_id = case_id;
    req.pass = pass;
    return req;
}

/// Local chat-completions stub that fails a configurable number of times.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> failures_left{0};
    std::atomic<int> hits{0};

    explicit StubServer(int failures, int fail_status = 503) {
        failures_left = failures;
        server.Post("/v1/chat/completions", [this, fail_status](const httplib::Request&,
                                                                httplib::Response& res) {
            hits.fetch_add(1);
            if (failures_left.fetch_sub(1) > 0) {
                res.status = fail_status;
                res.set_content("overloaded", "text/plain");
                return;
            }
            json body{{"choices", json::array({json{
                          {"message", json{{"role", "assistant"},
                                           {"content", "[{\"id\":\"130\",\"value\":\"Alert\"}]"}}}}})}};
            res.set_content(body.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this]() { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
};

}  // namespace

TEST_CASE("scripted backend returns stored responses verbatim") {
    ScriptedBackend backend({{"c1", "```json\n[]\n```"}, {"c2", "plain"}});
    CHECK(backend.generate(request_for("c1")).raw_text == "```json\n[]\n```");  // fences untouched
    CHECK(backend.generate(request_for("c2")).raw_text == "plain");
    CHECK_THROWS_WITH_AS(backend.generate(request_for("missing")), doctest::Contains("missing"),
                         Error);
}

TEST_CASE("scripted backend loads from a JSON script file") {
    test::TempDir tmp;
    test::write_text(tmp.file("script.json"), R"({"a":"resp-a","b":"resp-b"})");
    auto backend = ScriptedBackend::from_file(tmp.file("script.json"));
    CHECK(backend->generate(request_for("a")).raw_text == "resp-a");

    test::write_text(tmp.file("bad.json"), "[1,2,3]");
    CHECK_THROWS_AS(ScriptedBackend::from_file(tmp.file("bad.json")), LoadError);
}

TEST_CASE("gold backend answers with the serialized gold pairs") {
    const Schema schema = test::demo_schema();
    std::vector<std::pair<std::string, ObservationValue>> gold;
    static const char* pool[] = {"0",   "3",   "6",   "7",   "26",  "31",  "67",  "89",
                                 "107", "117", "130", "148", "162", "179", "180", "181",
                                 "182", "183", "184", "185", "186", "187"};
    // a case with many observations still serializes one pair each
    for (const char* id : pool) {
        const Concept* c = schema.find(id);
        ObservationValue v;
        switch (c->value_type) {
            case ValueType::SingleSelect: v = c->allowable_values[0]; break;
            case ValueType::MultiSelect:
                v = std::vector<std::string>{c->allowable_values[0], c->allowable_values[1]};
                break;
            case ValueType::Numeric: v = 37.5; break;
            case ValueType::String: v = std::string("text"); break;
        }
        gold.emplace_back(id, std::move(v));
    }
    std::vector<CaseInstance> split = {test::make_case(schema, "big", "t", gold)};
    auto backend = scripted_backend_from_gold(split);

    const auto result = backend->generate(request_for("big"));
    const auto parsed = repair_and_parse(result.raw_text);
    CHECK(parsed.parse_ok);
    CHECK(parsed.pairs.size() == 22);

    CHECK_THROWS_AS(backend->generate(request_for("absent")), Error);

    std::vector<CaseInstance> no_gold = {CaseInstance{"x", "t", std::nullopt}};
    CHECK_THROWS_AS(scripted_backend_from_gold(no_gold), ConfigError);
}

TEST_CASE("echo-audit backend answers audits with the first pass") {
    auto inner = std::make_shared<ScriptedBackend>(
        std::map<std::string, std::string>{{"c", "from-inner"}});
    EchoAuditBackend backend(inner);

    CHECK(backend.generate(request_for("c", PromptPass::First)).raw_text == "from-inner");

    auto audit = request_for("c", PromptPass::Audit);
    audit.first_pass_json = R"([{"id":"7","value":"Moist"}])";
    CHECK(backend.generate(audit).raw_text == audit.first_pass_json);
}

TEST_CASE("remote backend retries transient failures then succeeds") {
    StubServer stub(/*failures=*/2);
    BackendConfig cfg;
    cfg.provider = "remote";
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(stub.port) + "/v1/chat/completions";
    cfg.max_attempts = 3;
    cfg.backoff_ms = 1;  // keep the test fast
    RemoteChatBackend backend(cfg);

    const auto result = backend.generate(request_for("any"));
    CHECK(result.attempts == 3);
    CHECK(result.raw_text == "[{\"id\":\"130\",\"value\":\"Alert\"}]");
    CHECK(stub.hits.load() == 3);
}

TEST_CASE("remote backend surfaces exhausted retries as TransportError") {
    StubServer stub(/*failures=*/10);
    BackendConfig cfg;
    cfg.provider = "remote";
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(stub.port) + "/v1/chat/completions";
    cfg.max_attempts = 3;
    cfg.backoff_ms = 1;
    RemoteChatBackend backend(cfg);

    try {
        backend.generate(request_for("any"));
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts == 3);
    }
    CHECK(stub.hits.load() == 3);
}

TEST_CASE("remote backend treats 4xx and malformed bodies as protocol errors") {
    // 400s are not retried
    StubServer bad_request(/*failures=*/5, /*fail_status=*/400);
    BackendConfig cfg;
    cfg.provider = "remote";
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(bad_request.port) + "/v1/chat/completions";
    cfg.max_attempts = 3;
    cfg.backoff_ms = 1;
    CHECK_THROWS_AS(RemoteChatBackend(cfg).generate(request_for("x")), ProtocolError);
    CHECK(bad_request.hits.load() == 1);

    httplib::Server weird;
    weird.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"unexpected":"shape"})", "application/json");
    });
    const int port = weird.bind_to_any_port("127.0.0.1");
    std::thread t([&]() { weird.listen_after_bind(); });
    weird.wait_until_ready();
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    CHECK_THROWS_WITH_AS(RemoteChatBackend(cfg).generate(request_for("x")),
                         doctest::Contains("unexpected"), ProtocolError);
    weird.stop();
    t.join();
}

TEST_CASE("make_backend wires providers and the audit mode") {
    const Schema schema = test::demo_schema();
    std::vector<CaseInstance> split = {
        test::make_case(schema, "c", "t", {{"130", std::string("Alert")}})};

    BackendConfig cfg;
    cfg.provider = "gold";
    cfg.audit_mode = "echo";
    auto backend = make_backend(cfg, &split);
    CHECK(backend->name().rfind("echo-audit(", 0) == 0);

    auto audit = request_for("c", PromptPass::Audit);
    audit.first_pass_json = "[]";
    CHECK(backend->generate(audit).raw_text == "[]");

    cfg.audit_mode = "bogus";
    CHECK_THROWS_AS(make_backend(cfg, &split), ConfigError);

    cfg.audit_mode = "model";
    cfg.provider = "scripted";
    cfg.script_path = "";
    CHECK_THROWS_AS(make_backend(cfg, &split), ConfigError);
}

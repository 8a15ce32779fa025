// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Every tolerance is pinned in code; a failure prints the first violated
// expectation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "obsx/log.hpp"
#include "obsx/pipeline.hpp"

// doctest is pulled in only for test_support's REQUIRE; the acceptance
// binary drives itself from main().
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "test_support.hpp"

using namespace obsx;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure(what);
}

template <typename T, typename U>
void expect_eq(const T& got, const U& want, const std::string& what) {
    if (!(got == static_cast<T>(want))) {
        std::ostringstream ss;
        ss << what << " (got " << got << ", want " << want << ")";
        throw CheckFailure(ss.str());
    }
}

Observation string_obs(const std::string& id, const std::string& value) {
    return Observation{id, "Concept " + id, ValueType::String, value};
}

Observation multi_obs(const std::string& id, std::vector<std::string> choices) {
    return Observation{id, "Concept " + id, ValueType::MultiSelect, std::move(choices)};
}

/// Fixture engineered to the published totals: tp=2236, fp=608 split
/// 498 spurious + 110 wrong-value, fn=485 split 382 missed + 103
/// wrong-value, across 199 cases.
void build_count_fixture(CasePredictions& pred, CasePredictions& gold,
                         std::vector<CaseInstance>& cases) {
    const int n_cases = 199;
    for (int i = 0; i < n_cases; ++i) {
        const std::string case_id = "case-" + std::to_string(i);
        auto& p = pred[case_id];
        auto& g = gold[case_id];
        cases.push_back(CaseInstance{case_id, "synthetic transcript words", {}});

        // plain matches: 2229 = 199*11 + 40
        const int matches = 11 + (i < 40 ? 1 : 0);
        for (int j = 0; j < matches; ++j) {
            p.push_back(string_obs("m" + std::to_string(j), "v"));
            g.push_back(string_obs("m" + std::to_string(j), "v"));
        }
        // wrong-value pairs: 103 -> one fp_wrong_value and one fn_wrong_value each
        if (i < 103) {
            p.push_back(string_obs("w", "predicted-value"));
            g.push_back(string_obs("w", "reference-value"));
        }
        // multi-select trick: 7 extra fp_wrong_value with no fn counterpart
        // (one matched choice, one extra wrong choice)
        if (i >= 103 && i < 110) {
            p.push_back(multi_obs("t", {"ok", "bad"}));
            g.push_back(multi_obs("t", {"ok"}));
        }
        // spurious fp: 498 = 199*2 + 100
        const int spurious = 2 + (i < 100 ? 1 : 0);
        for (int j = 0; j < spurious; ++j)
            p.push_back(string_obs("s" + std::to_string(j), "x"));
        // missed fn: 382 = 199*1 + 183
        const int missed = 1 + (i < 183 ? 1 : 0);
        for (int j = 0; j < missed; ++j)
            g.push_back(string_obs("g" + std::to_string(j), "y"));
    }
}

// --- criterion 1: exact metric arithmetic on the engineered counts -------

void criterion_1_metric_oracle() {
    CasePredictions pred, gold;
    std::vector<CaseInstance> cases;
    build_count_fixture(pred, gold, cases);

    const auto start = std::chrono::steady_clock::now();
    const MetricsReport report = score(pred, gold);
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();

    expect_eq(report.tp, 2236, "tp");
    expect_eq(report.fp, 608, "fp");
    expect_eq(report.fn, 485, "fn");
    expect_eq(round2(report.precision()), 78.62, "precision at two decimals");
    expect_eq(round2(report.recall()), 82.18, "recall at two decimals");
    expect_eq(round2(report.f1()), 80.36, "F1 at two decimals");
    expect(elapsed_ms < 1000.0,
           "scoring 199 cases took " + std::to_string(elapsed_ms) + " ms (>= 1 s)");
}

// --- criterion 2: taxonomy reconciliation ---------------------------------

void criterion_2_taxonomy() {
    CasePredictions pred, gold;
    std::vector<CaseInstance> cases;
    build_count_fixture(pred, gold, cases);

    const MetricsReport metrics = score(pred, gold);
    const ErrorBreakdown breakdown = analyze_errors(pred, gold, cases);
    expect_eq(breakdown.fp_spurious_concept, 498, "fp spurious concept");
    expect_eq(breakdown.fp_wrong_value, 110, "fp wrong value");
    expect_eq(breakdown.fn_missed_concept, 382, "fn missed concept");
    expect_eq(breakdown.fn_wrong_value, 103, "fn wrong value");
    expect_eq(breakdown.fp_spurious_concept + breakdown.fp_wrong_value, metrics.fp,
              "fp taxonomy sum");
    expect_eq(breakdown.fn_missed_concept + breakdown.fn_wrong_value, metrics.fn,
              "fn taxonomy sum");

    // reconciliation must hold on arbitrary inputs, not just the fixture
    std::mt19937 rng(424242);
    std::uniform_int_distribution<int> pick(0, 6);
    for (int round = 0; round < 100; ++round) {
        CasePredictions rp, rg;
        std::vector<CaseInstance> rc;
        for (int c = 0; c < 6; ++c) {
            const std::string case_id = "r" + std::to_string(c);
            rc.push_back(CaseInstance{case_id, "t t t", {}});
            for (int i = 0; i < 8; ++i) {
                if (pick(rng) > 3)
                    rp[case_id].push_back(
                        string_obs(std::to_string(pick(rng)), std::to_string(pick(rng))));
                if (pick(rng) > 3)
                    rg[case_id].push_back(
                        string_obs(std::to_string(pick(rng)), std::to_string(pick(rng))));
            }
        }
        const auto m = score(rp, rg);
        const auto b = analyze_errors(rp, rg, rc);
        expect_eq(b.fp_spurious_concept + b.fp_wrong_value, m.fp, "random fp taxonomy sum");
        expect_eq(b.fn_missed_concept + b.fn_wrong_value, m.fn, "random fn taxonomy sum");
    }
}

// --- criterion 3: oracle closure through the full pipeline ----------------

void criterion_3_oracle_closure() {
    test::TempDir tmp;
    const Schema schema = test::demo_schema();

    std::mt19937 rng(7);
    std::vector<CaseInstance> split;
    for (int i = 0; i < 20; ++i) {
        std::vector<std::pair<std::string, ObservationValue>> gold;
        gold.emplace_back("130", std::string("Alert"));
        gold.emplace_back("148", std::vector<std::string>{"Nausea", "Vomiting"});
        if (i % 2 == 0) gold.emplace_back("181", 88.0 + i);
        if (i % 3 == 0) gold.emplace_back("26", std::string("note " + std::to_string(i)));
        if (i % 4 == 0) gold.emplace_back("183", std::string(std::to_string(i % 11)));
        if (i % 5 == 0) gold.emplace_back("179", std::string("C"));
        split.push_back(test::make_case(schema, "case-" + std::to_string(i),
                                        test::random_transcript(rng), std::move(gold)));
    }
    test::write_text(tmp.file("schema.json"), test::schema_to_json(schema));
    test::write_text(tmp.file("split.jsonl"), split_to_jsonl(split));

    int run_no = 0;
    for (const char* mode : {"full", "pruned"}) {
        for (bool rag : {false, true}) {
            for (bool second : {false, true}) {
                for (int k : {3, 30}) {
                    if (!rag && k != 3) continue;  // k is meaningless without rag
                    RunConfig cfg;
                    cfg.schema_path = tmp.file("schema.json").string();
                    cfg.train_path = tmp.file("split.jsonl").string();
                    cfg.input_path = tmp.file("split.jsonl").string();
                    cfg.cache_dir = (tmp.path / "cache").string();
                    cfg.out_dir = (tmp.path / ("run-" + std::to_string(run_no++))).string();
                    cfg.embedding.dim = 64;
                    cfg.backend.provider = "gold";
                    cfg.backend.audit_mode = second ? "echo" : "model";
                    cfg.schema_mode = mode;
                    cfg.rag_enabled = rag;
                    cfg.second_pass = second;
                    cfg.retrieval.top_k = k;
                    cfg.retrieval.pool_size = std::max(k, 20);
                    cfg.pruning.min_size = 5;
                    cfg.pruning.target_budget = 10;
                    cfg.pruning.max_size = 18;
                    cfg.parallelism = 4;

                    const auto outputs = run_extract(cfg);
                    EvalConfig ecfg;
                    const auto eval = run_evaluate(outputs.predictions_path,
                                                   tmp.file("split.jsonl"),
                                                   tmp.file("schema.json"), ecfg);
                    const std::string tag = std::string(mode) + "/rag=" + (rag ? "on" : "off") +
                                            "/second=" + (second ? "on" : "off") +
                                            "/k=" + std::to_string(k);
                    expect_eq(eval.metrics.fp, 0, tag + ": fp");
                    expect_eq(eval.metrics.fn, 0, tag + ": fn");
                    expect_eq(eval.metrics.precision(), 100.0, tag + ": precision");
                    expect_eq(eval.metrics.recall(), 100.0, tag + ": recall");
                    expect_eq(eval.metrics.f1(), 100.0, tag + ": F1");
                }
            }
        }
    }
}

// --- criterion 4: rerank equals brute force -------------------------------

double naive_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.empty() || b.empty()) return 0.0;
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double naive_jaccard(const std::string& a, const std::string& b) {
    const auto sa = token_set(a);
    const auto sb = token_set(b);
    if (sa.empty() && sb.empty()) return 1.0;
    std::vector<std::string> inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    return static_cast<double>(inter.size()) /
           static_cast<double>(sa.size() + sb.size() - inter.size());
}

void criterion_4_retrieval_equivalence() {
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> corpus_size(1, 50);

    const std::vector<RetrievalWeights> weight_sets = {RetrievalWeights{0.70, 0.25, 0.05},
                                                       RetrievalWeights{1.0, 0.0, 0.0}};

    for (int round = 0; round < 200; ++round) {
        const int n = corpus_size(rng);
        std::vector<ExemplarRecord> corpus;
        for (int i = 0; i < n; ++i) {
            ExemplarRecord ex;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "c%03d", i);
            ex.case_id = buf;
            ex.transcript = test::random_transcript(rng, 3, 25);
            ex.summary_text = test::random_transcript(rng, 1, 6);
            corpus.push_back(std::move(ex));
        }
        const std::string query = test::random_transcript(rng, 3, 25);
        const RetrievalWeights& weights = weight_sets[round % weight_sets.size()];

        RetrievalConfig cfg;
        cfg.pool_size = n;
        cfg.top_k = (round % 3 == 0) ? std::min(5, n) : n;
        cfg.weights = weights;

        EmbeddingService service(std::make_shared<LocalHashEmbedder>(128));
        const auto got = retrieve_top_k(query, corpus, cfg, service);

        // independent oracle: naive similarity math, full sort, prefix
        LocalHashEmbedder embedder(128);
        const auto qv = embedder.embed_batch({query})[0];
        struct Row {
            std::string id;
            double score;
        };
        std::vector<Row> rows;
        for (const auto& ex : corpus) {
            const double s_t = naive_cosine(qv, embedder.embed_batch({ex.transcript})[0]);
            const double s_c = naive_cosine(qv, embedder.embed_batch({ex.summary_text})[0]);
            const double s_l = naive_jaccard(query, ex.transcript);
            rows.push_back(Row{ex.case_id,
                               weights.w_t * s_t + weights.w_c * s_c + weights.w_l * s_l});
        }
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });

        expect_eq(got.size(), std::min<std::size_t>(cfg.top_k, rows.size()),
                  "rerank output size");
        for (std::size_t i = 0; i < got.size(); ++i)
            expect(got[i].exemplar.case_id == rows[i].id,
                   "ordering mismatch at rank " + std::to_string(i) + " in round " +
                       std::to_string(round));
    }
}

// --- criterion 5: validation properties -----------------------------------

void criterion_5_validation_properties() {
    const Schema schema = test::demo_schema();
    std::mt19937 rng(5150);

    // repair_and_parse is total over arbitrary byte strings
    std::uniform_int_distribution<int> len(0, 200);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> mode(0, 2);
    const std::string syntax = "[]{},:\"'`0123456789.idvalue \n\\";
    std::uniform_int_distribution<std::size_t> sx(0, syntax.size() - 1);
    for (int i = 0; i < 1200; ++i) {
        std::string s;
        const int n = len(rng);
        for (int j = 0; j < n; ++j)
            s.push_back(mode(rng) == 0 ? static_cast<char>(byte(rng)) : syntax[sx(rng)]);
        try {
            repair_and_parse(s);
        } catch (...) {
            throw CheckFailure("repair_and_parse threw on fuzz input #" + std::to_string(i));
        }
    }

    // idempotence + expand-revalidates-clean + accounting, on random pairs
    static const char* ids[] = {"0", "3", "7", "26", "130", "148", "181", "183",
                                "187", "999", "zz", "03"};
    std::uniform_int_distribution<int> id_pick(0, 11);
    std::uniform_int_distribution<int> kind(0, 7);
    std::uniform_int_distribution<int> small(0, 4);
    using nlohmann::json;
    for (int round = 0; round < 1000; ++round) {
        std::vector<PredictionPair> pairs;
        const int n = small(rng) + small(rng);
        for (int i = 0; i < n; ++i) {
            json value;
            switch (kind(rng)) {
                case 0: value = json("Moist"); break;
                case 1: value = json("  alert "); break;
                case 2: value = json(90 + small(rng)); break;
                case 3: value = json("95.5"); break;
                case 4: value = json::array({"Nausea", "VOMITING", "Nausea", "junk"}); break;
                case 5: value = json("free text"); break;
                case 6: value = json(nullptr); break;
                default: value = json::array({json::array({1, 2})}); break;
            }
            pairs.push_back(PredictionPair{ids[id_pick(rng)], value});
        }

        const auto first = validate(pairs, schema);
        expect_eq(first.report.input_total(), pairs.size(), "validation accounting");

        const auto second = validate(to_prediction_pairs(first.pairs), schema);
        expect_eq(second.pairs.size(), first.pairs.size(), "idempotence: size");
        for (std::size_t i = 0; i < first.pairs.size(); ++i) {
            expect(second.pairs[i].id == first.pairs[i].id, "idempotence: id");
            expect(second.pairs[i].value == first.pairs[i].value, "idempotence: value");
        }
        expect_eq(second.report.dropped_unknown_id + second.report.dropped_bad_value +
                      second.report.dropped_duplicate,
                  0, "idempotence: no drops on re-validate");
        expect_eq(second.report.coerced_categorical + second.report.coerced_numeric, 0,
                  "idempotence: no coercions on re-validate");

        const auto observations = expand(first.pairs, schema);
        std::vector<PredictionPair> round_trip;
        for (const auto& obs : observations)
            round_trip.push_back(PredictionPair{obs.id, observation_value_to_json(obs.value)});
        const auto third = validate(round_trip, schema);
        expect_eq(third.report.dropped_unknown_id + third.report.dropped_bad_value +
                      third.report.dropped_duplicate,
                  0, "expand output re-validates with zero drops");
    }

    // duplicate ids keep exactly the first valid occurrence
    using nlohmann::json;
    for (int round = 0; round < 300; ++round) {
        const bool first_valid = round % 2 == 0;
        std::vector<PredictionPair> pairs = {
            PredictionPair{"7", json(first_valid ? "Moist" : "bogus")},
            PredictionPair{"7", json("Dry")},
            PredictionPair{"7", json("Moist")},
        };
        const auto result = validate(pairs, schema);
        expect_eq(result.pairs.size(), 1, "duplicates collapse to one pair");
        expect(std::get<std::string>(result.pairs[0].value) ==
                   (first_valid ? "Moist" : "Dry"),
               "first valid occurrence wins");
    }
}

// --- criterion 6: pruning bounds ------------------------------------------

void criterion_6_pruning_bounds() {
    std::mt19937 rng(606);
    std::uniform_int_distribution<int> schema_size(30, 60);
    std::uniform_int_distribution<int> type_pick(0, 3);
    std::uniform_int_distribution<int> min_pick(5, 15);
    std::uniform_int_distribution<int> span_pick(5, 25);
    std::uniform_int_distribution<int> keep_pick(5, 30);
    std::uniform_int_distribution<int> n_exemplars(0, 5);
    std::uniform_int_distribution<int> n_patterns(0, 8);
    std::uniform_int_distribution<int> gold_per_exemplar(1, 6);

    static const std::vector<std::string> name_words = {
        "pain", "oxygen", "mobility", "status", "temperature", "pulse", "wound",
        "diet", "rest", "fall", "risk", "cognitive", "breathing", "fluid"};
    std::uniform_int_distribution<std::size_t> word_pick(0, name_words.size() - 1);

    EmbeddingService service(std::make_shared<LocalHashEmbedder>(64));

    for (int round = 0; round < 500; ++round) {
        const int m = schema_size(rng);
        std::vector<Concept> concepts;
        for (int i = 0; i < m; ++i) {
            Concept c;
            c.id = std::to_string(i);
            c.name = name_words[word_pick(rng)] + " " + name_words[word_pick(rng)] + " " +
                     std::to_string(i);
            switch (type_pick(rng)) {
                case 0:
                    c.value_type = ValueType::SingleSelect;
                    c.allowable_values = {"A", "B", "C"};
                    break;
                case 1:
                    c.value_type = ValueType::MultiSelect;
                    c.allowable_values = {"X", "Y"};
                    break;
                case 2: c.value_type = ValueType::Numeric; break;
                default: c.value_type = ValueType::String; break;
            }
            concepts.push_back(std::move(c));
        }
        const Schema schema(std::move(concepts), IdMode::Raw);

        PruningConfig cfg;
        cfg.min_size = min_pick(rng);
        cfg.max_size = cfg.min_size + span_pick(rng);
        std::uniform_int_distribution<int> target_pick(cfg.min_size, cfg.max_size);
        cfg.target_budget = target_pick(rng);
        cfg.lexical_keep = keep_pick(rng);
        cfg.semantic_threshold = 0.30;

        std::uniform_int_distribution<int> concept_pick(0, m - 1);
        std::set<std::string> pattern_set;
        for (int i = n_patterns(rng); i > 0; --i)
            pattern_set.insert(std::to_string(concept_pick(rng)));
        cfg.pattern_ids.assign(pattern_set.begin(), pattern_set.end());

        std::vector<ScoredExemplar> exemplars;
        std::set<std::string> exemplar_ids;
        for (int e = n_exemplars(rng); e > 0; --e) {
            ScoredExemplar se;
            se.exemplar.case_id = "e" + std::to_string(e);
            se.exemplar.transcript = test::random_transcript(rng, 2, 10);
            for (int g = gold_per_exemplar(rng); g > 0; --g) {
                const std::string gid = std::to_string(concept_pick(rng));
                se.exemplar.std_pairs.push_back(StdPair{gid, std::string("v")});
                exemplar_ids.insert(gid);
            }
            exemplars.push_back(std::move(se));
        }

        const std::string transcript = test::random_transcript(rng, 0, 30);
        const auto cs = build_candidate_set(transcript, schema, exemplars, cfg, service);

        expect(cs.size() >= static_cast<std::size_t>(cfg.min_size),
               "candidate set below min_size in round " + std::to_string(round));
        expect(cs.size() <= static_cast<std::size_t>(cfg.max_size),
               "candidate set above max_size in round " + std::to_string(round));

        std::set<std::string> seen;
        for (const auto& cand : cs.items) {
            expect(schema.find(cand.id) != nullptr, "candidate outside the schema");
            expect(seen.insert(cand.id).second, "duplicate candidate id");
        }

        std::set<std::string> protected_ids = pattern_set;
        protected_ids.insert(exemplar_ids.begin(), exemplar_ids.end());
        if (protected_ids.size() <= static_cast<std::size_t>(cfg.max_size)) {
            for (const auto& pid : pattern_set)
                expect(cs.contains(pid), "pattern id trimmed despite fitting");
            for (const auto& eid : exemplar_ids)
                expect(cs.contains(eid), "exemplar gold id trimmed despite fitting");
        } else {
            // overflow: exemplar-only ids go before patterns, and only after
            // every unprotected candidate is gone
            bool missing_protected = false;
            for (const auto& pid : protected_ids)
                if (!cs.contains(pid)) missing_protected = true;
            if (missing_protected) {
                for (const auto& cand : cs.items)
                    expect(protected_ids.count(cand.id) > 0,
                           "unprotected candidate kept while protected ids were trimmed");
            }
            bool missing_pattern = false;
            for (const auto& pid : pattern_set)
                if (!cs.contains(pid)) missing_pattern = true;
            if (missing_pattern) {
                for (const auto& cand : cs.items)
                    expect(pattern_set.count(cand.id) > 0,
                           "non-pattern kept while patterns were trimmed");
            }
        }
    }
}

// --- criterion 7: multi-select scoring equivalence -------------------------

/// Brute-force maximum matching over atom equality (recursion over pred
/// atoms; fine at these sizes).
std::size_t brute_force_matching(const std::vector<MatchItem>& pred,
                                 const std::vector<MatchItem>& gold, std::size_t i,
                                 std::vector<bool>& gold_used) {
    if (i == pred.size()) return 0;
    std::size_t best = brute_force_matching(pred, gold, i + 1, gold_used);  // leave i unmatched
    for (std::size_t j = 0; j < gold.size(); ++j) {
        if (gold_used[j]) continue;
        if (pred[i].concept_id != gold[j].concept_id) continue;
        if (pred[i].value_key() != gold[j].value_key()) continue;
        gold_used[j] = true;
        best = std::max(best, 1 + brute_force_matching(pred, gold, i + 1, gold_used));
        gold_used[j] = false;
    }
    return best;
}

void criterion_7_multiselect_equivalence() {
    // atom universe: 3 concepts x 3 choices
    struct Atom {
        std::string concept;
        std::string choice;
    };
    std::vector<Atom> universe;
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < 3; ++v)
            universe.push_back(Atom{"c" + std::to_string(c), "v" + std::to_string(v)});

    auto observations_from = [&](const std::vector<int>& chosen) {
        std::map<std::string, std::vector<std::string>> grouped;
        for (int idx : chosen) grouped[universe[idx].concept].push_back(universe[idx].choice);
        std::vector<Observation> observations;
        for (auto& [concept_id, choices] : grouped)
            observations.push_back(multi_obs(concept_id, choices));
        return observations;
    };

    // all subsets of the 9-atom universe with <= 3 atoms
    std::vector<std::vector<int>> subsets;
    subsets.push_back({});
    for (int a = 0; a < 9; ++a) {
        subsets.push_back({a});
        for (int b = a + 1; b < 9; ++b) {
            subsets.push_back({a, b});
            for (int c = b + 1; c < 9; ++c) subsets.push_back({a, b, c});
        }
    }

    auto check_pair = [&](const std::vector<Observation>& pred_obs,
                          const std::vector<Observation>& gold_obs) {
        CasePredictions pred{{"case", pred_obs}}, gold{{"case", gold_obs}};
        const auto report = score(pred, gold);

        std::vector<MatchItem> pred_atoms, gold_atoms;
        for (const auto& o : pred_obs) {
            auto items = atomize("case", o);
            pred_atoms.insert(pred_atoms.end(), items.begin(), items.end());
        }
        for (const auto& o : gold_obs) {
            auto items = atomize("case", o);
            gold_atoms.insert(gold_atoms.end(), items.begin(), items.end());
        }
        std::vector<bool> used(gold_atoms.size(), false);
        const std::size_t best = brute_force_matching(pred_atoms, gold_atoms, 0, used);
        expect_eq(report.tp, best, "tp equals brute-force maximum matching");
        expect_eq(report.fp, pred_atoms.size() - best, "fp residual");
        expect_eq(report.fn, gold_atoms.size() - best, "fn residual");
    };

    for (const auto& p : subsets)
        for (const auto& g : subsets) check_pair(observations_from(p), observations_from(g));

    // duplicated atoms (counts up to 2) via repeated string observations
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> count(0, 2);
    for (int round = 0; round < 500; ++round) {
        std::vector<Observation> pred_obs, gold_obs;
        for (int a = 0; a < 4; ++a) {
            const std::string concept_id = "c" + std::to_string(a % 2);
            const std::string value = "v" + std::to_string(a / 2);
            for (int i = count(rng); i > 0; --i)
                pred_obs.push_back(string_obs(concept_id, value));
            for (int i = count(rng); i > 0; --i)
                gold_obs.push_back(string_obs(concept_id, value));
        }
        check_pair(pred_obs, gold_obs);
    }
}

// --- criterion 8: non-reproducible results declared ------------------------

void criterion_8_ablation_matrix_declared() {
    // Live Llama-4 / GPT-5.2 absolute scores depend on external model
    // behavior and are NOT acceptance targets. What must hold: every
    // ablation cell is reachable through RunConfig alone, including a
    // remote backend, with no code changes.
    for (const char* mode : {"full", "pruned"}) {
        for (bool rag : {false, true}) {
            for (bool second : {false, true}) {
                RunConfig cfg;
                cfg.schema_path = "schema.json";
                cfg.input_path = "test.jsonl";
                cfg.train_path = rag ? "train.jsonl" : "";
                cfg.schema_mode = mode;
                cfg.rag_enabled = rag;
                cfg.second_pass = second;
                cfg.backend.provider = "remote";
                cfg.backend.endpoint = "https://example.invalid/v1/chat/completions";
                cfg.backend.model_id = "any-model";
                cfg.validate();  // must be expressible and valid as config

                // and the config survives a JSON round-trip unchanged
                const RunConfig back = RunConfig::from_json(cfg.to_json());
                expect(back.schema_mode == cfg.schema_mode, "schema_mode round-trip");
                expect(back.rag_enabled == cfg.rag_enabled, "rag_enabled round-trip");
                expect(back.second_pass == cfg.second_pass, "second_pass round-trip");
                expect(back.backend.provider == "remote", "backend provider round-trip");
            }
        }
    }
}

struct Criterion {
    int number;
    const char* description;
    std::function<void()> run;
};

}  // namespace

int main() {
    set_log_level(LogLevel::Error);

    const std::vector<Criterion> criteria = {
        {1, "metric oracle: engineered counts give P=78.62 R=82.18 F1=80.36, < 1 s",
         criterion_1_metric_oracle},
        {2, "taxonomy reconciliation: 498/110 and 382/103 splits, sums always reconcile",
         criterion_2_taxonomy},
        {3, "oracle closure: gold-scripted backend scores 100/100/100 across the ablation matrix",
         criterion_3_oracle_closure},
        {4, "retrieval equivalence: rerank matches brute force on 200 random corpora",
         criterion_4_retrieval_equivalence},
        {5, "validation properties: total parsing, idempotence, first-valid duplicates",
         criterion_5_validation_properties},
        {6, "pruning bounds: size window, schema subset, protected survivors (500 rounds)",
         criterion_6_pruning_bounds},
        {7, "multi-select scoring equals brute-force matching on exhaustive small instances",
         criterion_7_multiselect_equivalence},
        {8, "non-reproducible live-model scores declared; ablation matrix config-reachable",
         criterion_8_ablation_matrix_declared},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        try {
            criterion.run();
            std::printf("PASS  criterion %d: %s\n", criterion.number, criterion.description);
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL  criterion %d: %s\n      %s\n", criterion.number,
                        criterion.description, e.what());
        }
        std::fflush(stdout);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}

// Copyright (C) 2026 The obsx authors
// SPDX-License-Identifier: Apache-2.0

#include "obsx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include "obsx/log.hpp"
#include "obsx/text.hpp"

namespace obsx {

namespace {

std::optional<double> to_double_full(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    double d = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return std::nullopt;
    if (!std::isfinite(d)) return std::nullopt;
    return d;
}

MatchItem make_numeric(const std::string& case_id, const std::string& cid, double d) {
    MatchItem m;
    m.case_id = case_id;
    m.concept_id = cid;
    m.is_numeric = true;
    m.number = d;
    m.text = format_double(d);
    return m;
}

MatchItem make_text(const std::string& case_id, const std::string& cid, std::string s) {
    MatchItem m;
    m.case_id = case_id;
    m.concept_id = cid;
    m.text = std::move(s);
    return m;
}

struct CaseCounts {
    std::size_t tp = 0;
    std::vector<const MatchItem*> unmatched_pred;
    std::vector<const MatchItem*> unmatched_gold;
};

std::vector<MatchItem> atomize_side(const std::string& case_id,
                                    const std::vector<Observation>& observations, IdMode mode,
                                    bool set_mode) {
    std::vector<MatchItem> atoms;
    for (const auto& obs : observations) {
        auto items = atomize(case_id, obs, mode);
        atoms.insert(atoms.end(), items.begin(), items.end());
    }
    if (set_mode) {
        std::set<std::string> seen;
        std::vector<MatchItem> unique;
        for (auto& a : atoms)
            if (seen.insert(a.concept_id + '\x1f' + a.value_key()).second)
                unique.push_back(std::move(a));
        atoms = std::move(unique);
    }
    return atoms;
}

/// Greedy multiset matching per (concept_id, value_key); with a positive
/// epsilon, numeric atoms of the same concept match within tolerance via a
/// sorted two-pointer sweep instead.
CaseCounts match_case(const std::vector<MatchItem>& pred, const std::vector<MatchItem>& gold,
                      double epsilon) {
    CaseCounts counts;
    std::vector<bool> gold_used(gold.size(), false);
    std::vector<bool> pred_used(pred.size(), false);

    if (epsilon > 0.0) {
        // Numeric-with-tolerance first: sort both sides per concept.
        std::map<std::string, std::vector<std::size_t>> pred_nums, gold_nums;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i].is_numeric) pred_nums[pred[i].concept_id].push_back(i);
        for (std::size_t j = 0; j < gold.size(); ++j)
            if (gold[j].is_numeric) gold_nums[gold[j].concept_id].push_back(j);
        for (auto& [cid, ps] : pred_nums) {
            auto git = gold_nums.find(cid);
            if (git == gold_nums.end()) continue;
            auto& gs = git->second;
            auto by_number = [&](const std::vector<std::size_t>& idx, const auto& side) {
                auto sorted = idx;
                std::sort(sorted.begin(), sorted.end(),
                          [&](std::size_t a, std::size_t b) { return side[a].number < side[b].number; });
                return sorted;
            };
            auto sp = by_number(ps, pred);
            auto sg = by_number(gs, gold);
            std::size_t a = 0, b = 0;
            while (a < sp.size() && b < sg.size()) {
                double diff = pred[sp[a]].number - gold[sg[b]].number;
                if (std::fabs(diff) <= epsilon) {
                    pred_used[sp[a]] = true;
                    gold_used[sg[b]] = true;
                    ++counts.tp;
                    ++a;
                    ++b;
                } else if (diff < 0) {
                    ++a;
                } else {
                    ++b;
                }
            }
        }
    }

    // Exact multiset matching on (concept_id, value_key).
    std::map<std::string, std::vector<std::size_t>> gold_by_key;
    for (std::size_t j = 0; j < gold.size(); ++j)
        if (!gold_used[j])
            gold_by_key[gold[j].concept_id + '\x1f' + gold[j].value_key()].push_back(j);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred_used[i]) continue;
        if (epsilon > 0.0 && pred[i].is_numeric) continue;  // handled above
        auto it = gold_by_key.find(pred[i].concept_id + '\x1f' + pred[i].value_key());
        if (it != gold_by_key.end() && !it->second.empty()) {
            gold_used[it->second.back()] = true;
            it->second.pop_back();
            pred_used[i] = true;
            ++counts.tp;
        }
    }

    for (std::size_t i = 0; i < pred.size(); ++i)
        if (!pred_used[i]) counts.unmatched_pred.push_back(&pred[i]);
    for (std::size_t j = 0; j < gold.size(); ++j)
        if (!gold_used[j]) counts.unmatched_gold.push_back(&gold[j]);
    return counts;
}

std::vector<double> ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

std::string MatchItem::value_key() const {
    return (is_numeric ? "n:" : "s:") + text;
}

std::vector<MatchItem> atomize(const std::string& case_id, const Observation& obs,
                               IdMode id_mode) {
    const std::string cid = canonical_id(obs.id, id_mode);
    std::vector<MatchItem> items;

    if (const auto* list = std::get_if<std::vector<std::string>>(&obs.value)) {
        items.reserve(list->size());
        for (const auto& choice : *list) items.push_back(make_text(case_id, cid, choice));
        return items;
    }
    if (const auto* num = std::get_if<double>(&obs.value)) {
        items.push_back(make_numeric(case_id, cid, *num));
        return items;
    }
    const auto& s = std::get<std::string>(obs.value);
    if (obs.value_type == ValueType::Numeric) {
        if (auto d = to_double_full(s)) {
            items.push_back(make_numeric(case_id, cid, *d));
            return items;
        }
    }
    items.push_back(make_text(case_id, cid, s));
    return items;
}

double MetricsReport::precision() const {
    return tp + fp == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double MetricsReport::recall() const {
    return tp + fn == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double MetricsReport::f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

MetricsReport score(const CasePredictions& pred, const CasePredictions& gold,
                    const ScoreOptions& opts) {
    MetricsReport report;

    std::set<std::string> case_ids;
    for (const auto& [id, _] : pred) case_ids.insert(id);
    for (const auto& [id, _] : gold) case_ids.insert(id);

    for (const auto& case_id : case_ids) {
        auto pit = pred.find(case_id);
        auto git = gold.find(case_id);
        if (pit == pred.end())
            log_warn("score: case '" + case_id + "' missing from predictions, all gold counts as fn");
        if (git == gold.end())
            log_warn("score: case '" + case_id + "' missing from gold, all predictions count as fp");

        static const std::vector<Observation> kEmpty;
        auto pred_atoms = atomize_side(case_id, pit == pred.end() ? kEmpty : pit->second,
                                       opts.id_mode, opts.set_mode);
        auto gold_atoms = atomize_side(case_id, git == gold.end() ? kEmpty : git->second,
                                       opts.id_mode, opts.set_mode);
        auto counts = match_case(pred_atoms, gold_atoms, opts.numeric_epsilon);
        report.tp += counts.tp;
        report.fp += counts.unmatched_pred.size();
        report.fn += counts.unmatched_gold.size();
    }
    return report;
}

ErrorBreakdown analyze_errors(const CasePredictions& pred, const CasePredictions& gold,
                              const std::vector<CaseInstance>& cases, const ScoreOptions& opts,
                              std::vector<CaseErrorRow>* per_case) {
    ErrorBreakdown breakdown;
    breakdown.correlation_kind = opts.use_pearson ? "pearson" : "spearman";

    std::map<std::string, std::size_t> fp_tally, fn_tally;
    std::map<std::string, CaseErrorRow> rows;

    std::set<std::string> case_ids;
    for (const auto& [id, _] : pred) case_ids.insert(id);
    for (const auto& [id, _] : gold) case_ids.insert(id);
    for (const auto& c : cases) case_ids.insert(c.case_id);

    for (const auto& case_id : case_ids) {
        static const std::vector<Observation> kEmpty;
        auto pit = pred.find(case_id);
        auto git = gold.find(case_id);
        auto pred_atoms = atomize_side(case_id, pit == pred.end() ? kEmpty : pit->second,
                                       opts.id_mode, opts.set_mode);
        auto gold_atoms = atomize_side(case_id, git == gold.end() ? kEmpty : git->second,
                                       opts.id_mode, opts.set_mode);
        auto counts = match_case(pred_atoms, gold_atoms, opts.numeric_epsilon);

        std::set<std::string> gold_concepts, pred_concepts;
        for (const auto& a : gold_atoms) gold_concepts.insert(a.concept_id);
        for (const auto& a : pred_atoms) pred_concepts.insert(a.concept_id);

        for (const auto* a : counts.unmatched_pred) {
            if (gold_concepts.count(a->concept_id))
                ++breakdown.fp_wrong_value;
            else
                ++breakdown.fp_spurious_concept;
            ++fp_tally[a->concept_id];
        }
        for (const auto* a : counts.unmatched_gold) {
            if (pred_concepts.count(a->concept_id))
                ++breakdown.fn_wrong_value;
            else
                ++breakdown.fn_missed_concept;
            ++fn_tally[a->concept_id];
        }

        CaseErrorRow row;
        row.case_id = case_id;
        row.tp = counts.tp;
        row.fp = counts.unmatched_pred.size();
        row.fn = counts.unmatched_gold.size();
        row.gold_count = gold_atoms.size();
        row.pred_count = pred_atoms.size();
        rows[case_id] = std::move(row);
    }

    auto tally_to_sorted = [](const std::map<std::string, std::size_t>& tally) {
        std::vector<ConceptErrorCount> out;
        out.reserve(tally.size());
        for (const auto& [id, count] : tally) out.push_back(ConceptErrorCount{id, count});
        std::sort(out.begin(), out.end(), [](const ConceptErrorCount& a, const ConceptErrorCount& b) {
            if (a.count != b.count) return a.count > b.count;
            return a.concept_id < b.concept_id;
        });
        return out;
    };
    breakdown.fp_by_concept = tally_to_sorted(fp_tally);
    breakdown.fn_by_concept = tally_to_sorted(fn_tally);

    // Density correlations over the provided case list (the split order).
    std::vector<double> errors, gold_sizes, pred_sizes, words;
    for (const auto& c : cases) {
        auto it = rows.find(c.case_id);
        if (it == rows.end()) continue;
        it->second.words = word_count(c.transcript);
        errors.push_back(static_cast<double>(it->second.fp + it->second.fn));
        gold_sizes.push_back(static_cast<double>(it->second.gold_count));
        pred_sizes.push_back(static_cast<double>(it->second.pred_count));
        words.push_back(static_cast<double>(it->second.words));
    }
    auto correlate = [&](const std::vector<double>& ys) {
        return opts.use_pearson ? pearson(errors, ys) : spearman(errors, ys);
    };
    breakdown.rho_errors_gold = correlate(gold_sizes);
    breakdown.rho_errors_pred = correlate(pred_sizes);
    breakdown.rho_errors_words = correlate(words);

    if (per_case) {
        per_case->clear();
        if (!cases.empty()) {
            // Keep split order first, then any extra case ids.
            std::set<std::string> emitted;
            for (const auto& c : cases) {
                auto it = rows.find(c.case_id);
                if (it == rows.end()) continue;
                per_case->push_back(it->second);
                emitted.insert(c.case_id);
            }
            for (const auto& [id, row] : rows)
                if (!emitted.count(id)) per_case->push_back(row);
        } else {
            for (const auto& [id, row] : rows) per_case->push_back(row);
        }
    }
    return breakdown;
}

std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) return std::nullopt;
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) return std::nullopt;
    return pearson(ranks(xs), ranks(ys));
}

}  // namespace obsx

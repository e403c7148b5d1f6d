#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "codemt/bleu.hpp"
#include "codemt/testgen.hpp"
#include "codemt/threadpool.hpp"

#include <json.hpp>

namespace codemt {

// ----------------------------- reference match -----------------------------

// Exact token-level equality; whitespace-insensitive by the lexing contract.
inline bool reference_match(const std::string& hypothesis, const std::string& reference,
                            const LanguageId& lang, int* lex_warnings = nullptr) {
    std::vector<Token> h, r;
    try {
        h = tokenize(lang, hypothesis);
        r = tokenize(lang, reference);
    } catch (const LexError&) {
        if (lex_warnings) ++*lex_warnings;
        return false;
    }
    return h == r;
}

// ----------------------------- evaluation -----------------------------

struct EvalUnit {
    std::string id;
    LanguageId src_lang;
    std::string src_text;
    TestCase tgt_case;
};

// Produces candidate target texts for one unit, ranked by log-probability
// descending; the harness stays independent of how translations are made.
using TranslateFn =
    std::function<std::vector<std::string>(const EvalUnit&, int width)>;

struct FunctionOutcome {
    std::string id;
    Outcome::Category greedy_category = Outcome::Category::CompileError;
    bool greedy_reference_match = false;
    std::map<int, bool> beam_success;   // width -> any hypothesis passed
    std::map<int, bool> top1_success;   // width -> best-ranked hypothesis passed
    std::vector<std::string> greedy_tokens;
    std::vector<std::string> reference_tokens;
};

struct DirectionReport {
    std::string src, tgt;
    int n = 0;
    double reference_match_pct = 0;
    double bleu_score = 0;
    std::map<int, double> beam_acc;
    std::map<int, double> top1_acc;
    std::map<std::string, int> greedy_categories;
    std::vector<FunctionOutcome> functions;
};

struct EvalReport {
    std::string config_hash;
    std::vector<int> widths;
    std::vector<DirectionReport> directions;
};

namespace detail {

inline std::vector<std::string> token_texts_of(const LanguageId& lang, const std::string& text) {
    std::vector<std::string> out;
    try {
        for (const auto& t : tokenize(lang, text)) out.push_back(t.text);
    } catch (const LexError&) {
        out.clear();
        for (const auto& w : split_ws(text)) out.push_back(w);
    }
    return out;
}

}  // namespace detail

// Evaluates one direction. Beam k accuracy counts units with any passing
// hypothesis among the k returned; Top-1 counts only the highest-ranked one.
// Hypothesis executions are cached per unit, and units fan out over worker
// threads with index-ordered (deterministic) aggregation.
inline DirectionReport evaluate_direction(const std::vector<EvalUnit>& units,
                                          const TranslateFn& translate,
                                          const std::vector<int>& widths, int workers,
                                          CandidateRunner* runner = nullptr) {
    DirectionReport report;
    if (units.empty()) return report;
    report.src = units[0].src_lang.name;
    report.tgt = units[0].tgt_case.lang.name;
    report.n = static_cast<int>(units.size());
    report.functions.resize(units.size());

    auto eval_unit = [&](std::size_t idx) {
        const EvalUnit& unit = units[idx];
        FunctionOutcome fo;
        fo.id = unit.id;
        std::map<std::string, Outcome::Category> cache;
        auto outcome_of = [&](const std::string& text) {
            auto it = cache.find(text);
            if (it != cache.end()) return it->second;
            Outcome o = run_candidate(unit.tgt_case, text, runner);
            cache.emplace(text, o.category);
            return o.category;
        };
        for (int w : widths) {
            auto hyps = translate(unit, w);
            bool any = false;
            bool top1 = false;
            for (std::size_t h = 0; h < hyps.size(); ++h) {
                bool ok = outcome_of(hyps[h]) == Outcome::Category::Success;
                any |= ok;
                if (h == 0) top1 = ok;
            }
            fo.beam_success[w] = any;
            fo.top1_success[w] = top1;
            if (w == 1 && !hyps.empty()) {
                fo.greedy_category = outcome_of(hyps[0]);
                fo.greedy_reference_match =
                    reference_match(hyps[0], unit.tgt_case.reference.raw, unit.tgt_case.lang);
                fo.greedy_tokens = detail::token_texts_of(unit.tgt_case.lang, hyps[0]);
            }
        }
        fo.reference_tokens = detail::token_texts_of(unit.tgt_case.lang, unit.tgt_case.reference.raw);
        report.functions[idx] = std::move(fo);
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < units.size(); ++i) eval_unit(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= units.size()) break;
                    eval_unit(i);
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    // deterministic aggregation in unit order
    BleuAccumulator bleu_acc;
    int matches = 0;
    std::map<int, int> beam_hits, top1_hits;
    for (const auto& fo : report.functions) {
        matches += fo.greedy_reference_match ? 1 : 0;
        report.greedy_categories[category_name(fo.greedy_category)] += 1;
        if (!fo.reference_tokens.empty()) bleu_acc.add(fo.greedy_tokens, fo.reference_tokens);
        for (const auto& [w, ok] : fo.beam_success) beam_hits[w] += ok ? 1 : 0;
        for (const auto& [w, ok] : fo.top1_success) top1_hits[w] += ok ? 1 : 0;
    }
    double n = static_cast<double>(report.n);
    report.reference_match_pct = 100.0 * matches / n;
    report.bleu_score = bleu_acc.score();
    for (int w : widths) {
        report.beam_acc[w] = 100.0 * beam_hits[w] / n;
        report.top1_acc[w] = 100.0 * top1_hits[w] / n;
    }
    return report;
}

// ----------------------------- report serialization -----------------------------

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["config_hash"] = report.config_hash;
    j["widths"] = report.widths;
    j["directions"] = nlohmann::json::array();
    for (const auto& d : report.directions) {
        nlohmann::json dj;
        dj["src"] = d.src;
        dj["tgt"] = d.tgt;
        dj["n"] = d.n;
        dj["reference_match"] = d.reference_match_pct;
        dj["bleu"] = d.bleu_score;
        dj["beam"] = nlohmann::json::object();
        dj["beam_top1"] = nlohmann::json::object();
        for (const auto& [w, v] : d.beam_acc) dj["beam"][std::to_string(w)] = v;
        for (const auto& [w, v] : d.top1_acc) dj["beam_top1"][std::to_string(w)] = v;
        dj["greedy_categories"] = d.greedy_categories;
        dj["functions"] = nlohmann::json::array();
        for (const auto& f : d.functions) {
            nlohmann::json fj;
            fj["id"] = f.id;
            fj["greedy_category"] = category_name(f.greedy_category);
            fj["reference_match"] = f.greedy_reference_match;
            for (const auto& [w, ok] : f.beam_success) fj["beam"][std::to_string(w)] = ok;
            for (const auto& [w, ok] : f.top1_success) fj["beam_top1"][std::to_string(w)] = ok;
            dj["functions"].push_back(fj);
        }
        j["directions"].push_back(dj);
    }
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    report.config_hash = j.value("config_hash", std::string());
    for (const auto& w : j.at("widths")) report.widths.push_back(w.get<int>());
    for (const auto& dj : j.at("directions")) {
        DirectionReport d;
        d.src = dj.at("src").get<std::string>();
        d.tgt = dj.at("tgt").get<std::string>();
        d.n = dj.at("n").get<int>();
        d.reference_match_pct = dj.at("reference_match").get<double>();
        d.bleu_score = dj.at("bleu").get<double>();
        for (const auto& [k, v] : dj.at("beam").items()) d.beam_acc[std::stoi(k)] = v.get<double>();
        for (const auto& [k, v] : dj.at("beam_top1").items()) d.top1_acc[std::stoi(k)] = v.get<double>();
        for (const auto& [k, v] : dj.at("greedy_categories").items()) {
            d.greedy_categories[k] = v.get<int>();
        }
        report.directions.push_back(std::move(d));
    }
    return report;
}

namespace detail {

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// Plain-text tables: per-direction greedy metrics, the beam sweep, and the
// greedy failure breakdown.
inline std::string report_to_text(const EvalReport& report) {
    std::string out;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    out += "Greedy decoding metrics\n";
    out += pad("direction", 18) + pad("n", 6) + pad("RefMatch%", 11) + pad("BLEU", 8) +
           pad("CompAcc%", 9) + "\n";
    for (const auto& d : report.directions) {
        double greedy = d.beam_acc.count(1) ? d.beam_acc.at(1) : 0.0;
        out += pad(d.src + ">" + d.tgt, 18) + pad(std::to_string(d.n), 6) +
               pad(detail::fixed2(d.reference_match_pct), 11) + pad(detail::fixed2(d.bleu_score), 8) +
               pad(detail::fixed2(greedy), 9) + "\n";
    }
    out += "\nComputational accuracy, beam sweep\n";
    out += pad("row", 18);
    for (const auto& d : report.directions) out += pad(d.src + ">" + d.tgt, 16);
    out += "\n";
    for (int w : report.widths) {
        out += pad("Beam " + std::to_string(w), 18);
        for (const auto& d : report.directions) {
            out += pad(detail::fixed2(d.beam_acc.count(w) ? d.beam_acc.at(w) : 0.0), 16);
        }
        out += "\n";
    }
    for (int w : report.widths) {
        if (w == 1) continue;
        out += pad("Beam " + std::to_string(w) + " - Top 1", 18);
        for (const auto& d : report.directions) {
            out += pad(detail::fixed2(d.top1_acc.count(w) ? d.top1_acc.at(w) : 0.0), 16);
        }
        out += "\n";
    }
    out += "\nGreedy failure breakdown (% of tests)\n";
    out += pad("direction", 18);
    static const char* cats[] = {"Success", "CompileError", "RuntimeError", "WrongOutput", "Timeout"};
    for (const char* c : cats) out += pad(c, 14);
    out += "\n";
    for (const auto& d : report.directions) {
        out += pad(d.src + ">" + d.tgt, 18);
        for (const char* c : cats) {
            auto it = d.greedy_categories.find(c);
            double pct = it == d.greedy_categories.end() ? 0.0 : 100.0 * it->second / d.n;
            out += pad(detail::fixed2(pct), 14);
        }
        out += "\n";
    }
    return out;
}

}  // namespace codemt

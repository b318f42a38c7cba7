#include "hoplab/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "hoplab/errors.hpp"
#include "hoplab/prompts.hpp"
#include "hoplab/text.hpp"

namespace hoplab {

using nlohmann::json;

AuditorMode parse_auditor_mode(const std::string& s) {
    if (s == "deterministic") return AuditorMode::deterministic;
    if (s == "judge") return AuditorMode::judge;
    if (s == "both") return AuditorMode::both;
    throw ConfigError("unknown auditor mode: " + s);
}

std::string to_string(AuditorMode m) {
    switch (m) {
        case AuditorMode::deterministic: return "deterministic";
        case AuditorMode::judge: return "judge";
        case AuditorMode::both: return "both";
    }
    return "deterministic";
}

std::string to_string(Calibration c) {
    switch (c) {
        case Calibration::overconfident: return "overconfident";
        case Calibration::underconfident: return "underconfident";
        case Calibration::well_calibrated: return "well_calibrated";
    }
    return "well_calibrated";
}

// ---------------------------------------------------------------------------
// Anchor extraction
// ---------------------------------------------------------------------------

namespace {

// Words that never count as anchors on their own, however they are cased.
const std::unordered_set<std::string>& generic_words() {
    static const std::unordered_set<std::string> kWords = {
        // chemistry-generic
        "catalyst", "catalysts", "compound", "compounds", "chemical", "chemicals", "reaction",
        "reactions", "solvent", "solvents", "acid", "acids", "base", "bases", "metal",
        "metals", "material", "materials", "sample", "samples", "reagent", "reagents", "solution",
        "solutions", "molecule", "molecules", "structure", "structures", "entity", "entities",
        "complex", "complexes", "polymer", "polymers", "property", "properties", "process",
        "processes", "synthesis", "analysis", "method", "methods", "ligand", "ligands", "ion",
        "ions", "salt", "salts", "element", "elements", "species", "mixture", "mixtures",
        "derivative", "derivatives", "precursor", "precursors", "substance", "substances",
        // discourse words that often start capitalized mid-prompt
        "the", "this", "that", "these", "those", "based", "more", "from", "with", "after",
        "under", "given", "however", "thus", "first", "second", "third", "next", "final",
        "partial", "answer", "answers", "evidence", "question", "questions", "step", "steps",
        "further", "overall", "also", "since", "while", "although", "common", "overview",
        "information", "details", "general", "learn", "about", "what", "which", "where", "when",
        "field", "study", "studies", "research", "type", "types", "class", "classes", "family",
        "families",
    };
    return kWords;
}

bool is_token_char(unsigned char c) {
    return std::isalnum(c) || c == '(' || c == ')' || c == '[' || c == ']' || c == '=' ||
           c == '+' || c == '-' || c == '*' || c == '\'' || c == 0xC2 || c == 0xB7 || c >= 0x80;
}

struct RawToken {
    std::string token;
    bool sentence_initial = false;
};

std::vector<RawToken> tokenize_for_anchors(std::string_view body) {
    std::vector<RawToken> tokens;
    for (const auto& sentence : text::split_sentences(body)) {
        bool first = true;
        std::size_t i = 0;
        while (i < sentence.size()) {
            while (i < sentence.size() && !is_token_char(static_cast<unsigned char>(sentence[i]))) {
                ++i;
            }
            std::size_t start = i;
            while (i < sentence.size() && is_token_char(static_cast<unsigned char>(sentence[i]))) {
                ++i;
            }
            if (i > start) {
                std::string tok = sentence.substr(start, i - start);
                // Trim punctuation that is only meaningful inside a formula.
                while (!tok.empty() && (tok.back() == '-' || tok.back() == '\'' ||
                                        tok.back() == '*' || tok.back() == '+')) {
                    if (tok.back() == '+' && tok.size() > 1 &&
                        std::isalnum(static_cast<unsigned char>(tok[tok.size() - 2]))) {
                        break; // keep ionic charge markers like "Li+"
                    }
                    tok.pop_back();
                }
                while (!tok.empty() && (tok.front() == '-' || tok.front() == '\'')) {
                    tok.erase(tok.begin());
                }
                if (!tok.empty()) {
                    tokens.push_back(RawToken{std::move(tok), first});
                    first = false;
                }
            }
        }
    }
    return tokens;
}

bool has_digit(const std::string& s) {
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool has_letter(const std::string& s) {
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalpha(c) != 0; });
}

bool is_formula_token(const std::string& s) {
    if (!has_letter(s)) return false;
    if (has_digit(s)) return true;
    return s.find_first_of("()[]=+") != std::string::npos;
}

bool is_mixed_case(const std::string& s) {
    bool upper_after_first = false;
    bool lower = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::islower(c)) lower = true;
        if (i > 0 && std::isupper(c)) upper_after_first = true;
    }
    return upper_after_first && lower;
}

bool is_acronym(const std::string& s) {
    if (s.size() < 2 || s.size() > 10) return false;
    bool any_alpha = false;
    for (unsigned char c : s) {
        if (std::isalpha(c)) {
            if (!std::isupper(c)) return false;
            any_alpha = true;
        } else if (!std::isdigit(c)) {
            return false;
        }
    }
    return any_alpha;
}

bool is_capitalized_word(const std::string& s) {
    if (s.size() < 4) return false;
    if (!std::isupper(static_cast<unsigned char>(s[0]))) return false;
    return std::all_of(s.begin() + 1, s.end(),
                       [](unsigned char c) { return std::islower(c) != 0; });
}

} // namespace

std::vector<std::string> extract_anchors(std::string_view input) {
    const std::string body = text::strip_citations(input);
    std::vector<std::string> anchors;
    std::set<std::string> seen;
    for (const auto& raw : tokenize_for_anchors(body)) {
        const std::string& tok = raw.token;
        if (tok.size() < 2) continue;
        if (generic_words().count(text::casefold(tok)) > 0) continue;
        const bool anchor = is_formula_token(tok) || is_mixed_case(tok) || is_acronym(tok) ||
                            (is_capitalized_word(tok) && !raw.sentence_initial);
        if (anchor && seen.insert(text::casefold(tok)).second) {
            anchors.push_back(tok);
        }
    }
    return anchors;
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

std::vector<std::string> hop_surface_forms(const Question& q, int hop_index) {
    std::vector<std::string> forms;
    for (const auto& hop : q.hops) {
        if (hop.index != hop_index) continue;
        forms.push_back(hop.entity);
        forms.insert(forms.end(), hop.aliases.begin(), hop.aliases.end());
    }
    if (hop_index == q.num_hops) {
        forms.push_back(q.gold_answer);
        forms.insert(forms.end(), q.aliases.begin(), q.aliases.end());
    }
    return forms;
}

namespace {

bool step_mentions_any(const StepRecord& step, const std::vector<std::string>& forms,
                       bool include_query) {
    for (const auto& form : forms) {
        if (include_query && text::contains_surface(step.query, form)) return true;
        for (const auto& sc : step.retrieved) {
            if (text::contains_surface(sc.chunk.text, form)) return true;
        }
    }
    return false;
}

} // namespace

CoverageAudit audit_coverage(const RunRecord& run, const Question& q) {
    if (q.hops.empty()) throw ValidationError(q.question_id + ": coverage audit requires hops");
    CoverageAudit audit;
    int covered = 0;
    for (const auto& hop : q.hops) {
        const auto forms = hop_surface_forms(q, hop.index);
        HopHit hit;
        hit.hop_index = hop.index;
        for (const auto& step : run.steps) {
            if (step_mentions_any(step, forms, /*include_query=*/true)) {
                hit.first_hit_step = step.step;
                break;
            }
        }
        if (hit.first_hit_step.has_value()) {
            ++covered;
            hit.late_hit = *hit.first_hit_step > hop.index;
            if (hit.late_hit) audit.late_hits.push_back(hop.index);
        } else {
            audit.missed_hops.push_back(hop.index);
        }
        audit.hops.push_back(hit);
    }
    audit.hop_coverage =
        q.num_hops == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(q.num_hops);
    return audit;
}

std::vector<bool> audit_anchor_carry(const RunRecord& run) {
    std::vector<bool> drops(run.steps.size(), false);
    for (std::size_t i = 1; i < run.steps.size(); ++i) {
        const auto anchors = extract_anchors(run.steps[i - 1].partial_answer);
        if (anchors.empty()) continue; // nothing salient to carry: not judged
        const std::string& query = run.steps[i].query;
        const bool carried = std::any_of(anchors.begin(), anchors.end(), [&](const auto& a) {
            return text::contains_surface(query, a);
        });
        drops[i] = !carried;
    }
    return drops;
}

// ---------------------------------------------------------------------------
// Query flags
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& vague_templates() {
    static const std::vector<std::string> kTemplates = {
        "learn more",      "more about",      "more information", "overview",
        "tell me about",   "anything about",  "background on",    "general information",
        "find out about",  "details about",
    };
    return kTemplates;
}

bool matches_vague_template(const std::string& query) {
    const std::string folded = text::casefold(query);
    return std::any_of(vague_templates().begin(), vague_templates().end(),
                       [&](const std::string& t) { return folded.find(t) != std::string::npos; });
}

std::vector<int> hops_mentioned(const Question& q, const std::string& s) {
    std::vector<int> out;
    for (const auto& hop : q.hops) {
        for (const auto& form : hop_surface_forms(q, hop.index)) {
            if (text::contains_surface(s, form)) {
                out.push_back(hop.index);
                break;
            }
        }
    }
    return out;
}

bool anchor_matches_any_form(const std::string& anchor, const std::vector<std::string>& forms) {
    return std::any_of(forms.begin(), forms.end(), [&](const std::string& form) {
        return text::contains_surface(form, anchor) || text::contains_surface(anchor, form);
    });
}

std::vector<std::string> all_oracle_forms(const Question& q) {
    std::vector<std::string> forms;
    for (const auto& hop : q.hops) {
        const auto f = hop_surface_forms(q, hop.index);
        forms.insert(forms.end(), f.begin(), f.end());
    }
    return forms;
}

long long word_count(const std::string& s) {
    return static_cast<long long>(text::split_words(s).size());
}

// Negation cues scanned in the few words before an anchor mention.
bool negated_nearby(const std::string& folded_text, const std::string& anchor) {
    static const std::vector<std::string> kNegators = {"not", "no", "instead of", "rather than",
                                                       "without"};
    const std::string folded_anchor = text::casefold(anchor);
    std::size_t pos = folded_text.find(folded_anchor);
    while (pos != std::string::npos) {
        const std::size_t window_start = pos > 40 ? pos - 40 : 0;
        const std::string window = folded_text.substr(window_start, pos - window_start);
        for (const auto& neg : kNegators) {
            if (window.find(neg + " ") != std::string::npos ||
                window.find(" " + neg) != std::string::npos) {
                return true;
            }
        }
        pos = folded_text.find(folded_anchor, pos + 1);
    }
    return false;
}

bool detect_distractor_latch(const RunRecord& run, const Question& q) {
    if (run.steps.size() < 2) return false;

    // Distinct-step presence per anchor across retrieved snippets.
    std::map<std::string, std::set<int>> anchor_steps; // casefolded anchor -> steps
    std::map<std::string, std::string> display;
    for (const auto& step : run.steps) {
        std::set<std::string> seen_this_step;
        for (const auto& sc : step.retrieved) {
            for (const auto& a : extract_anchors(sc.chunk.text)) {
                const std::string key = text::casefold(a);
                if (seen_this_step.insert(key).second) {
                    anchor_steps[key].insert(step.step);
                    display.emplace(key, a);
                }
            }
        }
    }
    if (anchor_steps.empty()) return false;

    const auto oracle = all_oracle_forms(q);
    std::size_t best_on_target = 0;
    std::string dominant;
    std::size_t dominant_count = 0;
    for (const auto& [key, steps] : anchor_steps) {
        const bool on_target = anchor_matches_any_form(display[key], oracle);
        if (on_target) {
            best_on_target = std::max(best_on_target, steps.size());
        } else if (steps.size() > dominant_count ||
                   (steps.size() == dominant_count && key < dominant)) {
            dominant = key;
            dominant_count = steps.size();
        }
    }
    // Conservative: the off-target family must recur and strictly dominate
    // every oracle entity's presence.
    return dominant_count >= 2 && dominant_count > best_on_target;
}

} // namespace

QueryAudit audit_queries(const RunRecord& run, const Question& q) {
    QueryAudit audit;
    const auto carry = audit_anchor_carry(run);

    // Accumulated history text for hallucination checks, and resolved hops.
    std::string history = q.text;
    std::set<int> resolved;

    for (std::size_t i = 0; i < run.steps.size(); ++i) {
        const StepRecord& step = run.steps[i];
        StepFlags flags;
        flags.step = step.step;
        flags.carry_drop = carry[i];

        const auto query_anchors = extract_anchors(step.query);
        const auto matched = hops_mentioned(q, step.query);

        if (matches_vague_template(step.query) || (query_anchors.empty() && matched.empty())) {
            flags.vague = true;
        } else if (matched.size() >= 2) {
            flags.fusion = true;
        } else if (matched.empty()) {
            flags.off_topic = true;
        } else {
            long long off_facets = 0;
            const auto oracle = all_oracle_forms(q);
            for (const auto& a : query_anchors) {
                if (!anchor_matches_any_form(a, oracle)) ++off_facets;
            }
            flags.over_broad = word_count(step.query) >= 20 || off_facets >= 3;
        }

        const std::string folded_query = text::casefold(step.query);
        flags.compound =
            query_anchors.size() >= 2 &&
            (folded_query.find(" and ") != std::string::npos ||
             folded_query.find(" or ") != std::string::npos ||
             folded_query.find("; ") != std::string::npos);

        if (i > 0) {
            const auto prev_anchors = extract_anchors(run.steps[i - 1].partial_answer);
            flags.anchored = std::any_of(prev_anchors.begin(), prev_anchors.end(),
                                         [&](const std::string& a) {
                                             return text::contains_surface(step.query, a);
                                         });
            for (const auto& a : query_anchors) {
                if (!text::contains_surface(history, a)) {
                    flags.hallucinated_term = true;
                    break;
                }
            }
            // Contradiction: the previous partial asserts an anchor that this
            // step's partial explicitly negates.
            const std::string prev = text::casefold(
                text::strip_citations(run.steps[i - 1].partial_answer));
            const std::string curr =
                text::casefold(text::strip_citations(step.partial_answer));
            for (const auto& a : prev_anchors) {
                if (!text::contains_surface(step.partial_answer, a)) continue;
                if (negated_nearby(curr, a) && !negated_nearby(prev, a)) {
                    flags.contradiction_with_prev = true;
                    break;
                }
            }
        }

        if (!matched.empty()) {
            std::optional<int> predicted;
            for (int h : matched) {
                if (resolved.count(h) == 0) {
                    predicted = h;
                    break;
                }
            }
            if (!predicted.has_value()) predicted = matched.back();
            flags.predicted_hop = predicted;
            flags.is_next_logical_hop =
                *predicted == static_cast<int>(resolved.size()) + 1;
        }

        audit.steps.push_back(flags);

        // Fold this step into the history and resolved set for step t+1.
        history += "\n" + step.query + "\n" + step.partial_answer;
        for (const auto& sc : step.retrieved) history += "\n" + sc.chunk.text;
        for (const auto& hop : q.hops) {
            if (resolved.count(hop.index) > 0) continue;
            if (step_mentions_any(step, hop_surface_forms(q, hop.index), true)) {
                resolved.insert(hop.index);
            }
        }
    }

    audit.distractor_latch = detect_distractor_latch(run, q);
    return audit;
}

// ---------------------------------------------------------------------------
// Final audit
// ---------------------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& support_stopwords() {
    static const std::unordered_set<std::string> kWords = {
        "this", "that", "with", "from", "have", "been", "does", "which", "their", "there",
        "these", "those", "into", "such", "also", "than", "then", "when", "where", "while",
        "evidence", "passage", "passages", "snippet", "snippets", "step", "steps", "confirmed",
        "retrieved", "further", "needed", "missing", "still", "shows", "appears", "suggests",
        "according",
    };
    return kWords;
}

std::vector<std::string> support_terms(const std::string& sentence) {
    std::vector<std::string> terms;
    std::set<std::string> seen;
    for (const auto& a : extract_anchors(sentence)) {
        if (seen.insert(text::casefold(a)).second) terms.push_back(a);
    }
    for (const auto& w : text::split_words(text::casefold(sentence))) {
        std::string clean;
        for (char c : w) {
            if (std::isalnum(static_cast<unsigned char>(c))) clean.push_back(c);
        }
        if (clean.size() < 4 || support_stopwords().count(clean) > 0) continue;
        if (seen.insert(clean).second) terms.push_back(clean);
    }
    return terms;
}

std::vector<std::string> answer_surface_forms(const Question& q) {
    std::vector<std::string> forms{q.gold_answer};
    forms.insert(forms.end(), q.aliases.begin(), q.aliases.end());
    for (const auto& hop : q.hops) {
        if (hop.index == q.num_hops) {
            forms.push_back(hop.entity);
            forms.insert(forms.end(), hop.aliases.begin(), hop.aliases.end());
        }
    }
    return forms;
}

} // namespace

double sufficiency_score(const RunRecord& run) {
    std::vector<std::string> snippets;
    for (const auto& step : run.steps) {
        for (const auto& sc : step.retrieved) snippets.push_back(sc.chunk.text);
    }

    long long total = 0;
    long long supported = 0;
    for (const auto& step : run.steps) {
        const std::string body = text::strip_citations(step.partial_answer);
        for (const auto& sentence : text::split_sentences(body)) {
            const auto terms = support_terms(sentence);
            ++total;
            if (terms.empty()) continue; // conservative: unsupported
            for (const auto& snippet : snippets) {
                long long hit = 0;
                for (const auto& term : terms) {
                    if (text::contains_surface(snippet, term)) ++hit;
                }
                if (static_cast<double>(hit) >= 0.7 * static_cast<double>(terms.size())) {
                    ++supported;
                    break;
                }
            }
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(supported) / static_cast<double>(total);
}

std::optional<int> earliest_sufficient_step(const RunRecord& run, const Question& q) {
    const auto forms = answer_surface_forms(q);
    for (const auto& step : run.steps) {
        for (const auto& sc : step.retrieved) {
            for (const auto& form : forms) {
                if (text::contains_surface(sc.chunk.text, form)) return step.step;
            }
        }
    }
    return std::nullopt;
}

Calibration classify_calibration(int finalized_step, int num_hops, double hop_coverage,
                                 double sufficiency, std::optional<int> earliest_sufficient,
                                 const DiagnosticThresholds& thresholds) {
    const bool over = finalized_step < num_hops &&
                      (hop_coverage < thresholds.coverage || sufficiency < thresholds.sufficiency);
    const bool under =
        earliest_sufficient.has_value() && *earliest_sufficient < finalized_step;
    if (over) return Calibration::overconfident; // precedence when both trigger
    if (under) return Calibration::underconfident;
    return Calibration::well_calibrated;
}

FinalAudit audit_final(const RunRecord& run, const Question& q, bool verdict,
                       const CoverageAudit& coverage, const QueryAudit& queries,
                       const DiagnosticThresholds& thresholds) {
    FinalAudit audit;
    audit.sufficiency = sufficiency_score(run);
    audit.earliest_sufficient_step = earliest_sufficient_step(run, q);
    audit.calibration = classify_calibration(run.finalized_step, q.num_hops,
                                             coverage.hop_coverage, audit.sufficiency,
                                             audit.earliest_sufficient_step, thresholds);
    audit.distractor_latch = queries.distractor_latch;

    if (verdict) return audit; // composition failure only applies to wrong answers

    const auto gold_forms = answer_surface_forms(q);
    bool gold_in_evidence = false;
    std::set<std::string> snippet_anchor_keys;
    for (const auto& step : run.steps) {
        for (const auto& sc : step.retrieved) {
            if (!gold_in_evidence) {
                for (const auto& form : gold_forms) {
                    if (text::contains_surface(sc.chunk.text, form)) {
                        gold_in_evidence = true;
                        break;
                    }
                }
            }
            for (const auto& a : extract_anchors(sc.chunk.text)) {
                snippet_anchor_keys.insert(text::casefold(a));
            }
        }
    }
    if (!gold_in_evidence) return audit; // coverage failure, not composition

    const std::string& answer = run.final_answer;
    const auto answer_anchors = extract_anchors(answer);
    const bool names_gold = std::any_of(gold_forms.begin(), gold_forms.end(),
                                        [&](const std::string& form) {
                                            return text::contains_surface(answer, form);
                                        });

    bool names_competing_retrieved = false;
    for (const auto& a : answer_anchors) {
        if (snippet_anchor_keys.count(text::casefold(a)) == 0) continue;
        if (anchor_matches_any_form(a, gold_forms)) continue;
        names_competing_retrieved = true;
        break;
    }

    const bool wrong_entity = names_competing_retrieved && !names_gold;   // precision drift
    const bool merged = names_competing_retrieved && names_gold;          // muddled entities
    const bool vague_paraphrase = answer_anchors.empty() && !names_gold;  // names nothing
    audit.composition_failure = wrong_entity || merged || vague_paraphrase;
    return audit;
}

// ---------------------------------------------------------------------------
// Judge mode
// ---------------------------------------------------------------------------

std::string render_run_payload(const RunRecord& run, const Question& q) {
    std::ostringstream os;
    os << "Question: " << q.text << "\n";
    os << "expected_answer: " << q.gold_answer << "\n";
    os << "num_hops: " << q.num_hops << "\n";
    os << "Oracle hop path:\n";
    for (const auto& hop : q.hops) {
        os << "  Hop " << hop.index << ": entity=" << hop.entity;
        if (!hop.sub_question.empty()) os << " | sub_question=" << hop.sub_question;
        os << "\n";
    }
    os << "finalize_step: " << run.finalized_step << "\n";
    os << "max_steps: 5\n";
    os << "final candidate: " << run.final_answer << "\n";
    for (const auto& step : run.steps) {
        os << "\nStep " << step.step << " query: " << step.query << "\n";
        os << "Step " << step.step << " partial answer: " << step.partial_answer << "\n";
        os << "Step " << step.step << " snippets:\n";
        for (const auto& sc : step.retrieved) {
            os << "  [chunk:" << sc.chunk.chunk_id << "] " << sc.chunk.text << "\n";
        }
    }
    return os.str();
}

namespace {

std::string strip_code_fence(const std::string& s) {
    std::string t = s;
    const auto first = t.find("```");
    if (first != std::string::npos) {
        const auto open_end = t.find('\n', first);
        const auto close = t.rfind("```");
        if (open_end != std::string::npos && close > open_end) {
            t = t.substr(open_end + 1, close - open_end - 1);
        }
    }
    return t;
}

std::optional<json> ask_for_json(Gateway& judge, const ModelConfig& judge_cfg,
                                 const std::string& system, const std::string& payload,
                                 const CallTag& tag) {
    std::vector<Message> messages{{"system", system}, {"user", payload}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        Completion reply = judge.complete(judge_cfg, messages, tag);
        try {
            return json::parse(strip_code_fence(reply.text));
        } catch (const json::parse_error&) {
            messages.push_back({"assistant", reply.text});
            messages.push_back({"user", "Return exactly the JSON schema requested, nothing else."});
        }
    }
    return std::nullopt;
}

} // namespace

CoverageAudit audit_coverage_judge(const RunRecord& run, const Question& q, Gateway& judge,
                                   const ModelConfig& judge_cfg) {
    const CallTag tag{run.question_id, 0, "audit:coverage"};
    auto parsed = ask_for_json(judge, judge_cfg, prompts::kCoverageAuditorSystem,
                               render_run_payload(run, q), tag);
    if (!parsed.has_value()) {
        CoverageAudit fallback = audit_coverage(run, q);
        fallback.judge_fallback = true;
        return fallback;
    }
    try {
        const json& j = *parsed;
        CoverageAudit audit;
        audit.missed_hops = j.at("missed_hops").get<std::vector<int>>();
        int covered = 0;
        for (const auto& hj : j.at("per_hop")) {
            HopHit hit;
            hit.hop_index = hj.at("hop").get<int>();
            if (hj.contains("first_hit_step") && !hj["first_hit_step"].is_null()) {
                hit.first_hit_step = hj["first_hit_step"].get<int>();
            }
            hit.late_hit = hj.value("late_hit", false);
            if (hit.late_hit) audit.late_hits.push_back(hit.hop_index);
            if (hit.first_hit_step.has_value()) ++covered;
            audit.hops.push_back(hit);
        }
        audit.hop_coverage = q.num_hops == 0
                                 ? 0.0
                                 : static_cast<double>(covered) / static_cast<double>(q.num_hops);
        return audit;
    } catch (const json::exception&) {
        CoverageAudit fallback = audit_coverage(run, q);
        fallback.judge_fallback = true;
        return fallback;
    }
}

QueryAudit audit_queries_judge(const RunRecord& run, const Question& q, Gateway& judge,
                               const ModelConfig& judge_cfg) {
    const CallTag tag{run.question_id, 0, "audit:query"};
    auto parsed = ask_for_json(judge, judge_cfg, prompts::kQueryAuditorSystem,
                               render_run_payload(run, q), tag);
    if (!parsed.has_value()) {
        QueryAudit fallback = audit_queries(run, q);
        fallback.judge_fallback = true;
        return fallback;
    }
    try {
        const json& j = *parsed;
        QueryAudit audit;
        const auto carry = audit_anchor_carry(run); // carry-drop stays deterministic here
        std::size_t i = 0;
        for (const auto& sj : j.at("steps")) {
            StepFlags flags;
            flags.step = sj.at("step").get<int>();
            flags.vague = sj.value("vague", false);
            flags.over_broad = sj.value("over_broad", false);
            flags.fusion = sj.value("fusion", false);
            flags.off_topic = sj.value("off_topic", false);
            flags.compound = sj.value("compound", false);
            flags.anchored = flags.step > 1 && sj.value("anchored", false);
            flags.hallucinated_term = flags.step > 1 && sj.value("hallucinated_term", false);
            flags.contradiction_with_prev =
                flags.step > 1 && sj.value("contradiction_with_prev", false);
            if (sj.contains("predicted_hop") && !sj["predicted_hop"].is_null()) {
                flags.predicted_hop = sj["predicted_hop"].get<int>();
            }
            flags.is_next_logical_hop = sj.value("is_next_logical_hop", false);
            flags.carry_drop = i < carry.size() && carry[i];
            audit.steps.push_back(flags);
            ++i;
        }
        audit.distractor_latch = j.value("distractor_latch", false);
        return audit;
    } catch (const json::exception&) {
        QueryAudit fallback = audit_queries(run, q);
        fallback.judge_fallback = true;
        return fallback;
    }
}

FinalAudit audit_final_judge(const RunRecord& run, const Question& q, bool verdict,
                             const QueryAudit& queries, Gateway& judge,
                             const ModelConfig& judge_cfg,
                             const DiagnosticThresholds& thresholds) {
    char cov[16], suf[16];
    std::snprintf(cov, sizeof(cov), "%.2f", thresholds.coverage);
    std::snprintf(suf, sizeof(suf), "%.2f", thresholds.sufficiency);
    const std::string system = prompts::instantiate(
        prompts::kFinalAuditorSystem,
        {{"COVERAGE_THRESHOLD", cov}, {"SUFFICIENCY_THRESHOLD", suf}});

    const CallTag tag{run.question_id, 0, "audit:final"};
    auto parsed = ask_for_json(judge, judge_cfg, system, render_run_payload(run, q), tag);
    if (!parsed.has_value()) {
        const CoverageAudit coverage = audit_coverage(run, q);
        FinalAudit fallback = audit_final(run, q, verdict, coverage, queries, thresholds);
        fallback.judge_fallback = true;
        return fallback;
    }
    try {
        const json& j = *parsed;
        FinalAudit audit;
        audit.composition_failure = !verdict && j.value("composition_failure", false);
        audit.sufficiency = j.value("sufficiency_score_est", 0.0);
        const std::string cal = j.value("calibration", std::string("well_calibrated"));
        audit.calibration = cal == "overconfident"     ? Calibration::overconfident
                            : cal == "underconfident"  ? Calibration::underconfident
                                                       : Calibration::well_calibrated;
        if (j.contains("earliest_sufficient_step") && !j["earliest_sufficient_step"].is_null()) {
            audit.earliest_sufficient_step = j["earliest_sufficient_step"].get<int>();
        }
        audit.distractor_latch = queries.distractor_latch;
        return audit;
    } catch (const json::exception&) {
        const CoverageAudit coverage = audit_coverage(run, q);
        FinalAudit fallback = audit_final(run, q, verdict, coverage, queries, thresholds);
        fallback.judge_fallback = true;
        return fallback;
    }
}

DiagnosticReport audit_run(const RunRecord& run, const Question& q, bool verdict,
                           AuditorMode mode, Gateway* judge, const ModelConfig* judge_cfg,
                           const DiagnosticThresholds& thresholds) {
    if (mode == AuditorMode::both) {
        throw ConfigError("audit_run handles one mode at a time; call twice for both");
    }
    DiagnosticReport report;
    report.question_id = run.question_id;
    report.model_id = run.model_id;
    report.verdict = verdict;
    if (mode == AuditorMode::deterministic) {
        report.mode = "deterministic";
        report.coverage = audit_coverage(run, q);
        report.queries = audit_queries(run, q);
        report.final = audit_final(run, q, verdict, report.coverage, report.queries, thresholds);
    } else {
        if (judge == nullptr || judge_cfg == nullptr) {
            throw ConfigError("judge mode requires a judge gateway and config");
        }
        report.mode = "judge";
        report.coverage = audit_coverage_judge(run, q, *judge, *judge_cfg);
        report.queries = audit_queries_judge(run, q, *judge, *judge_cfg);
        report.final = audit_final_judge(run, q, verdict, report.queries, *judge, *judge_cfg,
                                         thresholds);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Agreement harness
// ---------------------------------------------------------------------------

double AgreementMatrix::overall() const {
    long long agree = 0;
    long long total = 0;
    for (const auto& [_, f] : fields) {
        agree += f.agree;
        total += f.total;
    }
    return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

namespace {

std::string band_of(double value, double lo, double hi) {
    if (value < lo) return "low";
    if (value < hi) return "mid";
    return "high";
}

} // namespace

AgreementMatrix compare_reports(const std::vector<DiagnosticReport>& deterministic,
                                const std::vector<DiagnosticReport>& judge) {
    std::map<std::pair<std::string, std::string>, const DiagnosticReport*> by_key;
    for (const auto& r : judge) by_key[{r.question_id, r.model_id}] = &r;

    AgreementMatrix m;
    auto record = [&](const DiagnosticReport& det, const std::string& field,
                      const std::string& a, const std::string& b) {
        auto& f = m.fields[field];
        ++f.total;
        if (a == b) {
            ++f.agree;
        } else {
            m.disagreements.push_back(Disagreement{det.question_id, det.model_id, field, a, b});
        }
    };

    for (const auto& det : deterministic) {
        auto it = by_key.find({det.question_id, det.model_id});
        if (it == by_key.end()) continue;
        const DiagnosticReport& jud = *it->second;

        auto join = [](const std::vector<int>& v) {
            std::string s;
            for (int x : v) s += std::to_string(x) + ",";
            return s;
        };
        record(det, "missed_hops", join(det.coverage.missed_hops), join(jud.coverage.missed_hops));
        record(det, "late_hits", join(det.coverage.late_hits), join(jud.coverage.late_hits));
        record(det, "calibration", to_string(det.final.calibration),
               to_string(jud.final.calibration));
        record(det, "composition_failure", std::to_string(det.final.composition_failure),
               std::to_string(jud.final.composition_failure));
        record(det, "distractor_latch", std::to_string(det.queries.distractor_latch),
               std::to_string(jud.queries.distractor_latch));
        record(det, "sufficiency_band", band_of(det.final.sufficiency, 0.4, 0.6),
               band_of(jud.final.sufficiency, 0.4, 0.6));

        const std::size_t n = std::min(det.queries.steps.size(), jud.queries.steps.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = det.queries.steps[i];
            const auto& b = jud.queries.steps[i];
            const std::string suffix = "@step" + std::to_string(a.step);
            record(det, "vague", std::to_string(a.vague), std::to_string(b.vague));
            record(det, "over_broad", std::to_string(a.over_broad), std::to_string(b.over_broad));
            record(det, "fusion", std::to_string(a.fusion), std::to_string(b.fusion));
            record(det, "off_topic", std::to_string(a.off_topic), std::to_string(b.off_topic));
            record(det, "carry_drop", std::to_string(a.carry_drop), std::to_string(b.carry_drop));
            record(det, "anchored", std::to_string(a.anchored), std::to_string(b.anchored));
            (void)suffix;
        }
    }
    return m;
}

} // namespace hoplab

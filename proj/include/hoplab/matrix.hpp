#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hoplab/money.hpp"

namespace hoplab {

enum class Regime { no_context, gold_context, iterative };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

/// One cell of the model x question x regime result matrix.
struct RegimeResult {
    std::string question_id;
    std::string model_id;
    Regime regime = Regime::no_context;
    std::string answer;
    bool correct = false;
    bool unanswered = false;
    bool needs_review = false; // verifier produced no usable verdict
    long long tokens_in = 0;
    long long tokens_out = 0;
    Money cost;
    std::string run_ref; // iterative cells only: RunRecord id
};

class ResultMatrix {
public:
    /// Rejects a duplicate (model, question, regime) cell.
    void add(RegimeResult cell);
    bool has(const std::string& model_id, const std::string& question_id, Regime regime) const;
    const RegimeResult* find(const std::string& model_id, const std::string& question_id,
                             Regime regime) const;

    const std::vector<RegimeResult>& cells() const { return cells_; }
    std::vector<std::string> models() const;
    std::vector<std::string> questions() const;

    /// Throws ValidationError listing every absent (model, question) pair
    /// for the requested regime.
    void require_complete(Regime regime) const;
    bool complete_for(Regime regime) const;

    void save_csv(const std::string& path) const;
    static ResultMatrix load_csv(const std::string& path);

private:
    std::vector<RegimeResult> cells_;
    std::map<std::tuple<std::string, std::string, int>, std::size_t> by_key_;
    std::set<std::string> models_;
    std::set<std::string> questions_;
};

} // namespace hoplab

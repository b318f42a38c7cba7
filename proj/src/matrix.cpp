#include "hoplab/matrix.hpp"

#include <fstream>
#include <sstream>

#include "hoplab/errors.hpp"

namespace hoplab {

std::string to_string(Regime r) {
    switch (r) {
        case Regime::no_context: return "no_context";
        case Regime::gold_context: return "gold_context";
        case Regime::iterative: return "iterative";
    }
    return "unknown";
}

Regime parse_regime(const std::string& s) {
    if (s == "no_context") return Regime::no_context;
    if (s == "gold_context") return Regime::gold_context;
    if (s == "iterative") return Regime::iterative;
    throw ConfigError("unknown regime: " + s);
}

void ResultMatrix::add(RegimeResult cell) {
    auto key = std::make_tuple(cell.model_id, cell.question_id, static_cast<int>(cell.regime));
    if (by_key_.count(key) > 0) {
        throw ValidationError("duplicate matrix cell: " + cell.model_id + "/" + cell.question_id +
                              "/" + to_string(cell.regime));
    }
    models_.insert(cell.model_id);
    questions_.insert(cell.question_id);
    by_key_[key] = cells_.size();
    cells_.push_back(std::move(cell));
}

bool ResultMatrix::has(const std::string& model_id, const std::string& question_id,
                       Regime regime) const {
    return by_key_.count(std::make_tuple(model_id, question_id, static_cast<int>(regime))) > 0;
}

const RegimeResult* ResultMatrix::find(const std::string& model_id,
                                       const std::string& question_id, Regime regime) const {
    auto it = by_key_.find(std::make_tuple(model_id, question_id, static_cast<int>(regime)));
    return it == by_key_.end() ? nullptr : &cells_[it->second];
}

std::vector<std::string> ResultMatrix::models() const {
    return {models_.begin(), models_.end()};
}

std::vector<std::string> ResultMatrix::questions() const {
    return {questions_.begin(), questions_.end()};
}

bool ResultMatrix::complete_for(Regime regime) const {
    for (const auto& m : models_) {
        for (const auto& q : questions_) {
            if (!has(m, q, regime)) return false;
        }
    }
    return !models_.empty() && !questions_.empty();
}

void ResultMatrix::require_complete(Regime regime) const {
    std::vector<std::string> missing;
    for (const auto& m : models_) {
        for (const auto& q : questions_) {
            if (!has(m, q, regime)) missing.push_back(m + "/" + q);
        }
    }
    if (models_.empty() || questions_.empty()) {
        throw ValidationError("matrix is empty for regime " + to_string(regime));
    }
    if (!missing.empty()) {
        std::string msg = "matrix incomplete for regime " + to_string(regime) + "; missing: ";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
            if (i > 0) msg += ", ";
            msg += missing[i];
        }
        if (missing.size() > 20) msg += ", ... (" + std::to_string(missing.size()) + " total)";
        throw ValidationError(msg);
    }
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

} // namespace

void ResultMatrix::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write matrix csv: " + path);
    out << "model_id,question_id,regime,correct,tokens_in,tokens_out,cost\n";
    for (const auto& c : cells_) {
        out << csv_escape(c.model_id) << "," << csv_escape(c.question_id) << ","
            << to_string(c.regime) << "," << (c.correct ? 1 : 0) << "," << c.tokens_in << ","
            << c.tokens_out << "," << c.cost.to_string() << "\n";
    }
}

ResultMatrix ResultMatrix::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrix csv: " + path);
    ResultMatrix m;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue; // header
        auto fields = csv_split(line);
        if (fields.size() != 7) {
            throw ValidationError("expected 7 csv fields, got " + std::to_string(fields.size()),
                                  line_no);
        }
        RegimeResult c;
        c.model_id = fields[0];
        c.question_id = fields[1];
        c.regime = parse_regime(fields[2]);
        c.correct = fields[3] == "1";
        c.tokens_in = std::stoll(fields[4]);
        c.tokens_out = std::stoll(fields[5]);
        c.cost = Money::parse(fields[6]);
        m.add(std::move(c));
    }
    return m;
}

} // namespace hoplab

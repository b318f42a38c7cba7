#include "hoplab/dataset.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "hoplab/errors.hpp"

namespace hoplab {

using nlohmann::json;

void validate_question(const Question& q) {
    if (q.question_id.empty()) throw ValidationError("question_id must be non-empty");
    if (q.text.empty()) throw ValidationError(q.question_id + ": text must be non-empty");
    if (q.gold_answer.empty()) {
        throw ValidationError(q.question_id + ": gold_answer must be non-empty");
    }
    if (q.num_hops < 1 || q.num_hops > 4) {
        throw ValidationError(q.question_id + ": num_hops must be in [1,4], got " +
                              std::to_string(q.num_hops));
    }
    if (static_cast<int>(q.hops.size()) != q.num_hops) {
        throw ValidationError(q.question_id + ": num_hops=" + std::to_string(q.num_hops) +
                              " but " + std::to_string(q.hops.size()) + " hops present");
    }
    for (std::size_t i = 0; i < q.hops.size(); ++i) {
        const Hop& h = q.hops[i];
        if (h.index != static_cast<int>(i) + 1) {
            throw ValidationError(q.question_id + ": hop indices must be 1-based and contiguous");
        }
        if (h.entity.empty()) {
            throw ValidationError(q.question_id + ": hop " + std::to_string(h.index) +
                                  " has empty entity");
        }
        if (h.gold_paragraph.empty()) {
            throw ValidationError(q.question_id + ": hop " + std::to_string(h.index) +
                                  " has empty gold_paragraph");
        }
    }
}

std::vector<Question> load_dataset_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);

    std::vector<Question> questions;
    std::set<std::string> seen;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        Question q;
        try {
            q.question_id = j.at("question_id").get<std::string>();
            q.text = j.at("text").get<std::string>();
            q.gold_answer = j.at("gold_answer").get<std::string>();
            q.num_hops = j.at("num_hops").get<int>();
            for (const auto& hj : j.at("hops")) {
                Hop h;
                h.index = hj.at("index").get<int>();
                h.sub_question = hj.value("sub_question", std::string());
                h.entity = hj.at("entity").get<std::string>();
                h.gold_paragraph = hj.at("gold_paragraph").get<std::string>();
                h.aliases = hj.value("aliases", std::vector<std::string>{});
                q.hops.push_back(std::move(h));
            }
            q.aliases = j.value("aliases", std::vector<std::string>{});
        } catch (const json::exception& e) {
            throw ValidationError(std::string("question schema violation: ") + e.what(), line_no);
        }
        try {
            validate_question(q);
        } catch (const ValidationError& e) {
            throw ValidationError(e.what(), line_no);
        }
        if (!seen.insert(q.question_id).second) {
            throw ValidationError("duplicate question_id: " + q.question_id, line_no);
        }
        questions.push_back(std::move(q));
    }
    return questions;
}

} // namespace hoplab

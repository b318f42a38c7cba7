#pragma once

#include <string>
#include <vector>

namespace hoplab {

/// One atomic reasoning step of a multi-hop question.
struct Hop {
    int index = 0; // 1-based, contiguous
    std::string sub_question;
    std::string entity; // the hop's bridging entity / intermediate answer
    std::string gold_paragraph;
    std::vector<std::string> aliases; // optional surface forms of the entity
};

struct Question {
    std::string question_id;
    std::string text;
    std::string gold_answer;
    int num_hops = 0;
    std::vector<Hop> hops;
    std::vector<std::string> aliases; // acceptable surface forms of the gold answer
};

/// Throws ValidationError describing the first violated invariant.
void validate_question(const Question& q);

/// Reads the JSONL dataset; schema violations carry line numbers.
std::vector<Question> load_dataset_jsonl(const std::string& path);

} // namespace hoplab

#include "hoplab/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hoplab/errors.hpp"
#include "hoplab/text.hpp"

namespace hoplab {

namespace {

std::string chunk_id_for(const std::string& doc_id, std::size_t ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", ordinal);
    return doc_id + ":" + buf;
}

} // namespace

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg) {
    if (cfg.window <= cfg.overlap) {
        throw ConfigError("chunk window (" + std::to_string(cfg.window) +
                          ") must exceed overlap (" + std::to_string(cfg.overlap) + ")");
    }
    std::vector<Chunk> chunks;
    const auto words = text::split_words(doc.text);
    if (words.empty()) return chunks;

    const std::size_t stride = cfg.window - cfg.overlap;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = std::min(start + cfg.window, words.size());
        std::string body;
        for (std::size_t i = start; i < end; ++i) {
            if (i > start) body.push_back(' ');
            body += words[i];
        }
        chunks.push_back(Chunk{chunk_id_for(doc.doc_id, chunks.size()), doc.doc_id, start, end,
                               std::move(body)});
        if (end >= words.size()) break;
        start += stride;
    }
    return chunks;
}

std::vector<Document> load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);

    std::vector<Document> docs;
    std::set<std::string> seen;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!j.is_object() || !j.contains("doc_id") || !j.contains("source") ||
            !j.contains("text") || !j["doc_id"].is_string() || !j["source"].is_string() ||
            !j["text"].is_string()) {
            throw ValidationError("document requires string fields doc_id, source, text", line_no);
        }
        Document d;
        d.doc_id = j["doc_id"].get<std::string>();
        d.source = j["source"].get<std::string>();
        if (d.doc_id.empty()) throw ValidationError("doc_id must be non-empty", line_no);
        if (!seen.insert(d.doc_id).second) {
            throw ValidationError("duplicate doc_id: " + d.doc_id, line_no);
        }
        try {
            d.text = text::normalize_text(j["text"].get<std::string>());
        } catch (const DecodeError& e) {
            throw ValidationError(e.what(), line_no);
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

} // namespace hoplab

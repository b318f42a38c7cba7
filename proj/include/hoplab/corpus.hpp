#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hoplab {

struct Document {
    std::string doc_id;
    std::string source;
    std::string text; // normalized
};

/// One retrieval window over a document. Word offsets refer to the
/// whitespace-token sequence of the normalized document text.
struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::size_t word_start = 0;
    std::size_t word_end = 0; // exclusive
    std::string text;
};

struct ChunkingConfig {
    std::size_t window = 220;
    std::size_t overlap = 50;
};

/// Tiles doc.text with windows of `window` words advancing by
/// `window - overlap`; the final chunk ends exactly at the last word.
/// Throws ConfigError when window <= overlap. An empty document yields
/// an empty list.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg = {});

/// Reads a JSONL corpus ({"doc_id","source","text"} per line), normalizing
/// each document's text. Schema violations raise ValidationError with the
/// offending line number. Duplicate doc_ids are rejected.
std::vector<Document> load_corpus_jsonl(const std::string& path);

} // namespace hoplab

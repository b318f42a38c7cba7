#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hoplab::text {

/// Canonical text cleanup applied to every document and query before
/// windowing or matching: NFC composition, horizontal whitespace runs
/// collapsed to single spaces, newline-bearing runs collapsed to a single
/// '\n' (paragraph separator), leading/trailing whitespace removed.
/// Throws DecodeError on malformed UTF-8.
std::string normalize_text(std::string_view raw);

/// True iff `s` is well-formed UTF-8.
bool is_valid_utf8(std::string_view s);

/// Whitespace-separated words of already-normalized text.
std::vector<std::string> split_words(std::string_view normalized);

/// Sentence segmentation on terminal punctuation (. ! ?), newline also ends
/// a sentence. Empty segments are dropped.
std::vector<std::string> split_sentences(std::string_view s);

/// Lowercases ASCII and Latin-1 letters; leaves other bytes untouched.
/// Sufficient for the corpus this tool targets (chemical names, English prose).
std::string casefold(std::string_view s);

/// Word-boundary-aware, case-folded substring test used by every
/// deterministic auditor. A match position is accepted when the characters
/// adjacent to it are not alphanumeric, so "HAT" does not match "that".
/// Whitespace runs inside `needle` match any whitespace run in `haystack`.
bool contains_surface(std::string_view haystack, std::string_view needle);

/// Removes bracketed citation markers of the form [chunk:<id>].
std::string strip_citations(std::string_view s);

} // namespace hoplab::text

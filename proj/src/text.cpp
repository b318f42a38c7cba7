#include "hoplab/text.hpp"

#include <unicode/unorm2.h>
#include <unicode/ustring.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdint>

#include "hoplab/errors.hpp"

namespace hoplab::text {

namespace {

bool is_newline_cp(UChar32 c) {
    return c == 0x0A || c == 0x0D || c == 0x85 || c == 0x2028 || c == 0x2029;
}

bool is_space_cp(UChar32 c) {
    switch (c) {
        case 0x09: case 0x0B: case 0x0C: case 0x20: case 0xA0:
        case 0x1680: case 0x202F: case 0x205F: case 0x3000: case 0xFEFF:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int len = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), len, U8_MAX_LENGTH, c, err);
    if (!err) out.append(buf, static_cast<std::size_t>(len));
}

std::string nfc(std::string_view raw) {
    UErrorCode ec = U_ZERO_ERROR;
    const UNormalizer2* norm = unorm2_getNFCInstance(&ec);
    if (U_FAILURE(ec)) throw std::runtime_error("ICU NFC instance unavailable");

    // UTF-8 -> UTF-16 (strict: malformed input is a decode error).
    std::u16string u16(raw.size() + 1, u'\0');
    int32_t u16_len = 0;
    ec = U_ZERO_ERROR;
    u_strFromUTF8(u16.data(), static_cast<int32_t>(u16.size()), &u16_len, raw.data(),
                  static_cast<int32_t>(raw.size()), &ec);
    if (U_FAILURE(ec)) throw DecodeError("invalid UTF-8 input");
    u16.resize(static_cast<std::size_t>(u16_len));

    std::u16string composed(u16.size() + 16, u'\0');
    ec = U_ZERO_ERROR;
    int32_t out_len = unorm2_normalize(norm, u16.data(), u16_len, composed.data(),
                                       static_cast<int32_t>(composed.size()), &ec);
    if (ec == U_BUFFER_OVERFLOW_ERROR) {
        composed.assign(static_cast<std::size_t>(out_len), u'\0');
        ec = U_ZERO_ERROR;
        out_len = unorm2_normalize(norm, u16.data(), u16_len, composed.data(),
                                   static_cast<int32_t>(composed.size()), &ec);
    }
    if (U_FAILURE(ec)) throw DecodeError("unicode normalization failed");
    composed.resize(static_cast<std::size_t>(out_len));

    std::string out(composed.size() * 4 + 1, '\0');
    int32_t u8_len = 0;
    ec = U_ZERO_ERROR;
    u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &u8_len, composed.data(),
                static_cast<int32_t>(composed.size()), &ec);
    if (U_FAILURE(ec)) throw DecodeError("unicode re-encoding failed");
    out.resize(static_cast<std::size_t>(u8_len));
    return out;
}

} // namespace

bool is_valid_utf8(std::string_view s) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
    int32_t i = 0;
    const auto n = static_cast<int32_t>(s.size());
    while (i < n) {
        UChar32 c;
        U8_NEXT(p, i, n, c);
        if (c < 0) return false;
    }
    return true;
}

std::string normalize_text(std::string_view raw) {
    if (raw.empty()) return {};
    std::string composed = nfc(raw);

    // Collapse whitespace on codepoints: any run containing a newline becomes
    // '\n', any other run becomes ' '. Leading and trailing runs are dropped.
    std::string out;
    out.reserve(composed.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(composed.data());
    const auto n = static_cast<int32_t>(composed.size());
    int32_t i = 0;
    bool pending_space = false;
    bool pending_newline = false;
    while (i < n) {
        UChar32 c;
        U8_NEXT(p, i, n, c);
        if (c < 0) throw DecodeError("invalid UTF-8 after normalization");
        if (is_newline_cp(c)) {
            pending_newline = true;
        } else if (is_space_cp(c)) {
            pending_space = true;
        } else {
            if (!out.empty()) {
                if (pending_newline) out.push_back('\n');
                else if (pending_space) out.push_back(' ');
            }
            pending_space = pending_newline = false;
            append_utf8(out, c);
        }
    }
    return out;
}

std::vector<std::string> split_words(std::string_view normalized) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < normalized.size()) {
        while (i < normalized.size() && (normalized[i] == ' ' || normalized[i] == '\n')) ++i;
        std::size_t start = i;
        while (i < normalized.size() && normalized[i] != ' ' && normalized[i] != '\n') ++i;
        if (i > start) words.emplace_back(normalized.substr(start, i - start));
    }
    return words;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> sentences;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\n') {
            if (!cur.empty()) sentences.push_back(cur);
            cur.clear();
            continue;
        }
        cur.push_back(c);
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == s.size() || s[i + 1] == ' ' || s[i + 1] == '\n')) {
            sentences.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) sentences.push_back(cur);

    for (auto& sent : sentences) {
        std::size_t b = sent.find_first_not_of(' ');
        std::size_t e = sent.find_last_not_of(' ');
        sent = (b == std::string::npos) ? std::string{} : sent.substr(b, e - b + 1);
    }
    std::erase_if(sentences, [](const std::string& x) { return x.empty(); });
    return sentences;
}

std::string casefold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c >= 'A' && c <= 'Z') {
            out.push_back(static_cast<char>(c + 32));
        } else if (c == 0xC3 && i + 1 < s.size()) {
            unsigned char d = static_cast<unsigned char>(s[i + 1]);
            // Latin-1 uppercase block, excluding the multiplication sign.
            if (d >= 0x80 && d <= 0x9E && d != 0x97) {
                out.push_back(static_cast<char>(c));
                out.push_back(static_cast<char>(d + 0x20));
                ++i;
            } else {
                out.push_back(static_cast<char>(c));
            }
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string simplified(std::string_view s) {
    std::string folded = casefold(s);
    std::string out;
    out.reserve(folded.size());
    bool in_space = false;
    for (char ch : folded) {
        if (ch == ' ' || ch == '\n' || ch == '\t') {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(ch);
        }
    }
    return out;
}

} // namespace

bool contains_surface(std::string_view haystack, std::string_view needle) {
    std::string h = simplified(haystack);
    std::string n = simplified(needle);
    if (n.empty()) return false;
    const bool left_word = is_word_byte(static_cast<unsigned char>(n.front()));
    const bool right_word = is_word_byte(static_cast<unsigned char>(n.back()));
    std::size_t pos = 0;
    while ((pos = h.find(n, pos)) != std::string::npos) {
        const bool left_ok =
            !left_word || pos == 0 || !is_word_byte(static_cast<unsigned char>(h[pos - 1]));
        const std::size_t end = pos + n.size();
        const bool right_ok =
            !right_word || end == h.size() || !is_word_byte(static_cast<unsigned char>(h[end]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

std::string strip_citations(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '[' && s.substr(i).rfind("[chunk:", 0) == 0) {
            std::size_t close = s.find(']', i);
            if (close != std::string_view::npos) {
                i = close + 1;
                // Swallow one space left behind by the marker.
                if (i < s.size() && s[i] == ' ' && !out.empty() && out.back() == ' ') ++i;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

} // namespace hoplab::text

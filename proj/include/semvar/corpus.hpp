#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semvar/error.hpp"
#include "semvar/io.hpp"

namespace semvar {

struct Sentence {
    std::size_t index = 0;
    std::string text;
    std::size_t token_count = 0;

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Document {
    std::string id;
    std::string title;
    std::vector<Sentence> sentences;
    std::string source_path;

    std::size_t size() const noexcept { return sentences.size(); }

    friend bool operator==(const Document&, const Document&) = default;
};

struct DocumentStats {
    std::size_t sentence_count = 0;
    std::size_t token_count = 0;
    double mean_sentence_length = 0.0;
};

namespace detail {

inline bool is_space(char c) noexcept
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline char ascii_lower(char c) noexcept
{
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string ascii_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](char c) { return ascii_lower(c); });
    return out;
}

inline std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline bool starts_with_at(std::string_view s, std::size_t pos, std::string_view what) noexcept
{
    return pos <= s.size() && s.substr(pos, what.size()) == what;
}

// Closing quotes/brackets that may trail a terminator: " ' ) ] ” ’
inline std::size_t closer_at(std::string_view s, std::size_t pos) noexcept
{
    if (pos >= s.size()) return 0;
    const char c = s[pos];
    if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
    if (starts_with_at(s, pos, "\xE2\x80\x9D") || starts_with_at(s, pos, "\xE2\x80\x99")) return 3;
    return 0;
}

// Opening quotes: " ' “ ‘
inline std::size_t opener_at(std::string_view s, std::size_t pos) noexcept
{
    if (pos >= s.size()) return 0;
    const char c = s[pos];
    if (c == '"' || c == '\'') return 1;
    if (starts_with_at(s, pos, "\xE2\x80\x9C") || starts_with_at(s, pos, "\xE2\x80\x98")) return 3;
    return 0;
}

// ASCII capitals plus the Latin-1 capitals U+00C0..U+00DE (except U+00D7).
inline bool uppercase_at(std::string_view s, std::size_t pos) noexcept
{
    if (pos >= s.size()) return false;
    const auto c = static_cast<unsigned char>(s[pos]);
    if (c >= 'A' && c <= 'Z') return true;
    if (c == 0xC3 && pos + 1 < s.size()) {
        const auto d = static_cast<unsigned char>(s[pos + 1]);
        return d >= 0x80 && d <= 0x9E && d != 0x97;
    }
    return false;
}

inline bool is_terminator(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

inline constexpr std::array<std::string_view, 8> abbreviations = {
    "mr", "mrs", "dr", "st", "vs", "etc", "i.e", "e.g"};

// True when the word ending just before `dot` is a listed abbreviation.
inline bool abbreviation_before(std::string_view s, std::size_t dot)
{
    std::size_t begin = dot;
    while (begin > 0 && !is_space(s[begin - 1])) --begin;
    std::string_view word = s.substr(begin, dot - begin);
    while (!word.empty() && (word.front() == '(' || word.front() == '[' || opener_at(word, 0) != 0)) {
        word.remove_prefix(opener_at(word, 0) != 0 ? opener_at(word, 0) : 1);
    }
    const std::string lowered = ascii_lower(word);
    return std::find(abbreviations.begin(), abbreviations.end(), lowered) != abbreviations.end();
}

inline std::string collapse_whitespace(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : trim(s)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

// Splits text into paragraph spans separated by whitespace-only lines.
inline std::vector<std::string_view> paragraphs(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t para_start = 0;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        const std::string_view line = text.substr(line_start, line_end - line_start);
        if (trim(line).empty()) {
            if (line_start > para_start) out.push_back(text.substr(para_start, line_start - para_start));
            para_start = line_end + 1;
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }
    if (para_start < text.size()) out.push_back(text.substr(para_start));
    return out;
}

inline bool valid_utf8(std::string_view s) noexcept
{
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        if (c < 0x80) extra = 0;
        else if ((c & 0xE0) == 0xC0 && c >= 0xC2) extra = 1;
        else if ((c & 0xF0) == 0xE0) extra = 2;
        else if ((c & 0xF8) == 0xF0 && c <= 0xF4) extra = 3;
        else return false;
        if (extra > 0 && i + extra >= s.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

} // namespace detail

inline std::size_t count_tokens(std::string_view text) noexcept
{
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = detail::is_space(c);
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

/// Rule-based sentence segmentation.
///
/// A sentence ends at a run of '.', '!' or '?' (plus any trailing closing
/// quotes or brackets) when whitespace follows and the next word starts with
/// a capital letter or an opening quote. A single '.' after a listed
/// abbreviation (Mr., Mrs., Dr., St., vs., etc., i.e., e.g.) never ends a
/// sentence. Whitespace-only lines always end a sentence. Internal whitespace
/// runs collapse to one space.
inline std::vector<Sentence> segment_sentences(std::string_view text)
{
    std::vector<Sentence> out;
    auto emit = [&out](std::string_view span) {
        std::string sentence = detail::collapse_whitespace(span);
        if (sentence.empty()) return;
        const std::size_t tokens = count_tokens(sentence);
        out.push_back(Sentence{out.size(), std::move(sentence), tokens});
    };

    for (std::string_view para : detail::paragraphs(text)) {
        std::size_t start = 0;
        std::size_t i = 0;
        while (i < para.size()) {
            if (!detail::is_terminator(para[i])) {
                ++i;
                continue;
            }
            const std::size_t first = i;
            while (i < para.size() && detail::is_terminator(para[i])) ++i;
            const bool single_dot = (i - first == 1) && para[first] == '.';
            while (std::size_t len = detail::closer_at(para, i)) i += len;
            const std::size_t end = i;
            if (end >= para.size() || !detail::is_space(para[end])) continue;
            std::size_t next = end;
            while (next < para.size() && detail::is_space(para[next])) ++next;
            if (next >= para.size()) continue;
            if (!detail::uppercase_at(para, next) && detail::opener_at(para, next) == 0) continue;
            if (single_dot && detail::abbreviation_before(para, first)) continue;
            emit(para.substr(start, end - start));
            start = end;
        }
        emit(para.substr(start));
    }
    return out;
}

/// Removes text before the first "*** START OF" line and from the first
/// subsequent "*** END OF" line onward (case-insensitive). Missing markers
/// leave the corresponding end untouched.
inline std::string_view strip_gutenberg_boilerplate(std::string_view text)
{
    std::size_t body_begin = 0;
    std::size_t body_end = text.size();
    bool started = false;
    std::size_t line_start = 0;
    while (line_start < text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        const std::string lowered = detail::ascii_lower(text.substr(line_start, line_end - line_start));
        if (!started && lowered.find("*** start of") != std::string::npos) {
            started = true;
            body_begin = std::min(line_end + 1, text.size());
        } else if (lowered.find("*** end of") != std::string::npos) {
            body_end = line_start;
            break;
        }
        line_start = line_end + 1;
    }
    if (body_end < body_begin) body_end = body_begin;
    return text.substr(body_begin, body_end - body_begin);
}

inline DocumentStats corpus_stats(const Document& doc) noexcept
{
    DocumentStats stats;
    stats.sentence_count = doc.sentences.size();
    for (const Sentence& s : doc.sentences) stats.token_count += s.token_count;
    if (stats.sentence_count > 0) {
        stats.mean_sentence_length =
            static_cast<double>(stats.token_count) / static_cast<double>(stats.sentence_count);
    }
    return stats;
}

/// Builds a Document from raw text. Throws "empty body" when nothing but
/// whitespace remains after optional boilerplate stripping.
inline Document make_document(std::string id, std::string title, std::string_view raw,
                              bool strip_boilerplate, std::string source_path = {})
{
    if (raw.size() >= 3 && raw.substr(0, 3) == "\xEF\xBB\xBF") raw.remove_prefix(3);
    const std::string_view body = strip_boilerplate ? strip_gutenberg_boilerplate(raw) : raw;
    if (detail::trim(body).empty()) throw Error("empty body");
    Document doc{std::move(id), std::move(title), segment_sentences(body), std::move(source_path)};
    if (doc.sentences.empty()) throw Error("no sentences found");
    return doc;
}

namespace detail {

inline std::string sanitize_id(std::string_view stem)
{
    std::string id;
    for (char c : stem) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-' || c == '.';
        id.push_back(ok ? c : '_');
    }
    if (id.empty()) id = "doc";
    if (id.size() > 255) id.resize(255);
    return id;
}

inline std::string gutenberg_title(std::string_view raw)
{
    std::size_t line_start = 0;
    while (line_start < raw.size()) {
        std::size_t line_end = raw.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = raw.size();
        const std::string_view line = trim(raw.substr(line_start, line_end - line_start));
        if (ascii_lower(line).find("*** start of") != std::string::npos) break;
        if (line.starts_with("Title:")) return std::string(trim(line.substr(6)));
        line_start = line_end + 1;
    }
    return {};
}

} // namespace detail

namespace detail {

inline Document document_from_raw(const std::filesystem::path& path, std::string_view raw,
                                  bool strip_boilerplate)
{
    if (!valid_utf8(raw)) throw Error("not valid UTF-8: " + path.string());
    if (raw.starts_with("\xEF\xBB\xBF")) raw.remove_prefix(3);
    std::string id = sanitize_id(path.stem().string());
    std::string title = strip_boilerplate ? gutenberg_title(raw) : std::string{};
    if (title.empty()) title = path.stem().string();
    return make_document(std::move(id), std::move(title), raw, strip_boilerplate, path.string());
}

} // namespace detail

/// Reads a UTF-8 text file. The id is the sanitized file stem; the title
/// comes from a Gutenberg "Title:" header line when present.
inline Document load_document(const std::filesystem::path& path, bool strip_boilerplate = true)
{
    return detail::document_from_raw(path, read_file(path), strip_boilerplate);
}

// ---- line-delimited serialization -------------------------------------

inline std::string escape_field(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

inline std::string unescape_field(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (++i == s.size()) throw Error("dangling escape");
        switch (s[i]) {
        case '\\': out.push_back('\\'); break;
        case 't': out.push_back('\t'); break;
        case 'n': out.push_back('\n'); break;
        default: throw Error(std::string("unknown escape \\") + s[i]);
        }
    }
    return out;
}

inline void write_document(std::ostream& out, const Document& doc)
{
    out << "#doc " << escape_field(doc.id) << '\t' << escape_field(doc.title) << '\n';
    for (const Sentence& s : doc.sentences) {
        out << s.index << '\t' << s.token_count << '\t' << escape_field(s.text) << '\n';
    }
}

inline std::string serialize_document(const Document& doc)
{
    std::ostringstream out;
    write_document(out, doc);
    return out.str();
}

inline Document read_document(std::istream& in, std::string source_path = {})
{
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("#doc ")) throw Error("missing #doc header");
    const std::string_view header = std::string_view(line).substr(5);
    const std::size_t tab = header.find('\t');
    if (tab == std::string_view::npos) throw Error("malformed #doc header");
    Document doc;
    doc.id = unescape_field(header.substr(0, tab));
    doc.title = unescape_field(header.substr(tab + 1));
    doc.source_path = std::move(source_path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t t1 = line.find('\t');
        const std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw Error("malformed sentence record");
        Sentence s;
        try {
            s.index = std::stoull(line.substr(0, t1));
            s.token_count = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
        } catch (const std::exception&) {
            throw Error("malformed sentence record");
        }
        s.text = unescape_field(std::string_view(line).substr(t2 + 1));
        if (s.index != doc.sentences.size()) throw Error("non-contiguous sentence index");
        doc.sentences.push_back(std::move(s));
    }
    if (doc.sentences.empty()) throw Error("no sentences found");
    return doc;
}

/// Loads raw text, or a serialized document when the file starts with "#doc ".
inline Document load_any_document(const std::filesystem::path& path, bool strip_boilerplate = true)
{
    const std::string raw = read_file(path);
    if (raw.starts_with("#doc ")) {
        std::istringstream in(raw);
        return read_document(in, path.string());
    }
    return detail::document_from_raw(path, raw, strip_boilerplate);
}

} // namespace semvar

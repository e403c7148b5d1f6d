#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "codemt/util.hpp"

namespace codemt {

// Visible space marker used inside string literals and comments (U+2581).
inline constexpr const char* kSpaceMarker = "\xe2\x96\x81";

// ----------------------------- language ids -----------------------------

// Two built-in surface syntaxes share one semantic core; external ids are
// carried through for toolchain-backed languages.
struct LanguageId {
    std::string name;

    LanguageId() = default;
    explicit LanguageId(std::string n) : name(std::move(n)) {}

    static LanguageId indent() { return LanguageId("indent"); }
    static LanguageId brace() { return LanguageId("brace"); }

    bool is_indent() const { return name == "indent"; }
    bool is_brace() const { return name == "brace"; }
    bool builtin() const { return is_indent() || is_brace(); }

    bool operator==(const LanguageId& o) const { return name == o.name; }
    bool operator!=(const LanguageId& o) const { return name != o.name; }
    bool operator<(const LanguageId& o) const { return name < o.name; }
};

// ----------------------------- tokens -----------------------------

enum class TokenKind : std::uint8_t {
    Keyword,
    Ident,
    Literal,
    Operator,
    Punct,
    Newline,
    Indent,
    Dedent,
    Comment,
};

struct Token {
    std::string text;
    TokenKind kind = TokenKind::Ident;
    std::uint32_t line = 0;  // 1-based; 0 when synthesized

    bool operator==(const Token& o) const { return text == o.text && kind == o.kind; }
};

inline Token tok(std::string text, TokenKind kind, std::uint32_t line = 0) {
    return Token{std::move(text), kind, line};
}

inline const std::set<std::string>& indent_keywords() {
    static const std::set<std::string> kw = {
        "def",  "return", "if",   "elif",  "else", "while",    "for",   "in",
        "and",  "or",     "not",  "True",  "False", "pass",    "class", "try",
        "except", "break", "continue",
    };
    return kw;
}

inline const std::set<std::string>& brace_keywords() {
    static const std::set<std::string> kw = {
        "int",  "float", "bool", "str",  "arr",   "void",  "return", "if",
        "else", "while", "for",  "true", "false", "static", "class", "break",
        "continue",
    };
    return kw;
}

// Best-effort kind for a bare token text (used when rebuilding tokens from
// subword ids, where the original kind is not stored).
inline TokenKind classify_token_text(const std::string& text) {
    if (text == "NEWLINE") return TokenKind::Newline;
    if (text == "INDENT") return TokenKind::Indent;
    if (text == "DEDENT") return TokenKind::Dedent;
    if (text.empty()) return TokenKind::Ident;
    if (starts_with(text, "#") || starts_with(text, "//")) return TokenKind::Comment;
    if (text == kSpaceMarker) return TokenKind::Literal;
    if (text == "\"") return TokenKind::Punct;
    if (indent_keywords().count(text) || brace_keywords().count(text)) return TokenKind::Keyword;
    char c = text[0];
    if (std::isdigit(static_cast<unsigned char>(c))) return TokenKind::Literal;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return TokenKind::Ident;
    if (std::string("()[]{},:;").find(c) != std::string::npos) return TokenKind::Punct;
    return TokenKind::Operator;
}

struct FunctionRecord {
    LanguageId lang;
    std::string id;
    std::string raw;
    std::vector<Token> tokens;
    bool standalone = true;
};

// ----------------------------- low-level scanning -----------------------------

namespace detail {

inline bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Scans one string literal starting at the opening quote. Emits the opening
// quote, the content split on spaces (each space run becomes marker tokens,
// one per space), and the closing quote.
inline std::size_t scan_string(std::string_view src, std::size_t pos, std::vector<Token>& out) {
    std::size_t start = pos;
    out.push_back(tok("\"", TokenKind::Punct));
    ++pos;
    std::string chunk;
    auto flush = [&] {
        if (!chunk.empty()) {
            out.push_back(tok(chunk, TokenKind::Literal));
            chunk.clear();
        }
    };
    while (pos < src.size()) {
        char c = src[pos];
        if (c == '"') {
            flush();
            out.push_back(tok("\"", TokenKind::Punct));
            return pos + 1;
        }
        if (c == '\n') break;
        if (c == '\\' && pos + 1 < src.size()) {
            chunk += c;
            chunk += src[pos + 1];
            pos += 2;
            continue;
        }
        if (c == ' ' || c == '\t') {
            flush();
            out.push_back(tok(kSpaceMarker, TokenKind::Literal));
        } else {
            chunk += c;
        }
        ++pos;
    }
    throw LexError(start, "unterminated string literal");
}

// Comment text is carried as a single token with whitespace runs collapsed
// to the visible space marker, e.g. "# deleted file" -> "#<mark>deleted<mark>file".
inline std::size_t scan_comment(std::string_view src, std::size_t pos, std::string_view marker,
                                std::vector<Token>& out) {
    std::string text(marker);
    pos += marker.size();
    while (pos < src.size() && src[pos] != '\n') {
        char c = src[pos];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++pos;
            continue;
        }
        text += kSpaceMarker;
        while (pos < src.size() && src[pos] != '\n' && src[pos] != ' ' && src[pos] != '\t' &&
               src[pos] != '\r') {
            text += src[pos];
            ++pos;
        }
    }
    out.push_back(tok(text, TokenKind::Comment));
    return pos;
}

inline const std::vector<std::string>& multi_char_operators() {
    static const std::vector<std::string> ops = {
        "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "%=",
    };
    return ops;
}

// Lexes the code portion of one line (no indentation handling). Returns true
// if any non-comment token was produced.
inline bool lex_line(std::string_view src, std::size_t line_begin, std::size_t line_end,
                     const LanguageId& lang, std::vector<Token>& out) {
    const auto& keywords = lang.is_indent() ? indent_keywords() : brace_keywords();
    std::string_view comment_marker = lang.is_indent() ? "#" : "//";
    bool any_code = false;
    std::size_t pos = line_begin;
    while (pos < line_end) {
        char c = src[pos];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++pos;
            continue;
        }
        if (src.substr(pos, comment_marker.size()) == comment_marker) {
            pos = scan_comment(src, pos, comment_marker, out);
            continue;
        }
        if (c == '"') {
            pos = scan_string(src, pos, out);
            any_code = true;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = pos;
            while (j < line_end && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < line_end && src[j] == '.' && j + 1 < line_end &&
                std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < line_end && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            out.push_back(tok(std::string(src.substr(pos, j - pos)), TokenKind::Literal));
            pos = j;
            any_code = true;
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = pos;
            while (j < line_end && ident_char(src[j])) ++j;
            std::string word(src.substr(pos, j - pos));
            out.push_back(tok(word, keywords.count(word) ? TokenKind::Keyword : TokenKind::Ident));
            pos = j;
            any_code = true;
            continue;
        }
        bool matched = false;
        for (const auto& op : multi_char_operators()) {
            if (src.substr(pos, op.size()) == op) {
                out.push_back(tok(op, TokenKind::Operator));
                pos += op.size();
                matched = true;
                break;
            }
        }
        if (matched) {
            any_code = true;
            continue;
        }
        if (std::string("()[]{},:;").find(c) != std::string::npos) {
            out.push_back(tok(std::string(1, c), TokenKind::Punct));
        } else if (std::string("+-*/%<>=!&|.@").find(c) != std::string::npos) {
            out.push_back(tok(std::string(1, c), TokenKind::Operator));
        } else {
            throw LexError(pos, std::string("unexpected character '") + c + "'");
        }
        ++pos;
        any_code = true;
    }
    return any_code;
}

struct Line {
    std::size_t begin = 0;   // first non-indent char
    std::size_t end = 0;     // exclusive, before '\n'
    int indent = 0;          // tab = 4 spaces
    bool blank = true;
    bool comment_only = false;
};

inline std::vector<Line> split_lines(std::string_view src, const LanguageId& lang) {
    std::string_view comment_marker = lang.is_indent() ? "#" : "//";
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos <= src.size()) {
        std::size_t eol = src.find('\n', pos);
        if (eol == std::string_view::npos) eol = src.size();
        Line line;
        std::size_t p = pos;
        int indent = 0;
        while (p < eol && (src[p] == ' ' || src[p] == '\t')) {
            indent += src[p] == '\t' ? 4 : 1;
            ++p;
        }
        line.begin = p;
        line.end = eol;
        line.indent = indent;
        std::size_t q = p;
        while (q < eol && src[q] == '\r') ++q;
        line.blank = q >= eol;
        line.comment_only = !line.blank && src.substr(p, comment_marker.size()) == comment_marker;
        lines.push_back(line);
        if (eol == src.size()) break;
        pos = eol + 1;
    }
    return lines;
}

}  // namespace detail

// ----------------------------- tokenize -----------------------------

// Indentation-language streams follow the convention of the tokenized corpus
// format: NEWLINE separates consecutive logical lines of the same block, a
// nested block is wrapped in INDENT/DEDENT, no NEWLINE is emitted right
// before a DEDENT, and the body of a leading header line (a first line
// ending in ":") is implicit rather than INDENT-wrapped.
inline std::vector<Token> tokenize(const LanguageId& lang, std::string_view source) {
    if (!lang.builtin()) throw LexError(0, "no built-in lexer for language '" + lang.name + "'");
    std::vector<Token> out;
    auto stamp = [&out](std::size_t from, std::uint32_t line_no) {
        for (std::size_t i = from; i < out.size(); ++i) out[i].line = line_no;
    };
    if (lang.is_brace()) {
        auto lines = detail::split_lines(source, lang);
        for (std::size_t li = 0; li < lines.size(); ++li) {
            if (lines[li].blank) continue;
            std::size_t before = out.size();
            detail::lex_line(source, lines[li].begin, lines[li].end, lang, out);
            stamp(before, static_cast<std::uint32_t>(li + 1));
        }
        return out;
    }

    auto lines = detail::split_lines(source, lang);
    struct Level {
        int width;
        bool implicit;
    };
    std::vector<Level> stack;
    bool pending_newline = false;
    bool first_code_line = true;
    bool first_line_is_header = false;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const auto& line = lines[li];
        auto line_no = static_cast<std::uint32_t>(li + 1);
        if (line.blank) continue;
        if (line.comment_only) {
            // Attaches to the still-open logical line; does not touch indentation.
            std::size_t before = out.size();
            detail::lex_line(source, line.begin, line.end, lang, out);
            stamp(before, line_no);
            continue;
        }
        if (first_code_line) {
            stack.push_back({line.indent, false});
            std::size_t before = out.size();
            detail::lex_line(source, line.begin, line.end, lang, out);
            stamp(before, line_no);
            for (std::size_t i = out.size(); i > before; --i) {
                const Token& t = out[i - 1];
                if (t.kind == TokenKind::Comment) continue;
                first_line_is_header = t.text == ":";
                break;
            }
            first_code_line = false;
            pending_newline = true;
            continue;
        }
        if (line.indent > stack.back().width) {
            bool implicit = first_line_is_header && stack.size() == 1;
            if (pending_newline) {
                out.push_back(tok("NEWLINE", TokenKind::Newline, line_no));
                pending_newline = false;
            }
            stack.push_back({line.indent, implicit});
            if (!implicit) out.push_back(tok("INDENT", TokenKind::Indent, line_no));
        } else if (line.indent < stack.back().width) {
            pending_newline = false;
            while (stack.size() > 1 && line.indent < stack.back().width) {
                if (!stack.back().implicit) out.push_back(tok("DEDENT", TokenKind::Dedent, line_no));
                stack.pop_back();
            }
            if (line.indent != stack.back().width) {
                throw LexError(line.begin, "inconsistent indentation");
            }
        } else if (pending_newline) {
            out.push_back(tok("NEWLINE", TokenKind::Newline, line_no));
            pending_newline = false;
        }
        std::size_t before = out.size();
        detail::lex_line(source, line.begin, line.end, lang, out);
        stamp(before, line_no);
        pending_newline = true;
    }
    while (!stack.empty()) {
        if (stack.size() > 1 && !stack.back().implicit) {
            out.push_back(tok("DEDENT", TokenKind::Dedent));
        }
        stack.pop_back();
    }
    return out;
}

// ----------------------------- detokenize -----------------------------

inline std::string detokenize(const LanguageId& lang, const std::vector<Token>& tokens) {
    if (!lang.builtin()) throw DetokenizeError("no built-in detokenizer for language '" + lang.name + "'");
    std::string out;
    std::vector<std::string> line;
    bool in_string = false;
    std::string string_buf;

    int explicit_level = 0;
    bool implicit_body = false;
    bool seen_first_line = false;
    bool indent_lang = lang.is_indent();
    int brace_level = 0;

    auto expand_marks = [&](const std::string& text) {
        std::string s;
        std::size_t i = 0;
        std::string_view mark(kSpaceMarker);
        while (i < text.size()) {
            if (text.compare(i, mark.size(), mark) == 0) {
                s += ' ';
                i += mark.size();
            } else {
                s += text[i];
                ++i;
            }
        }
        return s;
    };

    std::string last_code_piece;
    auto flush_line = [&] {
        if (in_string) {
            // Unterminated string in a malformed stream: emit what we have.
            line.push_back(string_buf);
            string_buf.clear();
            in_string = false;
        }
        if (line.empty()) return;
        int level = indent_lang ? (implicit_body && seen_first_line ? 1 : 0) + explicit_level
                                : brace_level;
        out.append(static_cast<std::size_t>(level) * 4, ' ');
        out += join(line, " ");
        out += '\n';
        line.clear();
        if (!seen_first_line && indent_lang) implicit_body = last_code_piece == ":";
        seen_first_line = true;
    };

    for (const auto& t : tokens) {
        if (in_string) {
            if (t.text == "\"") {
                string_buf += '"';
                line.push_back(string_buf);
                string_buf.clear();
                in_string = false;
            } else if (t.text == kSpaceMarker) {
                string_buf += ' ';
            } else {
                string_buf += t.text;
            }
            continue;
        }
        switch (t.kind) {
            case TokenKind::Newline:
                flush_line();
                break;
            case TokenKind::Indent:
                flush_line();
                ++explicit_level;
                break;
            case TokenKind::Dedent:
                flush_line();
                if (explicit_level == 0) throw DetokenizeError("unbalanced DEDENT");
                --explicit_level;
                break;
            case TokenKind::Comment:
                line.push_back(expand_marks(t.text));
                if (!indent_lang) flush_line();
                break;
            default:
                if (t.text == "\"") {
                    in_string = true;
                    string_buf = "\"";
                    last_code_piece = t.text;
                    break;
                }
                if (!indent_lang && t.text == "}") {
                    flush_line();
                    if (brace_level > 0) --brace_level;
                    line.push_back(t.text);
                    flush_line();
                    break;
                }
                line.push_back(t.text);
                last_code_piece = t.text;
                if (!indent_lang && t.text == ";") flush_line();
                if (!indent_lang && t.text == "{") {
                    flush_line();
                    ++brace_level;
                }
                break;
        }
    }
    flush_line();
    return out;
}

// ----------------------------- function extraction -----------------------------

struct ExtractResult {
    std::vector<FunctionRecord> records;
    int skipped = 0;
};

namespace detail {

// Removes comments from raw source text (outside string literals). Lines that
// become blank are dropped entirely.
inline std::string strip_comments_text(const LanguageId& lang, std::string_view src) {
    std::string_view marker = lang.is_indent() ? "#" : "//";
    std::string out;
    std::size_t pos = 0;
    while (pos <= src.size()) {
        std::size_t eol = src.find('\n', pos);
        bool last = eol == std::string_view::npos;
        if (last) eol = src.size();
        std::string_view full = src.substr(pos, eol - pos);
        std::string kept;
        bool in_str = false;
        for (std::size_t i = 0; i < full.size();) {
            char c = full[i];
            if (in_str && c == '\\' && i + 1 < full.size()) {
                kept += full.substr(i, 2);
                i += 2;
                continue;
            }
            if (c == '"') in_str = !in_str;
            if (!in_str && full.compare(i, marker.size(), marker) == 0) break;
            kept += c;
            ++i;
        }
        while (!kept.empty() && (kept.back() == ' ' || kept.back() == '\t' || kept.back() == '\r')) {
            kept.pop_back();
        }
        bool blank = kept.find_first_not_of(" \t") == std::string::npos;
        std::string_view orig_trim = full.substr(0, full.find_last_not_of(" \t\r") + 1);
        bool orig_blank = orig_trim.find_first_not_of(" \t") == std::string_view::npos;
        if (!blank || orig_blank) {
            out += kept;
            if (!last) out += '\n';
        }
        if (last) break;
        pos = eol + 1;
    }
    return out;
}

inline int line_indent(std::string_view line) {
    int n = 0;
    for (char c : line) {
        if (c == ' ') ++n;
        else if (c == '\t') n += 4;
        else break;
    }
    return n;
}

inline bool is_blank_or_comment(std::string_view line, std::string_view marker) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) return true;
    return line.substr(i, marker.size()) == marker;
}

inline std::string dedent_block(const std::vector<std::string>& lines, int width) {
    std::string out;
    for (const auto& l : lines) {
        std::size_t strip = 0;
        int seen = 0;
        while (strip < l.size() && seen < width) {
            if (l[strip] == ' ') seen += 1;
            else if (l[strip] == '\t') seen += 4;
            else break;
            ++strip;
        }
        out += l.substr(strip);
        out += '\n';
    }
    return out;
}

inline std::string first_word(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && ident_char(line[j])) ++j;
    return std::string(line.substr(i, j - i));
}

}  // namespace detail

// Extracts standalone functions: top-level definitions plus static-marked
// class members (returned dedented to column zero). Instance methods and
// nested definitions are not extracted.
inline ExtractResult extract_functions(const LanguageId& lang, std::string_view source_file,
                                       bool keep_comments, const std::string& id_prefix = "") {
    ExtractResult result;
    std::string cleaned = keep_comments ? std::string(source_file)
                                        : detail::strip_comments_text(lang, source_file);
    std::vector<std::string> lines;
    {
        std::size_t pos = 0;
        while (pos <= cleaned.size()) {
            std::size_t eol = cleaned.find('\n', pos);
            if (eol == std::string::npos) {
                lines.push_back(cleaned.substr(pos));
                break;
            }
            lines.push_back(cleaned.substr(pos, eol - pos));
            pos = eol + 1;
        }
    }

    int ordinal = 0;
    auto add_record = [&](std::string raw, const std::string& name) {
        FunctionRecord rec;
        rec.lang = lang;
        rec.id = id_prefix + name + "#" + std::to_string(ordinal++);
        rec.raw = std::move(raw);
        try {
            rec.tokens = tokenize(lang, rec.raw);
        } catch (const LexError&) {
            ++result.skipped;
            return;
        }
        rec.standalone = true;
        result.records.push_back(std::move(rec));
    };

    if (lang.is_indent()) {
        std::string_view marker = "#";
        std::size_t i = 0;
        while (i < lines.size()) {
            const std::string& line = lines[i];
            if (detail::is_blank_or_comment(line, marker)) {
                ++i;
                continue;
            }
            int ind = detail::line_indent(line);
            std::string word = detail::first_word(line);
            auto take_block = [&](std::size_t start, int base_indent) {
                std::size_t j = start + 1;
                std::size_t last = start;
                while (j < lines.size()) {
                    if (detail::is_blank_or_comment(lines[j], marker)) {
                        ++j;
                        continue;
                    }
                    if (detail::line_indent(lines[j]) <= base_indent) break;
                    last = j;
                    ++j;
                }
                std::vector<std::string> block(lines.begin() + static_cast<std::ptrdiff_t>(start),
                                               lines.begin() + static_cast<std::ptrdiff_t>(last) + 1);
                return std::pair<std::vector<std::string>, std::size_t>(std::move(block), last + 1);
            };

            if (word == "def" && ind == 0) {
                auto [block, next] = take_block(i, ind);
                std::string name = detail::first_word(std::string_view(line).substr(line.find("def") + 3));
                add_record(detail::dedent_block(block, 0), name);
                i = next;
                continue;
            }
            if (word == "class" && ind == 0) {
                auto [cls, next] = take_block(i, 0);
                std::size_t j = 1;
                while (j < cls.size()) {
                    if (detail::is_blank_or_comment(cls[j], marker)) {
                        ++j;
                        continue;
                    }
                    std::string w = detail::first_word(cls[j]);
                    int mind = detail::line_indent(cls[j]);
                    bool is_static = false;
                    std::size_t def_at = j;
                    if (!cls[j].empty() && cls[j].find("@staticmethod") != std::string::npos) {
                        is_static = true;
                        def_at = j + 1;
                        while (def_at < cls.size() && detail::is_blank_or_comment(cls[def_at], marker)) ++def_at;
                    }
                    if (def_at < cls.size() && detail::first_word(cls[def_at]) == "def") {
                        std::size_t k = def_at + 1;
                        std::size_t last = def_at;
                        while (k < cls.size()) {
                            if (detail::is_blank_or_comment(cls[k], marker)) {
                                ++k;
                                continue;
                            }
                            if (detail::line_indent(cls[k]) <= mind) break;
                            last = k;
                            ++k;
                        }
                        if (is_static) {
                            std::vector<std::string> block(cls.begin() + static_cast<std::ptrdiff_t>(def_at),
                                                           cls.begin() + static_cast<std::ptrdiff_t>(last) + 1);
                            const std::string& dline = cls[def_at];
                            std::string name =
                                detail::first_word(std::string_view(dline).substr(dline.find("def") + 3));
                            add_record(detail::dedent_block(block, detail::line_indent(dline)), name);
                        }
                        j = last + 1;
                        continue;
                    }
                    ++j;
                    (void)w;
                }
                i = next;
                continue;
            }
            ++i;
        }
    } else {
        // Brace language: scan at depth 0 for "type name ( ... ) {" and for
        // class blocks whose static members are extracted.
        const std::string& text = cleaned;
        std::size_t pos = 0;
        int depth = 0;
        auto skip_string = [&](std::size_t p) {
            ++p;
            while (p < text.size() && text[p] != '"' && text[p] != '\n') {
                if (text[p] == '\\') ++p;
                ++p;
            }
            if (p >= text.size() || text[p] != '"') throw LexError(p, "unterminated string literal");
            return p + 1;
        };
        auto skip_comment = [&](std::size_t p) {
            while (p < text.size() && text[p] != '\n') ++p;
            return p;
        };
        auto find_matching_brace = [&](std::size_t open) {
            int d = 0;
            std::size_t p = open;
            while (p < text.size()) {
                char c = text[p];
                if (c == '"') {
                    p = skip_string(p);
                    continue;
                }
                if (c == '/' && p + 1 < text.size() && text[p + 1] == '/') {
                    p = skip_comment(p);
                    continue;
                }
                if (c == '{') ++d;
                if (c == '}') {
                    --d;
                    if (d == 0) return p;
                }
                ++p;
            }
            throw LexError(open, "unbalanced braces");
        };

        struct Sig {
            std::size_t start;
            std::size_t open_brace;
            std::string name;
            bool is_static;
            bool looks_function;
        };
        auto parse_header = [&](std::size_t p) -> std::optional<Sig> {
            Sig sig{p, 0, "", false, false};
            std::size_t q = p;
            auto word_at = [&](std::size_t& r) {
                while (r < text.size() && (text[r] == ' ' || text[r] == '\t' || text[r] == '\n' || text[r] == '\r')) ++r;
                std::size_t s = r;
                while (r < text.size() && detail::ident_char(text[r])) ++r;
                return text.substr(s, r - s);
            };
            std::string w = word_at(q);
            if (w == "static") {
                sig.is_static = true;
                w = word_at(q);
            }
            if (!brace_keywords().count(w) && w != "class") {
                return std::nullopt;
            }
            if (w == "class") return std::nullopt;
            std::string name = word_at(q);
            if (name.empty()) return std::nullopt;
            while (q < text.size() && (text[q] == ' ' || text[q] == '\t')) ++q;
            if (q >= text.size() || text[q] != '(') return std::nullopt;
            std::size_t close = q;
            int pd = 0;
            while (close < text.size()) {
                if (text[close] == '(') ++pd;
                if (text[close] == ')') {
                    --pd;
                    if (pd == 0) break;
                }
                ++close;
            }
            if (close >= text.size()) return std::nullopt;
            std::size_t b = close + 1;
            while (b < text.size() && (text[b] == ' ' || text[b] == '\t' || text[b] == '\n' || text[b] == '\r')) ++b;
            if (b >= text.size() || text[b] != '{') return std::nullopt;
            sig.open_brace = b;
            sig.name = name;
            sig.looks_function = true;
            return sig;
        };

        auto extract_span = [&](std::size_t from, std::size_t to_inclusive) {
            return text.substr(from, to_inclusive - from + 1);
        };

        while (pos < text.size()) {
            char c = text[pos];
            if (c == '"') {
                pos = skip_string(pos);
                continue;
            }
            if (c == '/' && pos + 1 < text.size() && text[pos + 1] == '/') {
                pos = skip_comment(pos);
                continue;
            }
            if (c == '{') {
                ++depth;
                ++pos;
                continue;
            }
            if (c == '}') {
                --depth;
                ++pos;
                continue;
            }
            if (depth == 0 && detail::ident_start(c)) {
                std::size_t wstart = pos;
                std::string w;
                {
                    std::size_t r = pos;
                    while (r < text.size() && detail::ident_char(text[r])) ++r;
                    w = text.substr(pos, r - pos);
                }
                if (w == "class") {
                    std::size_t open = text.find('{', pos);
                    if (open == std::string::npos) break;
                    std::size_t close = find_matching_brace(open);
                    std::size_t p = open + 1;
                    while (p < close) {
                        while (p < close && (text[p] == ' ' || text[p] == '\t' || text[p] == '\n' || text[p] == '\r' ||
                                             text[p] == ';')) {
                            ++p;
                        }
                        if (p >= close) break;
                        if (text[p] == '/' && p + 1 < close && text[p + 1] == '/') {
                            p = skip_comment(p);
                            continue;
                        }
                        auto sig = parse_header(p);
                        if (sig && sig->looks_function) {
                            std::size_t end = find_matching_brace(sig->open_brace);
                            if (sig->is_static) {
                                std::string raw = extract_span(p, end);
                                add_record(raw + "\n", sig->name);
                            }
                            p = end + 1;
                        } else {
                            while (p < close && text[p] != '\n' && text[p] != ';') ++p;
                        }
                    }
                    pos = close + 1;
                    continue;
                }
                auto sig = parse_header(pos);
                if (sig && sig->looks_function) {
                    std::size_t end = find_matching_brace(sig->open_brace);
                    add_record(extract_span(pos, end) + "\n", sig->name);
                    pos = end + 1;
                    continue;
                }
                pos = wstart + w.size();
                continue;
            }
            ++pos;
        }
    }
    return result;
}

// ----------------------------- token dump helpers -----------------------------

inline std::string token_texts_line(const std::vector<Token>& tokens) {
    std::vector<std::string> texts;
    texts.reserve(tokens.size());
    for (const auto& t : tokens) texts.push_back(t.text);
    return join(texts, " ");
}

inline std::vector<Token> tokens_from_texts(const std::vector<std::string>& texts) {
    std::vector<Token> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(tok(t, classify_token_text(t)));
    return out;
}

inline std::vector<Token> strip_comment_tokens(const std::vector<Token>& tokens) {
    std::vector<Token> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (t.kind != TokenKind::Comment) out.push_back(t);
    }
    return out;
}

}  // namespace codemt

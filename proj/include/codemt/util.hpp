#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codemt {

// ----------------------------- error types -----------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

struct LexError : Error {
    std::size_t position;
    LexError(std::size_t pos, const std::string& reason)
        : Error("lex error at offset " + std::to_string(pos) + ": " + reason), position(pos) {}
};

struct DetokenizeError : Error { using Error::Error; };
struct EmptyCorpus : Error { using Error::Error; };
struct DecodeError : Error { using Error::Error; };

struct FormatError : Error {
    std::size_t line;
    FormatError(std::size_t line_no, const std::string& reason)
        : Error("format error at line " + std::to_string(line_no) + ": " + reason), line(line_no) {}
};

struct ShapeError : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct CorruptCheckpoint : Error { using Error::Error; };

struct UnsupportedType : Error { using Error::Error; };
struct ReferenceTimeout : Error { using Error::Error; };
struct DegenerateOutputs : Error { using Error::Error; };
struct ReferenceError : Error { using Error::Error; };
struct EmptyReference : Error { using Error::Error; };
struct ToolchainMissing : Error { using Error::Error; };

// ----------------------------- hashing -----------------------------

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// ----------------------------- utf-8 -----------------------------

// Splits a UTF-8 string into code-point substrings. Invalid bytes are kept
// as single-byte units rather than rejected; corpus text is expected to be
// well formed.
inline std::vector<std::string> utf8_split(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t n = 1;
        if ((c & 0x80u) == 0x00u) n = 1;
        else if ((c & 0xE0u) == 0xC0u) n = 2;
        else if ((c & 0xF0u) == 0xE0u) n = 3;
        else if ((c & 0xF8u) == 0xF0u) n = 4;
        if (i + n > s.size()) n = 1;
        out.emplace_back(s.substr(i, n));
        i += n;
    }
    return out;
}

// ----------------------------- small string helpers -----------------------------

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

// ----------------------------- file IO -----------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write: " + path);
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines;
    std::string text = read_file(path);
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace codemt

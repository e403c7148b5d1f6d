#include <catch2/catch_amalgamated.hpp>

#include "codemt/lex.hpp"
#include "codemt/rng.hpp"

using namespace codemt;

namespace {

std::vector<std::string> texts(const std::vector<Token>& toks) {
    std::vector<std::string> out;
    for (const auto& t : toks) out.push_back(t.text);
    return out;
}

const char* kRmFileV1 =
    "def rm_file(path):\n"
    "    try:\n"
    "        os.remove(path)\n"
    "        print(\"Deleted\")\n"
    "    except:\n"
    "        print(\"Error while deleting file\", path)\n";

const char* kRmFileV2 =
    "def rm_file(path):\n"
    "\n"
    "    try:\n"
    "        os.remove( path )\n"
    "        print( \"Deleted\" )\n"
    "    except  :\n"
    "        print(\"Error while deleting file\", path)\n";

// Inserts extra spaces between tokens and blank lines, never touching leading
// indentation or string interiors.
std::string perturb_whitespace(const std::string& src, Rng& rng) {
    std::string out;
    bool in_string = false;
    bool at_line_start = true;
    for (std::size_t i = 0; i < src.size(); ++i) {
        char c = src[i];
        if (c == '"') in_string = !in_string;
        if (c == '\n') {
            if (!in_string && rng.bernoulli(0.2)) out += "   ";
            out += c;
            if (!in_string && rng.bernoulli(0.3)) out += '\n';
            at_line_start = true;
            continue;
        }
        if (at_line_start && c != ' ' && c != '\t') at_line_start = false;
        out += c;
        if (!in_string && !at_line_start && c == ' ' && rng.bernoulli(0.4)) {
            out.append(static_cast<std::size_t>(rng.uniform_int(1, 3)), ' ');
        }
    }
    if (rng.bernoulli(0.5)) out += "\n\n\n";
    return out;
}

}  // namespace

TEST_CASE("indent tokenization matches the reference stream") {
    auto stream = tokenize(LanguageId::indent(), kRmFileV1);
    std::vector<std::string> expected = {
        "def", "rm_file", "(", "path", ")", ":", "NEWLINE", "try", ":", "NEWLINE",
        "INDENT", "os", ".", "remove", "(", "path", ")", "NEWLINE", "print", "(",
        "\"", "Deleted", "\"", ")", "DEDENT", "except", ":", "NEWLINE", "INDENT",
        "print", "(", "\"", "Error", kSpaceMarker, "while", kSpaceMarker, "deleting",
        kSpaceMarker, "file", "\"", ",", "path", ")", "DEDENT",
    };
    CHECK(texts(stream) == expected);
}

TEST_CASE("whitespace variants tokenize identically") {
    auto a = tokenize(LanguageId::indent(), kRmFileV1);
    auto b = tokenize(LanguageId::indent(), kRmFileV2);
    CHECK(a == b);
}

TEST_CASE("in-string spaces become marker tokens") {
    auto stream = tokenize(LanguageId::indent(), "print(\"a b\")\n");
    std::vector<std::string> expected = {"print", "(", "\"", "a", kSpaceMarker, "b", "\"", ")"};
    CHECK(texts(stream) == expected);
}

TEST_CASE("trailing blank lines do not change the stream") {
    auto a = tokenize(LanguageId::indent(), "def f():\n pass\n");
    auto b = tokenize(LanguageId::indent(), "def f():\n pass\n\n\n\n");
    CHECK(a == b);
}

TEST_CASE("tabs count as four spaces for indentation") {
    auto a = tokenize(LanguageId::indent(), "def f():\n\tif x:\n\t\treturn 1\n");
    auto b = tokenize(LanguageId::indent(), "def f():\n    if x:\n        return 1\n");
    CHECK(a == b);
}

TEST_CASE("lex errors carry a position") {
    CHECK_THROWS_AS(tokenize(LanguageId::indent(), "x = \"abc\n"), LexError);
    CHECK_THROWS_AS(tokenize(LanguageId::indent(), "def f():\n        a = 1\n    b = 2\n"), LexError);
}

TEST_CASE("indent and dedent counts balance") {
    for (const char* src : {kRmFileV1, "def f():\n if a:\n  if b:\n   x = 1\n y = 2\n"}) {
        auto stream = tokenize(LanguageId::indent(), src);
        int bal = 0;
        int total = 0;
        for (const auto& t : stream) {
            if (t.kind == TokenKind::Indent) ++bal, ++total;
            if (t.kind == TokenKind::Dedent) --bal;
        }
        CHECK(bal == 0);
    }
}

TEST_CASE("brace tokenization ignores all layout") {
    const char* one_line = "int f(int a){return a+1;}";
    const char* spread = "int f ( int a )\n{\n    return a + 1 ;\n}\n";
    auto a = tokenize(LanguageId::brace(), one_line);
    auto b = tokenize(LanguageId::brace(), spread);
    CHECK(a == b);
    std::vector<std::string> expected = {"int", "f", "(", "int", "a", ")", "{",
                                         "return", "a", "+", "1", ";", "}"};
    CHECK(texts(a) == expected);
}

TEST_CASE("multi-char operators lex as single tokens") {
    auto stream = tokenize(LanguageId::brace(), "bool f(int a){return a>=1&&a<=9||a!=0;}");
    auto t = texts(stream);
    CHECK(std::find(t.begin(), t.end(), ">=") != t.end());
    CHECK(std::find(t.begin(), t.end(), "&&") != t.end());
    CHECK(std::find(t.begin(), t.end(), "||") != t.end());
    CHECK(std::find(t.begin(), t.end(), "!=") != t.end());
}

TEST_CASE("detokenize round-trips tokenize output") {
    const char* sources_indent[] = {
        kRmFileV1,
        "def f():\n pass\n",
        "def g(a, b):\n x = a + b\n if x > 0:\n  return x\n return 0 - x\n",
        "def h(s):\n n = 0\n for i in range(0, len(s)):\n  if s[i] == \"0\":\n   n = n + 1\n return n\n",
    };
    for (const char* src : sources_indent) {
        auto t1 = tokenize(LanguageId::indent(), src);
        std::string text = detokenize(LanguageId::indent(), t1);
        auto t2 = tokenize(LanguageId::indent(), text);
        CHECK(t1 == t2);
    }
    const char* sources_brace[] = {
        "int f(int a){return a+1;}\n",
        "int g(arr a){int s = 0; for (int i = 0; i < len(a); i = i + 1) { s = s + a[i]; } return s;}\n",
        "str h(str s){ // flips nothing\n return s + \"x y\";}\n",
    };
    for (const char* src : sources_brace) {
        auto t1 = tokenize(LanguageId::brace(), src);
        std::string text = detokenize(LanguageId::brace(), t1);
        auto t2 = tokenize(LanguageId::brace(), text);
        CHECK(t1 == t2);
    }
}

TEST_CASE("detokenize renders an explicit INDENT block") {
    std::vector<std::string> words = {"def", "f", "(", ")", ":", "NEWLINE", "INDENT",
                                      "return", "1", "NEWLINE", "DEDENT"};
    auto toks = tokens_from_texts(words);
    std::string text = detokenize(LanguageId::indent(), toks);
    REQUIRE(text.find("return 1") != std::string::npos);
    std::size_t line_start = text.find('\n') + 1;
    CHECK(text.substr(line_start, 4) == "    ");
    auto relexed = tokenize(LanguageId::indent(), text);
    CHECK(texts(relexed) == std::vector<std::string>{"def", "f", "(", ")", ":", "NEWLINE", "return", "1"});
}

TEST_CASE("stray DEDENT raises DetokenizeError") {
    auto toks = tokens_from_texts({"x", "=", "1", "NEWLINE", "DEDENT", "y"});
    CHECK_THROWS_AS(detokenize(LanguageId::indent(), toks), DetokenizeError);
}

TEST_CASE("whitespace perturbations never change the stream") {
    Rng rng(7);
    const std::string base(kRmFileV1);
    auto expected = tokenize(LanguageId::indent(), base);
    for (int i = 0; i < 200; ++i) {
        std::string mutated = perturb_whitespace(base, rng);
        CHECK(tokenize(LanguageId::indent(), mutated) == expected);
    }
    const std::string brace_src = "int g(arr a){int s=0; for (int i=0;i<len(a);i=i+1){s=s+a[i];} return s;}";
    auto brace_expected = tokenize(LanguageId::brace(), brace_src);
    for (int i = 0; i < 200; ++i) {
        std::string mutated = perturb_whitespace(brace_src, rng);
        CHECK(tokenize(LanguageId::brace(), mutated) == brace_expected);
    }
}

TEST_CASE("extract finds top-level functions and static members") {
    const char* indent_file =
        "import os\n"
        "\n"
        "def top(a):\n"
        "    return a + 1\n"
        "\n"
        "class Tool:\n"
        "    def method(self, x):\n"
        "        return x\n"
        "\n"
        "    @staticmethod\n"
        "    def helper(y):\n"
        "        return y * 2\n";
    auto res = extract_functions(LanguageId::indent(), indent_file, true);
    REQUIRE(res.records.size() == 2);
    CHECK(res.records[0].id.find("top") != std::string::npos);
    CHECK(res.records[1].id.find("helper") != std::string::npos);
    CHECK(res.records[1].raw.substr(0, 3) == "def");
    for (const auto& rec : res.records) {
        CHECK(rec.standalone);
        CHECK(rec.tokens == tokenize(rec.lang, rec.raw));
    }

    const char* brace_file =
        "int top(int a) { return a + 1; }\n"
        "class Tool {\n"
        "    int method(int x) { return x; }\n"
        "    static int helper(int y) { return y * 2; }\n"
        "}\n";
    auto bres = extract_functions(LanguageId::brace(), brace_file, true);
    REQUIRE(bres.records.size() == 2);
    CHECK(bres.records[0].id.find("top") != std::string::npos);
    CHECK(bres.records[1].id.find("helper") != std::string::npos);
}

TEST_CASE("extract on an empty file yields nothing") {
    auto res = extract_functions(LanguageId::indent(), "", true);
    CHECK(res.records.empty());
    CHECK(res.skipped == 0);
}

TEST_CASE("comment stripping only removes comment tokens") {
    const char* file =
        "def f(a):  # adds one\n"
        "    # body note\n"
        "    return a + 1\n";
    auto kept = extract_functions(LanguageId::indent(), file, true);
    auto stripped = extract_functions(LanguageId::indent(), file, false);
    REQUIRE(kept.records.size() == 1);
    REQUIRE(stripped.records.size() == 1);
    CHECK(strip_comment_tokens(kept.records[0].tokens) == stripped.records[0].tokens);
    bool has_comment = false;
    for (const auto& t : kept.records[0].tokens) has_comment |= t.kind == TokenKind::Comment;
    CHECK(has_comment);
    for (const auto& t : stripped.records[0].tokens) CHECK(t.kind != TokenKind::Comment);
}

TEST_CASE("nested definitions are not extracted separately") {
    const char* file =
        "def outer(a):\n"
        "    def inner(b):\n"
        "        return b\n"
        "    return inner(a)\n";
    auto res = extract_functions(LanguageId::indent(), file, true);
    CHECK(res.records.size() == 1);
    CHECK(res.records[0].id.find("outer") != std::string::npos);
}

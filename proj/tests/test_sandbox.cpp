#include <catch2/catch_amalgamated.hpp>

#include "codemt/extrun.hpp"
#include "codemt/interp.hpp"
#include "codemt/parse.hpp"
#include "codemt/progen.hpp"
#include "codemt/rng.hpp"

using namespace codemt;

namespace {

// Small input sampler mirroring the harness conventions: arrays and strings
// of length 1..20, ints in [-100, 100].
Value sample_value(Type t, Rng& rng) {
    switch (t) {
        case Type::Int: return Value::make_int(rng.uniform_int(-100, 100));
        case Type::Bool: return Value::make_bool(rng.bernoulli(0.5));
        case Type::Float: return Value::make_float(rng.uniform() * 200.0 - 100.0);
        case Type::Str: {
            static const std::string chars = "abcXYZ019 ";
            std::string s;
            int len = static_cast<int>(rng.uniform_int(1, 20));
            for (int i = 0; i < len; ++i) {
                s += chars[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(chars.size()) - 1))];
            }
            return Value::make_str(s);
        }
        case Type::IntArray: {
            std::vector<std::int64_t> v;
            int len = static_cast<int>(rng.uniform_int(1, 20));
            for (int i = 0; i < len; ++i) v.push_back(rng.uniform_int(-100, 100));
            return Value::make_array(std::move(v));
        }
        default: throw Error("unsupported sample type");
    }
}

bool results_equal(const RunResult& a, const RunResult& b) {
    if (a.status != b.status) return false;
    if (a.status != RunResult::Status::Ok) return true;
    if (!value_exact_equal(a.value, b.value)) return false;
    if (a.mutated_args.size() != b.mutated_args.size()) return false;
    for (std::size_t i = 0; i < a.mutated_args.size(); ++i) {
        if (!value_exact_equal(a.mutated_args[i], b.mutated_args[i])) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("minimal pair parses to the same core ast") {
    const char* indent_src =
        "def add_one(n):\n"
        "    return n + 1\n";
    const char* brace_src =
        "int add_one(int n) {\n"
        "    return n + 1;\n"
        "}\n";
    auto pi = parse(LanguageId::indent(), indent_src);
    auto pb = parse(LanguageId::brace(), brace_src);
    CHECK(ast_equal(pi.fn, pb.fn));
}

TEST_CASE("missing closing brace reports a line") {
    try {
        parse(LanguageId::brace(), "int f(int a) {\n    return a;\n");
        FAIL("expected ParseFailed");
    } catch (const ParseFailed& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
}

TEST_CASE("inconsistent dedent fails to parse") {
    CHECK_THROWS_AS(parse(LanguageId::indent(), "def f(a):\n        x = 1\n      y = 2\n    return x\n"),
                    ParseFailed);
}

TEST_CASE("identity function returns its argument") {
    auto prog = parse(LanguageId::indent(), "def ident(n):\n    return n\n");
    auto res = execute(prog, {Value::make_int(5)}, 10.0);
    REQUIRE(res.status == RunResult::Status::Ok);
    CHECK(res.value.i == 5);
}

TEST_CASE("infinite loop hits the deterministic budget") {
    auto prog = parse(LanguageId::indent(), "def spin(n):\n    while True:\n        n = n + 1\n    return n\n");
    auto res = execute(prog, {Value::make_int(0)}, 0.05);
    CHECK(res.status == RunResult::Status::TimedOut);
    CHECK(res.steps_used > 0);
}

TEST_CASE("in-place reversal reports mutated arguments") {
    const char* src =
        "void rev(arr a) {\n"
        "    int tmp = 0;\n"
        "    for (int i = 0; i < len(a) / 2; i = i + 1) {\n"
        "        tmp = a[i];\n"
        "        a[i] = a[len(a) - 1 - i];\n"
        "        a[len(a) - 1 - i] = tmp;\n"
        "    }\n"
        "}\n";
    auto prog = parse(LanguageId::brace(), src);
    auto res = execute(prog, {Value::make_array({1, 2, 3, 4})}, 10.0);
    REQUIRE(res.status == RunResult::Status::Ok);
    CHECK(res.value.type == Type::Void);
    REQUIRE(res.mutated_args.size() == 1);
    CHECK(*res.mutated_args[0].arr == std::vector<std::int64_t>{4, 3, 2, 1});
}

TEST_CASE("runtime failures become statuses") {
    auto oob = parse(LanguageId::brace(), "int f(arr a) { return a[len(a)]; }");
    CHECK(execute(oob, {Value::make_array({1})}, 1.0).status == RunResult::Status::Raised);
    auto div0 = parse(LanguageId::indent(), "def f(n):\n    return 10 / (n - n)\n");
    CHECK(execute(div0, {Value::make_int(3)}, 1.0).status == RunResult::Status::Raised);
    auto undef = parse(LanguageId::indent(), "def f(n):\n    return m + 1\n");
    CHECK(execute(undef, {Value::make_int(3)}, 1.0).status == RunResult::Status::Raised);
    auto wrong_type = parse(LanguageId::brace(), "int f(int a) { return a; }");
    CHECK(execute(wrong_type, {Value::make_str("x")}, 1.0).status == RunResult::Status::Raised);
}

TEST_CASE("integer semantics wrap at 64 bits") {
    auto prog = parse(LanguageId::brace(),
                      "int f(int n) { int x = n; for (int i = 0; i < 12; i = i + 1) { x = x * x; } return x; }");
    auto a = execute(prog, {Value::make_int(97)}, 10.0);
    auto b = execute(prog, {Value::make_int(97)}, 10.0);
    REQUIRE(a.status == RunResult::Status::Ok);
    CHECK(a.value.i == b.value.i);
}

TEST_CASE("generated pairs parse to equal asts and run identically") {
    Rng rng(42);
    Rng input_rng(43);
    int checked = 0;
    for (int iter = 0; iter < 250; ++iter) {
        auto gen = generate_program(rng, static_cast<int>(rng.uniform_int(1, 8)));
        Program pi, pb;
        REQUIRE_NOTHROW(pi = parse(LanguageId::indent(), gen.indent_src));
        REQUIRE_NOTHROW(pb = parse(LanguageId::brace(), gen.brace_src));
        INFO(gen.indent_src);
        INFO(gen.brace_src);
        REQUIRE(ast_equal(pi.fn, pb.fn));
        REQUIRE(ast_equal(pb.fn, gen.fn));

        // balanced indentation tokens
        auto toks = tokenize(LanguageId::indent(), gen.indent_src);
        int bal = 0;
        for (const auto& t : toks) {
            if (t.kind == TokenKind::Indent) ++bal;
            if (t.kind == TokenKind::Dedent) --bal;
            REQUIRE(bal >= 0);
        }
        REQUIRE(bal == 0);

        for (int trial = 0; trial < 10; ++trial) {
            std::vector<Value> args;
            for (const auto& p : gen.fn.params) args.push_back(sample_value(p.type, input_rng));
            auto ra = execute(pi, args, 10.0);
            auto rb = execute(pb, args, 10.0);
            INFO("trial " << trial);
            REQUIRE(results_equal(ra, rb));
            REQUIRE(ra.status != RunResult::Status::TimedOut);
            REQUIRE(ra.status != RunResult::Status::Raised);
            ++checked;
        }
    }
    CHECK(checked == 2500);
}

TEST_CASE("generator is deterministic under a fixed seed") {
    Rng a(123), b(123);
    for (int i = 0; i < 20; ++i) {
        auto ga = generate_program(a, 6);
        auto gb = generate_program(b, 6);
        CHECK(ga.indent_src == gb.indent_src);
        CHECK(ga.brace_src == gb.brace_src);
    }
}

TEST_CASE("budget one produces a single-statement function") {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        auto gen = generate_program(rng, 1);
        CHECK(gen.fn.body.size() == 1);
        auto prog = parse(LanguageId::brace(), gen.brace_src);
        Rng irng(99);
        std::vector<Value> args;
        for (const auto& p : prog.fn.params) args.push_back(sample_value(p.type, irng));
        CHECK(execute(prog, args, 10.0).status == RunResult::Status::Ok);
    }
}

TEST_CASE("echo toolchain round-trips through external_run") {
    Toolchain tc;
    tc.name = "echo";
    tc.run_cmd = "cat > /dev/null; printf '{\"status\":\"ok\",\"value\":{\"type\":\"Int\",\"value\":7}}'";
    auto res = external_run(tc, "ignored", {Value::make_int(7)}, 5.0);
    REQUIRE(res.status == RunResult::Status::Ok);
    CHECK(res.value.i == 7);
}

TEST_CASE("missing toolchain command raises ToolchainMissing") {
    Toolchain tc;
    tc.name = "ghost";
    tc.run_cmd = "definitely-not-a-real-binary-12345";
    CHECK_THROWS_AS(external_run(tc, "src", {}, 5.0), ToolchainMissing);
}

TEST_CASE("external timeout kills the child") {
    Toolchain tc;
    tc.name = "sleeper";
    tc.run_cmd = "sleep 30";
    auto t0 = std::chrono::steady_clock::now();
    auto res = external_run(tc, "src", {}, 0.3);
    auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(res.status == RunResult::Status::TimedOut);
    CHECK(elapsed < 5.0);
}

TEST_CASE("compile failures map to ParseFailed") {
    Toolchain tc;
    tc.name = "nocompile";
    tc.compile_cmd = "sh -c 'echo bad >&2; exit 1'";
    tc.run_cmd = "cat";
    auto res = external_run(tc, "src", {}, 5.0);
    CHECK(res.status == RunResult::Status::ParseFailed);
}

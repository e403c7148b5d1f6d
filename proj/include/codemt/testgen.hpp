#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "codemt/extrun.hpp"
#include "codemt/interp.hpp"
#include "codemt/lex.hpp"
#include "codemt/parse.hpp"
#include "codemt/rng.hpp"

#include <json.hpp>

namespace codemt {

// ----------------------------- test cases -----------------------------

struct Signature {
    std::vector<Type> params;
    Type ret = Type::Void;
};

inline Signature signature_of(const Function& fn) {
    Signature sig;
    for (const auto& p : fn.params) sig.params.push_back(p.type);
    sig.ret = fn.return_type;
    return sig;
}

// A reference function, ten hardcoded inputs, and the expected comparison
// payloads: the return value, or the post-state of every mutable argument for
// in-place (void) functions.
struct TestCase {
    std::string id;
    LanguageId lang;
    FunctionRecord reference;
    Signature signature;
    std::vector<std::vector<Value>> inputs;
    std::vector<std::vector<Value>> expected;
    double timeout = 10.0;
};

// ----------------------------- input generation -----------------------------

namespace detail {

inline std::string random_string(Rng& rng, int charset) {
    static const std::string letters =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ ";
    static const std::string digits = "0123456789";
    static const std::string binary = "01";
    const std::string& cs = charset == 0 ? letters : (charset == 1 ? digits : binary);
    int len = static_cast<int>(rng.uniform_int(1, 20));
    std::string s;
    for (int i = 0; i < len; ++i) {
        s += cs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cs.size()) - 1))];
    }
    return s;
}

inline std::vector<std::int64_t> random_array(Rng& rng, int range) {
    std::int64_t lo = range == 0 ? 0 : (range == 1 ? -100 : 0);
    std::int64_t hi = range == 2 ? 1 : 100;
    int len = static_cast<int>(rng.uniform_int(1, 20));
    std::vector<std::int64_t> v;
    for (int i = 0; i < len; ++i) v.push_back(rng.uniform_int(lo, hi));
    return v;
}

}  // namespace detail

// Ten argument tuples per signature. String parameters cycle between the
// letters+space, digits, and {0,1} alphabets across inputs; integer arrays
// cycle the ranges {0..100}, {-100..100}, {0,1}. A no-argument signature gets
// a single empty tuple (output-only comparison).
inline std::vector<std::vector<Value>> generate_inputs(const Signature& sig, Rng& rng) {
    for (Type t : sig.params) {
        if (t == Type::Void || t == Type::Dyn) {
            throw UnsupportedType(std::string("cannot generate inputs for parameter type ") + type_name(t));
        }
    }
    if (sig.params.empty()) return {{}};
    std::vector<std::vector<Value>> tuples;
    for (int j = 0; j < 10; ++j) {
        std::vector<Value> args;
        for (Type t : sig.params) {
            switch (t) {
                case Type::Int: args.push_back(Value::make_int(rng.uniform_int(-100, 100))); break;
                case Type::Bool: args.push_back(Value::make_bool(rng.bernoulli(0.5))); break;
                case Type::Float: args.push_back(Value::make_float(rng.uniform() * 200.0 - 100.0)); break;
                case Type::Str: args.push_back(Value::make_str(detail::random_string(rng, j % 3))); break;
                case Type::IntArray: args.push_back(Value::make_array(detail::random_array(rng, j % 3))); break;
                default: throw UnsupportedType("unsupported parameter type");
            }
        }
        tuples.push_back(std::move(args));
    }
    return tuples;
}

// ----------------------------- execution backends -----------------------------

// Runs one candidate on one argument tuple under a remaining-time budget.
class CandidateRunner {
  public:
    virtual ~CandidateRunner() = default;
    virtual RunResult run(const LanguageId& lang, const std::string& source,
                          const std::vector<Value>& args, double timeout_s) = 0;
};

class BuiltinRunner : public CandidateRunner {
  public:
    RunResult run(const LanguageId& lang, const std::string& source, const std::vector<Value>& args,
                  double timeout_s) override {
        return run_source(lang, source, args, timeout_s);
    }
};

class ToolchainRunner : public CandidateRunner {
  public:
    explicit ToolchainRunner(Toolchain tc) : tc_(std::move(tc)) {}
    RunResult run(const LanguageId&, const std::string& source, const std::vector<Value>& args,
                  double timeout_s) override {
        return external_run(tc_, source, args, timeout_s);
    }

  private:
    Toolchain tc_;
};

inline double consumed_seconds(const RunResult& r) {
    if (r.steps_used > 0) return static_cast<double>(r.steps_used) / kStepsPerSecond;
    return static_cast<double>(r.wall_ms) / 1000.0;
}

// ----------------------------- expected payloads -----------------------------

inline std::vector<Value> comparison_payload(const Signature& sig, const RunResult& r) {
    if (sig.ret == Type::Void) return r.mutated_args;
    return {r.value};
}

inline bool value_equal_tolerant(const Value& a, const Value& b) {
    if (a.type != b.type) return false;
    if (a.type == Type::Float) {
        return std::fabs(a.f - b.f) <= 1e-6 * std::max(1.0, std::fabs(b.f));
    }
    return value_exact_equal(a, b);
}

inline bool payload_equal(const std::vector<Value>& got, const std::vector<Value>& want) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (!value_equal_tolerant(got[i], want[i])) return false;
    }
    return true;
}

// ----------------------------- building cases -----------------------------

// Runs the reference on freshly generated inputs and freezes the outputs. A
// case is rejected when the reference breaks the time budget, raises, or
// (for >= 1-argument functions) produces one identical payload everywhere --
// the automated stand-in for manually weeding out constant-output tests.
inline TestCase build_test_case(const FunctionRecord& reference, Rng& rng,
                                const Signature* known_signature = nullptr,
                                CandidateRunner* runner = nullptr) {
    BuiltinRunner builtin;
    if (!runner) runner = &builtin;

    TestCase tc;
    tc.id = reference.id;
    tc.lang = reference.lang;
    tc.reference = reference;
    if (known_signature) {
        tc.signature = *known_signature;
    } else {
        Program prog;
        try {
            prog = parse(reference.lang, reference.raw);
        } catch (const ParseFailed& e) {
            throw ReferenceError(std::string("reference does not parse: ") + e.what());
        }
        tc.signature = signature_of(prog.fn);
        for (Type t : tc.signature.params) {
            if (t == Type::Dyn) {
                throw UnsupportedType("signature needs explicit annotations; none on " + reference.id);
            }
        }
    }
    tc.inputs = generate_inputs(tc.signature, rng);

    double remaining = tc.timeout;
    for (const auto& args : tc.inputs) {
        if (remaining <= 0) throw ReferenceTimeout("reference exceeded the time budget: " + tc.id);
        RunResult r = runner->run(tc.lang, reference.raw, args, remaining);
        remaining -= consumed_seconds(r);
        switch (r.status) {
            case RunResult::Status::Ok: break;
            case RunResult::Status::TimedOut:
                throw ReferenceTimeout("reference timed out: " + tc.id);
            case RunResult::Status::ParseFailed:
                throw ReferenceError("reference does not parse: " + tc.id + ": " + r.message);
            case RunResult::Status::Raised:
                throw ReferenceError("reference raised: " + tc.id + ": " + r.message);
        }
        tc.expected.push_back(comparison_payload(tc.signature, r));
    }

    if (!tc.signature.params.empty()) {
        bool all_same = true;
        for (std::size_t i = 1; i < tc.expected.size(); ++i) {
            if (!payload_equal(tc.expected[i], tc.expected[0])) {
                all_same = false;
                break;
            }
        }
        if (all_same) throw DegenerateOutputs("constant outputs across all inputs: " + tc.id);
    }
    return tc;
}

// ----------------------------- outcomes -----------------------------

struct Outcome {
    enum class Category : std::uint8_t { Success, CompileError, RuntimeError, WrongOutput, Timeout };
    Category category = Category::Success;
    std::vector<bool> input_pass;
};

inline const char* category_name(Outcome::Category c) {
    switch (c) {
        case Outcome::Category::Success: return "Success";
        case Outcome::Category::CompileError: return "CompileError";
        case Outcome::Category::RuntimeError: return "RuntimeError";
        case Outcome::Category::WrongOutput: return "WrongOutput";
        case Outcome::Category::Timeout: return "Timeout";
    }
    return "?";
}

// Runs a candidate against every stored input under the shared time budget.
// Category precedence on mixed failures: CompileError > Timeout >
// RuntimeError > WrongOutput.
inline Outcome run_candidate(const TestCase& tc, const std::string& candidate_source,
                             CandidateRunner* runner = nullptr) {
    BuiltinRunner builtin;
    if (!runner) runner = &builtin;

    Outcome out;
    out.input_pass.assign(tc.inputs.size(), false);

    bool compile_error = false, timeout = false, runtime = false, wrong = false;
    double remaining = tc.timeout;
    for (std::size_t i = 0; i < tc.inputs.size(); ++i) {
        if (remaining <= 0) {
            timeout = true;
            break;
        }
        RunResult r = runner->run(tc.lang, candidate_source, tc.inputs[i], remaining);
        remaining -= consumed_seconds(r);
        if (r.status == RunResult::Status::ParseFailed) {
            compile_error = true;
            break;
        }
        if (r.status == RunResult::Status::TimedOut) {
            timeout = true;
            break;
        }
        if (r.status == RunResult::Status::Raised) {
            runtime = true;
            continue;
        }
        if (payload_equal(comparison_payload(tc.signature, r), tc.expected[i])) {
            out.input_pass[i] = true;
        } else {
            wrong = true;
        }
    }

    bool all_pass = true;
    for (bool p : out.input_pass) all_pass &= p;
    if (compile_error) out.category = Outcome::Category::CompileError;
    else if (timeout) out.category = Outcome::Category::Timeout;
    else if (runtime) out.category = Outcome::Category::RuntimeError;
    else if (wrong) out.category = Outcome::Category::WrongOutput;
    else if (all_pass) out.category = Outcome::Category::Success;
    else out.category = Outcome::Category::WrongOutput;
    return out;
}

// ----------------------------- manifest IO -----------------------------

inline nlohmann::json test_case_to_json(const TestCase& tc) {
    nlohmann::json j;
    j["id"] = tc.id;
    j["lang"] = tc.lang.name;
    j["reference"] = tc.reference.raw;
    j["timeout"] = tc.timeout;
    j["signature"] = nlohmann::json::object();
    j["signature"]["ret"] = type_name(tc.signature.ret);
    j["signature"]["params"] = nlohmann::json::array();
    for (Type t : tc.signature.params) j["signature"]["params"].push_back(type_name(t));
    j["inputs"] = nlohmann::json::array();
    for (const auto& tuple : tc.inputs) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& v : tuple) row.push_back(value_to_json(v));
        j["inputs"].push_back(row);
    }
    j["expected"] = nlohmann::json::array();
    for (const auto& payload : tc.expected) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& v : payload) row.push_back(value_to_json(v));
        j["expected"].push_back(row);
    }
    return j;
}

inline Type type_from_name(const std::string& name) {
    if (name == "Int") return Type::Int;
    if (name == "Float") return Type::Float;
    if (name == "Bool") return Type::Bool;
    if (name == "String") return Type::Str;
    if (name == "IntArray") return Type::IntArray;
    if (name == "Void") return Type::Void;
    throw DataError("unknown type name: " + name);
}

inline TestCase test_case_from_json(const nlohmann::json& j) {
    TestCase tc;
    tc.id = j.at("id").get<std::string>();
    tc.lang = LanguageId(j.at("lang").get<std::string>());
    tc.reference.lang = tc.lang;
    tc.reference.id = tc.id;
    tc.reference.raw = j.at("reference").get<std::string>();
    tc.reference.tokens = tokenize(tc.lang, tc.reference.raw);
    tc.timeout = j.at("timeout").get<double>();
    tc.signature.ret = type_from_name(j.at("signature").at("ret").get<std::string>());
    for (const auto& p : j.at("signature").at("params")) {
        tc.signature.params.push_back(type_from_name(p.get<std::string>()));
    }
    for (const auto& row : j.at("inputs")) {
        std::vector<Value> tuple;
        for (const auto& v : row) tuple.push_back(value_from_json(v));
        tc.inputs.push_back(std::move(tuple));
    }
    for (const auto& row : j.at("expected")) {
        std::vector<Value> payload;
        for (const auto& v : row) payload.push_back(value_from_json(v));
        tc.expected.push_back(std::move(payload));
    }
    return tc;
}

}  // namespace codemt

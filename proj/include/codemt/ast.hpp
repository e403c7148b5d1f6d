#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "codemt/lex.hpp"
#include "codemt/util.hpp"

#include <json.hpp>

namespace codemt {

// ----------------------------- runtime values -----------------------------

enum class Type : std::uint8_t { Int, Float, Bool, Str, IntArray, Void, Dyn };

inline const char* type_name(Type t) {
    switch (t) {
        case Type::Int: return "Int";
        case Type::Float: return "Float";
        case Type::Bool: return "Bool";
        case Type::Str: return "String";
        case Type::IntArray: return "IntArray";
        case Type::Void: return "Void";
        case Type::Dyn: return "Dyn";
    }
    return "?";
}

// Arrays alias on assignment in both surface languages; execution boundaries
// deep-copy so callers never share state with the interpreter.
struct Value {
    Type type = Type::Void;
    std::int64_t i = 0;
    double f = 0.0;
    bool b = false;
    std::string s;
    std::shared_ptr<std::vector<std::int64_t>> arr;

    static Value make_int(std::int64_t v) {
        Value x;
        x.type = Type::Int;
        x.i = v;
        return x;
    }
    static Value make_float(double v) {
        Value x;
        x.type = Type::Float;
        x.f = v;
        return x;
    }
    static Value make_bool(bool v) {
        Value x;
        x.type = Type::Bool;
        x.b = v;
        return x;
    }
    static Value make_str(std::string v) {
        Value x;
        x.type = Type::Str;
        x.s = std::move(v);
        return x;
    }
    static Value make_array(std::vector<std::int64_t> v) {
        Value x;
        x.type = Type::IntArray;
        x.arr = std::make_shared<std::vector<std::int64_t>>(std::move(v));
        return x;
    }
    static Value make_void() { return Value{}; }

    Value deep_copy() const {
        Value v = *this;
        if (type == Type::IntArray && arr) v.arr = std::make_shared<std::vector<std::int64_t>>(*arr);
        return v;
    }
};

inline bool value_exact_equal(const Value& a, const Value& b) {
    if (a.type != b.type) return false;
    switch (a.type) {
        case Type::Int: return a.i == b.i;
        case Type::Float: return a.f == b.f;
        case Type::Bool: return a.b == b.b;
        case Type::Str: return a.s == b.s;
        case Type::IntArray: return a.arr && b.arr && *a.arr == *b.arr;
        case Type::Void: return true;
        case Type::Dyn: return false;
    }
    return false;
}

inline nlohmann::json value_to_json(const Value& v) {
    nlohmann::json j;
    j["type"] = type_name(v.type);
    switch (v.type) {
        case Type::Int: j["value"] = v.i; break;
        case Type::Float: j["value"] = v.f; break;
        case Type::Bool: j["value"] = v.b; break;
        case Type::Str: j["value"] = v.s; break;
        case Type::IntArray: j["value"] = v.arr ? *v.arr : std::vector<std::int64_t>{}; break;
        case Type::Void: break;
        case Type::Dyn: break;
    }
    return j;
}

inline Value value_from_json(const nlohmann::json& j) {
    const std::string t = j.at("type").get<std::string>();
    if (t == "Int") return Value::make_int(j.at("value").get<std::int64_t>());
    if (t == "Float") return Value::make_float(j.at("value").get<double>());
    if (t == "Bool") return Value::make_bool(j.at("value").get<bool>());
    if (t == "String") return Value::make_str(j.at("value").get<std::string>());
    if (t == "IntArray") return Value::make_array(j.at("value").get<std::vector<std::int64_t>>());
    if (t == "Void") return Value::make_void();
    throw DataError("unknown value type tag: " + t);
}

// ----------------------------- abstract syntax -----------------------------

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp : std::uint8_t { Neg, Not };
enum class Builtin : std::uint8_t { Len, Abs, Min, Max, Push };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind : std::uint8_t {
        IntLit,
        FloatLit,
        BoolLit,
        StrLit,
        ArrayLit,
        Var,
        Binary,
        Unary,
        Index,
        Call,
    };
    Kind kind = Kind::IntLit;

    std::int64_t int_val = 0;
    double float_val = 0.0;
    bool bool_val = false;
    std::string str_val;   // StrLit content / float literal spelling
    std::string name;      // Var
    BinOp bin = BinOp::Add;
    UnOp un = UnOp::Neg;
    Builtin builtin = Builtin::Len;
    ExprPtr lhs, rhs;
    std::vector<ExprPtr> args;  // Call / ArrayLit
};

inline ExprPtr make_expr(Expr::Kind kind) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    return e;
}

inline ExprPtr int_lit(std::int64_t v) {
    auto e = make_expr(Expr::Kind::IntLit);
    e->int_val = v;
    return e;
}
inline ExprPtr float_lit(double v, std::string spelling) {
    auto e = make_expr(Expr::Kind::FloatLit);
    e->float_val = v;
    e->str_val = std::move(spelling);
    return e;
}
inline ExprPtr bool_lit(bool v) {
    auto e = make_expr(Expr::Kind::BoolLit);
    e->bool_val = v;
    return e;
}
inline ExprPtr str_lit(std::string v) {
    auto e = make_expr(Expr::Kind::StrLit);
    e->str_val = std::move(v);
    return e;
}
inline ExprPtr var_ref(std::string name) {
    auto e = make_expr(Expr::Kind::Var);
    e->name = std::move(name);
    return e;
}
inline ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r) {
    auto e = make_expr(Expr::Kind::Binary);
    e->bin = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    return e;
}
inline ExprPtr unary(UnOp op, ExprPtr x) {
    auto e = make_expr(Expr::Kind::Unary);
    e->un = op;
    e->lhs = std::move(x);
    return e;
}
inline ExprPtr index_expr(ExprPtr base, ExprPtr idx) {
    auto e = make_expr(Expr::Kind::Index);
    e->lhs = std::move(base);
    e->rhs = std::move(idx);
    return e;
}
inline ExprPtr call(Builtin b, std::vector<ExprPtr> args) {
    auto e = make_expr(Expr::Kind::Call);
    e->builtin = b;
    e->args = std::move(args);
    return e;
}

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
    enum class Kind : std::uint8_t {
        Decl,
        Assign,
        IndexAssign,
        If,
        While,
        ForRange,
        Return,
        ExprStmt,
        Pass,
    };
    Kind kind = Stmt::Kind::Pass;

    std::string name;                // Decl/Assign/IndexAssign target, ForRange loop var
    Type decl_type = Type::Dyn;      // Decl only; surface-irrelevant
    ExprPtr a, b, c;                 // see per-kind usage below
    bool ascending = true;           // ForRange direction
    std::vector<StmtPtr> body, else_body;
};
// Decl:        name, decl_type, a = initializer
// Assign:      name, a = value
// IndexAssign: name, a = index, b = value
// If:          a = condition, body, else_body
// While:       a = condition, body
// ForRange:    name, a = start, b = stop, c = step (nonnegative), ascending
// Return:      a = value or null (bare return)
// ExprStmt:    a = expression (builtin call with side effect)

struct Param {
    std::string name;
    Type type = Type::Dyn;  // annotated in the brace surface only
};

struct Function {
    std::string name;
    std::vector<Param> params;
    Type return_type = Type::Dyn;
    std::vector<StmtPtr> body;
};

struct Program {
    LanguageId lang;
    Function fn;
};

// ----------------------------- structural equality -----------------------------

// Compares two functions ignoring surface-only information: declared types
// on params, locals, and the return annotation.
inline bool expr_equal(const Expr* a, const Expr* b);

inline bool expr_list_equal(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!expr_equal(a[i].get(), b[i].get())) return false;
    }
    return true;
}

inline bool expr_equal(const Expr* a, const Expr* b) {
    if (a == nullptr || b == nullptr) return a == b;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case Expr::Kind::IntLit: return a->int_val == b->int_val;
        case Expr::Kind::FloatLit: return a->float_val == b->float_val;
        case Expr::Kind::BoolLit: return a->bool_val == b->bool_val;
        case Expr::Kind::StrLit: return a->str_val == b->str_val;
        case Expr::Kind::ArrayLit: return expr_list_equal(a->args, b->args);
        case Expr::Kind::Var: return a->name == b->name;
        case Expr::Kind::Binary:
            return a->bin == b->bin && expr_equal(a->lhs.get(), b->lhs.get()) &&
                   expr_equal(a->rhs.get(), b->rhs.get());
        case Expr::Kind::Unary: return a->un == b->un && expr_equal(a->lhs.get(), b->lhs.get());
        case Expr::Kind::Index:
            return expr_equal(a->lhs.get(), b->lhs.get()) && expr_equal(a->rhs.get(), b->rhs.get());
        case Expr::Kind::Call: return a->builtin == b->builtin && expr_list_equal(a->args, b->args);
    }
    return false;
}

inline bool stmt_equal(const Stmt* a, const Stmt* b);

inline bool block_equal(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!stmt_equal(a[i].get(), b[i].get())) return false;
    }
    return true;
}

inline bool stmt_equal(const Stmt* a, const Stmt* b) {
    if (a == nullptr || b == nullptr) return a == b;
    if (a->kind != b->kind) return false;
    if (a->name != b->name) return false;
    if (a->ascending != b->ascending) return false;
    return expr_equal(a->a.get(), b->a.get()) && expr_equal(a->b.get(), b->b.get()) &&
           expr_equal(a->c.get(), b->c.get()) && block_equal(a->body, b->body) &&
           block_equal(a->else_body, b->else_body);
}

inline bool ast_equal(const Function& a, const Function& b) {
    if (a.name != b.name) return false;
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        if (a.params[i].name != b.params[i].name) return false;
    }
    return block_equal(a.body, b.body);
}

// ----------------------------- deep copy -----------------------------

inline ExprPtr clone_expr(const Expr* e) {
    if (!e) return nullptr;
    auto out = std::make_unique<Expr>();
    out->kind = e->kind;
    out->int_val = e->int_val;
    out->float_val = e->float_val;
    out->bool_val = e->bool_val;
    out->str_val = e->str_val;
    out->name = e->name;
    out->bin = e->bin;
    out->un = e->un;
    out->builtin = e->builtin;
    out->lhs = clone_expr(e->lhs.get());
    out->rhs = clone_expr(e->rhs.get());
    for (const auto& a : e->args) out->args.push_back(clone_expr(a.get()));
    return out;
}

inline StmtPtr clone_stmt(const Stmt* s) {
    if (!s) return nullptr;
    auto out = std::make_unique<Stmt>();
    out->kind = s->kind;
    out->name = s->name;
    out->decl_type = s->decl_type;
    out->ascending = s->ascending;
    out->a = clone_expr(s->a.get());
    out->b = clone_expr(s->b.get());
    out->c = clone_expr(s->c.get());
    for (const auto& t : s->body) out->body.push_back(clone_stmt(t.get()));
    for (const auto& t : s->else_body) out->else_body.push_back(clone_stmt(t.get()));
    return out;
}

inline Function clone_function(const Function& f) {
    Function out;
    out.name = f.name;
    out.params = f.params;
    out.return_type = f.return_type;
    for (const auto& s : f.body) out.body.push_back(clone_stmt(s.get()));
    return out;
}

}  // namespace codemt

#pragma once

#include <string>
#include <vector>

#include "codemt/ast.hpp"
#include "codemt/rng.hpp"

namespace codemt {

// ----------------------------- source emission -----------------------------

namespace detail {

inline std::string escape_string(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c; break;
        }
    }
    return out;
}

inline int expr_prec(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Binary:
            switch (e.bin) {
                case BinOp::Or: return 1;
                case BinOp::And: return 2;
                case BinOp::Eq:
                case BinOp::Ne:
                case BinOp::Lt:
                case BinOp::Le:
                case BinOp::Gt:
                case BinOp::Ge: return 4;
                case BinOp::Add:
                case BinOp::Sub: return 5;
                default: return 6;
            }
        case Expr::Kind::Unary: return e.un == UnOp::Not ? 3 : 7;
        default: return 9;
    }
}

inline std::string bin_op_text(BinOp op, bool indent) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Mod: return "%";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return indent ? "and" : "&&";
        case BinOp::Or: return indent ? "or" : "||";
    }
    return "?";
}

inline std::string emit_expr(const Expr& e, bool indent);

inline std::string emit_child(const Expr& child, int parent_prec, bool right, bool indent) {
    int prec = expr_prec(child);
    bool parens = right ? prec <= parent_prec : prec < parent_prec;
    // comparisons do not chain; parenthesize same-precedence children
    if (!right && prec == 4 && parent_prec == 4) parens = true;
    std::string s = emit_expr(child, indent);
    return parens ? "(" + s + ")" : s;
}

inline std::string emit_expr(const Expr& e, bool indent) {
    switch (e.kind) {
        case Expr::Kind::IntLit: return std::to_string(e.int_val);
        case Expr::Kind::FloatLit: return e.str_val.empty() ? std::to_string(e.float_val) : e.str_val;
        case Expr::Kind::BoolLit:
            return indent ? (e.bool_val ? "True" : "False") : (e.bool_val ? "true" : "false");
        case Expr::Kind::StrLit: return "\"" + escape_string(e.str_val) + "\"";
        case Expr::Kind::ArrayLit: {
            std::string s = "[";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += emit_expr(*e.args[i], indent);
            }
            return s + "]";
        }
        case Expr::Kind::Var: return e.name;
        case Expr::Kind::Binary: {
            int prec = expr_prec(e);
            return emit_child(*e.lhs, prec, false, indent) + " " + bin_op_text(e.bin, indent) + " " +
                   emit_child(*e.rhs, prec, true, indent);
        }
        case Expr::Kind::Unary: {
            std::string inner = emit_child(*e.lhs, expr_prec(e), true, indent);
            if (e.un == UnOp::Neg) return "-" + inner;
            return indent ? "not " + inner : "!" + inner;
        }
        case Expr::Kind::Index:
            return emit_child(*e.lhs, 8, false, indent) + "[" + emit_expr(*e.rhs, indent) + "]";
        case Expr::Kind::Call: {
            if (e.builtin == Builtin::Push) {
                std::string target = emit_expr(*e.args[0], indent);
                std::string item = emit_expr(*e.args[1], indent);
                return indent ? target + ".append(" + item + ")" : "push(" + target + ", " + item + ")";
            }
            const char* name = e.builtin == Builtin::Len ? "len"
                               : e.builtin == Builtin::Abs ? "abs"
                               : e.builtin == Builtin::Min ? "min"
                                                           : "max";
            std::string s = std::string(name) + "(";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += emit_expr(*e.args[i], indent);
            }
            return s + ")";
        }
    }
    return "?";
}

inline const char* brace_type_name(Type t) {
    switch (t) {
        case Type::Int: return "int";
        case Type::Float: return "float";
        case Type::Bool: return "bool";
        case Type::Str: return "str";
        case Type::IntArray: return "arr";
        case Type::Void: return "void";
        case Type::Dyn: return "int";  // untyped tree rendered with a default
    }
    return "int";
}

struct Emitter {
    bool indent_lang;
    std::string out;
    int level = 0;

    void pad() { out.append(static_cast<std::size_t>(level) * 4, ' '); }
    void line(const std::string& s) {
        pad();
        out += s;
        out += '\n';
    }

    std::string expr(const Expr& e) { return emit_expr(e, indent_lang); }

    void range_head(const Stmt& s) {
        if (indent_lang) {
            std::string head = "for " + s.name + " in range(" + expr(*s.a) + ", " + expr(*s.b);
            bool unit_step = s.c->kind == Expr::Kind::IntLit && s.c->int_val == 1;
            if (!s.ascending) {
                head += ", -" + expr(*s.c);
            } else if (!unit_step) {
                head += ", " + expr(*s.c);
            }
            head += "):";
            line(head);
        } else {
            std::string head = "for (int " + s.name + " = " + expr(*s.a) + "; " + s.name +
                               (s.ascending ? " < " : " > ") + expr(*s.b) + "; " + s.name + " = " +
                               s.name + (s.ascending ? " + " : " - ") + expr(*s.c) + ") {";
            line(head);
        }
    }

    void block(const std::vector<StmtPtr>& body) {
        ++level;
        for (const auto& s : body) stmt(*s);
        --level;
        if (!indent_lang) line("}");
    }

    void if_chain(const Stmt& s) {
        if (indent_lang) {
            line("if " + expr(*s.a) + ":");
            block(s.body);
            const Stmt* cur = &s;
            while (!cur->else_body.empty()) {
                if (cur->else_body.size() == 1 && cur->else_body[0]->kind == Stmt::Kind::If) {
                    cur = cur->else_body[0].get();
                    line("elif " + expr(*cur->a) + ":");
                    block(cur->body);
                } else {
                    line("else:");
                    block(cur->else_body);
                    break;
                }
            }
        } else {
            line("if (" + expr(*s.a) + ") {");
            block(s.body);
            const Stmt* cur = &s;
            while (!cur->else_body.empty()) {
                // splice "} else ... {" onto the closing brace line
                out.erase(out.size() - 1);  // newline after "}"
                if (cur->else_body.size() == 1 && cur->else_body[0]->kind == Stmt::Kind::If) {
                    cur = cur->else_body[0].get();
                    out += " else if (" + expr(*cur->a) + ") {\n";
                    block(cur->body);
                } else {
                    out += " else {\n";
                    block(cur->else_body);
                    break;
                }
            }
        }
    }

    void stmt(const Stmt& s) {
        switch (s.kind) {
            case Stmt::Kind::Decl:
                if (indent_lang) {
                    line(s.name + " = " + expr(*s.a));
                } else {
                    line(std::string(brace_type_name(s.decl_type)) + " " + s.name + " = " + expr(*s.a) + ";");
                }
                break;
            case Stmt::Kind::Assign:
                line(s.name + " = " + expr(*s.a) + (indent_lang ? "" : ";"));
                break;
            case Stmt::Kind::IndexAssign:
                line(s.name + "[" + expr(*s.a) + "] = " + expr(*s.b) + (indent_lang ? "" : ";"));
                break;
            case Stmt::Kind::If:
                if_chain(s);
                break;
            case Stmt::Kind::While:
                line(indent_lang ? "while " + expr(*s.a) + ":" : "while (" + expr(*s.a) + ") {");
                block(s.body);
                break;
            case Stmt::Kind::ForRange:
                range_head(s);
                block(s.body);
                break;
            case Stmt::Kind::Return:
                if (s.a) {
                    line("return " + expr(*s.a) + (indent_lang ? "" : ";"));
                } else {
                    line(indent_lang ? "return" : "return;");
                }
                break;
            case Stmt::Kind::ExprStmt:
                line(expr(*s.a) + (indent_lang ? "" : ";"));
                break;
            case Stmt::Kind::Pass:
                if (indent_lang) line("pass");
                break;
        }
    }
};

}  // namespace detail

// Comment lines inserted before top-level body statements; the same plan is
// rendered in both surfaces.
using CommentPlan = std::vector<std::pair<int, std::string>>;

inline std::string emit_source(const Function& fn, const LanguageId& lang,
                               const CommentPlan& comments = {}) {
    detail::Emitter em{lang.is_indent(), {}, 0};
    auto comment_at = [&](int idx) {
        for (const auto& [at, text] : comments) {
            if (at == idx) {
                em.pad();
                em.out += (em.indent_lang ? "# " : "// ") + text + "\n";
            }
        }
    };
    if (em.indent_lang) {
        std::string head = "def " + fn.name + "(";
        for (std::size_t i = 0; i < fn.params.size(); ++i) {
            if (i) head += ", ";
            head += fn.params[i].name;
        }
        head += "):";
        em.line(head);
        em.level = 1;
        for (std::size_t i = 0; i < fn.body.size(); ++i) {
            comment_at(static_cast<int>(i));
            em.stmt(*fn.body[i]);
        }
    } else {
        std::string head = std::string(detail::brace_type_name(fn.return_type)) + " " + fn.name + "(";
        for (std::size_t i = 0; i < fn.params.size(); ++i) {
            if (i) head += ", ";
            head += std::string(detail::brace_type_name(fn.params[i].type)) + " " + fn.params[i].name;
        }
        head += ") {";
        em.line(head);
        em.level = 1;
        for (std::size_t i = 0; i < fn.body.size(); ++i) {
            comment_at(static_cast<int>(i));
            em.stmt(*fn.body[i]);
        }
        em.level = 0;
        em.line("}");
    }
    return em.out;
}

// ----------------------------- program generation -----------------------------

struct GeneratedProgram {
    Function fn;
    std::string indent_src;
    std::string brace_src;
};

// Samples a well-typed function over the shared core and renders both surface
// forms. Loops are bounded by construction (counted ranges, or while loops
// with strictly monotone counters), index accesses stay inside loop bounds,
// and division is only by nonzero constants, so generated references run to
// completion on any argument tuple.
class ProgramGenerator {
  public:
    explicit ProgramGenerator(Rng& rng, bool with_comments = true)
        : rng_(rng), with_comments_(with_comments) {}

    GeneratedProgram generate(int size_budget) {
        if (size_budget < 1) size_budget = 1;
        for (int attempt = 0; attempt < 64; ++attempt) {
            GeneratedProgram p = generate_once(size_budget);
            std::size_t core = tokenize(LanguageId::indent(), p.indent_src).size();
            std::size_t brace = tokenize(LanguageId::brace(), p.brace_src).size();
            if (core <= 110 && brace <= 110) return p;
        }
        throw Error("program generator failed to fit the size budget");
    }

  private:
    Rng& rng_;
    bool with_comments_;

    std::vector<std::string> int_vars_, arr_vars_, str_vars_, float_vars_, bool_vars_;

    std::string pick(const std::vector<std::string>& pool) { return rng_.choice(pool); }

    std::string fresh_name() {
        static const std::vector<std::string> verbs = {"sum",  "count", "scan", "fold", "track",
                                                       "clip", "rate",  "mark", "pick", "flip",
                                                       "trim", "pack",  "probe", "tally", "weigh"};
        static const std::vector<std::string> nouns = {"items", "vals",  "data", "seq",   "parts",
                                                       "span",  "cells", "bits", "chars", "words",
                                                       "steps", "score", "total", "units", "marks"};
        return pick(verbs) + "_" + pick(nouns);
    }

    // -------- typed leaf expressions --------

    ExprPtr int_leaf() {
        double roll = rng_.uniform();
        if (roll < 0.5 && !int_vars_.empty()) return var_ref(pick(int_vars_));
        return int_lit(rng_.uniform_int(0, 10));
    }

    ExprPtr int_expr(int depth) {
        if (depth <= 0) return int_leaf();
        double roll = rng_.uniform();
        if (roll < 0.35) return int_leaf();
        if (roll < 0.60) {
            BinOp op = rng_.bernoulli(0.5) ? BinOp::Add : (rng_.bernoulli(0.5) ? BinOp::Sub : BinOp::Mul);
            return binary(op, int_expr(depth - 1), int_leaf());
        }
        if (roll < 0.72) return binary(BinOp::Mod, int_leaf(), int_lit(rng_.uniform_int(2, 9)));
        if (roll < 0.82) return binary(BinOp::Div, int_leaf(), int_lit(rng_.uniform_int(2, 9)));
        if (roll < 0.92) return call(Builtin::Abs, args1(int_leaf()));
        Builtin b = rng_.bernoulli(0.5) ? Builtin::Min : Builtin::Max;
        return call(b, args2(int_leaf(), int_leaf()));
    }

    ExprPtr int_pred(ExprPtr subject) {
        double roll = rng_.uniform();
        if (roll < 0.4) {
            return binary(BinOp::Eq,
                          binary(BinOp::Mod, std::move(subject), int_lit(rng_.uniform_int(2, 5))),
                          int_lit(rng_.uniform_int(0, 1)));
        }
        BinOp op = roll < 0.6 ? BinOp::Gt : (roll < 0.8 ? BinOp::Lt : (roll < 0.9 ? BinOp::Ge : BinOp::Ne));
        return binary(op, std::move(subject), int_lit(rng_.uniform_int(-10, 10)));
    }

    static std::vector<ExprPtr> args1(ExprPtr a) {
        std::vector<ExprPtr> v;
        v.push_back(std::move(a));
        return v;
    }
    static std::vector<ExprPtr> args2(ExprPtr a, ExprPtr b) {
        std::vector<ExprPtr> v;
        v.push_back(std::move(a));
        v.push_back(std::move(b));
        return v;
    }

    StmtPtr decl(Type t, const std::string& name, ExprPtr init) {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Decl;
        s->decl_type = t;
        s->name = name;
        s->a = std::move(init);
        return s;
    }
    StmtPtr assign(const std::string& name, ExprPtr value) {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Assign;
        s->name = name;
        s->a = std::move(value);
        return s;
    }
    StmtPtr ret(ExprPtr value) {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Return;
        s->a = std::move(value);
        return s;
    }
    StmtPtr if_stmt(ExprPtr cond, std::vector<StmtPtr> then_body, std::vector<StmtPtr> else_body = {}) {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::If;
        s->a = std::move(cond);
        s->body = std::move(then_body);
        s->else_body = std::move(else_body);
        return s;
    }
    StmtPtr for_range(const std::string& var, ExprPtr start, ExprPtr stop, ExprPtr step, bool asc,
                      std::vector<StmtPtr> body) {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::ForRange;
        s->name = var;
        s->a = std::move(start);
        s->b = std::move(stop);
        s->c = std::move(step);
        s->ascending = asc;
        s->body = std::move(body);
        return s;
    }

    static std::vector<StmtPtr> one(StmtPtr s) {
        std::vector<StmtPtr> v;
        v.push_back(std::move(s));
        return v;
    }
    static std::vector<StmtPtr> two(StmtPtr a, StmtPtr b) {
        std::vector<StmtPtr> v;
        v.push_back(std::move(a));
        v.push_back(std::move(b));
        return v;
    }

    // -------- accumulator updates inside an array loop --------

    StmtPtr array_update(const std::string& acc, const std::string& arr, const std::string& idx) {
        auto elem = [&] { return index_expr(var_ref(arr), var_ref(idx)); };
        double roll = rng_.uniform();
        if (roll < 0.30) {
            return assign(acc, binary(BinOp::Add, var_ref(acc), elem()));
        }
        if (roll < 0.45) {
            return assign(acc, binary(BinOp::Add, var_ref(acc),
                                      binary(BinOp::Mul, elem(), int_lit(rng_.uniform_int(2, 5)))));
        }
        if (roll < 0.60) {
            Builtin b = rng_.bernoulli(0.5) ? Builtin::Min : Builtin::Max;
            return assign(acc, call(b, args2(var_ref(acc), elem())));
        }
        if (roll < 0.80) {
            auto cond = int_pred(elem());
            auto then_s = assign(acc, binary(BinOp::Add, var_ref(acc),
                                             rng_.bernoulli(0.5) ? elem() : int_lit(1)));
            if (rng_.bernoulli(0.4)) {
                auto else_s = assign(acc, binary(BinOp::Sub, var_ref(acc), int_lit(rng_.uniform_int(1, 3))));
                return if_stmt(std::move(cond), one(std::move(then_s)), one(std::move(else_s)));
            }
            return if_stmt(std::move(cond), one(std::move(then_s)));
        }
        if (roll < 0.90) {
            return assign(acc, binary(BinOp::Add, var_ref(acc),
                                      binary(BinOp::Mod, elem(), int_lit(rng_.uniform_int(2, 7)))));
        }
        return assign(acc, binary(BinOp::Sub, var_ref(acc), elem()));
    }

    ExprPtr final_int_result(const std::string& acc) {
        double roll = rng_.uniform();
        if (roll < 0.55) return var_ref(acc);
        if (roll < 0.75) {
            return binary(BinOp::Add, binary(BinOp::Mul, var_ref(acc), int_lit(rng_.uniform_int(2, 4))),
                          int_lit(rng_.uniform_int(0, 5)));
        }
        if (roll < 0.9) return binary(BinOp::Mod, var_ref(acc), int_lit(rng_.uniform_int(2, 9)));
        return call(Builtin::Abs, args1(var_ref(acc)));
    }

    void maybe_post_adjust(std::vector<StmtPtr>& body, const std::string& acc) {
        if (!rng_.bernoulli(0.35)) return;
        auto cond = int_pred(var_ref(acc));
        BinOp op = rng_.bernoulli(0.5) ? BinOp::Add : BinOp::Sub;
        body.push_back(if_stmt(std::move(cond),
                               one(assign(acc, binary(op, var_ref(acc), int_lit(rng_.uniform_int(1, 9)))))));
    }

    // -------- function shapes --------

    Function shape_expr_only() {
        Function fn;
        int np = static_cast<int>(rng_.uniform_int(1, 2));
        static const std::vector<std::string> names = {"n", "k", "m", "d", "t"};
        for (int i = 0; i < np; ++i) {
            fn.params.push_back({names[static_cast<std::size_t>(i)], Type::Int});
            int_vars_.push_back(names[static_cast<std::size_t>(i)]);
        }
        if (rng_.bernoulli(0.25)) {
            fn.return_type = Type::Bool;
            fn.body.push_back(ret(int_pred(int_expr(1))));
        } else {
            fn.return_type = Type::Int;
            fn.body.push_back(ret(int_expr(2)));
        }
        return fn;
    }

    Function shape_array_fold() {
        Function fn;
        std::string arr = pick({"a", "xs", "nums", "vals", "data"});
        fn.params.push_back({arr, Type::IntArray});
        arr_vars_.push_back(arr);
        bool with_k = rng_.bernoulli(0.4);
        if (with_k) {
            std::string k = pick({"k", "t", "d"});
            fn.params.push_back({k, Type::Int});
            int_vars_.push_back(k);
        }
        fn.return_type = Type::Int;
        std::string acc = pick({"total", "res", "count", "acc", "best"});
        ExprPtr init = with_k && rng_.bernoulli(0.3) ? var_ref(fn.params[1].name)
                                                     : int_lit(rng_.uniform_int(0, 1));
        fn.body.push_back(decl(Type::Int, acc, std::move(init)));
        int_vars_.push_back(acc);

        std::string idx = pick({"i", "j"});
        int_vars_.push_back(idx);
        std::vector<StmtPtr> loop_body;
        loop_body.push_back(array_update(acc, arr, idx));
        if (rng_.bernoulli(0.3)) loop_body.push_back(array_update(acc, arr, idx));
        bool reversed = rng_.bernoulli(0.15);
        if (reversed) {
            fn.body.push_back(for_range(idx,
                                        binary(BinOp::Sub, call(Builtin::Len, args1(var_ref(arr))), int_lit(1)),
                                        int_lit(-1), int_lit(1), false, std::move(loop_body)));
        } else {
            bool stride = rng_.bernoulli(0.15);
            fn.body.push_back(for_range(idx, int_lit(0), call(Builtin::Len, args1(var_ref(arr))),
                                        int_lit(stride ? 2 : 1), true, std::move(loop_body)));
        }
        maybe_post_adjust(fn.body, acc);
        fn.body.push_back(ret(final_int_result(acc)));
        return fn;
    }

    Function shape_array_map() {
        Function fn;
        std::string arr = pick({"a", "xs", "nums", "vals", "data"});
        fn.params.push_back({arr, Type::IntArray});
        arr_vars_.push_back(arr);
        bool with_k = rng_.bernoulli(0.5);
        if (with_k) {
            std::string k = pick({"k", "t", "d"});
            fn.params.push_back({k, Type::Int});
            int_vars_.push_back(k);
        }
        fn.return_type = Type::Void;
        std::string idx = pick({"i", "j"});
        int_vars_.push_back(idx);
        auto elem = [&] { return index_expr(var_ref(arr), var_ref(idx)); };
        auto idx_assign = [&](ExprPtr value) {
            auto s = std::make_unique<Stmt>();
            s->kind = Stmt::Kind::IndexAssign;
            s->name = arr;
            s->a = var_ref(idx);
            s->b = std::move(value);
            return s;
        };
        std::vector<StmtPtr> loop_body;
        double roll = rng_.uniform();
        if (roll < 0.35) {
            loop_body.push_back(idx_assign(binary(
                BinOp::Add, binary(BinOp::Mul, elem(), int_lit(rng_.uniform_int(2, 4))),
                with_k ? var_ref(fn.params[1].name) : int_lit(rng_.uniform_int(0, 6)))));
        } else if (roll < 0.6) {
            loop_body.push_back(idx_assign(call(Builtin::Abs, args1(elem()))));
        } else if (roll < 0.8) {
            Builtin b = rng_.bernoulli(0.5) ? Builtin::Min : Builtin::Max;
            loop_body.push_back(idx_assign(call(
                b, args2(elem(), with_k ? var_ref(fn.params[1].name) : int_lit(rng_.uniform_int(-5, 9))))));
        } else {
            loop_body.push_back(if_stmt(int_pred(elem()), one(idx_assign(int_expr(0)))));
        }
        fn.body.push_back(for_range(idx, int_lit(0), call(Builtin::Len, args1(var_ref(arr))), int_lit(1),
                                    true, std::move(loop_body)));
        return fn;
    }

    Function shape_array_reverse() {
        Function fn;
        std::string arr = pick({"a", "xs", "vals", "data"});
        fn.params.push_back({arr, Type::IntArray});
        fn.return_type = Type::Void;
        // i from 0 to len/2: swap a[i], a[len-1-i] through a temporary
        fn.body.push_back(decl(Type::Int, "tmp", int_lit(0)));
        std::vector<StmtPtr> body;
        auto mirror = [&] {
            return binary(BinOp::Sub,
                          binary(BinOp::Sub, call(Builtin::Len, args1(var_ref(arr))), int_lit(1)),
                          var_ref("i"));
        };
        body.push_back(assign("tmp", index_expr(var_ref(arr), var_ref("i"))));
        {
            auto s = std::make_unique<Stmt>();
            s->kind = Stmt::Kind::IndexAssign;
            s->name = arr;
            s->a = var_ref("i");
            s->b = index_expr(var_ref(arr), mirror());
            body.push_back(std::move(s));
        }
        {
            auto s = std::make_unique<Stmt>();
            s->kind = Stmt::Kind::IndexAssign;
            s->name = arr;
            s->a = mirror();
            s->b = var_ref("tmp");
            body.push_back(std::move(s));
        }
        fn.body.push_back(for_range("i", int_lit(0),
                                    binary(BinOp::Div, call(Builtin::Len, args1(var_ref(arr))), int_lit(2)),
                                    int_lit(1), true, std::move(body)));
        return fn;
    }

    Function shape_array_build() {
        Function fn;
        std::string arr = pick({"a", "xs", "nums", "vals"});
        fn.params.push_back({arr, Type::IntArray});
        arr_vars_.push_back(arr);
        fn.return_type = Type::IntArray;
        std::string out = pick({"b", "tmp"});
        fn.body.push_back(decl(Type::IntArray, out, make_expr(Expr::Kind::ArrayLit)));
        std::string idx = pick({"i", "j"});
        int_vars_.push_back(idx);
        auto elem = [&] { return index_expr(var_ref(arr), var_ref(idx)); };
        std::vector<StmtPtr> body;
        auto push_stmt = [&](ExprPtr value) {
            auto s = std::make_unique<Stmt>();
            s->kind = Stmt::Kind::ExprStmt;
            s->a = call(Builtin::Push, args2(var_ref(out), std::move(value)));
            return s;
        };
        if (rng_.bernoulli(0.5)) {
            body.push_back(push_stmt(binary(BinOp::Add,
                                            binary(BinOp::Mul, elem(), int_lit(rng_.uniform_int(2, 4))),
                                            int_lit(rng_.uniform_int(0, 5)))));
        } else {
            body.push_back(if_stmt(int_pred(elem()), one(push_stmt(elem()))));
        }
        fn.body.push_back(for_range(idx, int_lit(0), call(Builtin::Len, args1(var_ref(arr))), int_lit(1),
                                    true, std::move(body)));
        fn.body.push_back(ret(var_ref(out)));
        return fn;
    }

    ExprPtr char_lit() {
        static const std::vector<std::string> chars = {"0", "1", "a", "b", "z", " ", "9", "x"};
        return str_lit(rng_.choice(chars));
    }

    Function shape_str_scan() {
        Function fn;
        std::string s = pick({"s", "txt", "word", "msg"});
        fn.params.push_back({s, Type::Str});
        str_vars_.push_back(s);
        fn.return_type = Type::Int;
        std::string acc = pick({"count", "total", "res"});
        fn.body.push_back(decl(Type::Int, acc, int_lit(0)));
        int_vars_.push_back(acc);
        std::string idx = pick({"i", "j"});
        auto ch = [&] { return index_expr(var_ref(s), var_ref(idx)); };
        std::vector<StmtPtr> body;
        ExprPtr cond;
        double roll = rng_.uniform();
        if (roll < 0.5) {
            cond = binary(BinOp::Eq, ch(), char_lit());
        } else if (roll < 0.75) {
            cond = binary(BinOp::Ne, ch(), char_lit());
        } else {
            cond = binary(rng_.bernoulli(0.5) ? BinOp::Lt : BinOp::Ge, ch(), char_lit());
        }
        auto upd = assign(acc, binary(BinOp::Add, var_ref(acc), int_lit(rng_.uniform_int(1, 3))));
        if (rng_.bernoulli(0.3)) {
            body.push_back(if_stmt(std::move(cond), one(std::move(upd)),
                                   one(assign(acc, binary(BinOp::Sub, var_ref(acc), int_lit(1))))));
        } else {
            body.push_back(if_stmt(std::move(cond), one(std::move(upd))));
        }
        fn.body.push_back(for_range(idx, int_lit(0), call(Builtin::Len, args1(var_ref(s))), int_lit(1),
                                    true, std::move(body)));
        maybe_post_adjust(fn.body, acc);
        fn.body.push_back(ret(final_int_result(acc)));
        return fn;
    }

    Function shape_str_build() {
        Function fn;
        std::string s = pick({"s", "txt", "word", "msg"});
        fn.params.push_back({s, Type::Str});
        fn.return_type = Type::Str;
        std::string out = pick({"out", "buf"});
        fn.body.push_back(decl(Type::Str, out, str_lit("")));
        std::string idx = pick({"i", "j"});
        auto ch = [&] { return index_expr(var_ref(s), var_ref(idx)); };
        std::vector<StmtPtr> body;
        double roll = rng_.uniform();
        if (roll < 0.35) {
            // reverse
            body.push_back(assign(out, binary(BinOp::Add, ch(), var_ref(out))));
        } else if (roll < 0.7) {
            body.push_back(if_stmt(binary(BinOp::Ne, ch(), char_lit()),
                                   one(assign(out, binary(BinOp::Add, var_ref(out), ch())))));
        } else {
            body.push_back(if_stmt(binary(BinOp::Eq, ch(), char_lit()),
                                   one(assign(out, binary(BinOp::Add, var_ref(out), str_lit("_")))),
                                   one(assign(out, binary(BinOp::Add, var_ref(out), ch())))));
        }
        fn.body.push_back(for_range(idx, int_lit(0), call(Builtin::Len, args1(var_ref(s))), int_lit(1),
                                    true, std::move(body)));
        fn.body.push_back(ret(var_ref(out)));
        return fn;
    }

    Function shape_while_arith() {
        Function fn;
        std::string n = pick({"n", "k", "m"});
        fn.params.push_back({n, Type::Int});
        int_vars_.push_back(n);
        fn.return_type = Type::Int;
        std::string acc = pick({"total", "res", "acc"});
        std::string x = pick({"p", "q"});
        fn.body.push_back(decl(Type::Int, acc, int_lit(rng_.uniform_int(0, 2))));
        fn.body.push_back(decl(Type::Int, x, var_ref(n)));
        std::int64_t floor_c = rng_.uniform_int(-3, 3);
        std::int64_t step = rng_.uniform_int(1, 4);
        std::vector<StmtPtr> body;
        double roll = rng_.uniform();
        if (roll < 0.4) {
            body.push_back(assign(acc, binary(BinOp::Add, var_ref(acc), var_ref(x))));
        } else if (roll < 0.7) {
            body.push_back(assign(acc, binary(BinOp::Add, var_ref(acc),
                                              binary(BinOp::Mod, var_ref(x), int_lit(rng_.uniform_int(2, 5))))));
        } else {
            body.push_back(if_stmt(int_pred(var_ref(x)),
                                   one(assign(acc, binary(BinOp::Add, var_ref(acc), int_lit(1))))));
        }
        body.push_back(assign(x, binary(BinOp::Sub, var_ref(x), int_lit(step))));
        auto while_s = std::make_unique<Stmt>();
        while_s->kind = Stmt::Kind::While;
        while_s->a = binary(BinOp::Gt, var_ref(x), int_lit(floor_c));
        while_s->body = std::move(body);
        fn.body.push_back(std::move(while_s));
        fn.body.push_back(ret(final_int_result(acc)));
        return fn;
    }

    Function shape_branch_calc() {
        Function fn;
        fn.params.push_back({"n", Type::Int});
        fn.params.push_back({pick({"k", "m", "t"}), Type::Int});
        int_vars_.push_back("n");
        int_vars_.push_back(fn.params[1].name);
        fn.return_type = Type::Int;
        std::string acc = pick({"res", "total", "best"});
        fn.body.push_back(decl(Type::Int, acc, int_expr(1)));
        int_vars_.push_back(acc);
        auto then_branch = one(assign(acc, int_expr(2)));
        std::vector<StmtPtr> else_branch;
        if (rng_.bernoulli(0.7)) {
            if (rng_.bernoulli(0.4)) {
                else_branch.push_back(if_stmt(int_pred(var_ref(fn.params[1].name)),
                                              one(assign(acc, int_expr(1))),
                                              one(assign(acc, int_expr(1)))));
            } else {
                else_branch = one(assign(acc, int_expr(2)));
            }
        }
        fn.body.push_back(if_stmt(int_pred(var_ref("n")), std::move(then_branch), std::move(else_branch)));
        fn.body.push_back(ret(final_int_result(acc)));
        return fn;
    }

    Function shape_predicate() {
        Function fn;
        fn.return_type = Type::Bool;
        double roll = rng_.uniform();
        if (roll < 0.5) {
            fn.params.push_back({"n", Type::Int});
            fn.params.push_back({pick({"k", "m"}), Type::Int});
            int_vars_.push_back("n");
            int_vars_.push_back(fn.params[1].name);
            auto lhs = int_pred(var_ref("n"));
            auto rhs = int_pred(var_ref(fn.params[1].name));
            fn.body.push_back(ret(binary(rng_.bernoulli(0.5) ? BinOp::And : BinOp::Or,
                                         std::move(lhs), std::move(rhs))));
        } else if (roll < 0.75) {
            std::string s = pick({"s", "txt", "word"});
            fn.params.push_back({s, Type::Str});
            fn.body.push_back(ret(binary(rng_.bernoulli(0.5) ? BinOp::Gt : BinOp::Le,
                                         call(Builtin::Len, args1(var_ref(s))),
                                         int_lit(rng_.uniform_int(1, 12)))));
        } else {
            std::string arr = pick({"a", "nums", "vals"});
            fn.params.push_back({arr, Type::IntArray});
            auto first = index_expr(var_ref(arr), int_lit(0));
            fn.body.push_back(ret(int_pred(std::move(first))));
        }
        return fn;
    }

    Function shape_float_calc() {
        Function fn;
        std::string x = pick({"x", "y", "r"});
        fn.params.push_back({x, Type::Float});
        float_vars_.push_back(x);
        fn.return_type = Type::Float;
        std::string fv = pick({"fv", "fw"});
        auto flit = [&] {
            std::int64_t whole = rng_.uniform_int(0, 9);
            std::int64_t frac = rng_.uniform_int(0, 9);
            std::string spelling = std::to_string(whole) + "." + std::to_string(frac);
            return float_lit(static_cast<double>(whole) + static_cast<double>(frac) / 10.0, spelling);
        };
        fn.body.push_back(decl(Type::Float, fv,
                               binary(BinOp::Add, binary(BinOp::Mul, var_ref(x), flit()), flit())));
        if (rng_.bernoulli(0.6)) {
            fn.body.push_back(if_stmt(binary(rng_.bernoulli(0.5) ? BinOp::Lt : BinOp::Gt, var_ref(fv), flit()),
                                      one(assign(fv, binary(BinOp::Mul, var_ref(fv), flit())))));
        }
        if (rng_.bernoulli(0.3)) {
            fn.body.push_back(assign(fv, call(Builtin::Abs, args1(var_ref(fv)))));
        }
        fn.body.push_back(ret(var_ref(fv)));
        return fn;
    }

    Function shape_two_arrays() {
        Function fn;
        fn.params.push_back({"a", Type::IntArray});
        fn.params.push_back({pick({"xs", "nums", "vals"}), Type::IntArray});
        fn.return_type = Type::Int;
        const std::string& other = fn.params[1].name;
        fn.body.push_back(decl(Type::Int, "total", int_lit(0)));
        fn.body.push_back(decl(Type::Int, "m",
                               call(Builtin::Min, args2(call(Builtin::Len, args1(var_ref("a"))),
                                                        call(Builtin::Len, args1(var_ref(other)))))));
        auto ea = index_expr(var_ref("a"), var_ref("i"));
        auto eb = index_expr(var_ref(other), var_ref("i"));
        std::vector<StmtPtr> body;
        if (rng_.bernoulli(0.5)) {
            body.push_back(if_stmt(binary(rng_.bernoulli(0.5) ? BinOp::Eq : BinOp::Gt, std::move(ea), std::move(eb)),
                                   one(assign("total", binary(BinOp::Add, var_ref("total"), int_lit(1))))));
        } else {
            body.push_back(assign("total", binary(BinOp::Add, var_ref("total"),
                                                  binary(BinOp::Sub, std::move(ea), std::move(eb)))));
        }
        fn.body.push_back(for_range("i", int_lit(0), var_ref("m"), int_lit(1), true, std::move(body)));
        fn.body.push_back(ret(final_int_result("total")));
        return fn;
    }

    Function shape_two_strings() {
        Function fn;
        fn.params.push_back({"s", Type::Str});
        fn.params.push_back({pick({"txt", "word", "msg"}), Type::Str});
        fn.return_type = Type::Int;
        const std::string& other = fn.params[1].name;
        fn.body.push_back(decl(Type::Int, "count", int_lit(0)));
        fn.body.push_back(decl(Type::Int, "m",
                               call(Builtin::Min, args2(call(Builtin::Len, args1(var_ref("s"))),
                                                        call(Builtin::Len, args1(var_ref(other)))))));
        std::vector<StmtPtr> body;
        body.push_back(if_stmt(binary(rng_.bernoulli(0.7) ? BinOp::Eq : BinOp::Ne,
                                      index_expr(var_ref("s"), var_ref("i")),
                                      index_expr(var_ref(other), var_ref("i"))),
                               one(assign("count", binary(BinOp::Add, var_ref("count"), int_lit(1))))));
        fn.body.push_back(for_range("i", int_lit(0), var_ref("m"), int_lit(1), true, std::move(body)));
        fn.body.push_back(ret(var_ref("count")));
        return fn;
    }

    Function shape_noargs() {
        Function fn;
        fn.return_type = Type::Int;
        fn.body.push_back(decl(Type::Int, "total", int_lit(rng_.uniform_int(0, 3))));
        std::vector<StmtPtr> body;
        double roll = rng_.uniform();
        if (roll < 0.5) {
            body.push_back(assign("total", binary(BinOp::Add, var_ref("total"), var_ref("i"))));
        } else {
            body.push_back(assign("total", binary(BinOp::Add, var_ref("total"),
                                                  binary(BinOp::Mul, var_ref("i"), var_ref("i")))));
        }
        fn.body.push_back(for_range("i", int_lit(rng_.uniform_int(0, 3)),
                                    int_lit(rng_.uniform_int(8, 25)), int_lit(1), true, std::move(body)));
        fn.body.push_back(ret(final_int_result("total")));
        return fn;
    }

    Function shape_str_int_mix() {
        Function fn;
        std::string s = pick({"s", "txt", "msg"});
        fn.params.push_back({s, Type::Str});
        fn.params.push_back({"k", Type::Int});
        int_vars_.push_back("k");
        fn.return_type = Type::Int;
        fn.body.push_back(decl(Type::Int, "count", int_lit(0)));
        std::vector<StmtPtr> body;
        body.push_back(if_stmt(binary(BinOp::Eq, index_expr(var_ref(s), var_ref("i")), char_lit()),
                               one(assign("count", binary(BinOp::Add, var_ref("count"), var_ref("k")))),
                               one(assign("count", binary(BinOp::Add, var_ref("count"), int_lit(1))))));
        fn.body.push_back(for_range("i", int_lit(0), call(Builtin::Len, args1(var_ref(s))), int_lit(1),
                                    true, std::move(body)));
        fn.body.push_back(ret(var_ref("count")));
        return fn;
    }

    GeneratedProgram generate_once(int size_budget) {
        int_vars_.clear();
        arr_vars_.clear();
        str_vars_.clear();
        float_vars_.clear();
        bool_vars_.clear();

        Function fn;
        if (size_budget <= 1) {
            fn = shape_expr_only();
        } else {
            double roll = rng_.uniform();
            if (roll < 0.20) fn = shape_array_fold();
            else if (roll < 0.28) fn = shape_array_map();
            else if (roll < 0.31) fn = shape_array_reverse();
            else if (roll < 0.38) fn = shape_array_build();
            else if (roll < 0.50) fn = shape_str_scan();
            else if (roll < 0.57) fn = shape_str_build();
            else if (roll < 0.66) fn = shape_while_arith();
            else if (roll < 0.74) fn = shape_branch_calc();
            else if (roll < 0.80) fn = shape_predicate();
            else if (roll < 0.85) fn = shape_float_calc();
            else if (roll < 0.90) fn = shape_two_arrays();
            else if (roll < 0.94) fn = shape_two_strings();
            else if (roll < 0.97) fn = shape_str_int_mix();
            else fn = shape_noargs();
        }
        fn.name = fresh_name();

        CommentPlan comments;
        if (with_comments_ && rng_.bernoulli(0.15)) {
            static const std::vector<std::string> words = {
                "sum",  "count", "items", "scan",  "total", "update", "loop",  "check",
                "result", "values", "chars", "digits", "bound", "step", "track", "window",
            };
            std::string text = rng_.choice(words);
            int extra = static_cast<int>(rng_.uniform_int(0, 2));
            for (int i = 0; i < extra; ++i) text += " " + rng_.choice(words);
            comments.push_back({static_cast<int>(rng_.uniform_int(0, static_cast<std::int64_t>(fn.body.size()) - 1)),
                                text});
        }

        GeneratedProgram p;
        p.indent_src = emit_source(fn, LanguageId::indent(), comments);
        p.brace_src = emit_source(fn, LanguageId::brace(), comments);
        p.fn = std::move(fn);
        return p;
    }
};

inline GeneratedProgram generate_program(Rng& rng, int size_budget, bool with_comments = true) {
    ProgramGenerator gen(rng, with_comments);
    return gen.generate(size_budget);
}

}  // namespace codemt

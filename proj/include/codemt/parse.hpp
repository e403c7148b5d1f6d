#pragma once

#include <set>
#include <string>
#include <vector>

#include "codemt/ast.hpp"
#include "codemt/lex.hpp"
#include "codemt/util.hpp"

namespace codemt {

struct ParseFailed : Error {
    std::size_t line;
    ParseFailed(std::size_t line_no, const std::string& reason)
        : Error("parse error at line " + std::to_string(line_no) + ": " + reason), line(line_no) {}
};

namespace detail {

class Cursor {
  public:
    explicit Cursor(std::vector<Token> toks) : toks_(std::move(toks)) {}

    bool done() const { return pos_ >= toks_.size(); }
    const Token& peek(std::size_t ahead = 0) const {
        static const Token eof{"<eof>", TokenKind::Ident, 0};
        return pos_ + ahead < toks_.size() ? toks_[pos_ + ahead] : eof;
    }
    bool at(std::string_view text) const { return !done() && peek().text == text; }
    bool at_kind(TokenKind k) const { return !done() && peek().kind == k; }
    const Token& advance() {
        if (done()) fail("unexpected end of input");
        return toks_[pos_++];
    }
    void expect(std::string_view text) {
        if (!at(text)) fail("expected '" + std::string(text) + "', found '" + peek().text + "'");
        ++pos_;
    }
    bool accept(std::string_view text) {
        if (!at(text)) return false;
        ++pos_;
        return true;
    }
    [[noreturn]] void fail(const std::string& reason) const {
        throw ParseFailed(done() ? (toks_.empty() ? 0 : toks_.back().line) : peek().line, reason);
    }

  private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

inline std::string unescape(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char c = s[++i];
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '\\': out += '\\'; break;
                case '"': out += '"'; break;
                default: out += c; break;
            }
        } else {
            out += s[i];
        }
    }
    return out;
}

// Shared expression grammar; `indent` toggles the spelling of logical
// operators, boolean literals, and the append-method call form.
class ExprParser {
  public:
    ExprParser(Cursor& cur, bool indent) : cur_(cur), indent_(indent) {}

    ExprPtr parse() { return parse_or(); }

  private:
    ExprPtr parse_or() {
        auto lhs = parse_and();
        while (cur_.at(indent_ ? "or" : "||")) {
            cur_.advance();
            lhs = binary(BinOp::Or, std::move(lhs), parse_and());
        }
        return lhs;
    }
    ExprPtr parse_and() {
        auto lhs = parse_not();
        while (cur_.at(indent_ ? "and" : "&&")) {
            cur_.advance();
            lhs = binary(BinOp::And, std::move(lhs), parse_not());
        }
        return lhs;
    }
    ExprPtr parse_not() {
        if (cur_.at(indent_ ? "not" : "!")) {
            cur_.advance();
            return unary(UnOp::Not, parse_not());
        }
        return parse_cmp();
    }
    ExprPtr parse_cmp() {
        auto lhs = parse_add();
        static const std::pair<const char*, BinOp> ops[] = {
            {"==", BinOp::Eq}, {"!=", BinOp::Ne}, {"<=", BinOp::Le},
            {">=", BinOp::Ge}, {"<", BinOp::Lt},  {">", BinOp::Gt},
        };
        for (const auto& [text, op] : ops) {
            if (cur_.at(text)) {
                cur_.advance();
                return binary(op, std::move(lhs), parse_add());
            }
        }
        return lhs;
    }
    ExprPtr parse_add() {
        auto lhs = parse_mul();
        for (;;) {
            if (cur_.at("+")) {
                cur_.advance();
                lhs = binary(BinOp::Add, std::move(lhs), parse_mul());
            } else if (cur_.at("-")) {
                cur_.advance();
                lhs = binary(BinOp::Sub, std::move(lhs), parse_mul());
            } else {
                return lhs;
            }
        }
    }
    ExprPtr parse_mul() {
        auto lhs = parse_unary();
        for (;;) {
            if (cur_.at("*")) {
                cur_.advance();
                lhs = binary(BinOp::Mul, std::move(lhs), parse_unary());
            } else if (cur_.at("/")) {
                cur_.advance();
                lhs = binary(BinOp::Div, std::move(lhs), parse_unary());
            } else if (cur_.at("%")) {
                cur_.advance();
                lhs = binary(BinOp::Mod, std::move(lhs), parse_unary());
            } else {
                return lhs;
            }
        }
    }
    ExprPtr parse_unary() {
        if (cur_.at("-")) {
            cur_.advance();
            auto inner = parse_unary();
            if (inner->kind == Expr::Kind::IntLit) {
                inner->int_val = -inner->int_val;
                return inner;
            }
            if (inner->kind == Expr::Kind::FloatLit) {
                inner->float_val = -inner->float_val;
                inner->str_val = "-" + inner->str_val;
                return inner;
            }
            return unary(UnOp::Neg, std::move(inner));
        }
        return parse_postfix();
    }
    ExprPtr parse_postfix() {
        auto e = parse_primary();
        for (;;) {
            if (cur_.at("[")) {
                cur_.advance();
                auto idx = parse();
                cur_.expect("]");
                e = index_expr(std::move(e), std::move(idx));
            } else if (indent_ && cur_.at(".")) {
                cur_.advance();
                const Token& method = cur_.advance();
                if (method.text != "append") cur_.fail("unknown method '" + method.text + "'");
                cur_.expect("(");
                auto arg = parse();
                cur_.expect(")");
                std::vector<ExprPtr> args;
                args.push_back(std::move(e));
                args.push_back(std::move(arg));
                e = call(Builtin::Push, std::move(args));
            } else {
                return e;
            }
        }
    }
    ExprPtr parse_primary() {
        const Token& t = cur_.peek();
        if (t.text == "(") {
            cur_.advance();
            auto e = parse();
            cur_.expect(")");
            return e;
        }
        if (t.text == "[") {
            cur_.advance();
            auto e = make_expr(Expr::Kind::ArrayLit);
            if (!cur_.at("]")) {
                e->args.push_back(parse());
                while (cur_.accept(",")) e->args.push_back(parse());
            }
            cur_.expect("]");
            return e;
        }
        if (t.text == "\"") return parse_string();
        if (t.kind == TokenKind::Literal && !t.text.empty() && std::isdigit(static_cast<unsigned char>(t.text[0]))) {
            cur_.advance();
            if (t.text.find('.') != std::string::npos) {
                return float_lit(std::stod(t.text), t.text);
            }
            return int_lit(std::stoll(t.text));
        }
        if (indent_ ? t.text == "True" : t.text == "true") {
            cur_.advance();
            return bool_lit(true);
        }
        if (indent_ ? t.text == "False" : t.text == "false") {
            cur_.advance();
            return bool_lit(false);
        }
        if (t.kind == TokenKind::Ident || t.kind == TokenKind::Keyword) {
            if (cur_.peek(1).text == "(") {
                return parse_call();
            }
            cur_.advance();
            return var_ref(t.text);
        }
        cur_.fail("unexpected token '" + t.text + "' in expression");
    }
    ExprPtr parse_string() {
        cur_.expect("\"");
        std::string content;
        while (!cur_.at("\"")) {
            if (cur_.done()) cur_.fail("unterminated string literal");
            const Token& t = cur_.advance();
            content += t.text == kSpaceMarker ? " " : t.text;
        }
        cur_.expect("\"");
        return str_lit(unescape(content));
    }
    ExprPtr parse_call() {
        const Token& name = cur_.advance();
        Builtin b;
        if (name.text == "len") b = Builtin::Len;
        else if (name.text == "abs") b = Builtin::Abs;
        else if (name.text == "min") b = Builtin::Min;
        else if (name.text == "max") b = Builtin::Max;
        else if (!indent_ && name.text == "push") b = Builtin::Push;
        else cur_.fail("unknown function '" + name.text + "'");
        cur_.expect("(");
        std::vector<ExprPtr> args;
        if (!cur_.at(")")) {
            ExprParser sub(cur_, indent_);
            args.push_back(sub.parse());
            while (cur_.accept(",")) args.push_back(sub.parse());
        }
        cur_.expect(")");
        std::size_t want = b == Builtin::Len || b == Builtin::Abs ? 1 : 2;
        if (args.size() != want) cur_.fail("wrong arity for '" + name.text + "'");
        return call(b, std::move(args));
    }

    Cursor& cur_;
    bool indent_;
};

// Desugars `x op= e` to `x = x op e` so both surfaces produce one shape.
inline ExprPtr desugar_compound(const std::string& op, ExprPtr target, ExprPtr value) {
    BinOp bin;
    if (op == "+=") bin = BinOp::Add;
    else if (op == "-=") bin = BinOp::Sub;
    else if (op == "*=") bin = BinOp::Mul;
    else if (op == "/=") bin = BinOp::Div;
    else bin = BinOp::Mod;
    return binary(bin, std::move(target), std::move(value));
}

inline bool is_compound_op(const std::string& t) {
    return t == "+=" || t == "-=" || t == "*=" || t == "/=" || t == "%=";
}

// ----------------------------- indent surface -----------------------------

class IndentParser {
  public:
    explicit IndentParser(std::vector<Token> toks) : cur_(std::move(toks)) {}

    Function parse_function() {
        Function fn;
        cur_.expect("def");
        fn.name = cur_.advance().text;
        cur_.expect("(");
        if (!cur_.at(")")) {
            fn.params.push_back({cur_.advance().text, Type::Dyn});
            while (cur_.accept(",")) fn.params.push_back({cur_.advance().text, Type::Dyn});
        }
        cur_.expect(")");
        cur_.expect(":");
        for (const auto& p : fn.params) declared_.insert(p.name);
        if (cur_.at("NEWLINE")) cur_.advance();
        while (!cur_.done()) {
            if (cur_.at("DEDENT")) cur_.fail("unexpected DEDENT at top level");
            fn.body.push_back(parse_stmt());
            if (cur_.at("NEWLINE")) cur_.advance();
        }
        if (fn.body.empty()) cur_.fail("empty function body");
        return fn;
    }

  private:
    std::vector<StmtPtr> parse_block() {
        cur_.expect("NEWLINE");
        cur_.expect("INDENT");
        std::vector<StmtPtr> body;
        for (;;) {
            if (cur_.at("DEDENT")) {
                cur_.advance();
                break;
            }
            if (cur_.done()) cur_.fail("unterminated block");
            body.push_back(parse_stmt());
            if (cur_.at("NEWLINE")) cur_.advance();
        }
        if (body.empty()) cur_.fail("empty block");
        return body;
    }

    StmtPtr parse_stmt() {
        if (cur_.at("if")) return parse_if();
        if (cur_.at("while")) return parse_while();
        if (cur_.at("for")) return parse_for();
        if (cur_.at("return")) return parse_return();
        if (cur_.at("pass")) {
            cur_.advance();
            auto s = std::make_unique<Stmt>();
            s->kind = Stmt::Kind::Pass;
            return s;
        }
        return parse_simple();
    }

    StmtPtr parse_if() {
        cur_.expect("if");
        return parse_if_tail();
    }

    // Shared by "if" and "elif"; the keyword has already been consumed.
    StmtPtr parse_if_tail() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::If;
        s->a = expr();
        cur_.expect(":");
        s->body = parse_block();
        if (cur_.accept("elif")) {
            s->else_body.push_back(parse_if_tail());
        } else if (cur_.accept("else")) {
            cur_.expect(":");
            s->else_body = parse_block();
        }
        return s;
    }

    StmtPtr parse_while() {
        cur_.expect("while");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::While;
        s->a = expr();
        cur_.expect(":");
        s->body = parse_block();
        return s;
    }

    StmtPtr parse_for() {
        cur_.expect("for");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::ForRange;
        s->name = cur_.advance().text;
        cur_.expect("in");
        cur_.expect("range");
        cur_.expect("(");
        s->a = expr();
        cur_.expect(",");
        s->b = expr();
        if (cur_.accept(",")) {
            auto step = expr();
            if (step->kind != Expr::Kind::IntLit) cur_.fail("range step must be an integer literal");
            s->ascending = step->int_val >= 0;
            step->int_val = s->ascending ? step->int_val : -step->int_val;
            s->c = std::move(step);
        } else {
            s->ascending = true;
            s->c = int_lit(1);
        }
        cur_.expect(")");
        cur_.expect(":");
        declared_.insert(s->name);
        s->body = parse_block();
        return s;
    }

    StmtPtr parse_return() {
        cur_.expect("return");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Return;
        if (!cur_.at("NEWLINE") && !cur_.at("DEDENT") && !cur_.done()) s->a = expr();
        return s;
    }

    StmtPtr parse_simple() {
        const Token& t = cur_.peek();
        if (t.kind != TokenKind::Ident && t.kind != TokenKind::Keyword) {
            cur_.fail("expected statement, found '" + t.text + "'");
        }
        // Lookahead distinguishes assignment targets from expression statements.
        const std::string& nxt = cur_.peek(1).text;
        if (nxt == "=" || is_compound_op(nxt)) {
            std::string name = cur_.advance().text;
            std::string op = cur_.advance().text;
            auto value = expr();
            return finish_assign(name, op, std::move(value));
        }
        if (nxt == "[") {
            // Could be `a[i] = v` or an expression like `a[i] . append(..)`;
            // scan for the matching bracket followed by an assignment op.
            std::size_t depth = 0;
            std::size_t k = 1;
            for (;; ++k) {
                const std::string& s = cur_.peek(k).text;
                if (s == "<eof>") break;
                if (s == "[") ++depth;
                if (s == "]") {
                    --depth;
                    if (depth == 0) break;
                }
            }
            const std::string& after = cur_.peek(k + 1).text;
            if (after == "=" || is_compound_op(after)) {
                std::string name = cur_.advance().text;
                cur_.expect("[");
                auto idx = expr();
                cur_.expect("]");
                std::string op = cur_.advance().text;
                auto value = expr();
                auto s = std::make_unique<Stmt>();
                s->kind = Stmt::Kind::IndexAssign;
                s->name = name;
                if (op == "=") {
                    s->a = std::move(idx);
                    s->b = std::move(value);
                } else {
                    auto current = index_expr(var_ref(name), clone_expr(idx.get()));
                    s->a = std::move(idx);
                    s->b = desugar_compound(op, std::move(current), std::move(value));
                }
                return s;
            }
        }
        auto e = expr();
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::ExprStmt;
        s->a = std::move(e);
        return s;
    }

    StmtPtr finish_assign(const std::string& name, const std::string& op, ExprPtr value) {
        auto s = std::make_unique<Stmt>();
        if (op != "=") value = desugar_compound(op, var_ref(name), std::move(value));
        if (declared_.count(name)) {
            s->kind = Stmt::Kind::Assign;
        } else {
            s->kind = Stmt::Kind::Decl;
            s->decl_type = Type::Dyn;
            declared_.insert(name);
        }
        s->name = name;
        s->a = std::move(value);
        return s;
    }

    ExprPtr expr() {
        ExprParser p(cur_, true);
        return p.parse();
    }

    Cursor cur_;
    std::set<std::string> declared_;
};

// ----------------------------- brace surface -----------------------------

class BraceParser {
  public:
    explicit BraceParser(std::vector<Token> toks) : cur_(std::move(toks)) {}

    Function parse_function() {
        Function fn;
        cur_.accept("static");
        fn.return_type = parse_type(true);
        fn.name = cur_.advance().text;
        cur_.expect("(");
        if (!cur_.at(")")) {
            fn.params.push_back(parse_param());
            while (cur_.accept(",")) fn.params.push_back(parse_param());
        }
        cur_.expect(")");
        cur_.expect("{");
        while (!cur_.at("}")) {
            if (cur_.done()) cur_.fail("missing closing brace");
            fn.body.push_back(parse_stmt());
        }
        cur_.expect("}");
        if (fn.body.empty()) cur_.fail("empty function body");
        return fn;
    }

  private:
    Type parse_type(bool allow_void) {
        const Token& t = cur_.advance();
        if (t.text == "int") return Type::Int;
        if (t.text == "float") return Type::Float;
        if (t.text == "bool") return Type::Bool;
        if (t.text == "str") return Type::Str;
        if (t.text == "arr") return Type::IntArray;
        if (t.text == "void" && allow_void) return Type::Void;
        cur_.fail("expected a type, found '" + t.text + "'");
    }

    Param parse_param() {
        Param p;
        p.type = parse_type(false);
        p.name = cur_.advance().text;
        return p;
    }

    std::vector<StmtPtr> parse_braced_block() {
        cur_.expect("{");
        std::vector<StmtPtr> body;
        while (!cur_.at("}")) {
            if (cur_.done()) cur_.fail("missing closing brace");
            body.push_back(parse_stmt());
        }
        cur_.expect("}");
        if (body.empty()) cur_.fail("empty block");
        return body;
    }

    StmtPtr parse_stmt() {
        const std::string& t = cur_.peek().text;
        if (t == "int" || t == "float" || t == "bool" || t == "str" || t == "arr") return parse_decl();
        if (t == "if") return parse_if();
        if (t == "while") return parse_while();
        if (t == "for") return parse_for();
        if (t == "return") return parse_return();
        return parse_simple();
    }

    StmtPtr parse_decl() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Decl;
        s->decl_type = parse_type(false);
        s->name = cur_.advance().text;
        cur_.expect("=");
        s->a = expr();
        cur_.expect(";");
        return s;
    }

    StmtPtr parse_if() {
        cur_.expect("if");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::If;
        cur_.expect("(");
        s->a = expr();
        cur_.expect(")");
        s->body = parse_braced_block();
        if (cur_.accept("else")) {
            if (cur_.at("if")) {
                s->else_body.push_back(parse_if());
            } else {
                s->else_body = parse_braced_block();
            }
        }
        return s;
    }

    StmtPtr parse_while() {
        cur_.expect("while");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::While;
        cur_.expect("(");
        s->a = expr();
        cur_.expect(")");
        s->body = parse_braced_block();
        return s;
    }

    // The only loop form is the counted range pattern:
    //   for (int v = start; v </> stop; v = v +/- step) { ... }
    StmtPtr parse_for() {
        cur_.expect("for");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::ForRange;
        cur_.expect("(");
        cur_.expect("int");
        s->name = cur_.advance().text;
        cur_.expect("=");
        s->a = expr();
        cur_.expect(";");
        if (cur_.advance().text != s->name) cur_.fail("loop condition must test the loop variable");
        bool asc;
        if (cur_.accept("<")) asc = true;
        else if (cur_.accept(">")) asc = false;
        else cur_.fail("loop condition must use '<' or '>'");
        s->ascending = asc;
        s->b = expr();
        cur_.expect(";");
        if (cur_.advance().text != s->name) cur_.fail("loop update must assign the loop variable");
        if (cur_.accept("+=")) {
            if (!asc) cur_.fail("descending loop must use '-'");
            s->c = expr();
        } else if (cur_.accept("-=")) {
            if (asc) cur_.fail("ascending loop must use '+'");
            s->c = expr();
        } else {
            cur_.expect("=");
            if (cur_.advance().text != s->name) cur_.fail("loop update must step the loop variable");
            bool plus;
            if (cur_.accept("+")) plus = true;
            else if (cur_.accept("-")) plus = false;
            else cur_.fail("loop update must add or subtract the step");
            if (plus != asc) cur_.fail("loop direction and update disagree");
            s->c = expr();
        }
        cur_.expect(")");
        s->body = parse_braced_block();
        return s;
    }

    StmtPtr parse_return() {
        cur_.expect("return");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Return;
        if (!cur_.at(";")) s->a = expr();
        cur_.expect(";");
        return s;
    }

    StmtPtr parse_simple() {
        const Token& t = cur_.peek();
        if (t.kind != TokenKind::Ident && t.kind != TokenKind::Keyword) {
            cur_.fail("expected statement, found '" + t.text + "'");
        }
        const std::string& nxt = cur_.peek(1).text;
        if (nxt == "=" || is_compound_op(nxt)) {
            std::string name = cur_.advance().text;
            std::string op = cur_.advance().text;
            auto value = expr();
            cur_.expect(";");
            auto s = std::make_unique<Stmt>();
            s->kind = Stmt::Kind::Assign;
            s->name = name;
            s->a = op == "="
                       ? std::move(value)
                       : desugar_compound(op, var_ref(name), std::move(value));
            return s;
        }
        if (nxt == "[") {
            std::size_t depth = 0;
            std::size_t k = 1;
            for (;; ++k) {
                const std::string& sx = cur_.peek(k).text;
                if (sx == "<eof>") break;
                if (sx == "[") ++depth;
                if (sx == "]") {
                    --depth;
                    if (depth == 0) break;
                }
            }
            const std::string& after = cur_.peek(k + 1).text;
            if (after == "=" || is_compound_op(after)) {
                std::string name = cur_.advance().text;
                cur_.expect("[");
                auto idx = expr();
                cur_.expect("]");
                std::string op = cur_.advance().text;
                auto value = expr();
                cur_.expect(";");
                auto s = std::make_unique<Stmt>();
                s->kind = Stmt::Kind::IndexAssign;
                s->name = name;
                if (op == "=") {
                    s->a = std::move(idx);
                    s->b = std::move(value);
                } else {
                    auto current = index_expr(var_ref(name), clone_expr(idx.get()));
                    s->a = std::move(idx);
                    s->b = desugar_compound(op, std::move(current), std::move(value));
                }
                return s;
            }
        }
        auto e = expr();
        cur_.expect(";");
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::ExprStmt;
        s->a = std::move(e);
        return s;
    }

    ExprPtr expr() {
        ExprParser p(cur_, false);
        return p.parse();
    }

    Cursor cur_;
};

}  // namespace detail

// Full syntax check over the token stream; lexing failures surface as
// ParseFailed so callers see a single error type for unusable sources.
inline Program parse(const LanguageId& lang, std::string_view source) {
    std::vector<Token> toks;
    try {
        toks = strip_comment_tokens(tokenize(lang, source));
    } catch (const LexError& e) {
        throw ParseFailed(0, e.what());
    }
    if (toks.empty()) throw ParseFailed(0, "empty source");
    Program prog;
    prog.lang = lang;
    if (lang.is_indent()) {
        detail::IndentParser p(std::move(toks));
        prog.fn = p.parse_function();
    } else if (lang.is_brace()) {
        detail::BraceParser p(std::move(toks));
        prog.fn = p.parse_function();
    } else {
        throw ParseFailed(0, "no built-in parser for language '" + lang.name + "'");
    }
    return prog;
}

}  // namespace codemt

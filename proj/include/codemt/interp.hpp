#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "codemt/ast.hpp"
#include "codemt/parse.hpp"

namespace codemt {

struct RunResult {
    enum class Status : std::uint8_t { Ok, Raised, TimedOut, ParseFailed };
    Status status = Status::Ok;
    Value value;                      // return value when Ok
    std::vector<Value> mutated_args;  // post-state of array arguments, in declaration order
    std::string message;
    std::int64_t wall_ms = 0;
    std::int64_t steps_used = 0;
};

// One interpreter step per statement execution and per expression evaluation;
// the budget makes timeouts a deterministic property of the program rather
// than of the host machine.
inline constexpr std::int64_t kStepsPerSecond = 1'000'000;

namespace detail {

struct Raised {
    std::string message;
};
struct BudgetExhausted {};

struct ReturnSignal {
    Value value;
};

class Interp {
  public:
    Interp(std::int64_t budget) : budget_(budget) {}

    Value run_function(const Function& fn, const std::vector<Value>& args) {
        if (args.size() != fn.params.size()) {
            throw Raised{"arity mismatch: expected " + std::to_string(fn.params.size()) +
                         " arguments, got " + std::to_string(args.size())};
        }
        for (std::size_t i = 0; i < fn.params.size(); ++i) {
            const Param& p = fn.params[i];
            if (p.type != Type::Dyn && p.type != args[i].type) {
                throw Raised{"argument '" + p.name + "' expects " + type_name(p.type) + ", got " +
                             type_name(args[i].type)};
            }
            env_[p.name] = args[i];
        }
        try {
            exec_block(fn.body);
        } catch (ReturnSignal& r) {
            return std::move(r.value);
        }
        if (fn.return_type == Type::Void || fn.return_type == Type::Dyn) return Value::make_void();
        throw Raised{"control reached end of non-void function"};
    }

    std::int64_t steps_used() const { return steps_used_; }

  private:
    void tick() {
        ++steps_used_;
        if (steps_used_ > budget_) throw BudgetExhausted{};
    }

    void exec_block(const std::vector<StmtPtr>& body) {
        for (const auto& s : body) exec(*s);
    }

    void exec(const Stmt& s) {
        tick();
        switch (s.kind) {
            case Stmt::Kind::Decl:
            case Stmt::Kind::Assign: {
                Value v = eval(*s.a);
                if (v.type == Type::Void) throw Raised{"cannot assign a void value"};
                env_[s.name] = std::move(v);
                break;
            }
            case Stmt::Kind::IndexAssign: {
                auto it = env_.find(s.name);
                if (it == env_.end()) throw Raised{"undefined variable '" + s.name + "'"};
                if (it->second.type != Type::IntArray) {
                    throw Raised{"cannot index-assign into " + std::string(type_name(it->second.type))};
                }
                Value idx = eval(*s.a);
                Value val = eval(*s.b);
                if (idx.type != Type::Int) throw Raised{"array index must be Int"};
                if (val.type != Type::Int) throw Raised{"array element must be Int"};
                auto& vec = *it->second.arr;
                if (idx.i < 0 || idx.i >= static_cast<std::int64_t>(vec.size())) {
                    throw Raised{"index out of bounds: " + std::to_string(idx.i)};
                }
                vec[static_cast<std::size_t>(idx.i)] = val.i;
                break;
            }
            case Stmt::Kind::If: {
                Value c = eval(*s.a);
                if (c.type != Type::Bool) throw Raised{"condition must be Bool"};
                exec_block(c.b ? s.body : s.else_body);
                break;
            }
            case Stmt::Kind::While: {
                for (;;) {
                    tick();
                    Value c = eval(*s.a);
                    if (c.type != Type::Bool) throw Raised{"condition must be Bool"};
                    if (!c.b) break;
                    exec_block(s.body);
                }
                break;
            }
            case Stmt::Kind::ForRange: {
                Value start = eval(*s.a);
                Value stop = eval(*s.b);
                Value step = eval(*s.c);
                if (start.type != Type::Int || stop.type != Type::Int || step.type != Type::Int) {
                    throw Raised{"range bounds must be Int"};
                }
                if (step.i <= 0) throw Raised{"range step must be positive"};
                for (std::int64_t v = start.i; s.ascending ? v < stop.i : v > stop.i;
                     v += s.ascending ? step.i : -step.i) {
                    tick();
                    env_[s.name] = Value::make_int(v);
                    exec_block(s.body);
                }
                break;
            }
            case Stmt::Kind::Return: {
                ReturnSignal r;
                r.value = s.a ? eval(*s.a) : Value::make_void();
                throw r;
            }
            case Stmt::Kind::ExprStmt:
                eval(*s.a);
                break;
            case Stmt::Kind::Pass:
                break;
        }
    }

    static std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
    }
    static std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
    }
    static std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
    }

    Value eval(const Expr& e) {
        tick();
        switch (e.kind) {
            case Expr::Kind::IntLit: return Value::make_int(e.int_val);
            case Expr::Kind::FloatLit: return Value::make_float(e.float_val);
            case Expr::Kind::BoolLit: return Value::make_bool(e.bool_val);
            case Expr::Kind::StrLit: return Value::make_str(e.str_val);
            case Expr::Kind::ArrayLit: {
                std::vector<std::int64_t> items;
                items.reserve(e.args.size());
                for (const auto& a : e.args) {
                    Value v = eval(*a);
                    if (v.type != Type::Int) throw Raised{"array literals hold Int elements"};
                    items.push_back(v.i);
                }
                return Value::make_array(std::move(items));
            }
            case Expr::Kind::Var: {
                auto it = env_.find(e.name);
                if (it == env_.end()) throw Raised{"undefined variable '" + e.name + "'"};
                return it->second;
            }
            case Expr::Kind::Unary: {
                Value v = eval(*e.lhs);
                if (e.un == UnOp::Neg) {
                    if (v.type == Type::Int) return Value::make_int(wrap_sub(0, v.i));
                    if (v.type == Type::Float) return Value::make_float(-v.f);
                    throw Raised{"cannot negate " + std::string(type_name(v.type))};
                }
                if (v.type != Type::Bool) throw Raised{"logical not expects Bool"};
                return Value::make_bool(!v.b);
            }
            case Expr::Kind::Binary: return eval_binary(e);
            case Expr::Kind::Index: {
                Value base = eval(*e.lhs);
                Value idx = eval(*e.rhs);
                if (idx.type != Type::Int) throw Raised{"index must be Int"};
                if (base.type == Type::IntArray) {
                    const auto& vec = *base.arr;
                    if (idx.i < 0 || idx.i >= static_cast<std::int64_t>(vec.size())) {
                        throw Raised{"index out of bounds: " + std::to_string(idx.i)};
                    }
                    return Value::make_int(vec[static_cast<std::size_t>(idx.i)]);
                }
                if (base.type == Type::Str) {
                    if (idx.i < 0 || idx.i >= static_cast<std::int64_t>(base.s.size())) {
                        throw Raised{"index out of bounds: " + std::to_string(idx.i)};
                    }
                    return Value::make_str(std::string(1, base.s[static_cast<std::size_t>(idx.i)]));
                }
                throw Raised{"cannot index " + std::string(type_name(base.type))};
            }
            case Expr::Kind::Call: return eval_call(e);
        }
        throw Raised{"unreachable expression kind"};
    }

    Value eval_binary(const Expr& e) {
        if (e.bin == BinOp::And || e.bin == BinOp::Or) {
            Value l = eval(*e.lhs);
            if (l.type != Type::Bool) throw Raised{"logical operator expects Bool"};
            if (e.bin == BinOp::And && !l.b) return Value::make_bool(false);
            if (e.bin == BinOp::Or && l.b) return Value::make_bool(true);
            Value r = eval(*e.rhs);
            if (r.type != Type::Bool) throw Raised{"logical operator expects Bool"};
            return Value::make_bool(r.b);
        }
        Value l = eval(*e.lhs);
        Value r = eval(*e.rhs);
        switch (e.bin) {
            case BinOp::Add:
                if (l.type == Type::Str && r.type == Type::Str) return Value::make_str(l.s + r.s);
                [[fallthrough]];
            case BinOp::Sub:
            case BinOp::Mul:
            case BinOp::Div:
            case BinOp::Mod:
                return eval_arith(e.bin, l, r);
            case BinOp::Eq:
            case BinOp::Ne: {
                bool eq = eval_equals(l, r);
                return Value::make_bool(e.bin == BinOp::Eq ? eq : !eq);
            }
            default:
                return eval_compare(e.bin, l, r);
        }
    }

    Value eval_arith(BinOp op, const Value& l, const Value& r) {
        if (l.type == Type::Int && r.type == Type::Int) {
            switch (op) {
                case BinOp::Add: return Value::make_int(wrap_add(l.i, r.i));
                case BinOp::Sub: return Value::make_int(wrap_sub(l.i, r.i));
                case BinOp::Mul: return Value::make_int(wrap_mul(l.i, r.i));
                case BinOp::Div:
                    if (r.i == 0) throw Raised{"division by zero"};
                    if (r.i == -1) return Value::make_int(wrap_sub(0, l.i));
                    return Value::make_int(l.i / r.i);  // truncated toward zero
                case BinOp::Mod:
                    if (r.i == 0) throw Raised{"modulo by zero"};
                    if (r.i == -1) return Value::make_int(0);
                    return Value::make_int(l.i % r.i);
                default: break;
            }
        }
        if ((l.type == Type::Int || l.type == Type::Float) &&
            (r.type == Type::Int || r.type == Type::Float)) {
            double a = l.type == Type::Int ? static_cast<double>(l.i) : l.f;
            double b = r.type == Type::Int ? static_cast<double>(r.i) : r.f;
            switch (op) {
                case BinOp::Add: return Value::make_float(a + b);
                case BinOp::Sub: return Value::make_float(a - b);
                case BinOp::Mul: return Value::make_float(a * b);
                case BinOp::Div:
                    if (b == 0.0) throw Raised{"division by zero"};
                    return Value::make_float(a / b);
                case BinOp::Mod:
                    if (b == 0.0) throw Raised{"modulo by zero"};
                    return Value::make_float(std::fmod(a, b));
                default: break;
            }
        }
        throw Raised{std::string("unsupported operand types ") + type_name(l.type) + " and " +
                     type_name(r.type)};
    }

    bool eval_equals(const Value& l, const Value& r) {
        if ((l.type == Type::Int || l.type == Type::Float) &&
            (r.type == Type::Int || r.type == Type::Float) && l.type != r.type) {
            double a = l.type == Type::Int ? static_cast<double>(l.i) : l.f;
            double b = r.type == Type::Int ? static_cast<double>(r.i) : r.f;
            return a == b;
        }
        if (l.type != r.type) throw Raised{"cannot compare different types for equality"};
        switch (l.type) {
            case Type::Int: return l.i == r.i;
            case Type::Float: return l.f == r.f;
            case Type::Bool: return l.b == r.b;
            case Type::Str: return l.s == r.s;
            case Type::IntArray: return *l.arr == *r.arr;
            default: throw Raised{"cannot compare this type"};
        }
    }

    Value eval_compare(BinOp op, const Value& l, const Value& r) {
        int cmp;
        if ((l.type == Type::Int || l.type == Type::Float) &&
            (r.type == Type::Int || r.type == Type::Float)) {
            if (l.type == Type::Int && r.type == Type::Int) {
                cmp = l.i < r.i ? -1 : (l.i > r.i ? 1 : 0);
            } else {
                double a = l.type == Type::Int ? static_cast<double>(l.i) : l.f;
                double b = r.type == Type::Int ? static_cast<double>(r.i) : r.f;
                cmp = a < b ? -1 : (a > b ? 1 : 0);
            }
        } else if (l.type == Type::Str && r.type == Type::Str) {
            cmp = l.s < r.s ? -1 : (l.s > r.s ? 1 : 0);
        } else {
            throw Raised{"cannot order these types"};
        }
        switch (op) {
            case BinOp::Lt: return Value::make_bool(cmp < 0);
            case BinOp::Le: return Value::make_bool(cmp <= 0);
            case BinOp::Gt: return Value::make_bool(cmp > 0);
            case BinOp::Ge: return Value::make_bool(cmp >= 0);
            default: throw Raised{"unreachable comparison"};
        }
    }

    Value eval_call(const Expr& e) {
        switch (e.builtin) {
            case Builtin::Len: {
                Value v = eval(*e.args[0]);
                if (v.type == Type::Str) return Value::make_int(static_cast<std::int64_t>(v.s.size()));
                if (v.type == Type::IntArray) return Value::make_int(static_cast<std::int64_t>(v.arr->size()));
                throw Raised{"len expects String or IntArray"};
            }
            case Builtin::Abs: {
                Value v = eval(*e.args[0]);
                if (v.type == Type::Int) return Value::make_int(v.i < 0 ? wrap_sub(0, v.i) : v.i);
                if (v.type == Type::Float) return Value::make_float(std::fabs(v.f));
                throw Raised{"abs expects Int or Float"};
            }
            case Builtin::Min:
            case Builtin::Max: {
                Value a = eval(*e.args[0]);
                Value b = eval(*e.args[1]);
                if (a.type == Type::Int && b.type == Type::Int) {
                    bool takea = e.builtin == Builtin::Min ? a.i <= b.i : a.i >= b.i;
                    return takea ? a : b;
                }
                if ((a.type == Type::Int || a.type == Type::Float) &&
                    (b.type == Type::Int || b.type == Type::Float)) {
                    double av = a.type == Type::Int ? static_cast<double>(a.i) : a.f;
                    double bv = b.type == Type::Int ? static_cast<double>(b.i) : b.f;
                    bool takea = e.builtin == Builtin::Min ? av <= bv : av >= bv;
                    return takea ? a : b;
                }
                throw Raised{"min/max expect numbers"};
            }
            case Builtin::Push: {
                Value target = eval(*e.args[0]);
                Value item = eval(*e.args[1]);
                if (target.type != Type::IntArray) throw Raised{"push expects an IntArray"};
                if (item.type != Type::Int) throw Raised{"push expects an Int element"};
                target.arr->push_back(item.i);
                return Value::make_void();
            }
        }
        throw Raised{"unreachable builtin"};
    }

    std::unordered_map<std::string, Value> env_;
    std::int64_t budget_;
    std::int64_t steps_used_ = 0;
};

}  // namespace detail

// Deterministic big-step evaluation under an instruction budget. All failure
// modes are statuses, never exceptions.
inline RunResult execute(const Program& program, const std::vector<Value>& args, double timeout_s) {
    RunResult result;
    auto t0 = std::chrono::steady_clock::now();
    std::int64_t budget = static_cast<std::int64_t>(timeout_s * kStepsPerSecond);
    if (budget < 1) budget = 1;
    detail::Interp interp(budget);

    std::vector<Value> own_args;
    own_args.reserve(args.size());
    for (const auto& a : args) own_args.push_back(a.deep_copy());

    try {
        result.value = interp.run_function(program.fn, own_args);
        result.status = RunResult::Status::Ok;
        // Mutable-argument post-state is observed through the caller's own
        // array handles; rebinding a parameter name inside the function does
        // not count as a side effect.
        for (std::size_t i = 0; i < program.fn.params.size(); ++i) {
            if (own_args[i].type == Type::IntArray) {
                result.mutated_args.push_back(own_args[i].deep_copy());
            }
        }
        if (result.value.type == Type::IntArray) result.value = result.value.deep_copy();
    } catch (const detail::Raised& r) {
        result.status = RunResult::Status::Raised;
        result.message = r.message;
    } catch (const detail::BudgetExhausted&) {
        result.status = RunResult::Status::TimedOut;
        result.message = "instruction budget exhausted";
    }
    result.steps_used = interp.steps_used();
    auto t1 = std::chrono::steady_clock::now();
    result.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    return result;
}

// Parses then executes; parse failures become a ParseFailed status.
inline RunResult run_source(const LanguageId& lang, const std::string& source,
                            const std::vector<Value>& args, double timeout_s) {
    Program prog;
    try {
        prog = parse(lang, source);
    } catch (const ParseFailed& e) {
        RunResult r;
        r.status = RunResult::Status::ParseFailed;
        r.message = e.what();
        return r;
    }
    return execute(prog, args, timeout_s);
}

}  // namespace codemt

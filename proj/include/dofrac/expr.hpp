#pragma once

// Small arithmetic expression language used to describe coefficients, data and
// weights in configuration files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: sin cos tan exp log sqrt abs (1 arg), min max (2 args),
// chi(a, b, v) = 1 if a <= v <= b else 0.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dofrac/error.hpp"

namespace dofrac {

class Expr {
public:
    enum class BinOp : char { Add = '+', Sub = '-', Mul = '*', Div = '/', Pow = '^' };

    struct Number;
    struct Variable;
    struct Negate;
    struct Binary;
    struct Call;
    using Node = std::variant<Number, Variable, Negate, Binary, Call>;

    Expr();
    Expr(const Node& node);

    static Expr number(double v);
    static Expr variable(std::string name);
    static Expr negate(Expr e);
    static Expr binary(BinOp op, Expr l, Expr r);
    static Expr call(std::string name, std::vector<Expr> args);

    const Node& node() const;

    /// Structural equality of the trees (numbers compared bitwise-exact).
    friend bool operator==(const Expr& a, const Expr& b);

    /// Fully parenthesised text form; `parse(to_string())` rebuilds the same tree.
    std::string to_string() const;

    /// Names of all variables referenced by the expression.
    std::set<std::string> free_variables() const;

    /// True when the expression references no variables.
    bool is_constant() const { return free_variables().empty(); }

private:
    std::shared_ptr<const Node> node_;
};

struct Expr::Number {
    double value;
};
struct Expr::Variable {
    std::string name;
};
struct Expr::Negate {
    Expr operand;
};
struct Expr::Binary {
    BinOp op;
    Expr lhs;
    Expr rhs;
};
struct Expr::Call {
    std::string name;
    std::vector<Expr> args;
};

inline Expr::Expr() : Expr(Number{0.0}) {}
inline const Expr::Node& Expr::node() const { return *node_; }
inline Expr::Expr(const Node& node) : node_(std::make_shared<const Node>(node)) {}
inline Expr Expr::number(double v) { return Expr(Number{v}); }
inline Expr Expr::variable(std::string name) { return Expr(Variable{std::move(name)}); }
inline Expr Expr::negate(Expr e) { return Expr(Negate{std::move(e)}); }
inline Expr Expr::binary(BinOp op, Expr l, Expr r) { return Expr(Binary{op, std::move(l), std::move(r)}); }
inline Expr Expr::call(std::string name, std::vector<Expr> args) { return Expr(Call{std::move(name), std::move(args)}); }

using Bindings = std::map<std::string, double, std::less<>>;

namespace detail {

inline int function_arity(std::string_view name) {
    static const std::map<std::string_view, int> table = {
        {"sin", 1}, {"cos", 1}, {"tan", 1}, {"exp", 1}, {"log", 1}, {"sqrt", 1},
        {"abs", 1}, {"min", 2}, {"max", 2}, {"chi", 3},
    };
    auto it = table.find(name);
    return it == table.end() ? -1 : it->second;
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Expr parse_all() {
        skip_ws();
        if (pos_ == src_.size()) throw ParseError("empty expression", pos_);
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = Expr::binary(Expr::BinOp::Add, std::move(lhs), parse_term());
            } else if (accept('-')) {
                lhs = Expr::binary(Expr::BinOp::Sub, std::move(lhs), parse_term());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_term() {
        Expr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = Expr::binary(Expr::BinOp::Mul, std::move(lhs), parse_unary());
            } else if (accept('/')) {
                lhs = Expr::binary(Expr::BinOp::Div, std::move(lhs), parse_unary());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_unary() {
        if (accept('-')) return Expr::negate(parse_unary());
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (accept('^')) return Expr::binary(Expr::BinOp::Pow, std::move(base), parse_unary());
        return base;
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
        if (ec != std::errc()) throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        return Expr::number(value);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        std::string name(src_.substr(start, pos_ - start));
        if (!accept('(')) return Expr::variable(std::move(name));

        const int arity = function_arity(name);
        if (arity < 0) throw ParseError("unknown function '" + name + "'", start);
        std::vector<Expr> args;
        args.push_back(parse_expr());
        while (accept(',')) args.push_back(parse_expr());
        expect(')');
        if (static_cast<int>(args.size()) != arity) {
            throw ParseError("function '" + name + "' expects " + std::to_string(arity) + " argument(s)",
                             start);
        }
        return Expr::call(std::move(name), std::move(args));
    }
};

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Parses `src`; throws ParseError carrying the byte offset on failure.
inline Expr parse(std::string_view src) { return detail::Parser(src).parse_all(); }

inline bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const auto& na = a.node();
    const auto& nb = b.node();
    if (na.index() != nb.index()) return false;
    return std::visit(
        detail::Overloaded{
            [&](const Expr::Number& x) { return x.value == std::get<Expr::Number>(nb).value; },
            [&](const Expr::Variable& x) { return x.name == std::get<Expr::Variable>(nb).name; },
            [&](const Expr::Negate& x) { return x.operand == std::get<Expr::Negate>(nb).operand; },
            [&](const Expr::Binary& x) {
                const auto& y = std::get<Expr::Binary>(nb);
                return x.op == y.op && x.lhs == y.lhs && x.rhs == y.rhs;
            },
            [&](const Expr::Call& x) {
                const auto& y = std::get<Expr::Call>(nb);
                return x.name == y.name && x.args == y.args;
            },
        },
        na);
}

inline std::string Expr::to_string() const {
    return std::visit(
        detail::Overloaded{
            [](const Number& x) { return detail::format_number(x.value); },
            [](const Variable& x) { return x.name; },
            [](const Negate& x) { return "(-" + x.operand.to_string() + ")"; },
            [](const Binary& x) {
                return "(" + x.lhs.to_string() + static_cast<char>(x.op) + x.rhs.to_string() + ")";
            },
            [](const Call& x) {
                std::string s = x.name + "(";
                for (std::size_t i = 0; i < x.args.size(); ++i) {
                    if (i) s += ",";
                    s += x.args[i].to_string();
                }
                return s + ")";
            },
        },
        node());
}

inline std::set<std::string> Expr::free_variables() const {
    std::set<std::string> out;
    std::vector<const Expr*> stack{this};
    while (!stack.empty()) {
        const Expr* e = stack.back();
        stack.pop_back();
        std::visit(detail::Overloaded{
                       [](const Number&) {},
                       [&](const Variable& x) { out.insert(x.name); },
                       [&](const Negate& x) { stack.push_back(&x.operand); },
                       [&](const Binary& x) {
                           stack.push_back(&x.lhs);
                           stack.push_back(&x.rhs);
                       },
                       [&](const Call& x) {
                           for (const auto& a : x.args) stack.push_back(&a);
                       },
                   },
                   e->node());
    }
    return out;
}

/// Evaluates `e`. Throws DomainError on unbound variables, division by zero,
/// 0 raised to a negative power, and log/sqrt outside their domains.
inline double eval(const Expr& e, const Bindings& bindings) {
    return std::visit(
        detail::Overloaded{
            [](const Expr::Number& x) { return x.value; },
            [&](const Expr::Variable& x) {
                auto it = bindings.find(x.name);
                if (it == bindings.end()) throw DomainError("unbound variable '" + x.name + "'");
                return it->second;
            },
            [&](const Expr::Negate& x) { return -eval(x.operand, bindings); },
            [&](const Expr::Binary& x) {
                const double l = eval(x.lhs, bindings);
                const double r = eval(x.rhs, bindings);
                switch (x.op) {
                    case Expr::BinOp::Add: return l + r;
                    case Expr::BinOp::Sub: return l - r;
                    case Expr::BinOp::Mul: return l * r;
                    case Expr::BinOp::Div:
                        if (r == 0.0) throw DomainError("division by zero");
                        return l / r;
                    case Expr::BinOp::Pow:
                        if (l == 0.0 && r < 0.0) throw DomainError("zero raised to a negative power");
                        return std::pow(l, r);
                }
                return 0.0;
            },
            [&](const Expr::Call& x) {
                const auto arg = [&](std::size_t i) { return eval(x.args[i], bindings); };
                const std::string& f = x.name;
                if (f == "sin") return std::sin(arg(0));
                if (f == "cos") return std::cos(arg(0));
                if (f == "tan") return std::tan(arg(0));
                if (f == "exp") return std::exp(arg(0));
                if (f == "abs") return std::abs(arg(0));
                if (f == "log") {
                    const double v = arg(0);
                    if (!(v > 0.0)) throw DomainError("log of a non-positive value");
                    return std::log(v);
                }
                if (f == "sqrt") {
                    const double v = arg(0);
                    if (v < 0.0) throw DomainError("sqrt of a negative value");
                    return std::sqrt(v);
                }
                if (f == "min") return std::min(arg(0), arg(1));
                if (f == "max") return std::max(arg(0), arg(1));
                if (f == "chi") {
                    const double v = arg(2);
                    return (arg(0) <= v && v <= arg(1)) ? 1.0 : 0.0;
                }
                throw DomainError("unknown function '" + f + "'");
            },
        },
        e.node());
}

/// Evaluates an expression of a single variable.
inline double eval(const Expr& e, std::string_view var, double value) {
    Bindings b;
    b.emplace(std::string(var), value);
    return eval(e, b);
}

}  // namespace dofrac

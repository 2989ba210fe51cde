#pragma once

// Small arithmetic expression language used to declare vector fields in
// config files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right associative
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables: t, x1, x2, eps. Constants: pi, e.
// Functions: sin cos exp log abs sign tri (1 argument), min max mod (2).

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace cyclepersist {

struct ExprVars {
    double t = 0.0;
    double x1 = 0.0;
    double x2 = 0.0;
    double eps = 0.0;
};

/// Triangle wave with period 2*pi and amplitude 1; tri(0) = 0, tri(pi/2) = 1.
inline double triangle_wave(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double u = std::fmod(x + 0.5 * std::numbers::pi, two_pi);
    if (u < 0.0) u += two_pi;
    const double s = 2.0 * u / std::numbers::pi;
    return u < std::numbers::pi ? s - 1.0 : 3.0 - s;
}

class ExpressionProgram {
public:
    enum class Kind { Number, Variable, Constant, Negate, Binary, Call };
    enum class Var { T, X1, X2, Eps };
    enum class Func { Sin, Cos, Exp, Log, Abs, Sign, Tri, Min, Max, Mod };

    struct Node {
        Kind kind = Kind::Number;
        std::size_t offset = 0;
        double number = 0.0;
        Var var = Var::T;
        char op = 0;              // Binary: + - * / ^ ; Constant: 'p' (pi) or 'e'
        Func func = Func::Sin;
        std::vector<std::unique_ptr<Node>> args;
    };

    static ExpressionProgram parse(std::string_view src) {
        Parser p{src};
        ExpressionProgram prog;
        prog.source_ = std::string(src);
        p.skip_ws();
        if (p.at_end()) throw ParseError("empty expression", 0);
        prog.root_ = p.parse_expr();
        p.skip_ws();
        if (!p.at_end()) {
            throw ParseError(std::string("unexpected character '") + src[p.pos] + "' at offset " +
                                 std::to_string(p.pos),
                             p.pos);
        }
        return prog;
    }

    double eval(const ExprVars& v) const { return eval_node(*root_, v); }
    double operator()(double t, double x1, double x2, double eps) const {
        return eval(ExprVars{t, x1, x2, eps});
    }

    /// Canonical, fully parenthesised text; parse(unparse()) yields the same tree.
    std::string unparse() const { return unparse_node(*root_); }

    const Node& root() const { return *root_; }
    const std::string& source() const { return source_; }

    bool uses(Var var) const { return uses_node(*root_, var); }

    /// Structural equality, ignoring source offsets.
    static bool same_tree(const Node& a, const Node& b) {
        if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
        switch (a.kind) {
            case Kind::Number: if (a.number != b.number) return false; break;
            case Kind::Variable: if (a.var != b.var) return false; break;
            case Kind::Constant: if (a.op != b.op) return false; break;
            case Kind::Binary: if (a.op != b.op) return false; break;
            case Kind::Call: if (a.func != b.func) return false; break;
            case Kind::Negate: break;
        }
        for (std::size_t i = 0; i < a.args.size(); ++i) {
            if (!same_tree(*a.args[i], *b.args[i])) return false;
        }
        return true;
    }

private:
    struct Parser {
        std::string_view s;
        std::size_t pos = 0;

        bool at_end() const { return pos >= s.size(); }
        void skip_ws() {
            while (!at_end() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip_ws();
            if (!at_end() && s[pos] == c) { ++pos; return true; }
            return false;
        }
        [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
            throw ParseError(msg + " at offset " + std::to_string(at), at);
        }

        std::unique_ptr<Node> make(Kind k, std::size_t at) {
            auto n = std::make_unique<Node>();
            n->kind = k;
            n->offset = at;
            return n;
        }

        std::unique_ptr<Node> binary(char op, std::size_t at, std::unique_ptr<Node> l,
                                     std::unique_ptr<Node> r) {
            auto n = make(Kind::Binary, at);
            n->op = op;
            n->args.push_back(std::move(l));
            n->args.push_back(std::move(r));
            return n;
        }

        std::unique_ptr<Node> parse_expr() {
            auto lhs = parse_term();
            for (;;) {
                skip_ws();
                const std::size_t at = pos;
                if (accept('+')) lhs = binary('+', at, std::move(lhs), parse_term());
                else if (accept('-')) lhs = binary('-', at, std::move(lhs), parse_term());
                else return lhs;
            }
        }

        std::unique_ptr<Node> parse_term() {
            auto lhs = parse_unary();
            for (;;) {
                skip_ws();
                const std::size_t at = pos;
                if (accept('*')) lhs = binary('*', at, std::move(lhs), parse_unary());
                else if (accept('/')) lhs = binary('/', at, std::move(lhs), parse_unary());
                else return lhs;
            }
        }

        std::unique_ptr<Node> parse_unary() {
            skip_ws();
            const std::size_t at = pos;
            if (accept('-')) {
                auto n = make(Kind::Negate, at);
                n->args.push_back(parse_unary());
                return n;
            }
            return parse_power();
        }

        std::unique_ptr<Node> parse_power() {
            auto base = parse_primary();
            skip_ws();
            const std::size_t at = pos;
            if (accept('^')) return binary('^', at, std::move(base), parse_unary());
            return base;
        }

        std::unique_ptr<Node> parse_primary() {
            skip_ws();
            const std::size_t at = pos;
            if (at_end()) fail("unexpected end of expression", at);
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
            if (accept('(')) {
                auto inner = parse_expr();
                if (!accept(')')) fail("expected ')'", pos);
                return inner;
            }
            fail(std::string("unexpected character '") + c + "'", at);
        }

        std::unique_ptr<Node> parse_number() {
            const std::size_t at = pos;
            std::size_t end = pos;
            while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) ++end;
            if (end < s.size() && (s[end] == 'e' || s[end] == 'E')) {
                std::size_t k = end + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
                if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
                    while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
                    end = k;
                }
            }
            const std::string text(s.substr(at, end - at));
            char* stop = nullptr;
            const double v = std::strtod(text.c_str(), &stop);
            if (stop != text.c_str() + text.size() || text == ".") fail("malformed number '" + text + "'", at);
            pos = end;
            auto n = make(Kind::Number, at);
            n->number = v;
            return n;
        }

        std::unique_ptr<Node> parse_name() {
            const std::size_t at = pos;
            std::size_t end = pos;
            while (end < s.size() && (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_')) ++end;
            const std::string name(s.substr(at, end - at));
            pos = end;
            skip_ws();
            if (!at_end() && s[pos] == '(') {
                ++pos;
                struct Entry { const char* name; Func f; int arity; };
                static constexpr Entry table[] = {
                    {"sin", Func::Sin, 1}, {"cos", Func::Cos, 1}, {"exp", Func::Exp, 1},
                    {"log", Func::Log, 1}, {"abs", Func::Abs, 1}, {"sign", Func::Sign, 1},
                    {"tri", Func::Tri, 1}, {"min", Func::Min, 2}, {"max", Func::Max, 2},
                    {"mod", Func::Mod, 2}};
                const Entry* found = nullptr;
                for (const auto& e : table) {
                    if (name == e.name) { found = &e; break; }
                }
                if (!found) fail("unknown function '" + name + "'", at);
                auto n = make(Kind::Call, at);
                n->func = found->f;
                skip_ws();
                if (!accept(')')) {
                    n->args.push_back(parse_expr());
                    while (accept(',')) n->args.push_back(parse_expr());
                    if (!accept(')')) fail("expected ')' or ','", pos);
                }
                if (static_cast<int>(n->args.size()) != found->arity) {
                    fail("function '" + name + "' expects " + std::to_string(found->arity) +
                             " argument(s), got " + std::to_string(n->args.size()),
                         at);
                }
                return n;
            }
            if (name == "pi" || name == "e") {
                auto n = make(Kind::Constant, at);
                n->op = name == "pi" ? 'p' : 'e';
                return n;
            }
            auto n = make(Kind::Variable, at);
            if (name == "t") n->var = Var::T;
            else if (name == "x1") n->var = Var::X1;
            else if (name == "x2") n->var = Var::X2;
            else if (name == "eps") n->var = Var::Eps;
            else fail("unknown identifier '" + name + "'", at);
            return n;
        }
    };

    static double eval_node(const Node& n, const ExprVars& v) {
        switch (n.kind) {
            case Kind::Number: return n.number;
            case Kind::Constant: return n.op == 'p' ? std::numbers::pi : std::numbers::e;
            case Kind::Variable:
                switch (n.var) {
                    case Var::T: return v.t;
                    case Var::X1: return v.x1;
                    case Var::X2: return v.x2;
                    case Var::Eps: return v.eps;
                }
                return 0.0;
            case Kind::Negate: return -eval_node(*n.args[0], v);
            case Kind::Binary: {
                const double a = eval_node(*n.args[0], v);
                const double b = eval_node(*n.args[1], v);
                switch (n.op) {
                    case '+': return a + b;
                    case '-': return a - b;
                    case '*': return a * b;
                    case '/': return a / b;
                    case '^': {
                        // small integer powers are common (x1^2) and pow is slow
                        if (b == 2.0) return a * a;
                        if (b == 3.0) return a * a * a;
                        return std::pow(a, b);
                    }
                }
                return 0.0;
            }
            case Kind::Call: {
                const double a = eval_node(*n.args[0], v);
                switch (n.func) {
                    case Func::Sin: return std::sin(a);
                    case Func::Cos: return std::cos(a);
                    case Func::Exp: return std::exp(a);
                    case Func::Log: return std::log(a);
                    case Func::Abs: return std::abs(a);
                    case Func::Sign: return static_cast<double>((a > 0.0) - (a < 0.0));
                    case Func::Tri: return triangle_wave(a);
                    case Func::Min: return std::min(a, eval_node(*n.args[1], v));
                    case Func::Max: return std::max(a, eval_node(*n.args[1], v));
                    case Func::Mod: {
                        const double b = eval_node(*n.args[1], v);
                        return a - b * std::floor(a / b);
                    }
                }
                return 0.0;
            }
        }
        return 0.0;
    }

    static std::string unparse_node(const Node& n) {
        switch (n.kind) {
            case Kind::Number: {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", n.number);
                return buf;
            }
            case Kind::Constant: return n.op == 'p' ? "pi" : "e";
            case Kind::Variable: {
                static constexpr const char* names[] = {"t", "x1", "x2", "eps"};
                return names[static_cast<int>(n.var)];
            }
            case Kind::Negate: return "(-" + unparse_node(*n.args[0]) + ")";
            case Kind::Binary:
                return "(" + unparse_node(*n.args[0]) + " " + n.op + " " + unparse_node(*n.args[1]) + ")";
            case Kind::Call: {
                static constexpr const char* names[] = {"sin", "cos", "exp", "log", "abs",
                                                        "sign", "tri", "min", "max", "mod"};
                std::string out = names[static_cast<int>(n.func)];
                out += "(";
                for (std::size_t i = 0; i < n.args.size(); ++i) {
                    if (i) out += ", ";
                    out += unparse_node(*n.args[i]);
                }
                return out + ")";
            }
        }
        return {};
    }

    static bool uses_node(const Node& n, Var var) {
        if (n.kind == Kind::Variable && n.var == var) return true;
        for (const auto& a : n.args) {
            if (uses_node(*a, var)) return true;
        }
        return false;
    }

    std::string source_;
    std::shared_ptr<Node> root_;
};

}  // namespace cyclepersist

#include "nn/expr.hpp"

#include <cassert>
#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

namespace nn {

struct Expr::Node {
    ExprKind kind;
    NNReal value{};     // Const
    std::string name;   // Var
    int power = 0;      // NNPow
    std::shared_ptr<const Node> a;  // left child / unary child / npow base
    std::shared_ptr<const Node> b;  // right child
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_node(Expr::Node n) {
    return std::make_shared<const Expr::Node>(std::move(n));
}

}  // namespace

const Expr::Node& node_of(const Expr& e) { return *e.node_; }

Expr Expr::constant(NNReal c) {
    return Expr(make_node({.kind = ExprKind::Const, .value = c}));
}
Expr Expr::var(std::string name) {
    return Expr(make_node({.kind = ExprKind::Var, .name = std::move(name)}));
}
Expr Expr::oplus(Expr l, Expr r) {
    return Expr(make_node({.kind = ExprKind::OPlus, .a = l.node_, .b = r.node_}));
}
Expr Expr::ominus(Expr l, Expr r) {
    return Expr(make_node({.kind = ExprKind::OMinus, .a = l.node_, .b = r.node_}));
}
Expr Expr::odot(Expr l, Expr r) {
    return Expr(make_node({.kind = ExprKind::ODot, .a = l.node_, .b = r.node_}));
}
Expr Expr::oslash(Expr l, Expr r) {
    return Expr(make_node({.kind = ExprKind::OSlash, .a = l.node_, .b = r.node_}));
}
Expr Expr::npow(Expr base, int n) {
    return Expr(make_node({.kind = ExprKind::NNPow, .power = n, .a = base.node_}));
}
Expr Expr::exp_of(Expr u) {
    return Expr(make_node({.kind = ExprKind::ExpOf, .a = u.node_}));
}
Expr Expr::ln_of(Expr u) {
    return Expr(make_node({.kind = ExprKind::LnOf, .a = u.node_}));
}
Expr Expr::cos_e(Expr u) {
    return Expr(make_node({.kind = ExprKind::CosE, .a = u.node_}));
}
Expr Expr::sin_e(Expr u) {
    return Expr(make_node({.kind = ExprKind::SinE, .a = u.node_}));
}

ExprKind Expr::kind() const { return node_->kind; }
NNReal Expr::const_value() const {
    assert(node_->kind == ExprKind::Const);
    return node_->value;
}
const std::string& Expr::var_name() const {
    assert(node_->kind == ExprKind::Var);
    return node_->name;
}
int Expr::power() const {
    assert(node_->kind == ExprKind::NNPow);
    return node_->power;
}
Expr Expr::lhs() const { return Expr(node_->a); }
Expr Expr::rhs() const { return Expr(node_->b); }

namespace {

bool nodes_equal(const Expr::Node& x, const Expr::Node& y) {
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case ExprKind::Const: return x.value.log() == y.value.log();
        case ExprKind::Var: return x.name == y.name;
        case ExprKind::NNPow:
            return x.power == y.power && nodes_equal(*x.a, *y.a);
        case ExprKind::ExpOf:
        case ExprKind::LnOf:
        case ExprKind::CosE:
        case ExprKind::SinE:
            return nodes_equal(*x.a, *y.a);
        default:
            return nodes_equal(*x.a, *y.a) && nodes_equal(*x.b, *y.b);
    }
}

}  // namespace

bool Expr::structurally_equal(const Expr& other) const {
    return nodes_equal(*node_, *other.node_);
}

NNReal Bindings::lookup(std::string_view name) const {
    const std::optional<NNReal>* slot = nullptr;
    if (name == "x") slot = &x;
    else if (name == "y") slot = &y;
    else if (name == "yd") slot = &yd;
    if (!slot || !slot->has_value())
        throw DomainError("unbound variable '" + std::string(name) + "'");
    return **slot;
}

namespace {

// Structural recursion on logs; semantics fixed by the generated arithmetic.
double eval_log(const Expr::Node& n, const Bindings& env) {
    switch (n.kind) {
        case ExprKind::Const: return n.value.log();
        case ExprKind::Var: return env.lookup(n.name).log();
        case ExprKind::OPlus: return eval_log(*n.a, env) + eval_log(*n.b, env);
        case ExprKind::OMinus: return eval_log(*n.a, env) - eval_log(*n.b, env);
        case ExprKind::ODot: return eval_log(*n.a, env) * eval_log(*n.b, env);
        case ExprKind::OSlash: {
            double denom = eval_log(*n.b, env);
            if (denom == 0.0)
                throw DivisionByOneError("(/) by 1");
            return eval_log(*n.a, env) / denom;
        }
        case ExprKind::NNPow: {
            double base = eval_log(*n.a, env);
            if (n.power < 0 && base == 0.0)
                throw DivisionByOneError("npow: negative power of 1");
            return std::pow(base, n.power);
        }
        case ExprKind::ExpOf: return std::exp(eval_log(*n.a, env));
        case ExprKind::LnOf: {
            double lg = eval_log(*n.a, env);
            if (!(lg > 0.0))
                throw DomainError("ln of a value <= 1 is not a positive real");
            return std::log(lg);
        }
        case ExprKind::CosE: return std::cos(eval_log(*n.a, env));
        case ExprKind::SinE: return std::sin(eval_log(*n.a, env));
    }
    throw Error("corrupt expression node");
}

}  // namespace

NNReal eval(const Expr& e, const Bindings& env) {
    return NNReal::from_log(detail::checked(eval_log(node_of(e), env), "eval overflow"));
}

NNReal eval(const Expr& e, NNReal x) {
    Bindings env;
    env.x = x;
    return eval(e, env);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Lexer {
    std::string_view text;
    size_t pos = 0;

    enum class Tok { End, Op, LParen, RParen, Comma, Minus, Ident, Number, LogLiteral };

    Tok kind = Tok::End;
    size_t tok_pos = 0;
    char op = 0;            // '+','-','*','/' for Tok::Op
    std::string ident;      // Tok::Ident
    double number = 0.0;    // Tok::Number (value) / Tok::LogLiteral (log)

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    [[noreturn]] void fail(const std::string& msg, size_t at) const {
        throw ParseError(msg + " at offset " + std::to_string(at), at);
    }

    void next() {
        skip_ws();
        tok_pos = pos;
        if (pos >= text.size()) {
            kind = Tok::End;
            return;
        }
        char c = text[pos];
        if (c == '(') {
            // "(+)"-style operator tokens versus a plain parenthesis
            if (pos + 2 < text.size() && text[pos + 2] == ')' &&
                (text[pos + 1] == '+' || text[pos + 1] == '-' ||
                 text[pos + 1] == '*' || text[pos + 1] == '/')) {
                kind = Tok::Op;
                op = text[pos + 1];
                pos += 3;
                return;
            }
            kind = Tok::LParen;
            ++pos;
            return;
        }
        if (c == ')') { kind = Tok::RParen; ++pos; return; }
        if (c == ',') { kind = Tok::Comma; ++pos; return; }
        if (c == '-') { kind = Tok::Minus; ++pos; return; }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
            if (ec != std::errc{}) fail("malformed number", pos);
            pos = static_cast<size_t>(ptr - text.data());
            kind = Tok::Number;
            number = v;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            size_t start = pos;
            while (pos < text.size() &&
                   std::isalnum(static_cast<unsigned char>(text[pos])))
                ++pos;
            ident.assign(text.substr(start, pos - start));
            if (ident == "e" && pos < text.size() && text[pos] == '^') {
                ++pos;  // consume '^'
                double lg = 0.0;
                auto [ptr, ec] =
                    std::from_chars(text.data() + pos, text.data() + text.size(), lg);
                if (ec != std::errc{} || ptr == text.data() + pos)
                    fail("malformed log-form literal", pos);
                pos = static_cast<size_t>(ptr - text.data());
                kind = Tok::LogLiteral;
                number = lg;
                return;
            }
            kind = Tok::Ident;
            return;
        }
        fail(std::string("unexpected character '") + c + "'", pos);
    }
};

class Parser {
public:
    explicit Parser(std::string_view text) : lex_{text} { lex_.next(); }

    Expr parse() {
        Expr e = expr();
        if (lex_.kind != Lexer::Tok::End)
            lex_.fail("trailing input", lex_.tok_pos);
        return e;
    }

private:
    Lexer lex_;

    Expr expr() {
        Expr e = term();
        while (lex_.kind == Lexer::Tok::Op && (lex_.op == '+' || lex_.op == '-')) {
            char op = lex_.op;
            lex_.next();
            Expr r = term();
            e = (op == '+') ? Expr::oplus(e, r) : Expr::ominus(e, r);
        }
        return e;
    }

    Expr term() {
        Expr e = factor();
        while (lex_.kind == Lexer::Tok::Op && (lex_.op == '*' || lex_.op == '/')) {
            char op = lex_.op;
            lex_.next();
            Expr r = factor();
            e = (op == '*') ? Expr::odot(e, r) : Expr::oslash(e, r);
        }
        return e;
    }

    void expect(Lexer::Tok t, const char* what) {
        if (lex_.kind != t) lex_.fail(std::string("expected ") + what, lex_.tok_pos);
        lex_.next();
    }

    Expr factor() {
        switch (lex_.kind) {
            case Lexer::Tok::Number: {
                double v = lex_.number;
                size_t at = lex_.tok_pos;
                if (!(v > 0.0)) lex_.fail("literal must be strictly positive", at);
                lex_.next();
                return Expr::constant(NNReal::from_value(v));
            }
            case Lexer::Tok::LogLiteral: {
                double lg = lex_.number;
                lex_.next();
                return Expr::constant(NNReal::from_log(lg));
            }
            case Lexer::Tok::LParen: {
                lex_.next();
                Expr e = expr();
                expect(Lexer::Tok::RParen, "')'");
                return e;
            }
            case Lexer::Tok::Ident: {
                std::string name = lex_.ident;
                size_t at = lex_.tok_pos;
                lex_.next();
                if (name == "e") return Expr::constant(NNReal::one());
                if (name == "x" || name == "y" || name == "yd")
                    return Expr::var(name);
                if (name == "exp" || name == "ln" || name == "cose" || name == "sine") {
                    expect(Lexer::Tok::LParen, "'('");
                    Expr u = expr();
                    expect(Lexer::Tok::RParen, "')'");
                    if (name == "exp") return Expr::exp_of(u);
                    if (name == "ln") return Expr::ln_of(u);
                    if (name == "cose") return Expr::cos_e(u);
                    return Expr::sin_e(u);
                }
                if (name == "npow") {
                    expect(Lexer::Tok::LParen, "'('");
                    Expr u = expr();
                    expect(Lexer::Tok::Comma, "','");
                    int sign = 1;
                    if (lex_.kind == Lexer::Tok::Minus) {
                        sign = -1;
                        lex_.next();
                    }
                    if (lex_.kind != Lexer::Tok::Number)
                        lex_.fail("expected integer exponent", lex_.tok_pos);
                    double n = lex_.number;
                    if (n != std::floor(n))
                        lex_.fail("exponent must be an integer", lex_.tok_pos);
                    lex_.next();
                    expect(Lexer::Tok::RParen, "')'");
                    return Expr::npow(u, sign * static_cast<int>(n));
                }
                lex_.fail("unknown identifier '" + name + "'", at);
            }
            default:
                lex_.fail("expected expression", lex_.tok_pos);
        }
    }
};

}  // namespace

Expr parse_expr(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Pretty-printer
// ---------------------------------------------------------------------------

namespace {

// 0: (+)/(-) level, 1: (*)/(/) level, 2: atoms and function applications
int precedence(ExprKind k) {
    switch (k) {
        case ExprKind::OPlus:
        case ExprKind::OMinus: return 0;
        case ExprKind::ODot:
        case ExprKind::OSlash: return 1;
        default: return 2;
    }
}

void print_node(const Expr::Node& n, int min_level, std::string& out) {
    bool parens = precedence(n.kind) < min_level;
    if (parens) out += '(';
    switch (n.kind) {
        case ExprKind::Const: out += to_log_string(n.value); break;
        case ExprKind::Var: out += n.name; break;
        case ExprKind::OPlus:
        case ExprKind::OMinus:
            print_node(*n.a, 0, out);
            out += (n.kind == ExprKind::OPlus) ? " (+) " : " (-) ";
            print_node(*n.b, 1, out);
            break;
        case ExprKind::ODot:
        case ExprKind::OSlash:
            print_node(*n.a, 1, out);
            out += (n.kind == ExprKind::ODot) ? " (*) " : " (/) ";
            print_node(*n.b, 2, out);
            break;
        case ExprKind::NNPow:
            out += "npow(";
            print_node(*n.a, 0, out);
            out += ", " + std::to_string(n.power) + ")";
            break;
        case ExprKind::ExpOf:
        case ExprKind::LnOf:
        case ExprKind::CosE:
        case ExprKind::SinE: {
            const char* f = n.kind == ExprKind::ExpOf ? "exp"
                          : n.kind == ExprKind::LnOf  ? "ln"
                          : n.kind == ExprKind::CosE  ? "cose"
                                                      : "sine";
            out += f;
            out += '(';
            print_node(*n.a, 0, out);
            out += ')';
            break;
        }
    }
    if (parens) out += ')';
}

}  // namespace

std::string pretty(const Expr& e) {
    std::string out;
    print_node(node_of(e), 0, out);
    return out;
}

// ---------------------------------------------------------------------------
// Simplifier
// ---------------------------------------------------------------------------

namespace {

bool is_const_log(const Expr& e, double lg) {
    return e.kind() == ExprKind::Const && e.const_value().log() == lg;
}

bool is_nn_zero(const Expr& e) { return is_const_log(e, 0.0); }  // the value 1
bool is_nn_one(const Expr& e) { return is_const_log(e, 1.0); }   // the value e

}  // namespace

Expr simplify(const Expr& e) {
    switch (e.kind()) {
        case ExprKind::Const:
        case ExprKind::Var:
            return e;
        case ExprKind::OPlus: {
            Expr l = simplify(e.lhs()), r = simplify(e.rhs());
            if (l.kind() == ExprKind::Const && r.kind() == ExprKind::Const)
                return Expr::constant(oplus(l.const_value(), r.const_value()));
            if (is_nn_zero(r)) return l;
            if (is_nn_zero(l)) return r;
            return Expr::oplus(l, r);
        }
        case ExprKind::OMinus: {
            Expr l = simplify(e.lhs()), r = simplify(e.rhs());
            if (l.kind() == ExprKind::Const && r.kind() == ExprKind::Const)
                return Expr::constant(ominus(l.const_value(), r.const_value()));
            if (is_nn_zero(r)) return l;
            // 1 (-) (1 (-) u) -> u
            if (is_nn_zero(l) && r.kind() == ExprKind::OMinus && is_nn_zero(r.lhs()))
                return r.rhs();
            return Expr::ominus(l, r);
        }
        case ExprKind::ODot: {
            Expr l = simplify(e.lhs()), r = simplify(e.rhs());
            if (l.kind() == ExprKind::Const && r.kind() == ExprKind::Const)
                return Expr::constant(odot(l.const_value(), r.const_value()));
            if (is_nn_one(r)) return l;
            if (is_nn_one(l)) return r;
            if (is_nn_zero(r) || is_nn_zero(l)) return Expr::constant(NNReal::zero());
            if (r.kind() == ExprKind::Const) std::swap(l, r);
            if (l.kind() == ExprKind::Const) {
                // fold constants through (*) chains, distribute over (+)/(-)
                if (r.kind() == ExprKind::ODot &&
                    r.lhs().kind() == ExprKind::Const)
                    return simplify(Expr::odot(
                        Expr::constant(odot(l.const_value(), r.lhs().const_value())),
                        r.rhs()));
                if (r.kind() == ExprKind::ODot &&
                    r.rhs().kind() == ExprKind::Const)
                    return simplify(Expr::odot(
                        Expr::constant(odot(l.const_value(), r.rhs().const_value())),
                        r.lhs()));
                if (r.kind() == ExprKind::OPlus)
                    return simplify(Expr::oplus(Expr::odot(l, r.lhs()),
                                                Expr::odot(l, r.rhs())));
                if (r.kind() == ExprKind::OMinus)
                    return simplify(Expr::ominus(Expr::odot(l, r.lhs()),
                                                 Expr::odot(l, r.rhs())));
            }
            return Expr::odot(l, r);
        }
        case ExprKind::OSlash: {
            Expr l = simplify(e.lhs()), r = simplify(e.rhs());
            if (is_nn_one(r)) return l;
            if (l.kind() == ExprKind::Const && r.kind() == ExprKind::Const &&
                r.const_value().log() != 0.0)
                return Expr::constant(oslash(l.const_value(), r.const_value()));
            return Expr::oslash(l, r);
        }
        case ExprKind::NNPow: {
            Expr u = simplify(e.lhs());
            int n = e.power();
            if (n == 0) return Expr::constant(NNReal::one());
            if (n == 1) return u;
            if (u.kind() == ExprKind::Const &&
                !(n < 0 && u.const_value().log() == 0.0))
                return Expr::constant(nn_pow(u.const_value(), n));
            return Expr::npow(u, n);
        }
        case ExprKind::ExpOf: {
            Expr u = simplify(e.lhs());
            if (u.kind() == ExprKind::Const) {
                double lg = u.const_value().value();
                if (std::isfinite(lg)) return Expr::constant(NNReal::from_log(lg));
            }
            return Expr::exp_of(u);
        }
        case ExprKind::LnOf: {
            Expr u = simplify(e.lhs());
            if (u.kind() == ExprKind::ExpOf) return u.lhs();
            if (u.kind() == ExprKind::Const && u.const_value().log() > 0.0)
                return Expr::constant(NNReal::from_log(std::log(u.const_value().log())));
            return Expr::ln_of(u);
        }
        case ExprKind::CosE: {
            Expr u = simplify(e.lhs());
            if (u.kind() == ExprKind::Const)
                return Expr::constant(NNReal::from_log(std::cos(u.const_value().log())));
            return Expr::cos_e(u);
        }
        case ExprKind::SinE: {
            Expr u = simplify(e.lhs());
            if (u.kind() == ExprKind::Const)
                return Expr::constant(NNReal::from_log(std::sin(u.const_value().log())));
            return Expr::sin_e(u);
        }
    }
    throw Error("corrupt expression node");
}

}  // namespace nn

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "nn/core.hpp"

namespace nn {

enum class ExprKind {
    Const,   // positive literal
    Var,     // named variable ("x", "y", "yd")
    OPlus,   // l (+) r
    OMinus,  // l (-) r
    ODot,    // l (*) r
    OSlash,  // l (/) r
    NNPow,   // npow(base, n) -- iterated (*)-power
    ExpOf,   // e^(value of u)
    LnOf,    // ln(value of u); a positive real only where value(u) > 1
    CosE,    // e^cos(ln(value of u))
    SinE,    // e^sin(ln(value of u))
};

/// Immutable expression tree over positive functions.  Cheap to copy
/// (shared structure); evaluation is pure.
class Expr {
public:
    static Expr constant(NNReal c);
    static Expr var(std::string name);
    static Expr oplus(Expr l, Expr r);
    static Expr ominus(Expr l, Expr r);
    static Expr odot(Expr l, Expr r);
    static Expr oslash(Expr l, Expr r);
    static Expr npow(Expr base, int n);
    static Expr exp_of(Expr u);
    static Expr ln_of(Expr u);
    static Expr cos_e(Expr u);
    static Expr sin_e(Expr u);

    ExprKind kind() const;
    NNReal const_value() const;          // pre: kind() == Const
    const std::string& var_name() const; // pre: kind() == Var
    int power() const;                   // pre: kind() == NNPow
    Expr lhs() const;                    // binary ops; also NNPow base and unary child
    Expr rhs() const;                    // binary ops only

    bool structurally_equal(const Expr& other) const;

    struct Node;

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
    friend const Node& node_of(const Expr&);
};

/// Variable bindings for evaluation.  The parser admits "x", "y" and "yd";
/// evaluating an expression that references an unbound variable is a
/// domain error.
struct Bindings {
    std::optional<NNReal> x;
    std::optional<NNReal> y;
    std::optional<NNReal> yd;

    NNReal lookup(std::string_view name) const;
};

NNReal eval(const Expr& e, const Bindings& env);
NNReal eval(const Expr& e, NNReal x);

/// Recursive-descent parser for the grammar
///   expr   := term { ("(+)" | "(-)") term }
///   term   := factor { ("(*)" | "(/)") factor }
///   factor := literal | "x" | "y" | "yd" | "e" | func | "(" expr ")"
///   func   := ("exp"|"ln"|"cose"|"sine") "(" expr ")" | "npow" "(" expr "," int ")"
///   literal:= positive decimal | "e^" signed decimal
/// Throws ParseError with the offending offset.
Expr parse_expr(std::string_view text);

/// Deterministic rendering; parse_expr(pretty(e)) == e structurally.
std::string pretty(const Expr& e);

/// Constant folding plus identity pruning (u (+) 1 -> u, u (*) e -> u,
/// u (*) 1 -> 1, npow(u,1) -> u, ...).  Value-preserving on the common domain.
Expr simplify(const Expr& e);

/// Evaluatable positive function of one variable: either an expression in
/// "x" or an opaque callable.  The expression form keeps the tree around so
/// symbolic engines can use it.  An open domain (lo, hi) may be declared;
/// evaluation outside it is a domain error.
class NNFunction {
public:
    NNFunction(Expr e) : expr_(std::move(e)) {}
    NNFunction(std::function<NNReal(NNReal)> f) : fn_(std::move(f)) {}
    NNFunction(Expr e, NNReal lo, NNReal hi)
        : expr_(std::move(e)), domain_(std::pair{lo, hi}) {}
    NNFunction(std::function<NNReal(NNReal)> f, NNReal lo, NNReal hi)
        : fn_(std::move(f)), domain_(std::pair{lo, hi}) {}

    NNReal operator()(NNReal x) const {
        if (domain_ && !(domain_->first < x && x < domain_->second))
            throw DomainError("argument outside the declared domain");
        if (expr_) return eval(*expr_, x);
        return fn_(x);
    }

    const std::optional<Expr>& expr() const { return expr_; }
    const std::optional<std::pair<NNReal, NNReal>>& domain() const {
        return domain_;
    }

private:
    std::optional<Expr> expr_;
    std::function<NNReal(NNReal)> fn_;
    std::optional<std::pair<NNReal, NNReal>> domain_;
};

}  // namespace nn

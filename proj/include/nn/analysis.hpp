#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nn/core.hpp"
#include "nn/expr.hpp"

namespace nn {

enum class DerivMethod { symbolic, limit, conjugation };

struct DerivativeResult {
    NNReal value;
    DerivMethod method;
    double estimated_error = 0.0;  // log-space
    bool converged = true;
};

/// The default step sequence exp(2^-k), k = 3..20: values > 1 decreasing
/// towards 1, the additive identity.
std::vector<NNReal> default_limit_steps();

/// Derivative as the limit of difference quotients
/// (f(x (+) h) (-) f(x)) (/) h for h -> 1, with one Richardson
/// extrapolation over consecutive steps.  The returned estimated_error is
/// the spread of the last accepted extrapolation pair; converged is false
/// when it stays above tol.
DerivativeResult nn_deriv_limit(const NNFunction& f, NNReal x,
                                std::span<const NNReal> steps = {},
                                double tol = 1e-6);

/// Derivative through the conjugation identity: with u = ln x and
/// F(u) = ln f(e^u), the limit above equals exp(F'(u)).  Central
/// differences at h_log and h_log/2 plus one Richardson step.
DerivativeResult nn_deriv_conj(const NNFunction& f, NNReal x, double h_log = 1e-3);

/// Structural differentiation w.r.t. the named variable; other variables
/// are treated as constants (derivative 1).  Result is simplified.
Expr nn_deriv_symbolic(const Expr& e, std::string_view wrt = "x");

/// Best available engine: symbolic when the function carries an expression
/// (falling back to numerics where the derivative expression is undefined),
/// conjugation otherwise.
NNReal nn_deriv(const NNFunction& f, NNReal x);

/// n-th derivative; n = 0 returns f(x).  Symbolic iteration when an
/// expression is available, nested numeric differences otherwise (noisy for
/// n >= 3; see DerivativeResult::estimated_error of nn_deriv_n_result).
NNReal nn_deriv_n(const NNFunction& f, int n, NNReal x);
DerivativeResult nn_deriv_n_result(const NNFunction& f, int n, NNReal x);

struct TaylorPolynomial {
    NNReal center;
    int degree = 0;
    std::vector<NNReal> coefficients;  // k-th entry: the k-th derivative at the center
};

TaylorPolynomial taylor_poly(const NNFunction& f, NNReal a, int n);

/// P_n(x): (+)-sum over k of e^(1/k!) (*) coeff_k (*) (x (-) a)^{k}.
NNReal taylor_eval(const TaylorPolynomial& p, NNReal x);

/// Lagrange-form remainder bound in log space: since the intermediate point
/// is not constructively known, bound |log R_n| by
/// sup over a grid of |log f^(n+1)| / (n+1)! * |log(x (-) a)|^(n+1).
double taylor_remainder_bound(const NNFunction& f, NNReal a, NNReal x, int n,
                              int grid = 33);

struct Antiderivative {
    Expr expr;  // constant-free representative F; the full family is F (+) c
};

/// Table-driven symbolic antiderivative: constants, npow(x,n), e (/) x,
/// exp(a (*) x), exp(r (+) e^2 (*) x) (i.e. e^(r x^2)), closed under
/// (+)/(-) and constant (*) factors.  nullopt when no pattern matches.
std::optional<Antiderivative> nn_antideriv_symbolic(const Expr& e);

/// Definite integral over [a,b]: exp of the classical integral of
/// ln f(e^u) du over [ln a, ln b], adaptive Simpson bisection to log-space
/// absolute tolerance tol.  Swapped bounds return the (-)-inverse.
NNReal nn_integral(const NNFunction& f, NNReal a, NNReal b, double tol = 1e-10);

/// Residual d( d/dx of t -> integral_a^t f , f(x) ); 1 means the first
/// fundamental theorem holds at x.
NNReal ftc_check(const NNFunction& f, NNReal a, NNReal x, double tol = 1e-10);

/// Residual of the integration-by-parts identity
///   integral_a^b df (*) g  =  f (*) g |_a^b  (-)  integral_a^b f (*) dg.
NNReal ibp_check(const NNFunction& f, const NNFunction& g, NNReal a, NNReal b,
                 double tol = 1e-10);

}  // namespace nn

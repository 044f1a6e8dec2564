#include "nn/analysis.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

namespace nn {

namespace {

double log_of(const NNFunction& f, double u) {
    return f(NNReal::from_log(u)).log();
}

}  // namespace

std::vector<NNReal> default_limit_steps() {
    std::vector<NNReal> steps;
    steps.reserve(18);
    for (int k = 3; k <= 20; ++k)
        steps.push_back(NNReal::from_log(std::ldexp(1.0, -k)));
    return steps;
}

DerivativeResult nn_deriv_limit(const NNFunction& f, NNReal x,
                                std::span<const NNReal> steps, double tol) {
    std::vector<NNReal> defaults;
    if (steps.empty()) {
        defaults = default_limit_steps();
        steps = defaults;
    }
    if (steps.size() < 2)
        throw DomainError("nn_deriv_limit needs at least two steps");
    for (size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].log() <= 0.0 || (i > 0 && steps[i].log() >= steps[i - 1].log()))
            throw DomainError("steps must be > 1 and strictly decreasing");
    }

    const double u = x.log();
    const double f0 = log_of(f, u);

    std::vector<double> t(steps.size()), quot(steps.size());
    for (size_t i = 0; i < steps.size(); ++i) {
        t[i] = steps[i].log();
        quot[i] = (log_of(f, u + t[i]) - f0) / t[i];
    }

    // One Richardson level over consecutive difference quotients kills the
    // leading O(t) term; scan for the noise floor.
    double best_val = quot.back(), best_err = std::numeric_limits<double>::infinity();
    double prev_r = 0.0;
    bool have_prev = false;
    for (size_t i = 0; i + 1 < t.size(); ++i) {
        double r = quot[i + 1] +
                   (quot[i + 1] - quot[i]) * t[i + 1] / (t[i] - t[i + 1]);
        if (have_prev) {
            double diff = std::abs(r - prev_r);
            if (diff < best_err) {
                best_err = diff;
                best_val = r;
            }
        } else {
            best_val = r;
            best_err = std::abs(r - quot[i + 1]);
        }
        prev_r = r;
        have_prev = true;
    }

    DerivativeResult res;
    res.value = NNReal::from_log(best_val);
    res.method = DerivMethod::limit;
    res.estimated_error = best_err;
    res.converged = best_err <= tol;
    return res;
}

DerivativeResult nn_deriv_conj(const NNFunction& f, NNReal x, double h_log) {
    if (!(h_log > 0.0)) throw DomainError("h_log must be positive");
    const double u = x.log();
    const double h = h_log;

    double fp = log_of(f, u + h), fm = log_of(f, u - h);
    double fp2 = log_of(f, u + h / 2), fm2 = log_of(f, u - h / 2);
    double d1 = (fp - fm) / (2 * h);
    double d2 = (fp2 - fm2) / h;
    double r = d2 + (d2 - d1) / 3.0;  // cancels the O(h^2) term

    double scale = std::max({std::abs(fp), std::abs(fm), 1.0});
    double rounding = 4.0 * DBL_EPSILON * scale / h;
    double est = std::max(std::abs(d2 - d1) / 3.0 * 0.25, rounding);

    DerivativeResult res;
    res.value = NNReal::from_log(detail::checked(r, "derivative overflow"));
    res.method = DerivMethod::conjugation;
    res.estimated_error = est;
    res.converged = true;
    return res;
}

Expr nn_deriv_symbolic(const Expr& e, std::string_view wrt) {
    struct Rules {
        std::string_view wrt;
        Expr d(const Expr& e) const {
            switch (e.kind()) {
                case ExprKind::Const:
                    return Expr::constant(NNReal::zero());
                case ExprKind::Var:
                    return Expr::constant(e.var_name() == wrt ? NNReal::one()
                                                              : NNReal::zero());
                case ExprKind::OPlus:
                    return Expr::oplus(d(e.lhs()), d(e.rhs()));
                case ExprKind::OMinus:
                    return Expr::ominus(d(e.lhs()), d(e.rhs()));
                case ExprKind::ODot:
                    return Expr::oplus(Expr::odot(d(e.lhs()), e.rhs()),
                                       Expr::odot(e.lhs(), d(e.rhs())));
                case ExprKind::OSlash:
                    // (f (/) g)' = f' (/) g  (-)  (f (*) g') (/) g^{2}
                    return Expr::ominus(
                        Expr::oslash(d(e.lhs()), e.rhs()),
                        Expr::oslash(Expr::odot(e.lhs(), d(e.rhs())),
                                     Expr::npow(e.rhs(), 2)));
                case ExprKind::NNPow: {
                    int n = e.power();
                    if (n == 0) return Expr::constant(NNReal::zero());
                    return Expr::odot(
                        Expr::odot(Expr::constant(NNReal::from_log(n)),
                                   Expr::npow(e.lhs(), n - 1)),
                        d(e.lhs()));
                }
                case ExprKind::ExpOf:
                    return Expr::odot(Expr::exp_of(e.lhs()), d(e.lhs()));
                case ExprKind::LnOf:
                    return Expr::odot(
                        Expr::oslash(Expr::constant(NNReal::one()), e.lhs()),
                        d(e.lhs()));
                case ExprKind::CosE:
                    return Expr::odot(Expr::ominus(Expr::constant(NNReal::zero()),
                                                   Expr::sin_e(e.lhs())),
                                      d(e.lhs()));
                case ExprKind::SinE:
                    return Expr::odot(Expr::cos_e(e.lhs()), d(e.lhs()));
            }
            throw Error("corrupt expression node");
        }
    };
    return simplify(Rules{wrt}.d(e));
}

NNReal nn_deriv(const NNFunction& f, NNReal x) {
    if (f.expr()) {
        Expr d = nn_deriv_symbolic(*f.expr());
        try {
            return eval(d, x);
        } catch (const DivisionByOneError&) {
            // quotient-rule denominators can vanish at isolated points even
            // though the derivative exists there; fall through to numerics
        } catch (const DomainError&) {
        }
    }
    return nn_deriv_conj(f, x).value;
}

DerivativeResult nn_deriv_n_result(const NNFunction& f, int n, NNReal x) {
    if (n < 0) throw DomainError("derivative order must be >= 0");
    DerivativeResult res;
    res.method = f.expr() ? DerivMethod::symbolic : DerivMethod::conjugation;
    if (n == 0) {
        res.value = f(x);
        return res;
    }
    if (f.expr()) {
        Expr d = *f.expr();
        for (int k = 0; k < n; ++k) d = nn_deriv_symbolic(d);
        try {
            res.value = eval(d, x);
            return res;
        } catch (const DivisionByOneError&) {
        } catch (const DomainError&) {
        }
        res.method = DerivMethod::conjugation;
    }

    // Central stencil of order n (half-point offsets for odd n) on the
    // conjugate F(u) = ln f(e^u).
    const double u = x.log();
    const double h = std::pow(DBL_EPSILON, 1.0 / (n + 2));
    double acc = 0.0, binom = 1.0, mag = 0.0;
    for (int j = 0; j <= n; ++j) {
        double fv = log_of(f, u + (n / 2.0 - j) * h);
        acc += ((j % 2 == 0) ? binom : -binom) * fv;
        mag += std::abs(fv) * binom;
        binom = binom * (n - j) / (j + 1);
    }
    double val = acc / std::pow(h, n);
    double est = h * h * (1.0 + std::abs(val)) +
                 DBL_EPSILON * mag / std::pow(h, n);
    res.value = NNReal::from_log(detail::checked(val, "derivative overflow"));
    res.estimated_error = est;
    res.converged = est <= 1e-4;
    return res;
}

NNReal nn_deriv_n(const NNFunction& f, int n, NNReal x) {
    return nn_deriv_n_result(f, n, x).value;
}

TaylorPolynomial taylor_poly(const NNFunction& f, NNReal a, int n) {
    if (n < 0) throw DomainError("degree must be >= 0");
    TaylorPolynomial p;
    p.center = a;
    p.degree = n;
    p.coefficients.reserve(n + 1);
    if (f.expr()) {
        Expr d = *f.expr();
        p.coefficients.push_back(eval(d, a));
        for (int k = 1; k <= n; ++k) {
            d = nn_deriv_symbolic(d);
            p.coefficients.push_back(eval(d, a));
        }
    } else {
        for (int k = 0; k <= n; ++k)
            p.coefficients.push_back(nn_deriv_n(f, k, a));
    }
    return p;
}

NNReal taylor_eval(const TaylorPolynomial& p, NNReal x) {
    NNReal acc = NNReal::zero();
    NNReal step = ominus(x, p.center);
    for (int k = 0; k <= p.degree; ++k) {
        NNReal term = odot(nn_scale(1.0 / std::tgamma(k + 1.0), p.coefficients[k]),
                           nn_pow(step, k));
        acc = oplus(acc, term);
    }
    return acc;
}

double taylor_remainder_bound(const NNFunction& f, NNReal a, NNReal x, int n,
                              int grid) {
    double lo = std::min(a.log(), x.log()), hi = std::max(a.log(), x.log());
    double sup = 0.0;
    for (int i = 0; i < grid; ++i) {
        double u = lo + (hi - lo) * i / (grid - 1);
        double d = std::abs(nn_deriv_n(f, n + 1, NNReal::from_log(u)).log());
        sup = std::max(sup, d);
    }
    double span = std::abs(x.log() - a.log());
    return sup / std::tgamma(n + 2.0) * std::pow(span, n + 1);
}

// ---------------------------------------------------------------------------
// Symbolic antiderivatives (table plus linearity)
// ---------------------------------------------------------------------------

namespace {

bool is_var_x(const Expr& e) {
    return e.kind() == ExprKind::Var && e.var_name() == "x";
}

bool is_nn_one_const(const Expr& e) {
    return e.kind() == ExprKind::Const && e.const_value().log() == 1.0;
}

// c (*) x or x (*) c; yields c
std::optional<NNReal> match_const_dot_var(const Expr& e) {
    if (e.kind() != ExprKind::ODot) return std::nullopt;
    if (e.lhs().kind() == ExprKind::Const && is_var_x(e.rhs()))
        return e.lhs().const_value();
    if (e.rhs().kind() == ExprKind::Const && is_var_x(e.lhs()))
        return e.rhs().const_value();
    return std::nullopt;
}

// the classical-square shape e^2 (*) x (value x^2); the full pattern
// r (+) e^2 (*) x has value r*x^2
std::optional<double> match_r_x_squared(const Expr& u) {
    if (auto c = match_const_dot_var(u); c && c->log() == 2.0) return 1.0;
    if (u.kind() == ExprKind::OPlus) {
        auto side = [](const Expr& cst, const Expr& dot) -> std::optional<double> {
            if (cst.kind() != ExprKind::Const) return std::nullopt;
            auto c = match_const_dot_var(dot);
            if (c && c->log() == 2.0) return cst.const_value().value();
            return std::nullopt;
        };
        if (auto r = side(u.lhs(), u.rhs())) return r;
        if (auto r = side(u.rhs(), u.lhs())) return r;
    }
    return std::nullopt;
}

std::optional<Expr> antideriv(const Expr& e) {
    switch (e.kind()) {
        case ExprKind::Const: {
            NNReal k = e.const_value();
            if (k.log() == 0.0) return Expr::constant(NNReal::zero());
            return Expr::odot(Expr::constant(k), Expr::var("x"));
        }
        case ExprKind::Var:
            if (!is_var_x(e)) return std::nullopt;
            return Expr::odot(Expr::constant(NNReal::from_log(0.5)),
                              Expr::npow(Expr::var("x"), 2));
        case ExprKind::NNPow: {
            if (!is_var_x(e.lhs())) return std::nullopt;
            int n = e.power();
            if (n == -1) return Expr::ln_of(Expr::var("x"));
            return Expr::odot(Expr::constant(NNReal::from_log(1.0 / (n + 1))),
                              Expr::npow(Expr::var("x"), n + 1));
        }
        case ExprKind::OSlash:
            // e (/) x is x^{-1}
            if (is_nn_one_const(e.lhs()) && is_var_x(e.rhs()))
                return Expr::ln_of(Expr::var("x"));
            return std::nullopt;
        case ExprKind::ExpOf: {
            const Expr u = e.lhs();
            if (is_var_x(u)) return e;  // exp(x) is its own antiderivative
            if (auto a = match_const_dot_var(u); a && a->log() != 0.0)
                return Expr::odot(Expr::constant(nn_inv(*a)), e);
            if (auto r = match_r_x_squared(u)) {
                Expr half = Expr::constant(NNReal::from_value(*r / 2.0));
                Expr sq = Expr::odot(Expr::constant(NNReal::from_log(2.0)),
                                     Expr::var("x"));
                return Expr::exp_of(Expr::oplus(half, sq));
            }
            return std::nullopt;
        }
        case ExprKind::OPlus: {
            auto l = antideriv(e.lhs()), r = antideriv(e.rhs());
            if (!l || !r) return std::nullopt;
            return Expr::oplus(*l, *r);
        }
        case ExprKind::OMinus: {
            auto l = antideriv(e.lhs()), r = antideriv(e.rhs());
            if (!l || !r) return std::nullopt;
            return Expr::ominus(*l, *r);
        }
        case ExprKind::ODot: {
            // constant (*) factor pulls out (but c (*) x is the base case above)
            if (match_const_dot_var(e)) {
                Expr inner = antideriv(Expr::var("x")).value();
                NNReal c = e.lhs().kind() == ExprKind::Const
                               ? e.lhs().const_value()
                               : e.rhs().const_value();
                return Expr::odot(Expr::constant(c), inner);
            }
            if (e.lhs().kind() == ExprKind::Const) {
                auto inner = antideriv(e.rhs());
                if (!inner) return std::nullopt;
                return Expr::odot(e.lhs(), *inner);
            }
            if (e.rhs().kind() == ExprKind::Const) {
                auto inner = antideriv(e.lhs());
                if (!inner) return std::nullopt;
                return Expr::odot(e.rhs(), *inner);
            }
            return std::nullopt;
        }
        default:
            return std::nullopt;
    }
}

}  // namespace

std::optional<Antiderivative> nn_antideriv_symbolic(const Expr& e) {
    auto res = antideriv(simplify(e));
    if (!res) return std::nullopt;
    return Antiderivative{simplify(*res)};
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace {

struct SimpsonQuad {
    const NNFunction& f;
    int max_depth = 48;
    mutable long evals = 0;
    long max_evals = 2000000;

    double F(double u) const {
        if (++evals > max_evals)
            throw ConvergenceError("quadrature evaluation budget exhausted");
        return log_of(f, u);
    }

    static double simpson(double a, double b, double fa, double fm, double fb) {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }

    double rec(double a, double b, double fa, double fm, double fb, double S,
               double tol, int depth) const {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        double flm = F(lm), frm = F(rm);
        double Sl = simpson(a, m, fa, flm, fm);
        double Sr = simpson(m, b, fm, frm, fb);
        double err = (Sl + Sr - S) / 15.0;
        double noise = 64.0 * DBL_EPSILON * (std::abs(Sl) + std::abs(Sr) + 1.0);
        if (std::abs(err) <= tol || (depth >= 24 && std::abs(err) <= noise))
            return Sl + Sr + err;
        if (depth >= max_depth)
            throw ConvergenceError("quadrature tolerance not reached");
        return rec(a, m, fa, flm, fm, Sl, 0.5 * tol, depth + 1) +
               rec(m, b, fm, frm, fb, Sr, 0.5 * tol, depth + 1);
    }

    double run(double a, double b, double tol) const {
        double fa = F(a), fm = F(0.5 * (a + b)), fb = F(b);
        return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 0);
    }
};

}  // namespace

NNReal nn_integral(const NNFunction& f, NNReal a, NNReal b, double tol) {
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    double ua = a.log(), ub = b.log();
    if (ua == ub) return NNReal::zero();
    bool flipped = ua > ub;
    if (flipped) std::swap(ua, ub);
    double I = SimpsonQuad{f}.run(ua, ub, tol);
    return NNReal::from_log(detail::checked(flipped ? -I : I, "integral overflow"));
}

NNReal ftc_check(const NNFunction& f, NNReal a, NNReal x, double tol) {
    NNFunction accumulated([&f, a, tol](NNReal t) {
        return nn_integral(f, a, t, tol);
    });
    NNReal lhs = nn_deriv_conj(accumulated, x, 2e-2).value;
    return nn_dist(lhs, f(x));
}

NNReal ibp_check(const NNFunction& f, const NNFunction& g, NNReal a, NNReal b,
                 double tol) {
    NNFunction df_g([&](NNReal t) { return odot(nn_deriv(f, t), g(t)); });
    NNFunction f_dg([&](NNReal t) { return odot(f(t), nn_deriv(g, t)); });
    NNReal lhs = nn_integral(df_g, a, b, tol);
    NNReal boundary = ominus(odot(f(b), g(b)), odot(f(a), g(a)));
    NNReal rhs = ominus(boundary, nn_integral(f_dg, a, b, tol));
    return nn_dist(lhs, rhs);
}

}  // namespace nn

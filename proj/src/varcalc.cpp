#include "nn/varcalc.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>

#include "json.hpp"
#include "nn/analysis.hpp"

namespace nn {

// ---------------------------------------------------------------------------
// Path
// ---------------------------------------------------------------------------

Path::Path(NNReal a, NNReal b, std::vector<NNReal> values)
    : ua_(a.log()), ub_(b.log()), values_(std::move(values)) {
    if (!(ua_ < ub_)) throw DomainError("path interval must satisfy a < b");
    if (values_.size() < 3) throw DomainError("path needs at least 2 segments");
}

void Path::set_value(int i, NNReal v) {
    if (i <= 0 || i >= segments())
        throw DomainError("path endpoints are pinned");
    values_[i] = v;
}

double Path::deriv_log(int i) const {
    const int n = segments();
    const double hh = h();
    if (i == 0)
        return (-3.0 * values_[0].log() + 4.0 * values_[1].log() -
                values_[2].log()) /
               (2.0 * hh);
    if (i == n)
        return (3.0 * values_[n].log() - 4.0 * values_[n - 1].log() +
                values_[n - 2].log()) /
               (2.0 * hh);
    return (values_[i + 1].log() - values_[i - 1].log()) / (2.0 * hh);
}

// ---------------------------------------------------------------------------
// Partial-derivative engine shared by the functional, residual and solvers.
// Everything runs in conjugate coordinates u = ln x, Y = ln y, Yd = ln yd,
// where Lam(u, Y, Yd) = ln L(e^u, e^Y, e^Yd).
// ---------------------------------------------------------------------------

namespace {

struct PartialEval {
    const Lagrangian* L;
    std::optional<Expr> ly, lyd;            // first NN partials
    std::optional<Expr> lyy, lyyd, lydyd;   // second NN partials

    explicit PartialEval(const Lagrangian& lag, bool second = false) : L(&lag) {
        if (lag.expr()) {
            ly = nn_deriv_symbolic(*lag.expr(), "y");
            lyd = nn_deriv_symbolic(*lag.expr(), "yd");
            if (second) {
                lyy = nn_deriv_symbolic(*ly, "y");
                lyyd = nn_deriv_symbolic(*ly, "yd");
                lydyd = nn_deriv_symbolic(*lyd, "yd");
            }
        }
    }

    double lam(double u, double Y, double Yd) const {
        return (*L)(NNReal::from_log(u), NNReal::from_log(Y),
                    NNReal::from_log(Yd))
            .log();
    }

    static double eval_log(const Expr& e, double u, double Y, double Yd) {
        Bindings env;
        env.x = NNReal::from_log(u);
        env.y = NNReal::from_log(Y);
        env.yd = NNReal::from_log(Yd);
        return eval(e, env).log();
    }

    template <typename F>
    static double central(F&& f, double t, double h) {
        double d1 = (f(t + h) - f(t - h)) / (2.0 * h);
        double d2 = (f(t + h / 2) - f(t - h / 2)) / h;
        return d2 + (d2 - d1) / 3.0;
    }

    template <typename F>
    static double second_diff(F&& f, double t, double h) {
        double f0 = f(t);
        auto s = [&](double hh) {
            return (f(t + hh) - 2.0 * f0 + f(t - hh)) / (hh * hh);
        };
        double s1 = s(h), s2 = s(h / 2);
        return (4.0 * s2 - s1) / 3.0;
    }

    double dY(double u, double Y, double Yd) const {
        if (ly) {
            try {
                return eval_log(*ly, u, Y, Yd);
            } catch (const DivisionByOneError&) {
            } catch (const DomainError&) {
            }
        }
        return central([&](double t) { return lam(u, t, Yd); }, Y, 1e-4);
    }

    double dYd(double u, double Y, double Yd) const {
        if (lyd) {
            try {
                return eval_log(*lyd, u, Y, Yd);
            } catch (const DivisionByOneError&) {
            } catch (const DomainError&) {
            }
        }
        return central([&](double t) { return lam(u, Y, t); }, Yd, 1e-4);
    }

    double dYY(double u, double Y, double Yd) const {
        if (lyy) {
            try {
                return eval_log(*lyy, u, Y, Yd);
            } catch (const DivisionByOneError&) {
            } catch (const DomainError&) {
            }
        }
        return second_diff([&](double t) { return lam(u, t, Yd); }, Y, 5e-3);
    }

    double dYdYd(double u, double Y, double Yd) const {
        if (lydyd) {
            try {
                return eval_log(*lydyd, u, Y, Yd);
            } catch (const DivisionByOneError&) {
            } catch (const DomainError&) {
            }
        }
        return second_diff([&](double t) { return lam(u, Y, t); }, Yd, 5e-3);
    }

    double dYYd(double u, double Y, double Yd) const {
        if (lyyd) {
            try {
                return eval_log(*lyyd, u, Y, Yd);
            } catch (const DivisionByOneError&) {
            } catch (const DomainError&) {
            }
        }
        // mixed partial: difference the first Y-partial in Yd
        return central([&](double t) { return dY(u, Y, t); }, Yd, 1e-3);
    }
};

// log-derivative of a trajectory function, symbolic when available
struct TrajectoryDeriv {
    std::optional<Expr> dexpr;
    const NNFunction* y;

    explicit TrajectoryDeriv(const NNFunction& yf) : y(&yf) {
        if (yf.expr()) dexpr = nn_deriv_symbolic(*yf.expr());
    }

    double operator()(double u) const {
        if (dexpr) {
            try {
                return eval(*dexpr, NNReal::from_log(u)).log();
            } catch (const DivisionByOneError&) {
            } catch (const DomainError&) {
            }
        }
        return nn_deriv_conj(*y, NNReal::from_log(u), 1e-4).value.log();
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Functional evaluation
// ---------------------------------------------------------------------------

NNReal functional_eval(const VariationalProblem& P, const NNFunction& y,
                       double tol) {
    TrajectoryDeriv yd(y);
    const Lagrangian& L = P.lagrangian;
    NNFunction integrand([&](NNReal x) {
        return L(x, y(x), NNReal::from_log(yd(x.log())));
    });
    return nn_integral(integrand, P.a, P.b, tol);
}

namespace {

void require_admissible(const VariationalProblem& P, const Path& y) {
    if (std::abs(y.grid_log(0) - P.a.log()) > 1e-12 ||
        std::abs(y.grid_log(y.segments()) - P.b.log()) > 1e-12)
        throw DomainError("path grid does not match the problem interval");
    if (std::abs(y.value(0).log() - P.ya.log()) > 1e-9 ||
        std::abs(y.value(y.segments()).log() - P.yb.log()) > 1e-9)
        throw DomainError("path boundary values do not match the problem");
}

}  // namespace

NNReal functional_eval(const VariationalProblem& P, const Path& y) {
    require_admissible(P, y);
    PartialEval pe(P.lagrangian);
    const int n = y.segments();
    const double h = y.h();
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double w = (i == 0 || i == n) ? 0.5 * h : h;
        acc += w * pe.lam(y.grid_log(i), y.value(i).log(), y.deriv_log(i));
    }
    return NNReal::from_log(detail::checked(acc, "functional overflow"));
}

// ---------------------------------------------------------------------------
// NN partials and the Euler-Lagrange residual
// ---------------------------------------------------------------------------

NNReal nn_partial(const Lagrangian& L, PartialArg which, NNReal x, NNReal y,
                  NNReal yd, double h_log) {
    if (L.expr()) {
        PartialEval pe(L);
        const Expr& d = which == PartialArg::y ? *pe.ly : *pe.lyd;
        try {
            Bindings env;
            env.x = x;
            env.y = y;
            env.yd = yd;
            return eval(d, env);
        } catch (const DivisionByOneError&) {
        } catch (const DomainError&) {
        }
    }
    auto lam = [&](double t) {
        NNReal yy = which == PartialArg::y ? NNReal::from_log(t) : y;
        NNReal dd = which == PartialArg::yd ? NNReal::from_log(t) : yd;
        return L(x, yy, dd).log();
    };
    double at = which == PartialArg::y ? y.log() : yd.log();
    return NNReal::from_log(PartialEval::central(lam, at, h_log));
}

std::optional<Expr> nn_partial_symbolic(const Lagrangian& L, PartialArg which) {
    if (!L.expr()) return std::nullopt;
    return nn_deriv_symbolic(*L.expr(), which == PartialArg::y ? "y" : "yd");
}

NNReal el_residual(const VariationalProblem& P, const NNFunction& y, NNReal x,
                   double h_log) {
    PartialEval pe(P.lagrangian);
    TrajectoryDeriv yd(y);

    double u = x.log();
    double lhs = pe.dY(u, y(x).log(), yd(u));
    NNFunction momentum([&](NNReal t) {
        double ut = t.log();
        return NNReal::from_log(pe.dYd(ut, y(t).log(), yd(ut)));
    });
    double rhs = nn_deriv_conj(momentum, x, h_log).value.log();
    return NNReal::from_log(std::abs(lhs - rhs));
}

std::vector<NNReal> el_residual(const VariationalProblem& P, const Path& y) {
    if (std::abs(y.grid_log(0) - P.a.log()) > 1e-12 ||
        std::abs(y.grid_log(y.segments()) - P.b.log()) > 1e-12)
        throw DomainError("path grid does not match the problem interval");
    PartialEval pe(P.lagrangian);
    const int n = y.segments();
    const double h = y.h();

    std::vector<double> momentum(n + 1);
    for (int i = 0; i <= n; ++i)
        momentum[i] =
            pe.dYd(y.grid_log(i), y.value(i).log(), y.deriv_log(i));

    std::vector<NNReal> out;
    out.reserve(n - 1);
    for (int i = 1; i < n; ++i) {
        double lhs = pe.dY(y.grid_log(i), y.value(i).log(), y.deriv_log(i));
        // the endpoint momentum values inherit first-order error from the
        // one-sided trajectory stencils; difference away from them
        double rhs;
        if (i == 1 && n >= 4)
            rhs = (-3.0 * momentum[1] + 4.0 * momentum[2] - momentum[3]) /
                  (2.0 * h);
        else if (i == n - 1 && n >= 4)
            rhs = (3.0 * momentum[n - 1] - 4.0 * momentum[n - 2] +
                   momentum[n - 3]) /
                  (2.0 * h);
        else
            rhs = (momentum[i + 1] - momentum[i - 1]) / (2.0 * h);
        out.push_back(NNReal::from_log(std::abs(lhs - rhs)));
    }
    return out;
}

std::optional<ELSymbolicForm> el_reduced_form(const VariationalProblem& P) {
    if (!P.lagrangian.expr()) return std::nullopt;
    PartialEval pe(P.lagrangian);
    ELSymbolicForm form{*pe.ly, *pe.lyd, "", std::nullopt};
    form.equation = "D[" + pretty(*pe.lyd) + "] = " + pretty(*pe.ly);

    const Expr& ly = *pe.ly;
    const Expr& lyd = *pe.lyd;
    bool lyd_is_yd = lyd.kind() == ExprKind::Var && lyd.var_name() == "yd";
    bool lyd_is_const_one =
        lyd.kind() == ExprKind::Const && lyd.const_value().log() == 0.0;
    if (lyd_is_yd) {
        bool paper_shape = ly.kind() == ExprKind::OMinus &&
                           ly.lhs().kind() == ExprKind::Const &&
                           ly.lhs().const_value().log() == 0.0 &&
                           ly.rhs().kind() == ExprKind::Var &&
                           ly.rhs().var_name() == "y";
        form.reduced = paper_shape ? "yd2 (+) y = 1" : "yd2 = " + pretty(ly);
    } else if (lyd_is_const_one) {
        form.reduced = pretty(ly) + " = 1";
    }
    return form;
}

// ---------------------------------------------------------------------------
// Variations, bump functions and the fundamental-lemma probe
// ---------------------------------------------------------------------------

Variation::Variation(NNFunction h_, NNReal epsilon_, NNReal a, NNReal b,
                     double endpoint_tol)
    : h(std::move(h_)), epsilon(epsilon_) {
    if (std::abs(h(a).log()) > endpoint_tol || std::abs(h(b).log()) > endpoint_tol)
        throw DomainError("variation h must equal 1 at both endpoints");
}

NNFunction make_variation(const NNFunction& y, const NNFunction& h, NNReal eps,
                          NNReal a, NNReal b, double endpoint_tol) {
    if (std::abs(h(a).log()) > endpoint_tol || std::abs(h(b).log()) > endpoint_tol)
        throw DomainError("variation h must equal 1 at both endpoints");
    return NNFunction(
        [y, h, eps](NNReal x) { return oplus(y(x), odot(eps, h(x))); });
}

NNFunction make_variation(const NNFunction& y, const Variation& v, NNReal a,
                          NNReal b) {
    return make_variation(y, v.h, v.epsilon, a, b);
}

Path make_variation(const Path& y, const Variation& v) {
    return make_variation(y, v.h, v.epsilon);
}

Path make_variation(const Path& y, const NNFunction& h, NNReal eps,
                    double endpoint_tol) {
    const int n = y.segments();
    if (std::abs(h(y.x(0)).log()) > endpoint_tol ||
        std::abs(h(y.x(n)).log()) > endpoint_tol)
        throw DomainError("variation h must equal 1 at both endpoints");
    std::vector<NNReal> vals;
    vals.reserve(n + 1);
    vals.push_back(y.value(0));
    for (int i = 1; i < n; ++i)
        vals.push_back(oplus(y.value(i), odot(eps, h(y.x(i)))));
    vals.push_back(y.value(n));
    return Path(y.x(0), y.x(n), std::move(vals));
}

NNFunction bump(NNReal x1, NNReal x2) {
    const double u1 = x1.log(), u2 = x2.log();
    if (!(u1 < u2)) throw DomainError("bump requires x1 < x2");
    return NNFunction([u1, u2](NNReal x) {
        double u = x.log();
        if (u <= u1 || u >= u2) return NNReal::zero();
        return NNReal::from_log((u - u1) * (u2 - u));
    });
}

ProbeResult fundamental_lemma_probe(const NNFunction& f, NNReal a, NNReal b,
                                    int trials, std::uint64_t seed,
                                    double threshold) {
    if (trials <= 0) throw DomainError("probe needs at least one trial");
    const double ua = a.log(), ub = b.log();
    if (!(ua < ub)) throw DomainError("probe interval must satisfy a < b");

    std::uint64_t state = seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull;
    auto next_unit = [&state]() {
        // splitmix64, mapped to [0,1)
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        return (z >> 11) * 0x1.0p-53;
    };

    const double min_width = 0.05 * (ub - ua);
    ProbeResult res;
    res.trials = trials;
    for (int t = 0; t < trials; ++t) {
        double u1, u2;
        do {
            u1 = ua + next_unit() * (ub - ua);
            u2 = ua + next_unit() * (ub - ua);
            if (u1 > u2) std::swap(u1, u2);
        } while (u2 - u1 < min_width);
        NNFunction h = bump(NNReal::from_log(u1), NNReal::from_log(u2));
        NNFunction integrand([&](NNReal x) { return odot(f(x), h(x)); });
        // the integrand is 1 outside [x1,x2], so integrate there only
        NNReal I = nn_integral(integrand, NNReal::from_log(u1),
                               NNReal::from_log(u2), 1e-10);
        res.max_abs_log = std::max(res.max_abs_log, std::abs(I.log()));
    }
    res.deviation_found = res.max_abs_log > threshold;
    return res;
}

NNReal first_variation(const VariationalProblem& P, const NNFunction& y,
                       const NNFunction& h, double tol) {
    double quad_tol = std::min(tol, 1e-10);
    auto phi = [&](double t) {
        NNFunction varied =
            make_variation(y, h, NNReal::from_log(t), P.a, P.b);
        return functional_eval(P, varied, quad_tol).log();
    };
    return NNReal::from_log(PartialEval::central(phi, 0.0, 3e-3));
}

NNReal first_variation(const VariationalProblem& P, const Path& y,
                       const NNFunction& h) {
    auto phi = [&](double t) {
        return functional_eval(P, make_variation(y, h, NNReal::from_log(t)))
            .log();
    };
    return NNReal::from_log(PartialEval::central(phi, 0.0, 1e-4));
}

// ---------------------------------------------------------------------------
// Discretized action: interval-midpoint (Ritz) rule in conjugate coordinates.
// The collocation residual of solve_el_bvp is exactly the scaled gradient of
// this action, so both solvers share the machinery.
// ---------------------------------------------------------------------------

namespace {

struct DiscreteAction {
    PartialEval pe;
    double ua, ub, Ya, Yb;
    int n;
    double h;

    DiscreteAction(const VariationalProblem& P, int n_nodes, bool second)
        : pe(P.lagrangian, second),
          ua(P.a.log()),
          ub(P.b.log()),
          Ya(P.ya.log()),
          Yb(P.yb.log()),
          n(n_nodes),
          h((ub - ua) / n_nodes) {}

    double mid_u(int i) const { return ua + (i + 0.5) * h; }

    // Y has n+1 entries including the fixed endpoints.
    double action(const std::vector<double>& Y) const {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double Ym = 0.5 * (Y[i] + Y[i + 1]);
            double Dm = (Y[i + 1] - Y[i]) / h;
            acc += h * pe.lam(mid_u(i), Ym, Dm);
        }
        return acc;
    }

    // gradient w.r.t. interior nodes (g[0] corresponds to Y[1])
    void gradient(const std::vector<double>& Y, std::vector<double>& g) const {
        std::vector<double> pY(n), pD(n);
        for (int i = 0; i < n; ++i) {
            double Ym = 0.5 * (Y[i] + Y[i + 1]);
            double Dm = (Y[i + 1] - Y[i]) / h;
            pY[i] = pe.dY(mid_u(i), Ym, Dm);
            pD[i] = pe.dYd(mid_u(i), Ym, Dm);
        }
        g.assign(n - 1, 0.0);
        for (int j = 1; j < n; ++j)
            g[j - 1] = 0.5 * h * (pY[j - 1] + pY[j]) + pD[j - 1] - pD[j];
    }

    // symmetric tridiagonal Hessian of action/h (the Jacobian of the
    // collocation residual): diag[j-1] ~ node j, off[j-1] couples j, j+1
    void jacobian(const std::vector<double>& Y, std::vector<double>& diag,
                  std::vector<double>& off) const {
        std::vector<double> P2(n), Q2(n), S2(n);
        for (int i = 0; i < n; ++i) {
            double Ym = 0.5 * (Y[i] + Y[i + 1]);
            double Dm = (Y[i + 1] - Y[i]) / h;
            P2[i] = pe.dYY(mid_u(i), Ym, Dm);
            Q2[i] = pe.dYYd(mid_u(i), Ym, Dm);
            S2[i] = pe.dYdYd(mid_u(i), Ym, Dm);
        }
        diag.assign(n - 1, 0.0);
        off.assign(n - 2, 0.0);
        for (int j = 1; j < n; ++j) {
            diag[j - 1] = 0.25 * (P2[j - 1] + P2[j]) +
                          (Q2[j - 1] - Q2[j]) / h +
                          (S2[j - 1] + S2[j]) / (h * h);
            if (j + 1 < n)
                off[j - 1] = 0.25 * P2[j] - S2[j] / (h * h);
        }
    }

    std::vector<double> full(const std::vector<double>& interior) const {
        std::vector<double> Y(n + 1);
        Y[0] = Ya;
        Y[n] = Yb;
        std::copy(interior.begin(), interior.end(), Y.begin() + 1);
        return Y;
    }

    double scale() const {
        // characteristic magnitude of the smallest admissible operator
        // eigenvalue: lowest Dirichlet mode times the Yd-curvature of Lam
        double T = ub - ua;
        std::vector<double> s(n);
        std::vector<double> Ylin(n + 1);
        for (int i = 0; i <= n; ++i)
            Ylin[i] = Ya + (Yb - Ya) * i / n;
        for (int i = 0; i < n; ++i)
            s[i] = std::abs(pe.dYdYd(mid_u(i), 0.5 * (Ylin[i] + Ylin[i + 1]),
                                     (Ylin[i + 1] - Ylin[i]) / h));
        std::nth_element(s.begin(), s.begin() + n / 2, s.end());
        double pi = 3.14159265358979323846;
        return std::max(s[n / 2] * (pi / T) * (pi / T), 1e-30);
    }
};

// Sturm-count bisection for the eigenvalue of a symmetric tridiagonal
// matrix nearest to zero.
int sturm_count_below(const std::vector<double>& diag,
                      const std::vector<double>& off, double x) {
    int count = 0;
    double q = diag[0] - x;
    if (q < 0.0) ++count;
    for (size_t i = 1; i < diag.size(); ++i) {
        double e2 = off[i - 1] * off[i - 1];
        if (q == 0.0) q = DBL_MIN;
        q = diag[i] - x - e2 / q;
        if (q < 0.0) ++count;
    }
    return count;
}

double tridiag_eigenvalue(const std::vector<double>& diag,
                          const std::vector<double>& off, int index) {
    double lo = diag[0], hi = diag[0];
    for (size_t i = 0; i < diag.size(); ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(off[i - 1]);
        if (i < off.size()) r += std::abs(off[i]);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    for (int it = 0; it < 100 && lo < hi; ++it) {
        double mid = 0.5 * (lo + hi);
        if (sturm_count_below(diag, off, mid) >= index)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

double smallest_abs_eigenvalue(const std::vector<double>& diag,
                               const std::vector<double>& off) {
    const int m = static_cast<int>(diag.size());
    int below = sturm_count_below(diag, off, 0.0);
    if (below == 0) return std::abs(tridiag_eigenvalue(diag, off, 1));
    if (below == m) return std::abs(tridiag_eigenvalue(diag, off, m));
    return std::min(std::abs(tridiag_eigenvalue(diag, off, below)),
                    std::abs(tridiag_eigenvalue(diag, off, below + 1)));
}

// Thomas elimination; returns false on a vanishing pivot.
bool solve_tridiag(std::vector<double> diag, std::vector<double> off,
                   std::vector<double> rhs, std::vector<double>& out) {
    const size_t m = diag.size();
    std::vector<double> upper = off;
    for (size_t i = 1; i < m; ++i) {
        if (std::abs(diag[i - 1]) < 1e-300) return false;
        double w = off[i - 1] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (std::abs(diag[m - 1]) < 1e-300) return false;
    out.assign(m, 0.0);
    out[m - 1] = rhs[m - 1] / diag[m - 1];
    for (size_t i = m - 1; i-- > 0;) {
        out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i];
    }
    return true;
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Path to_path(const VariationalProblem& P, const std::vector<double>& Y) {
    std::vector<NNReal> vals;
    vals.reserve(Y.size());
    for (double lg : Y) vals.push_back(NNReal::from_log(lg));
    return Path(P.a, P.b, std::move(vals));
}

void finish_report(const VariationalProblem& P, const DiscreteAction& da,
                   const std::vector<double>& Y, SolveReport& rep) {
    rep.functional_log = da.action(Y);
    auto residuals = el_residual(P, rep.path);
    double mx = 0.0;
    for (NNReal r : residuals) mx = std::max(mx, r.log());
    rep.max_el_residual_log = mx;
}

}  // namespace

SolveReport solve_direct(const VariationalProblem& P, int n_nodes,
                         DirectOptions opts) {
    if (n_nodes < 8) throw DomainError("solve_direct needs n_nodes >= 8");

    // coarse-to-fine ladder: low modes converge cheaply on coarse grids
    std::vector<int> levels{n_nodes};
    if (opts.multilevel)
        while (levels.back() / 2 >= 8) levels.push_back(levels.back() / 2);
    std::reverse(levels.begin(), levels.end());

    int total_iters = 0;
    bool converged = false;
    double stationarity = 0.0;
    std::vector<double> z;  // interior unknowns of the current level

    for (size_t li = 0; li < levels.size(); ++li) {
        DiscreteAction da(P, levels[li], /*second=*/false);
        const int n = da.n;

        std::vector<double> init(n - 1);
        if (li == 0) {
            for (int j = 1; j < n; ++j)
                init[j - 1] = da.Ya + (da.Yb - da.Ya) * j / n;
        } else {
            // linear prolongation from the coarser grid
            int nc = levels[li - 1];
            double hc = (da.ub - da.ua) / nc;
            auto coarse = [&](int j) {
                if (j <= 0) return da.Ya;
                if (j >= nc) return da.Yb;
                return z[j - 1];
            };
            for (int j = 1; j < n; ++j) {
                double u = da.ua + j * da.h;
                double p = (u - da.ua) / hc;
                int jc = std::min(static_cast<int>(p), nc - 1);
                double frac = p - jc;
                init[j - 1] = coarse(jc) * (1.0 - frac) + coarse(jc + 1) * frac;
            }
        }
        z = std::move(init);

        auto action_of = [&](const std::vector<double>& zz) {
            return da.action(da.full(zz));
        };
        std::vector<double> g;
        da.gradient(da.full(z), g);
        double A = action_of(z);

        std::array<double, 8> hist;
        hist.fill(A);
        int hist_at = 0;

        double alpha = 0.0;
        std::vector<double> zn(z.size()), gn(z.size());
        converged = false;
        int it = 0;
        for (; it < opts.max_iter; ++it) {
            stationarity = inf_norm(g) / da.h;
            if (stationarity <= opts.stationarity_tol) {
                converged = true;
                break;
            }
            double g2 = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
            double ref = *std::max_element(hist.begin(), hist.end());
            if (alpha <= 0.0 || !std::isfinite(alpha)) alpha = 1.0;

            double An = 0.0;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                for (size_t i = 0; i < z.size(); ++i) zn[i] = z[i] - alpha * g[i];
                An = action_of(zn);
                if (std::isfinite(An) && An <= ref - 1e-4 * alpha * g2) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) break;  // stalled at the noise floor

            da.gradient(da.full(zn), gn);
            double sty = 0.0, sts = 0.0;
            for (size_t i = 0; i < z.size(); ++i) {
                double s = zn[i] - z[i];
                sts += s * s;
                sty += s * (gn[i] - g[i]);
            }
            alpha = sty > 1e-300 ? sts / sty : alpha * 2.0;

            z.swap(zn);
            g.swap(gn);
            A = An;
            hist[hist_at] = A;
            hist_at = (hist_at + 1) % hist.size();
            if (inf_norm(z) > 1e8)
                throw RangeError("direct solver diverged");
        }
        total_iters += it;
    }

    DiscreteAction da(P, n_nodes, false);
    std::vector<double> Y = da.full(z);
    SolveReport rep{to_path(P, Y), converged, total_iters, stationarity, 0.0, 0.0};
    finish_report(P, da, Y, rep);
    return rep;
}

SolveReport solve_el_bvp(const VariationalProblem& P, int n_nodes,
                         BvpOptions opts) {
    if (n_nodes < 8) throw DomainError("solve_el_bvp needs n_nodes >= 8");
    DiscreteAction da(P, n_nodes, /*second=*/true);
    const int n = da.n;

    std::vector<double> z(n - 1);
    for (int j = 1; j < n; ++j) z[j - 1] = da.Ya + (da.Yb - da.Ya) * j / n;

    auto residual = [&](const std::vector<double>& zz, std::vector<double>& R) {
        da.gradient(da.full(zz), R);
        for (double& r : R) r /= da.h;
    };

    std::vector<double> R, diag, off, d, Rn;
    residual(z, R);
    double rnorm = inf_norm(R);

    bool converged = false;
    int it = 0;
    double res_floor = opts.residual_tol;
    for (; it < opts.max_iter; ++it) {
        if (rnorm <= std::max(opts.residual_tol, res_floor)) {
            converged = true;
            break;
        }
        da.jacobian(da.full(z), diag, off);
        // roundoff floor of the residual: row scale of J times unit error
        double row_scale = 0.0;
        for (size_t i = 0; i < diag.size(); ++i) {
            double r = std::abs(diag[i]);
            if (i > 0) r += std::abs(off[i - 1]);
            if (i < off.size()) r += std::abs(off[i]);
            row_scale = std::max(row_scale, r);
        }
        res_floor = 32.0 * DBL_EPSILON * row_scale * (1.0 + inf_norm(z));
        if (it == 0) {
            double lam_min = smallest_abs_eigenvalue(diag, off);
            double ratio = lam_min / da.scale();
            if (ratio < opts.wellposed_ratio_tol) {
                char msg[200];
                std::snprintf(msg, sizeof(msg),
                              "collocation system is (near-)singular: "
                              "|eigenvalue| ratio %.3e below %.3e; the "
                              "boundary-value problem is degenerate/resonant",
                              ratio, opts.wellposed_ratio_tol);
                throw WellPosednessError(msg);
            }
        }
        std::vector<double> rhs(R.size());
        for (size_t i = 0; i < R.size(); ++i) rhs[i] = -R[i];
        if (!solve_tridiag(diag, off, rhs, d))
            throw WellPosednessError("collocation system pivot vanished");

        // a vanishing Newton step means the residual sits at its floor
        if (inf_norm(d) <= 1e-10 * (1.0 + inf_norm(z))) {
            for (size_t i = 0; i < z.size(); ++i) z[i] += d[i];
            residual(z, R);
            rnorm = inf_norm(R);
            converged = true;
            ++it;
            break;
        }

        double lambda = 1.0;
        bool improved = false;
        for (int bt = 0; bt < 14; ++bt) {
            std::vector<double> zt(z.size());
            for (size_t i = 0; i < z.size(); ++i) zt[i] = z[i] + lambda * d[i];
            residual(zt, Rn);
            double rn = inf_norm(Rn);
            if (std::isfinite(rn) && rn <= (1.0 - 1e-4 * lambda) * rnorm) {
                z.swap(zt);
                R = Rn;
                rnorm = rn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) break;  // damping exhausted
    }
    if (!converged) converged = rnorm <= std::max(opts.residual_tol, res_floor);

    std::vector<double> Y = da.full(z);
    SolveReport rep{to_path(P, Y), converged, it, rnorm, 0.0, 0.0};
    finish_report(P, da, Y, rep);
    return rep;
}

// ---------------------------------------------------------------------------
// Problem files and solution export
// ---------------------------------------------------------------------------

namespace {

NNReal json_literal(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw ParseError(std::string("problem file: missing field '") + key + "'",
                         0);
    const auto& v = j.at(key);
    if (v.is_string()) return parse_real(v.get<std::string>());
    if (v.is_number()) return NNReal::from_value(v.get<double>());
    throw ParseError(std::string("problem file: field '") + key +
                         "' must be a number or literal string",
                     0);
}

}  // namespace

VariationalProblem load_problem_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("problem file: ") + ex.what(), 0);
    }
    if (!j.contains("lagrangian") || !j.at("lagrangian").is_string())
        throw ParseError("problem file: missing string field 'lagrangian'", 0);
    Expr L = parse_expr(j.at("lagrangian").get<std::string>());
    return VariationalProblem(Lagrangian(std::move(L)), json_literal(j, "a"),
                              json_literal(j, "b"), json_literal(j, "ya"),
                              json_literal(j, "yb"));
}

VariationalProblem load_problem_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw DomainError("cannot open problem file: " + filename);
    return load_problem_json(in);
}

std::string solution_csv(const VariationalProblem& P, const Path& path) {
    auto residuals = el_residual(P, path);
    std::string out = "x,y,y_log,el_residual_log\n";
    char buf[200];
    const int n = path.segments();
    for (int i = 0; i <= n; ++i) {
        double xv = path.x(i).value();
        double yv = path.value(i).value();
        double ylog = path.value(i).log();
        if (i == 0 || i == n) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,\n", xv, yv, ylog);
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", xv, yv,
                          ylog, residuals[i - 1].log());
        }
        out += buf;
    }
    return out;
}

}  // namespace nn

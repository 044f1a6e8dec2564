#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nn/core.hpp"
#include "nn/expr.hpp"

namespace nn {

/// Positive trivariate function L(x, y, yd): an expression over the
/// variables x, y, yd, or an opaque callable.
class Lagrangian {
public:
    Lagrangian(Expr e) : expr_(std::move(e)) {}
    Lagrangian(std::function<NNReal(NNReal, NNReal, NNReal)> f)
        : fn_(std::move(f)) {}

    NNReal operator()(NNReal x, NNReal y, NNReal yd) const {
        if (expr_) {
            Bindings env;
            env.x = x;
            env.y = y;
            env.yd = yd;
            return eval(*expr_, env);
        }
        return fn_(x, y, yd);
    }

    const std::optional<Expr>& expr() const { return expr_; }

private:
    std::optional<Expr> expr_;
    std::function<NNReal(NNReal, NNReal, NNReal)> fn_;
};

/// Fixed-endpoint problem: minimize the integral of L(x, y, dy) over [a,b]
/// among positive trajectories with y(a) = ya, y(b) = yb.
struct VariationalProblem {
    VariationalProblem(Lagrangian L, NNReal a_, NNReal b_, NNReal ya_, NNReal yb_)
        : lagrangian(std::move(L)), a(a_), b(b_), ya(ya_), yb(yb_) {
        if (!(a.log() < b.log()))
            throw DomainError("interval must satisfy a < b");
    }
    Lagrangian lagrangian;
    NNReal a, b, ya, yb;
};

/// Discretized admissible trajectory on the log-uniform grid
/// u_i = ln a + i (ln b - ln a)/n with positive node values and pinned
/// endpoints.
class Path {
public:
    Path(NNReal a, NNReal b, std::vector<NNReal> values);

    int segments() const { return static_cast<int>(values_.size()) - 1; }
    std::size_t size() const { return values_.size(); }
    double h() const { return (ub_ - ua_) / segments(); }
    double grid_log(int i) const { return ua_ + i * (ub_ - ua_) / segments(); }
    NNReal x(int i) const { return NNReal::from_log(grid_log(i)); }
    NNReal value(int i) const { return values_[i]; }
    const std::vector<NNReal>& values() const { return values_; }

    /// Interior nodes only; endpoints stay pinned.
    void set_value(int i, NNReal v);

    /// Discrete log-derivative: central differences at interior nodes,
    /// one-sided second-order stencils at the endpoints.
    double deriv_log(int i) const;

private:
    double ua_, ub_;
    std::vector<NNReal> values_;
};

/// The integral of x -> L(x, y(x), dy(x)) over [a,b]; dy comes from the
/// conjugation-based derivative for functions and from the grid stencils
/// for paths.
NNReal functional_eval(const VariationalProblem& P, const NNFunction& y,
                       double tol = 1e-9);
NNReal functional_eval(const VariationalProblem& P, const Path& y);

enum class PartialArg { y, yd };

/// NN partial derivative of L with respect to y or yd with the other
/// arguments held fixed: exp of the partial of ln L in the log of the
/// chosen argument.  Symbolic when L carries an expression.
NNReal nn_partial(const Lagrangian& L, PartialArg which, NNReal x, NNReal y,
                  NNReal yd, double h_log = 1e-4);
std::optional<Expr> nn_partial_symbolic(const Lagrangian& L, PartialArg which);

/// Pointwise Euler-Lagrange residual
///   d( L_y(x, y, dy) , d/dx [ L_yd(x, y, dy) ] );
/// equals 1 exactly where the trajectory satisfies the equation.
NNReal el_residual(const VariationalProblem& P, const NNFunction& y, NNReal x,
                   double h_log = 1e-3);
/// Residuals at the interior nodes of a path (size n-1).
std::vector<NNReal> el_residual(const VariationalProblem& P, const Path& y);

struct ELSymbolicForm {
    Expr dL_dy;
    Expr dL_dyd;
    std::string equation;                // "D[<L_yd>] = <L_y>"
    std::optional<std::string> reduced;  // e.g. "yd2 (+) y = 1"
};

/// Symbolic Euler-Lagrange equation when symbolic partials are available.
std::optional<ELSymbolicForm> el_reduced_form(const VariationalProblem& P);

/// An admissible perturbation: direction h with h(a) = h(b) = 1 (within
/// endpoint_tol, validated on construction) and magnitude eps.
struct Variation {
    Variation(NNFunction h_, NNReal epsilon_, NNReal a, NNReal b,
              double endpoint_tol = 1e-9);
    NNFunction h;
    NNReal epsilon;
};

/// y (+) eps (*) h pointwise.  h must equal 1 at both endpoints (within
/// endpoint_tol); the varied trajectory keeps the boundary values.
NNFunction make_variation(const NNFunction& y, const NNFunction& h, NNReal eps,
                          NNReal a, NNReal b, double endpoint_tol = 1e-9);
Path make_variation(const Path& y, const NNFunction& h, NNReal eps,
                    double endpoint_tol = 1e-9);
NNFunction make_variation(const NNFunction& y, const Variation& v, NNReal a,
                          NNReal b);
Path make_variation(const Path& y, const Variation& v);

/// The fundamental-lemma test variation (x (-) x1) (*) (x2 (-) x) on
/// [x1,x2] and 1 outside: continuous, > 1 strictly inside.
NNFunction bump(NNReal x1, NNReal x2);

struct ProbeResult {
    bool deviation_found = false;
    int trials = 0;
    double max_abs_log = 0.0;  // largest |log integral| seen
};

/// Integrates f against random bump variations; any integral away from 1
/// (beyond threshold, log-space) witnesses f != 1.
ProbeResult fundamental_lemma_probe(const NNFunction& f, NNReal a, NNReal b,
                                    int trials, std::uint64_t seed = 0,
                                    double threshold = 1e-7);

/// NN derivative of eps -> F[y (+) eps (*) h] at eps = 1; equals 1 at an
/// extremal for every admissible variation h.
NNReal first_variation(const VariationalProblem& P, const NNFunction& y,
                       const NNFunction& h, double tol = 1e-10);
NNReal first_variation(const VariationalProblem& P, const Path& y,
                       const NNFunction& h);

struct DirectOptions {
    int max_iter = 50000;
    double stationarity_tol = 1e-7;  // on ||grad||_inf / h
    bool multilevel = true;
};

struct BvpOptions {
    int max_iter = 60;
    double residual_tol = 1e-11;
    double wellposed_ratio_tol = 1e-3;
};

struct SolveReport {
    Path path;
    bool converged = false;
    int iterations = 0;
    double stationarity_log = 0.0;     // direct: ||grad||_inf / h; bvp: ||R||_inf
    double functional_log = 0.0;       // discrete action at the solution
    double max_el_residual_log = 0.0;  // max over interior nodes
};

/// Direct (Ritz) method: minimizes the discretized action over interior
/// log-node values with gradient descent (Barzilai-Borwein step, backtracking
/// safeguard, coarse-to-fine warm start).
SolveReport solve_direct(const VariationalProblem& P, int n_nodes,
                         DirectOptions opts = {});

/// Collocation for the Euler-Lagrange equation in conjugate coordinates,
/// damped Newton on the tridiagonal system.  Degenerate/resonant problems
/// raise WellPosednessError instead of returning one of many solutions.
SolveReport solve_el_bvp(const VariationalProblem& P, int n_nodes,
                         BvpOptions opts = {});

/// Problem files: {"lagrangian": "<expression over x,y,yd>",
/// "a","b","ya","yb": literals ("e^2.5" or numbers)}.
VariationalProblem load_problem_json(std::istream& in);
VariationalProblem load_problem_file(const std::string& filename);

/// CSV rows (x, y, y_log, el_residual_log); endpoint residual cells are empty.
std::string solution_csv(const VariationalProblem& P, const Path& path);

}  // namespace nn

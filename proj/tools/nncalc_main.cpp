// Command-line front end: evaluate expressions, differentiate, integrate,
// build Taylor polynomials, run the minimizer and the variational solvers,
// and reproduce the library's worked examples.
//
// Exit codes: 0 ok, 1 check failure, 2 parse error, 3 domain error,
// 4 quadrature non-convergence, 5 ill-posed boundary-value problem,
// 6 solver non-convergence.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nn/analysis.hpp"
#include "nn/core.hpp"
#include "nn/expr.hpp"
#include "nn/optim.hpp"
#include "nn/varcalc.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr double kPi = 3.14159265358979323846;

using nlohmann::ordered_json;

struct CommonOpts {
    std::string format = "json";  // json | csv | text where applicable
    std::string out;
    bool linear = false;
    double tol = 1e-10;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool with_tol = true) {
    cmd->add_option("--format", c.format, "output format (csv|json)")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", c.out, "write the data output to this path");
    cmd->add_flag("--linear", c.linear,
                  "also render plain (non-log) values in the output");
    if (with_tol) cmd->add_option("--tol", c.tol, "log-space tolerance");
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw nn::DomainError("cannot open output file: " + out_path);
    f << text;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

nn::NNReal literal(const std::string& text) { return nn::parse_real(text); }

// ---------------------------------------------------------------------------

int run_eval(const std::string& expr_text, const std::string& x_text,
             const CommonOpts& c) {
    nn::Expr e = nn::parse_expr(expr_text);
    nn::NNReal x = literal(x_text);
    nn::NNReal v = nn::eval(e, x);
    if (c.format == "csv") {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "x_log,value_log\n%.17g,%.17g\n",
                      x.log(), v.log());
        emit(buf, c.out);
        return 0;
    }
    ordered_json j{{"command", "eval"},
                   {"version", kVersion},
                   {"expr", nn::pretty(e)},
                   {"x_log", x.log()},
                   {"value_log", v.log()}};
    if (c.linear) j["value"] = v.value();
    emit(dump(j), c.out);
    return 0;
}

int run_diff(const std::string& expr_text, const std::string& x_text,
             const std::string& a_text, const std::string& b_text, int n,
             const CommonOpts& c) {
    nn::Expr e = nn::parse_expr(expr_text);
    nn::Expr d = nn::nn_deriv_symbolic(e);
    nn::NNFunction f(e);

    std::vector<double> grid;
    if (!a_text.empty() && !b_text.empty()) {
        double ua = literal(a_text).log(), ub = literal(b_text).log();
        if (!(ua < ub)) throw nn::DomainError("grid requires a < b");
        for (int i = 0; i < n; ++i)
            grid.push_back(ua + (ub - ua) * i / (n - 1));
    } else if (!x_text.empty()) {
        grid.push_back(literal(x_text).log());
    }

    std::vector<std::array<double, 3>> rows;
    for (double u : grid) {
        auto r = nn::nn_deriv_conj(f, nn::NNReal::from_log(u));
        rows.push_back({u, r.value.log(), r.estimated_error});
    }

    if (c.format == "json") {
        ordered_json j{{"command", "diff"},
                       {"version", kVersion},
                       {"expr", nn::pretty(e)},
                       {"symbolic", nn::pretty(d)}};
        auto arr = ordered_json::array();
        for (auto& r : rows)
            arr.push_back(ordered_json{{"x_log", r[0]},
                                       {"deriv_log", r[1]},
                                       {"est_error", r[2]}});
        j["rows"] = arr;
        emit(dump(j), c.out);
        return 0;
    }
    std::string text = nn::pretty(d) + "\n";
    if (!rows.empty()) {
        text += "x_log,deriv_log,est_error\n";
        char buf[160];
        for (auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r[0], r[1],
                          r[2]);
            text += buf;
        }
    }
    emit(text, c.out);
    return 0;
}

int run_integrate(const std::string& expr_text, const std::string& a_text,
                  const std::string& b_text, bool symbolic,
                  const CommonOpts& c) {
    nn::Expr e = nn::parse_expr(expr_text);
    std::optional<nn::Antiderivative> anti;
    if (symbolic) anti = nn::nn_antideriv_symbolic(e);

    std::optional<double> value_log;
    if (!a_text.empty() && !b_text.empty()) {
        nn::NNReal v = nn::nn_integral(nn::NNFunction(e), literal(a_text),
                                       literal(b_text), c.tol);
        value_log = v.log();
    }

    if (c.format == "json") {
        ordered_json j{{"command", "integrate"},
                       {"version", kVersion},
                       {"expr", nn::pretty(e)}};
        if (symbolic)
            j["antiderivative"] =
                anti ? ordered_json(nn::pretty(anti->expr)) : ordered_json(nullptr);
        if (value_log) {
            j["value_log"] = *value_log;
            j["tol"] = c.tol;
            if (c.linear) j["value"] = std::exp(*value_log);
        }
        emit(dump(j), c.out);
        return 0;
    }
    std::string text;
    if (symbolic)
        text += (anti ? nn::pretty(anti->expr) : std::string("not-found")) + "\n";
    if (value_log) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "value_log,%.17g\n", *value_log);
        text += buf;
    }
    emit(text, c.out);
    return 0;
}

int run_taylor(const std::string& expr_text, const std::string& center_text,
               int degree, const std::string& x_text, const CommonOpts& c) {
    nn::Expr e = nn::parse_expr(expr_text);
    nn::TaylorPolynomial p =
        nn::taylor_poly(nn::NNFunction(e), literal(center_text), degree);

    ordered_json j{{"command", "taylor"},
                   {"version", kVersion},
                   {"expr", nn::pretty(e)},
                   {"center_log", p.center.log()},
                   {"degree", p.degree}};
    auto coeffs = ordered_json::array();
    for (auto& cfft : p.coefficients) coeffs.push_back(cfft.log());
    j["coefficients_log"] = coeffs;
    if (!x_text.empty()) {
        nn::NNReal x = literal(x_text);
        j["x_log"] = x.log();
        j["value_log"] = nn::taylor_eval(p, x).log();
    }
    if (c.format == "csv") {
        std::string text = "k,coefficient_log\n";
        char buf[96];
        for (int k = 0; k <= p.degree; ++k) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g\n", k,
                          p.coefficients[k].log());
            text += buf;
        }
        emit(text, c.out);
        return 0;
    }
    emit(dump(j), c.out);
    return 0;
}

int run_optimize(const std::string& expr_text, const std::string& x0_text,
                 const std::string& eta_text, int max_iter,
                 const CommonOpts& c) {
    nn::NNFunction f(nn::parse_expr(expr_text));
    auto res = nn::nn_gradient_descent(f, literal(x0_text), literal(eta_text),
                                       max_iter, c.tol);
    ordered_json j{{"command", "optimize"},
                   {"version", kVersion},
                   {"expr", expr_text},
                   {"iterations", res.iterations},
                   {"converged", res.converged},
                   {"x_log", res.x.log()},
                   {"f_log", f(res.x).log()},
                   {"residual_log", res.trace.back().residual_log}};
    if (c.format == "csv") {
        emit(nn::trace_csv(res.trace), c.out);
    } else {
        if (!c.out.empty()) emit(nn::trace_csv(res.trace), c.out);
        std::cout << dump(j);
    }
    return res.converged ? 0 : 6;
}

nn::VariationalProblem problem_from_options(const std::string& problem_path,
                                            const std::string& expr_text,
                                            const std::string& a_text,
                                            const std::string& b_text,
                                            const std::string& ya_text,
                                            const std::string& yb_text) {
    if (!problem_path.empty()) return nn::load_problem_file(problem_path);
    if (expr_text.empty() || a_text.empty() || b_text.empty() ||
        ya_text.empty() || yb_text.empty())
        throw nn::DomainError(
            "provide --problem <file> or --expr with --a --b --ya --yb");
    return nn::VariationalProblem(nn::Lagrangian(nn::parse_expr(expr_text)),
                                  literal(a_text), literal(b_text),
                                  literal(ya_text), literal(yb_text));
}

int run_residual(const std::string& problem_path, const std::string& expr_text,
                 const std::string& a_text, const std::string& b_text,
                 const std::string& ya_text, const std::string& yb_text,
                 const std::string& y_text, int n_nodes, const CommonOpts& c) {
    nn::VariationalProblem P = problem_from_options(problem_path, expr_text,
                                                    a_text, b_text, ya_text,
                                                    yb_text);
    if (y_text.empty())
        throw nn::DomainError("residual needs a trajectory: --y <expr in x>");
    nn::NNFunction y(nn::parse_expr(y_text));

    double ua = P.a.log(), ub = P.b.log();
    std::vector<std::array<double, 2>> rows;
    double mx = 0.0;
    for (int i = 1; i < n_nodes; ++i) {
        double u = ua + (ub - ua) * i / n_nodes;
        nn::NNReal r = nn::el_residual(P, y, nn::NNReal::from_log(u));
        rows.push_back({u, r.log()});
        mx = std::max(mx, r.log());
    }

    if (c.format == "csv") {
        std::string text = "x_log,el_residual_log\n";
        char buf[96];
        for (auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r[0], r[1]);
            text += buf;
        }
        emit(text, c.out);
        return 0;
    }
    ordered_json j{{"command", "residual"},
                   {"version", kVersion},
                   {"trajectory", y_text},
                   {"n_nodes", n_nodes},
                   {"max_residual_log", mx}};
    auto arr = ordered_json::array();
    for (auto& r : rows)
        arr.push_back(ordered_json{{"x_log", r[0]}, {"el_residual_log", r[1]}});
    j["rows"] = arr;
    emit(dump(j), c.out);
    return 0;
}

int run_solve(const std::string& problem_path, const std::string& expr_text,
              const std::string& a_text, const std::string& b_text,
              const std::string& ya_text, const std::string& yb_text,
              const std::string& method, int n_nodes, const CommonOpts& c) {
    nn::VariationalProblem P = problem_from_options(problem_path, expr_text,
                                                    a_text, b_text, ya_text,
                                                    yb_text);
    nn::SolveReport rep = [&] {
        if (method == "direct") {
            nn::DirectOptions opts;
            if (c.tol > 0.0) opts.stationarity_tol = c.tol;
            return nn::solve_direct(P, n_nodes, opts);
        }
        nn::BvpOptions opts;
        if (c.tol > 0.0) opts.residual_tol = c.tol;
        return nn::solve_el_bvp(P, n_nodes, opts);
    }();
    ordered_json summary{{"command", "solve"},
                         {"version", kVersion},
                         {"method", method},
                         {"n_nodes", n_nodes},
                         {"iterations", rep.iterations},
                         {"converged", rep.converged},
                         {"functional_value_log", rep.functional_log},
                         {"max_residual_log", rep.max_el_residual_log},
                         {"stationarity_log", rep.stationarity_log}};
    if (!c.out.empty()) emit(nn::solution_csv(P, rep.path), c.out);
    if (c.format == "csv" && c.out.empty()) {
        emit(nn::solution_csv(P, rep.path), "");
    } else {
        std::cout << dump(summary);
    }
    return rep.converged ? 0 : 6;
}

// ---------------------------------------------------------------------------
// demo-paper: one-shot reproduction of the worked examples
// ---------------------------------------------------------------------------

struct DemoReport {
    int checks = 0;
    int failures = 0;
    std::string text;

    void record(const std::string& name, bool ok, const std::string& detail = "") {
        ++checks;
        if (!ok) ++failures;
        text += (ok ? "PASS  " : "FAIL  ") + name;
        if (!detail.empty()) text += "  (" + detail + ")";
        text += "\n";
    }
    void note(const std::string& line) { text += "NOTE  " + line + "\n"; }
};

bool engines_agree(const nn::Expr& e, double u, double tol) {
    nn::NNFunction f(e);
    nn::NNReal x = nn::NNReal::from_log(u);
    double sym = nn::eval(nn::nn_deriv_symbolic(e), x).log();
    double conj = nn::nn_deriv_conj(f, x).value.log();
    double lim = nn::nn_deriv_limit(f, x).value.log();
    double scale = std::max(1.0, std::abs(sym));
    return std::abs(sym - conj) <= tol * scale &&
           std::abs(sym - lim) <= tol * scale;
}

int run_demo(bool strict_boundary, const CommonOpts& c) {
    using nn::Expr;
    using nn::NNReal;
    DemoReport rep;

    // derivative table: identity, exp, ln, cose, sine and the powers
    {
        bool ok = true;
        std::vector<Expr> table = {
            Expr::var("x"), Expr::exp_of(Expr::var("x")),
            Expr::ln_of(Expr::var("x")), Expr::cos_e(Expr::var("x")),
            Expr::sin_e(Expr::var("x"))};
        for (int n = 1; n <= 5; ++n) table.push_back(Expr::npow(Expr::var("x"), n));
        for (const Expr& e : table)
            for (double u : {0.2, 0.9, 1.7})
                ok = ok && engines_agree(e, u, 1e-6);
        // closed forms
        ok = ok && nn::nn_deriv_symbolic(Expr::var("x"))
                       .structurally_equal(Expr::constant(NNReal::one()));
        ok = ok && nn::nn_deriv_symbolic(Expr::sin_e(Expr::var("x")))
                       .structurally_equal(Expr::cos_e(Expr::var("x")));
        rep.record("derivative-table", ok);
    }

    // antiderivative table round-trip
    {
        bool ok = true;
        std::vector<Expr> entries = {
            Expr::constant(NNReal::from_value(3.0)),
            Expr::constant(NNReal::from_log(2.0)),
            Expr::npow(Expr::var("x"), 2),
            Expr::oslash(Expr::constant(NNReal::one()), Expr::var("x")),
            Expr::exp_of(Expr::odot(Expr::constant(NNReal::from_log(3.0)),
                                    Expr::var("x"))),
            Expr::exp_of(Expr::oplus(
                Expr::constant(NNReal::from_value(0.7)),
                Expr::odot(Expr::constant(NNReal::from_log(2.0)),
                           Expr::var("x")))),
        };
        for (const Expr& e : entries) {
            auto anti = nn::nn_antideriv_symbolic(e);
            if (!anti) {
                ok = false;
                continue;
            }
            Expr back = nn::nn_deriv_symbolic(anti->expr);
            for (double u : {0.2, 0.7, 1.3}) {
                NNReal x = NNReal::from_log(u);
                double want = nn::eval(e, x).log();
                double got = nn::eval(back, x).log();
                ok = ok && std::abs(want - got) <=
                               1e-9 * std::max(1.0, std::abs(want));
            }
        }
        rep.record("antiderivative-table", ok);
    }

    // integration by parts
    {
        nn::NNFunction f(Expr::exp_of(Expr::var("x")));
        nn::NNFunction g(Expr::ln_of(Expr::var("x")));
        nn::NNReal resid = nn::ibp_check(f, g, NNReal::one(),
                                         NNReal::from_log(2.0), 1e-11);
        rep.record("integration-by-parts", resid.log() <= 1e-6);
    }

    // stationary points by descent
    {
        nn::NNFunction quad(Expr::npow(
            Expr::ominus(Expr::var("x"), Expr::constant(NNReal::one())), 2));
        auto res = nn::nn_gradient_descent(quad, NNReal::from_log(3.0),
                                           NNReal::from_log(0.25), 200, 1e-6);
        bool ok = res.converged &&
                  nn::stationarity_residual(quad, res.x).log() <= 1e-6;
        rep.record("stationary-point-descent", ok);
    }

    // Euler-Lagrange residual of the oscillator extremal
    {
        nn::VariationalProblem P(
            nn::Lagrangian(nn::parse_expr("e^0.5 (*) (npow(yd, 2) (-) npow(y, 2))")),
            NNReal::zero(), NNReal::from_log(2 * kPi), NNReal::one(),
            NNReal::from_log(-1.0));
        nn::NNFunction y([](NNReal x) {
            double u = x.log();
            return NNReal::from_log(std::cos(u) + 2.0 * std::sin(u));
        });
        bool ok = true;
        for (int i = 1; i < 50; ++i) {
            double u = 2 * kPi * i / 50.0;
            ok = ok && nn::el_residual(P, y, NNReal::from_log(u)).log() <= 1e-5;
        }
        rep.record("euler-lagrange-extremal", ok);

        double yb_log = std::cos(2 * kPi) + 2.0 * std::sin(2 * kPi);
        if (strict_boundary) {
            char buf[200];
            std::snprintf(buf, sizeof(buf),
                          "boundary data: the extremal evaluates to e^%.6f at "
                          "the right endpoint, not the stated e^-1; the "
                          "stated problem is resonant and has no solution",
                          yb_log);
            rep.note(buf);
        } else {
            rep.note(
                "the stated right boundary value is inconsistent with the "
                "extremal; run with --strict-paper-boundary for details");
        }
    }

    if (c.format == "json") {
        ordered_json j{{"command", "demo-paper"},
                       {"version", kVersion},
                       {"checks", rep.checks},
                       {"failures", rep.failures},
                       {"report", rep.text}};
        emit(dump(j), c.out);
    } else {
        emit(rep.text, c.out);
    }
    return rep.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bigeometric (multiplicative) calculus toolkit"};
    app.require_subcommand(1);

    std::string expr_text, x_text, a_text, b_text, ya_text, yb_text;
    std::string center_text, x0_text, eta_text, y_text;
    std::string problem_path, method = "bvp";
    int degree = 4, n_nodes = 200, grid_n = 9, max_iter = 200;
    bool symbolic = false, strict_boundary = false;

    CommonOpts c_eval, c_diff, c_int, c_taylor, c_opt, c_res, c_solve, c_demo;

    auto* eval_cmd = app.add_subcommand("eval", "evaluate an expression");
    eval_cmd->add_option("--expr", expr_text, "expression text")->required();
    eval_cmd->add_option("--x", x_text, "evaluation point")->required();
    add_common(eval_cmd, c_eval, false);

    auto* diff_cmd = app.add_subcommand("diff", "differentiate an expression");
    diff_cmd->add_option("--expr", expr_text, "expression text")->required();
    diff_cmd->add_option("--x", x_text, "single evaluation point");
    diff_cmd->add_option("--a", a_text, "grid start");
    diff_cmd->add_option("--b", b_text, "grid end");
    diff_cmd->add_option("--n-nodes", grid_n, "grid size");
    add_common(diff_cmd, c_diff, false);
    c_diff.format = "text";

    auto* int_cmd = app.add_subcommand("integrate",
                                       "antiderivative and definite integral");
    int_cmd->add_option("--expr", expr_text, "expression text")->required();
    int_cmd->add_option("--a", a_text, "lower bound");
    int_cmd->add_option("--b", b_text, "upper bound");
    int_cmd->add_flag("--symbolic", symbolic, "look up the antiderivative table");
    add_common(int_cmd, c_int);
    c_int.format = "text";

    auto* taylor_cmd = app.add_subcommand("taylor", "Taylor polynomial");
    taylor_cmd->add_option("--expr", expr_text, "expression text")->required();
    taylor_cmd->add_option("--center", center_text, "expansion center")->required();
    taylor_cmd->add_option("--degree", degree, "polynomial degree")->required();
    taylor_cmd->add_option("--x", x_text, "optional evaluation point");
    add_common(taylor_cmd, c_taylor, false);

    auto* opt_cmd = app.add_subcommand("optimize", "gradient descent minimizer");
    opt_cmd->add_option("--expr", expr_text, "objective expression")->required();
    opt_cmd->add_option("--x0", x0_text, "starting point")->required();
    opt_cmd->add_option("--eta", eta_text, "step (> 1; its log is the rate)")
        ->required();
    opt_cmd->add_option("--max-iter", max_iter, "iteration budget");
    add_common(opt_cmd, c_opt);
    c_opt.tol = 1e-8;

    auto* res_cmd = app.add_subcommand("residual",
                                       "Euler-Lagrange residual of a trajectory");
    res_cmd->add_option("--problem", problem_path, "problem file (JSON)");
    res_cmd->add_option("--expr", expr_text, "Lagrangian expression");
    res_cmd->add_option("--a", a_text, "interval start");
    res_cmd->add_option("--b", b_text, "interval end");
    res_cmd->add_option("--ya", ya_text, "left boundary value");
    res_cmd->add_option("--yb", yb_text, "right boundary value");
    res_cmd->add_option("--y", y_text, "trajectory expression in x")->required();
    res_cmd->add_option("--n-nodes", n_nodes, "grid size");
    add_common(res_cmd, c_res);

    auto* solve_cmd = app.add_subcommand("solve", "variational problem solver");
    solve_cmd->add_option("--problem", problem_path, "problem file (JSON)");
    solve_cmd->add_option("--expr", expr_text, "Lagrangian expression");
    solve_cmd->add_option("--a", a_text, "interval start");
    solve_cmd->add_option("--b", b_text, "interval end");
    solve_cmd->add_option("--ya", ya_text, "left boundary value");
    solve_cmd->add_option("--yb", yb_text, "right boundary value");
    solve_cmd->add_option("--method", method, "direct|bvp")
        ->check(CLI::IsMember({"direct", "bvp"}));
    solve_cmd->add_option("--n-nodes", n_nodes, "grid size");
    add_common(solve_cmd, c_solve);
    c_solve.tol = 0.0;  // 0: keep the solver defaults

    auto* demo_cmd = app.add_subcommand(
        "demo-paper", "reproduce the worked examples end to end");
    demo_cmd->add_flag("--strict-paper-boundary", strict_boundary,
                       "report the boundary-data discrepancy in detail");
    add_common(demo_cmd, c_demo, false);
    c_demo.format = "text";

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (eval_cmd->parsed()) return run_eval(expr_text, x_text, c_eval);
        if (diff_cmd->parsed())
            return run_diff(expr_text, x_text, a_text, b_text, grid_n, c_diff);
        if (int_cmd->parsed())
            return run_integrate(expr_text, a_text, b_text, symbolic, c_int);
        if (taylor_cmd->parsed())
            return run_taylor(expr_text, center_text, degree, x_text, c_taylor);
        if (opt_cmd->parsed())
            return run_optimize(expr_text, x0_text, eta_text, max_iter, c_opt);
        if (res_cmd->parsed())
            return run_residual(problem_path, expr_text, a_text, b_text,
                                ya_text, yb_text, y_text, n_nodes, c_res);
        if (solve_cmd->parsed())
            return run_solve(problem_path, expr_text, a_text, b_text, ya_text,
                             yb_text, method, n_nodes, c_solve);
        if (demo_cmd->parsed()) return run_demo(strict_boundary, c_demo);
    } catch (const nn::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const nn::DivisionByOneError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 3;
    } catch (const nn::WellPosednessError& e) {
        std::cerr << "well-posedness error: " << e.what() << "\n";
        return 5;
    } catch (const nn::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return 4;
    } catch (const nn::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 3;
    } catch (const nn::RangeError& e) {
        std::cerr << "range error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

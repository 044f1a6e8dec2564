#include "nn/varcalc.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "nn/analysis.hpp"
#include "oracles.hpp"

using namespace nn;

namespace {

constexpr double kPi = 3.14159265358979323846;

NNReal nnl(double lg) { return NNReal::from_log(lg); }

const char* kOscillatorText = "e^0.5 (*) (npow(yd, 2) (-) npow(y, 2))";

VariationalProblem oscillator_restricted() {
    return VariationalProblem(Lagrangian(parse_expr(kOscillatorText)),
                              NNReal::zero(), nnl(kPi / 2), NNReal::one(),
                              nnl(2.0));
}

VariationalProblem oscillator_resonant() {
    return VariationalProblem(Lagrangian(parse_expr(kOscillatorText)),
                              NNReal::zero(), nnl(2 * kPi), NNReal::one(),
                              nnl(-1.0));
}

double extremal_log(double u) { return std::cos(u) + 2.0 * std::sin(u); }
double extremal_dlog(double u) { return -std::sin(u) + 2.0 * std::cos(u); }

NNFunction extremal_fn() {
    return NNFunction([](NNReal x) { return nnl(extremal_log(x.log())); });
}

Expr extremal_expr() {
    return parse_expr("cose(x) (+) e^2 (*) sine(x)");
}

NNFunction const_fn(double lg) {
    return NNFunction([lg](NNReal) { return nnl(lg); });
}

double max_log_error_vs_extremal(const Path& p) {
    double mx = 0.0;
    for (int i = 0; i <= p.segments(); ++i)
        mx = std::max(mx,
                      std::abs(p.value(i).log() - extremal_log(p.grid_log(i))));
    return mx;
}

}  // namespace

TEST_CASE("path invariants") {
    std::vector<NNReal> vals = {NNReal::one(), nnl(1.5), nnl(2.0)};
    Path p(NNReal::zero(), nnl(2.0), vals);
    CHECK(p.segments() == 2);
    CHECK(p.h() == doctest::Approx(1.0));
    CHECK_THROWS_AS(p.set_value(0, nnl(0.0)), DomainError);
    CHECK_THROWS_AS(p.set_value(2, nnl(0.0)), DomainError);
    p.set_value(1, nnl(1.6));
    CHECK(p.value(1).log() == doctest::Approx(1.6));
    CHECK_THROWS_AS(Path(NNReal::zero(), nnl(1.0), {NNReal::one(), nnl(2.0)}),
                    DomainError);
    CHECK_THROWS_AS(Path(nnl(1.0), nnl(0.5), vals), DomainError);

    // grid stencils are exact on quadratic logs
    int n = 10;
    std::vector<NNReal> quad;
    for (int i = 0; i <= n; ++i) {
        double u = 2.0 * i / n;
        quad.push_back(nnl(u * u));
    }
    Path q(NNReal::zero(), nnl(2.0), quad);
    for (int i = 0; i <= n; ++i)
        CHECK(q.deriv_log(i) ==
              doctest::Approx(2.0 * q.grid_log(i)).epsilon(1e-12).scale(1.0));
}

TEST_CASE("functional evaluation matches the conjugate action") {
    SUBCASE("constant trajectory on the full interval") {
        VariationalProblem P(Lagrangian(parse_expr(kOscillatorText)),
                             NNReal::zero(), nnl(2 * kPi), NNReal::one(),
                             NNReal::one());
        NNReal v = functional_eval(P, const_fn(1.0), 1e-11);
        CHECK(v.log() == doctest::Approx(-kPi).epsilon(1e-9));
    }

    SUBCASE("the additive-identity Lagrangian yields 1 for any trajectory") {
        VariationalProblem P(Lagrangian(Expr::constant(NNReal::zero())),
                             NNReal::zero(), nnl(1.0), NNReal::one(), nnl(2.0));
        CHECK(functional_eval(P, extremal_fn(), 1e-11) == NNReal::zero());
    }

    SUBCASE("extremal value on the restricted interval") {
        VariationalProblem P = oscillator_restricted();
        NNReal v = functional_eval(P, extremal_fn(), 1e-11);
        CHECK(v.log() == doctest::Approx(-2.0).epsilon(1e-8));
        // expression-backed trajectory takes the symbolic-derivative route
        NNReal v2 = functional_eval(P, NNFunction(extremal_expr()), 1e-11);
        CHECK(v2.log() == doctest::Approx(-2.0).epsilon(1e-9));
    }

    SUBCASE("independent classical quadrature of the conjugate Lagrangian") {
        VariationalProblem P = oscillator_restricted();
        double expected = oracle::gauss_integral(
            [](double u) {
                double Y = extremal_log(u), D = extremal_dlog(u);
                return 0.5 * (D * D - Y * Y);
            },
            0.0, kPi / 2);
        CHECK(functional_eval(P, extremal_fn(), 1e-11).log() ==
              doctest::Approx(expected).epsilon(1e-8).scale(1.0));
    }

    SUBCASE("path overload agrees with the classical trapezoid on logs") {
        VariationalProblem P = oscillator_restricted();
        int n = 64;
        std::vector<NNReal> vals;
        for (int i = 0; i <= n; ++i)
            vals.push_back(nnl(extremal_log(0.0 + (kPi / 2) * i / n)));
        vals.front() = P.ya;
        vals.back() = P.yb;
        Path path(P.a, P.b, vals);

        double h = path.h(), acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            double Y = path.value(i).log();
            double D = path.deriv_log(i);
            acc += ((i == 0 || i == n) ? 0.5 * h : h) * 0.5 * (D * D - Y * Y);
        }
        CHECK(functional_eval(P, path).log() ==
              doctest::Approx(acc).epsilon(1e-12).scale(1.0));
    }

    SUBCASE("non-admissible paths are rejected") {
        VariationalProblem P = oscillator_restricted();
        std::vector<NNReal> vals = {NNReal::one(), nnl(1.5), nnl(3.0)};
        CHECK_THROWS_AS(functional_eval(P, Path(P.a, P.b, vals)), DomainError);
    }
}

TEST_CASE("NN partial derivatives of the oscillator Lagrangian") {
    Lagrangian L(parse_expr(kOscillatorText));

    auto ly = nn_partial_symbolic(L, PartialArg::y);
    auto lyd = nn_partial_symbolic(L, PartialArg::yd);
    REQUIRE(ly);
    REQUIRE(lyd);
    CHECK(pretty(*ly) == "1 (-) y");
    CHECK(pretty(*lyd) == "yd");

    oracle::Rng rng(64);
    Lagrangian opaque([](NNReal, NNReal y, NNReal yd) {
        return nnl(0.5 * (yd.log() * yd.log() - y.log() * y.log()));
    });
    for (int i = 0; i < 100; ++i) {
        NNReal x = nnl(rng.uniform(0.0, 2.0));
        NNReal y = nnl(rng.uniform(-2.0, 2.0));
        NNReal yd = nnl(rng.uniform(-2.0, 2.0));
        NNReal sym_y = nn_partial(L, PartialArg::y, x, y, yd);
        NNReal sym_yd = nn_partial(L, PartialArg::yd, x, y, yd);
        CHECK(sym_y.log() == doctest::Approx(-y.log()).epsilon(1e-12).scale(1.0));
        CHECK(sym_yd.log() == doctest::Approx(yd.log()).epsilon(1e-12).scale(1.0));
        // numeric route through the opaque callable agrees
        CHECK(nn_partial(opaque, PartialArg::y, x, y, yd).log() ==
              doctest::Approx(sym_y.log()).epsilon(1e-7).scale(1.0));
        CHECK(nn_partial(opaque, PartialArg::yd, x, y, yd).log() ==
              doctest::Approx(sym_yd.log()).epsilon(1e-7).scale(1.0));
    }

    // no y dependence: the partial is the derivative of a constant
    Lagrangian indep(parse_expr("npow(yd, 2)"));
    CHECK(nn_partial(indep, PartialArg::y, nnl(0.3), nnl(0.7), nnl(0.2)) ==
          NNReal::zero());
}

TEST_CASE("Euler-Lagrange residual") {
    VariationalProblem P(Lagrangian(parse_expr(kOscillatorText)),
                         NNReal::zero(), nnl(2 * kPi), NNReal::one(),
                         nnl(-1.0));

    SUBCASE("the claimed extremal satisfies the equation on the full interval") {
        NNFunction y = extremal_fn();
        for (int i = 1; i < 50; ++i) {
            double u = 2 * kPi * i / 50.0;
            NNReal r = el_residual(P, y, nnl(u));
            CHECK(r.log() <= 1e-5);
        }
    }

    SUBCASE("a constant trajectory misses by exactly e") {
        NNFunction y = const_fn(1.0);
        for (double u : {0.7, 2.0, 4.4}) {
            NNReal r = el_residual(P, y, nnl(u));
            CHECK(r.log() == doctest::Approx(1.0).epsilon(1e-7));
        }
    }

    SUBCASE("the additive-identity Lagrangian has residual 1 everywhere") {
        VariationalProblem Pz(Lagrangian(Expr::constant(NNReal::zero())),
                              NNReal::zero(), nnl(1.0), NNReal::one(),
                              NNReal::one());
        CHECK(el_residual(Pz, extremal_fn(), nnl(0.4)) == NNReal::zero());
    }

    SUBCASE("path residuals of a sampled extremal are small") {
        int n = 128;
        std::vector<NNReal> vals;
        for (int i = 0; i <= n; ++i)
            vals.push_back(nnl(extremal_log(2 * kPi * i / n)));
        VariationalProblem Pb(Lagrangian(parse_expr(kOscillatorText)),
                              NNReal::zero(), nnl(2 * kPi), vals.front(),
                              vals.back());
        Path path(Pb.a, Pb.b, vals);
        auto rs = el_residual(Pb, path);
        REQUIRE(rs.size() == static_cast<size_t>(n - 1));
        for (NNReal r : rs) CHECK(r.log() <= 5e-3);
    }
}

TEST_CASE("symbolic Euler-Lagrange reduction") {
    auto form = el_reduced_form(oscillator_restricted());
    REQUIRE(form);
    CHECK(pretty(form->dL_dy) == "1 (-) y");
    CHECK(pretty(form->dL_dyd) == "yd");
    REQUIRE(form->reduced);
    CHECK(*form->reduced == "yd2 (+) y = 1");

    VariationalProblem pyd(Lagrangian(parse_expr("npow(yd, 2)")),
                           NNReal::zero(), nnl(1.0), NNReal::one(), nnl(2.0));
    auto f2 = el_reduced_form(pyd);
    REQUIRE(f2);
    CHECK(pretty(f2->dL_dy) == "1");
    CHECK(f2->equation == "D[e^2 (*) yd] = 1");

    VariationalProblem pnody(Lagrangian(parse_expr("npow(y, 2)")),
                             NNReal::zero(), nnl(1.0), NNReal::one(), nnl(2.0));
    auto f3 = el_reduced_form(pnody);
    REQUIRE(f3);
    REQUIRE(f3->reduced);
    CHECK(*f3->reduced == "e^2 (*) y = 1");

    VariationalProblem opaque(
        Lagrangian([](NNReal, NNReal, NNReal yd) { return yd; }),
        NNReal::zero(), nnl(1.0), NNReal::one(), nnl(2.0));
    CHECK(!el_reduced_form(opaque));
}

TEST_CASE("variations") {
    NNReal a = NNReal::zero(), b = nnl(2.0);
    NNFunction y = const_fn(1.0);
    NNFunction h = bump(nnl(0.5), nnl(1.5));

    SUBCASE("eps = 1 leaves the trajectory unchanged") {
        NNFunction varied = make_variation(y, h, NNReal::zero(), a, b);
        for (double u : {0.2, 0.8, 1.7})
            CHECK(varied(nnl(u)) == y(nnl(u)));
    }
    SUBCASE("h = 1 leaves the trajectory unchanged for any eps") {
        NNFunction varied = make_variation(y, const_fn(0.0), nnl(3.0), a, b);
        for (double u : {0.2, 0.8, 1.7})
            CHECK(varied(nnl(u)) == y(nnl(u)));
    }
    SUBCASE("eps = e multiplies by the bump inside its support") {
        NNFunction varied = make_variation(y, h, NNReal::one(), a, b);
        double u = 1.0;
        CHECK(varied(nnl(u)).log() ==
              doctest::Approx(1.0 + (u - 0.5) * (1.5 - u)).epsilon(1e-12));
    }
    SUBCASE("h violating the endpoints is rejected") {
        CHECK_THROWS_AS(make_variation(y, const_fn(0.2), nnl(1.0), a, b),
                        DomainError);
        CHECK_THROWS_AS(Variation(const_fn(0.2), nnl(1.0), a, b), DomainError);
    }
    SUBCASE("validated variations apply like the raw pair") {
        Variation v(h, nnl(0.7), a, b);
        NNFunction varied = make_variation(y, v, a, b);
        CHECK(varied(nnl(1.0)).log() ==
              doctest::Approx(1.0 + 0.7 * h(nnl(1.0)).log()).epsilon(1e-12));
    }
    SUBCASE("path variation pins the endpoints") {
        std::vector<NNReal> vals;
        int n = 8;
        for (int i = 0; i <= n; ++i) vals.push_back(nnl(1.0));
        Path p(a, b, vals);
        Path varied = make_variation(p, h, nnl(2.0));
        CHECK(varied.value(0) == p.value(0));
        CHECK(varied.value(n) == p.value(n));
        CHECK(varied.value(n / 2).log() > 1.0);
    }
}

TEST_CASE("bump geometry") {
    NNReal x1 = nnl(0.3), x2 = nnl(1.1);
    NNFunction h = bump(x1, x2);
    CHECK(h(x1) == NNReal::zero());
    CHECK(h(x2) == NNReal::zero());
    CHECK(h(nnl(-0.5)) == NNReal::zero());
    CHECK(h(nnl(2.0)) == NNReal::zero());
    // maximum at the geometric midpoint
    double mid = 0.5 * (0.3 + 1.1);
    CHECK(h(nnl(mid)).log() == doctest::Approx(0.16).epsilon(1e-12));
    for (double u : {0.4, 0.7, 1.0}) CHECK(h(nnl(u)).log() > 0.0);
    CHECK_THROWS_AS(bump(x2, x1), DomainError);
}

TEST_CASE("fundamental lemma probe") {
    NNReal a = NNReal::zero(), b = nnl(1.0);
    SUBCASE("consistent with the identity trajectory") {
        auto res = fundamental_lemma_probe(const_fn(0.0), a, b, 40, 1);
        CHECK(!res.deviation_found);
        CHECK(res.max_abs_log <= 1e-12);
    }
    SUBCASE("detects a constant above 1") {
        auto res = fundamental_lemma_probe(const_fn(1.0), a, b, 40, 2);
        CHECK(res.deviation_found);
    }
    SUBCASE("detects a localized excursion above 1") {
        NNFunction f([](NNReal x) {
            double u = x.log();
            if (u <= 0.4 || u >= 0.6) return NNReal::zero();
            return nnl(25.0 * (u - 0.4) * (0.6 - u));
        });
        auto res = fundamental_lemma_probe(f, a, b, 40, 3);
        CHECK(res.deviation_found);
    }
}

TEST_CASE("first variation") {
    VariationalProblem P = oscillator_restricted();
    NNFunction h = bump(nnl(kPi / 4), NNReal::one());

    SUBCASE("vanishes at the extremal") {
        NNReal v = first_variation(P, extremal_fn(), h);
        CHECK(std::abs(v.log()) <= 1e-4);
    }
    SUBCASE("h = 1 gives exactly 1 for any trajectory") {
        NNReal v = first_variation(P, const_fn(0.3), const_fn(0.0));
        CHECK(std::abs(v.log()) <= 1e-12);
    }
    SUBCASE("detects a non-extremal trajectory") {
        VariationalProblem Pc(Lagrangian(parse_expr(kOscillatorText)),
                              NNReal::zero(), nnl(kPi / 2), NNReal::one(),
                              NNReal::one());
        NNReal v = first_variation(Pc, const_fn(1.0), h);
        // conjugate first variation is -(volume under the bump)
        double expected = -std::pow(1.0 - kPi / 4, 3) / 6.0;
        CHECK(v.log() == doctest::Approx(expected).epsilon(1e-4).scale(1.0));
        CHECK(std::abs(v.log()) > 1e-3);
    }
}

TEST_CASE("direct solver") {
    SUBCASE("flat problem returns the log-line") {
        VariationalProblem P(Lagrangian(parse_expr("npow(yd, 2)")),
                             NNReal::zero(), nnl(1.0), NNReal::one(),
                             NNReal::one());
        auto rep = solve_direct(P, 16);
        CHECK(rep.converged);
        for (int i = 0; i <= rep.path.segments(); ++i)
            CHECK(std::abs(rep.path.value(i).log() - 1.0) <= 1e-8);
    }

    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(solve_direct(oscillator_restricted(), 7), DomainError);
    }

    SUBCASE("recovers the oscillator extremal") {
        auto rep = solve_direct(oscillator_restricted(), 200);
        CHECK(rep.converged);
        CHECK(max_log_error_vs_extremal(rep.path) <= 1e-3);
        CHECK(rep.max_el_residual_log <= 5e-3);
        CHECK(rep.functional_log == doctest::Approx(-2.0).epsilon(1e-3));
    }
}

TEST_CASE("collocation solver") {
    SUBCASE("log-linear closed form") {
        VariationalProblem P(Lagrangian(parse_expr("npow(yd, 2)")),
                             NNReal::zero(), nnl(2.0), NNReal::one(), nnl(3.0));
        auto rep = solve_el_bvp(P, 32);
        CHECK(rep.converged);
        for (int i = 0; i <= rep.path.segments(); ++i)
            CHECK(rep.path.value(i).log() ==
                  doctest::Approx(1.0 + rep.path.grid_log(i)).epsilon(1e-9));
    }

    SUBCASE("recovers the oscillator extremal to 1e-4") {
        auto rep = solve_el_bvp(oscillator_restricted(), 400);
        CHECK(rep.converged);
        CHECK(max_log_error_vs_extremal(rep.path) <= 1e-4);
        CHECK(rep.max_el_residual_log <= 1e-4);
    }

    SUBCASE("the resonant interval raises a well-posedness error") {
        CHECK_THROWS_AS(solve_el_bvp(oscillator_resonant(), 400),
                        WellPosednessError);
    }

    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(solve_el_bvp(oscillator_restricted(), 4), DomainError);
    }
}

TEST_CASE("grid convergence of both solvers") {
    double direct_coarse =
        max_log_error_vs_extremal(solve_direct(oscillator_restricted(), 50).path);
    double direct_fine =
        max_log_error_vs_extremal(solve_direct(oscillator_restricted(), 100).path);
    CHECK(direct_coarse / direct_fine >= 3.0);

    double bvp_coarse =
        max_log_error_vs_extremal(solve_el_bvp(oscillator_restricted(), 50).path);
    double bvp_fine =
        max_log_error_vs_extremal(solve_el_bvp(oscillator_restricted(), 100).path);
    CHECK(bvp_coarse / bvp_fine >= 3.0);
}

TEST_CASE("solver paths pass the extremal-consistency checks") {
    auto rep = solve_el_bvp(oscillator_restricted(), 200);
    REQUIRE(rep.converged);
    oracle::Rng rng(9);
    VariationalProblem P = oscillator_restricted();
    for (int trial = 0; trial < 20; ++trial) {
        double u1 = rng.uniform(0.02, kPi / 2 - 0.4);
        double u2 = u1 + rng.uniform(0.2, kPi / 2 - u1 - 0.02);
        NNFunction h = bump(nnl(u1), nnl(u2));
        NNReal v = first_variation(P, rep.path, h);
        CHECK(std::abs(v.log()) <= 1e-3);
    }
}

TEST_CASE("problem files and solution export") {
    SUBCASE("round trip through JSON") {
        std::istringstream in(R"json({
            "lagrangian": "e^0.5 (*) (npow(yd, 2) (-) npow(y, 2))",
            "a": 1, "b": "e^1.5707963267948966", "ya": "e", "yb": "e^2"
        })json");
        VariationalProblem P = load_problem_json(in);
        CHECK(P.a == NNReal::zero());
        CHECK(P.b.log() == doctest::Approx(kPi / 2));
        CHECK(P.ya == NNReal::one());
        CHECK(P.yb.log() == doctest::Approx(2.0));
        auto rep = solve_el_bvp(P, 64);
        CHECK(rep.converged);
    }
    SUBCASE("malformed JSON is a parse error") {
        std::istringstream in("{oops");
        CHECK_THROWS_AS(load_problem_json(in), ParseError);
    }
    SUBCASE("missing fields are parse errors") {
        std::istringstream in(R"json({"lagrangian": "yd", "a": 1, "b": 2})json");
        CHECK_THROWS_AS(load_problem_json(in), ParseError);
    }
    SUBCASE("inverted intervals are domain errors") {
        std::istringstream in(
            R"json({"lagrangian": "yd", "a": 3, "b": 2, "ya": 1, "yb": 1})json");
        CHECK_THROWS_AS(load_problem_json(in), DomainError);
    }
    SUBCASE("CSV export shape") {
        auto rep = solve_el_bvp(oscillator_restricted(), 16);
        std::string csv = solution_csv(oscillator_restricted(), rep.path);
        CHECK(csv.rfind("x,y,y_log,el_residual_log\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 16 + 2);
    }
}

#include "nn/expr.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

using namespace nn;

TEST_CASE("parsing the operator grammar") {
    Expr e = parse_expr("x (+) e");
    CHECK(e.kind() == ExprKind::OPlus);
    CHECK(e.lhs().kind() == ExprKind::Var);
    CHECK(e.rhs().kind() == ExprKind::Const);
    CHECK(e.rhs().const_value() == NNReal::one());

    Expr c = parse_expr("cose(x)");
    CHECK(c.kind() == ExprKind::CosE);
    CHECK(c.lhs().kind() == ExprKind::Var);

    CHECK(parse_expr("npow(x, 2)").power() == 2);
    CHECK(parse_expr("npow(x, -1)").power() == -1);
    CHECK(parse_expr("e^-0.5").const_value().log() == doctest::Approx(-0.5));

    // precedence: (*) binds tighter than (+); parens override
    Expr p = parse_expr("x (+) x (*) e^2");
    CHECK(p.kind() == ExprKind::OPlus);
    CHECK(p.rhs().kind() == ExprKind::ODot);
    Expr q = parse_expr("(x (+) x) (*) e^2");
    CHECK(q.kind() == ExprKind::ODot);
}

TEST_CASE("parse errors carry the offset") {
    try {
        parse_expr("x (*) (");
        FAIL("expected a parse error");
    } catch (const ParseError& err) {
        CHECK(err.offset() == 7);
    }
    CHECK_THROWS_AS(parse_expr("foo (+) x"), ParseError);
    CHECK_THROWS_AS(parse_expr("x (+)"), ParseError);
    CHECK_THROWS_AS(parse_expr("npow(x, 1.5)"), ParseError);
    CHECK_THROWS_AS(parse_expr("0 (+) x"), ParseError);
    CHECK_THROWS_AS(parse_expr(""), ParseError);
}

TEST_CASE("evaluation semantics") {
    CHECK(eval(parse_expr("cose(x)"), NNReal::zero()) == NNReal::one());
    CHECK(eval(parse_expr("npow(x, 2)"), NNReal::from_log(3)).log() ==
          doctest::Approx(9.0));
    CHECK(eval(parse_expr("exp(x)"), NNReal::from_value(2)).log() ==
          doctest::Approx(2.0));
    CHECK(eval(parse_expr("x (+) x"), NNReal::from_value(3)).value() ==
          doctest::Approx(9.0));
}

TEST_CASE("domain errors are raised at evaluation, not parse") {
    Expr e = parse_expr("ln(x)");
    CHECK(eval(e, NNReal::from_value(std::exp(2.0))).log() ==
          doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(eval(e, NNReal::from_value(0.5)), DomainError);

    Expr s = parse_expr("x (/) 1");
    CHECK_THROWS_AS(eval(s, NNReal::from_value(2)), DivisionByOneError);

    Expr unbound = parse_expr("y (+) x");
    CHECK_THROWS_AS(eval(unbound, NNReal::from_value(2)), DomainError);
    Bindings env;
    env.x = NNReal::from_value(2);
    env.y = NNReal::from_value(3);
    CHECK(eval(unbound, env).value() == doctest::Approx(6.0));
}

TEST_CASE("pretty printing") {
    CHECK(pretty(Expr::oplus(Expr::var("x"), Expr::constant(NNReal::one()))) ==
          "x (+) e");
    CHECK(pretty(Expr::sin_e(Expr::var("x"))) == "sine(x)");
    CHECK(pretty(Expr::ominus(Expr::constant(NNReal::zero()), Expr::var("x"))) ==
          "1 (-) x");
    // right-nested same-precedence operands need parentheses
    Expr nested = Expr::ominus(Expr::var("x"),
                               Expr::oplus(Expr::var("x"), Expr::var("x")));
    CHECK(pretty(nested) == "x (-) (x (+) x)");
    CHECK(parse_expr(pretty(nested)).structurally_equal(nested));
}

TEST_CASE("parse after pretty is the identity on random trees") {
    oracle::Rng rng(2024);
    int built = 0;
    while (built < 1000) {
        Expr e = oracle::random_expr(rng, 6);
        ++built;
        Expr back = parse_expr(pretty(e));
        CHECK(back.structurally_equal(e));
    }
}

TEST_CASE("conjugation oracle: NN evaluation equals the classical log value") {
    oracle::Rng rng(31337);
    int checked = 0;
    while (checked < 400) {
        Expr e = oracle::random_expr(rng, 5);
        double lo, hi;
        if (!oracle::usable_window(e, lo, hi)) continue;
        ++checked;
        for (int i = 0; i < 5; ++i) {
            double u = rng.uniform(lo, hi);
            double expected;
            try {
                expected = oracle::classical_log(e, u);
            } catch (const std::exception&) {
                continue;
            }
            NNReal got = eval(e, NNReal::from_log(u));
            CHECK(got.log() ==
                  doctest::Approx(expected).epsilon(1e-10).scale(
                      std::max(1.0, std::abs(expected))));
        }
    }
}

TEST_CASE("simplify folds constants and prunes identities") {
    Expr one = Expr::constant(NNReal::zero());
    Expr e = Expr::constant(NNReal::one());
    Expr x = Expr::var("x");

    CHECK(simplify(Expr::oplus(x, one)).structurally_equal(x));
    CHECK(simplify(Expr::odot(x, e)).structurally_equal(x));
    CHECK(simplify(Expr::odot(one, x)).structurally_equal(one));
    CHECK(simplify(Expr::npow(x, 1)).structurally_equal(x));
    CHECK(simplify(Expr::npow(x, 0)).structurally_equal(e));
    CHECK(simplify(Expr::ominus(one, Expr::ominus(one, x))).structurally_equal(x));
    // constants migrate through (*) chains and distribute over (+)/(-)
    Expr sqrt_e = Expr::constant(NNReal::from_log(0.5));
    Expr e2 = Expr::constant(NNReal::from_log(2.0));
    Expr dist = simplify(
        Expr::odot(sqrt_e, Expr::ominus(one, Expr::odot(e2, Expr::var("y")))));
    CHECK(pretty(dist) == "1 (-) y");

    // simplification preserves value on random trees
    oracle::Rng rng(8);
    int done = 0;
    while (done < 200) {
        Expr t = oracle::random_expr(rng, 5);
        double lo, hi;
        if (!oracle::usable_window(t, lo, hi)) continue;
        ++done;
        Expr s = simplify(t);
        for (int i = 0; i < 3; ++i) {
            NNReal xv = NNReal::from_log(rng.uniform(lo, hi));
            double a, b;
            try {
                a = eval(t, xv).log();
                b = eval(s, xv).log();
            } catch (const Error&) {
                continue;
            }
            CHECK(a == doctest::Approx(b).epsilon(1e-9).scale(
                           std::max(1.0, std::abs(a))));
        }
    }
}

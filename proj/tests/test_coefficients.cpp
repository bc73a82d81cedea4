#include "support.hpp"

#include "lyapflow/errors.hpp"
#include "lyapflow/expr.hpp"
#include "lyapflow/family.hpp"
#include "lyapflow/field.hpp"
#include "lyapflow/measure.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace lyapflow;
using testing::Gen;

namespace {

double eval(const std::string& text, std::vector<double> x, double t = 0.0,
            const std::vector<std::string>& names = {}, const std::vector<double>& params = {}) {
    const expr::SymbolTable sym{static_cast<int>(x.size()), names, true};
    return expr::Program(expr::parse(text, sym)).eval(x, t, params);
}

}  // namespace

TEST_CASE("expression evaluation") {
    CHECK(eval("1 + 2*3", {0.0}) == 7.0);
    CHECK(eval("(1 + 2)*3", {0.0}) == 9.0);
    CHECK(eval("-x1^2", {3.0}) == -9.0);
    CHECK_THROWS_AS(eval("2^3^2", {0.0}), ParseError);
    CHECK(eval("x1 - x2 - 1", {5.0, 2.0}) == 2.0);
    CHECK(eval("x1/x2/2", {8.0, 2.0}) == 2.0);
    CHECK(eval("x", {4.0}) == 4.0);
    CHECK(eval("t*x1", {2.0}, 3.0) == 6.0);
    CHECK(eval("sin(x1) + cos(x1)", {0.3}) == doctest::Approx(std::sin(0.3) + std::cos(0.3)));
    CHECK(eval("exp(x1)*tanh(x1)", {0.4}) == doctest::Approx(std::exp(0.4) * std::tanh(0.4)));
    CHECK(eval("min(x1, 2) + max(x1, 2)", {5.0}) == 7.0);
    CHECK(eval("a*x1 + b", {2.0}, 0.0, {"a", "b"}, {3.0, 1.0}) == 7.0);
    CHECK(eval("1.5e-1 + .5", {0.0}) == doctest::Approx(0.65));
    CHECK(eval("x1^0", {0.0}) == 1.0);
    CHECK(eval("x1^-1", {4.0}) == 0.25);
}

TEST_CASE("expression errors") {
    const expr::SymbolTable sym{2, {"a"}, true};
    CHECK_THROWS_AS(expr::parse("x1 +", sym), ParseError);
    CHECK_THROWS_AS(expr::parse("(x1", sym), ParseError);
    CHECK_THROWS_AS(expr::parse("x1 $ 2", sym), ParseError);
    CHECK_THROWS_AS(expr::parse("x1^1.5", sym), ParseError);
    CHECK_THROWS_AS(expr::parse("x3", sym), NameError);
    CHECK_THROWS_AS(expr::parse("b*x1", sym), NameError);
    CHECK_THROWS_AS(expr::parse("log(x1)", sym), NameError);
    try {
        expr::parse("x1 + * 2", sym);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 5);
    }
    CHECK_THROWS_AS(expr::differentiate(expr::parse("min(x1, x2)", sym), 0), UnsupportedExpression);
}

TEST_CASE("property: symbolic derivatives match finite differences") {
    const std::vector<std::string> exprs = {"x1^3 - 2*x1*x2",  "sin(x1)*cos(x2)", "exp(-x1^2)/(1 + x2^2)",
                                            "tanh(x1*x2) - x2", "x1^-2 + x2^4",   "-(x1 - x2)^3*sin(t)"};
    const expr::SymbolTable sym{2, {}, true};
    testing::for_cases(60, 5, [&](Gen& g, int c) {
        const auto& text = exprs[static_cast<std::size_t>(c) % exprs.size()];
        const auto node = expr::parse(text, sym);
        const expr::Program f(node);
        std::vector<double> x{g.uniform(0.5, 1.5), g.uniform(-1.5, 1.5)};
        const double t = g.uniform(0.0, 3.0);
        for (int v = 0; v < 2; ++v) {
            const expr::Program df(expr::differentiate(node, v));
            const double h = 1e-6;
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(v)] += h;
            xm[static_cast<std::size_t>(v)] -= h;
            const double fd = (f.eval(xp, t, {}) - f.eval(xm, t, {})) / (2 * h);
            CHECK(df.eval(x, t, {}) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    });
}

TEST_CASE("parse_field examples") {
    const auto f = testing::scalar_linear(1.0, 1.0);
    CHECK(f.dim() == 1);
    CHECK(f.channels() == 1);
    CHECK(f.metadata().linear_in_x);
    CHECK(f.metadata().autonomous);
    Gen g(1);
    for (int i = 0; i < 5; ++i) {
        const Vector x = g.vector(1, 3.0);
        CHECK(f.drift_jacobian(x, 0.0)(0, 0) == 1.0);
        CHECK(f.diffusion_jacobian(0, x, 0.0)(0, 0) == 1.0);
        CHECK(f.drift(x, 0.0)(0) == f.drift_jacobian(x, 0.0)(0, 0) * x(0));
    }

    const auto o = parse_field({"-theta*x1", "-theta*x2"}, {{"sigma", "sigma"}}, {{"theta", 1.0}, {"sigma", 0.3}},
                               2, 1);
    const Vector x = Eigen::Vector2d(0.4, -2.0);
    CHECK((o.drift_jacobian(x, 0.0) + Matrix::Identity(2, 2)).norm() == 0.0);
    CHECK(o.diffusion_jacobian(0, x, 0.0).norm() == 0.0);
    CHECK_FALSE(o.metadata().linear_in_x);

    const auto c = parse_field({"-x1^3 - x1"}, {}, {}, 1, 0);
    CHECK(c.drift_jacobian(Vector::Constant(1, 0.7), 0.0)(0, 0) == doctest::Approx(-2.47).epsilon(1e-14));
    CHECK(c.channels() == 0);
}

TEST_CASE("parse_field errors") {
    CHECK_THROWS_AS(parse_field({"x1 +"}, {}, {}, 1, 0), ParseError);
    CHECK_THROWS_AS(parse_field({"y*x1"}, {}, {}, 1, 0), NameError);
    CHECK_THROWS_AS(parse_field({"min(x1, 0)"}, {}, {}, 1, 0), UnsupportedExpression);
    CHECK_THROWS_AS(parse_field({"x1", "x2"}, {}, {}, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(parse_field({"x1"}, {{"1", "2"}}, {}, 1, 1), InvalidArgument);
    CHECK_THROWS_AS(parse_field({"x1"}, {}, {{"x1", 1.0}}, 1, 0), InvalidArgument);
    FieldOptions nonsmooth;
    nonsmooth.allow_nonsmooth = true;
    const auto f = parse_field({"min(x1, 1)"}, {}, {}, 1, 0, nonsmooth);
    CHECK_FALSE(f.has_jacobian());
    CHECK(f.drift(Vector::Constant(1, 3.0), 0.0)(0) == 1.0);
    CHECK_THROWS_AS(f.drift_jacobian(Vector::Zero(1), 0.0), UnsupportedExpression);
}

TEST_CASE("field metadata") {
    CHECK_FALSE(parse_field({"x1*t"}, {}, {}, 1, 0).metadata().autonomous);
    CHECK(parse_field({"x1*t"}, {}, {}, 1, 0).metadata().linear_in_x);
    CHECK_FALSE(parse_field({"x1 + 1"}, {}, {}, 1, 0).metadata().linear_in_x);
    CHECK_FALSE(parse_field({"sin(x1)"}, {}, {}, 1, 0).metadata().linear_in_x);
    const auto f = testing::scalar_linear(1.0, 0.5);
    const auto g = f.with_params({{"a", 2.0}});
    CHECK(g.drift(Vector::Ones(1), 0.0)(0) == 2.0);
    CHECK(f.drift(Vector::Ones(1), 0.0)(0) == 1.0);
    const auto s = f.with_schedule({ParamOverride{1.0, 2.0, 0, 5.0}});
    CHECK_FALSE(s.metadata().autonomous);
    CHECK(s.drift(Vector::Ones(1), 0.5)(0) == 1.0);
    CHECK(s.drift(Vector::Ones(1), 1.5)(0) == 5.0);
    CHECK(s.drift(Vector::Ones(1), 2.0)(0) == 1.0);
    CHECK(s.metadata().linear_in_x);
}

TEST_CASE("commutative noise detection") {
    CHECK(testing::scalar_linear(1, 1).commutative_noise());
    CHECK(parse_field({"x1", "x2"}, {{"x1", "0"}, {"0", "sin(x2)"}}, {}, 2, 2).commutative_noise());
    CHECK_FALSE(parse_field({"x1", "x2"}, {{"x2", "0"}, {"0", "x1"}}, {}, 2, 2).commutative_noise());
}

TEST_CASE("estimated regularity") {
    const auto f = parse_field({"-2*x1"}, {{"0.5*x1"}}, {}, 1, 1);
    const auto r = estimate_regularity(f, 3.0, 1000, 1);
    CHECK(r.jacobian_bound == doctest::Approx(2.0));
    CHECK(r.lipschitz_seminorm == doctest::Approx(0.0));
    const auto g = with_estimated_regularity(f, 3.0, 1, 1000);
    REQUIRE(g.metadata().jacobian_bound);
    CHECK(g.metadata().jacobian_bound_empirical);
    const auto c = parse_field({"-x1^3"}, {}, {}, 1, 0);
    const auto rc = estimate_regularity(c, 1.0, 10000, 2);
    CHECK(rc.jacobian_bound <= 3.0);
    CHECK(rc.jacobian_bound > 2.9);
    CHECK(rc.lipschitz_seminorm <= 6.0 + 1e-9);
    CHECK(rc.lipschitz_seminorm > 5.0);
}

// ---------------------------------------------------------------------------
// Families

namespace {

FamilySpec example1() {
    FamilySpec s;
    s.kind = FamilyKind::property1;
    s.base = FieldSpec{{"a*x1"}, {}, {{"a", 1.0}}, {}};
    s.bumps = {Bump{"a", "2", "k", "k + 1"}};
    return s;
}

FamilySpec example2() {
    FamilySpec s;
    s.kind = FamilyKind::property1;
    s.base = FieldSpec{{"a1*x1", "a2*x2"}, {}, {{"a1", 1.0}, {"a2", 6.0}}, {}};
    s.bumps = {Bump{"a1", "2", "k", "inf"}};
    return s;
}

}  // namespace

TEST_CASE("unit-window bump family support sets") {
    const auto fam = build_perturbation_family(example1(), {1, 2, 5});
    for (int k : {1, 2, 5}) {
        for (int i = 1; i <= 10; ++i) {
            const auto u = fam.support_set(k, i);
            if (i == k + 1) {
                REQUIRE(u.size() == 1);
                CHECK(u[0].start == i - 1);
                CHECK(u[0].end == i);
                CHECK(fam.support_length(k, i) == 1.0);
            } else {
                CHECK(u.empty());
            }
        }
        const auto m = fam.member(k);
        CHECK(m.drift(Vector::Ones(1), k - 0.5)(0) == 1.0);
        CHECK(m.drift(Vector::Ones(1), k + 0.5)(0) == 2.0);
        CHECK(m.drift(Vector::Ones(1), k + 1.5)(0) == 1.0);
    }
}

TEST_CASE("half-line bump family support sets") {
    const auto fam = build_perturbation_family(example2(), {1, 2, 5});
    for (int k : {1, 2, 5}) {
        for (int i = 1; i <= 20; ++i) {
            CHECK(fam.support_length(k, i) == (i > k ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("constant family has empty supports") {
    FamilySpec s;
    s.kind = FamilyKind::parametric;
    s.base = FieldSpec{{"a*x1"}, {}, {{"a", 1.0}}, {}};
    s.parameter_path = {{"a", "1"}};
    const auto fam = build_perturbation_family(s);
    CHECK(fam.support_set(3, 4).empty());
    const auto r = verify_property1(fam, 1000, {1, 10});
    CHECK(r.verdict == Property1Verdict::holds);
    for (const auto& [k, v] : r.cesaro_values) CHECK(v == 0.0);
}

TEST_CASE("overlapping bumps are rejected") {
    FamilySpec s = example1();
    s.bumps.push_back(Bump{"a", "3", "k + 0.5", "k + 2"});
    CHECK_THROWS_AS(build_perturbation_family(s, {1}), InvalidSpecification);
    FamilySpec bad = example1();
    bad.bumps[0].param = "nope";
    CHECK_THROWS_AS(build_perturbation_family(bad, {1}), InvalidSpecification);
}

TEST_CASE("verify_property1 verdicts") {
    const auto f1 = build_perturbation_family(example1());
    const auto r1 = verify_property1(f1, 10000, {1, 10, 100});
    CHECK(r1.verdict == Property1Verdict::holds);
    for (const auto& [k, v] : r1.cesaro_values) CHECK(v == doctest::Approx(1.0 / 7501).epsilon(1e-12));

    const auto f2 = build_perturbation_family(example2());
    const auto r2 = verify_property1(f2, 10000, {1, 10, 100});
    CHECK(r2.verdict == Property1Verdict::fails);
    for (const auto& [k, v] : r2.cesaro_values) CHECK(v > 0.98);

    CHECK_THROWS_AS(verify_property1(f1, 7, {1}), InvalidArgument);
}

TEST_CASE("property: verify_property1 is invariant under interval refinement") {
    testing::for_cases(10, 23, [](Gen& g, int) {
        const double len = g.uniform(0.1, 0.9);
        const double split = g.uniform(0.05, 0.95) * len;
        FamilySpec whole;
        whole.kind = FamilyKind::property1;
        whole.base = FieldSpec{{"a*x1"}, {}, {{"a", 1.0}}, {}};
        const std::string start = "k + 0.05";
        const std::string end = "k + 0.05 + " + std::to_string(len);
        const std::string mid = "k + 0.05 + " + std::to_string(split);
        whole.bumps = {Bump{"a", "2", start, end}};
        FamilySpec parts = whole;
        parts.bumps = {Bump{"a", "2", start, mid}, Bump{"a", "3", mid, end}};
        const auto a = verify_property1(build_perturbation_family(whole), 400, {1, 3});
        const auto b = verify_property1(build_perturbation_family(parts), 400, {1, 3});
        for (int k : {1, 3}) CHECK(a.cesaro_values.at(k) == doctest::Approx(b.cesaro_values.at(k)).epsilon(1e-12));
        CHECK(a.verdict == b.verdict);
    });
}

TEST_CASE("empirical_lpp_norm") {
    const auto mu = EmpiricalMeasure::uniform(Gen(3).matrix(50, 2));
    const auto base = parse_field({"-x1", "-x2"}, {}, {}, 2, 0);
    const auto zero = drift_difference(base, base);
    const auto n0 = empirical_lpp_norm(zero, mu, 3.0);
    CHECK(n0.lp == 0.0);
    CHECK(n0.dlp == 0.0);
    CHECK(n0.lpp == 0.0);

    const auto shifted = parse_field({"-x1 + 3", "-x2 + 4"}, {}, {}, 2, 0);
    for (double p : {2.0, 3.0, 7.5}) {
        const auto n = empirical_lpp_norm(drift_difference(shifted, base), mu, p);
        CHECK(n.lp == doctest::Approx(5.0).epsilon(1e-14));
        CHECK(n.dlp == 0.0);
        CHECK(n.lpp == doctest::Approx(5.0).epsilon(1e-14));
    }

    Gen g(99);
    Matrix pts(100000, 1);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts(i, 0) = g.normal();
    const auto normal = EmpiricalMeasure::uniform(pts);
    const double eps = 0.01;
    const auto lin = parse_field({"x1"}, {}, {}, 1, 0);
    const auto lin_eps = parse_field({"1.01*x1"}, {}, {}, 1, 0);
    const auto n = empirical_lpp_norm(drift_difference(lin_eps, lin), normal, 4.0);
    CHECK(n.lp == doctest::Approx(eps * std::pow(3.0, 0.25)).epsilon(0.02));
    CHECK(n.dlp == doctest::Approx(eps).epsilon(1e-10));
    CHECK(n.lpp == doctest::Approx(2.316 * eps).epsilon(0.02));

    CHECK_THROWS_AS(empirical_lpp_norm(zero, mu, 1.5), InvalidArgument);
    EmpiricalMeasure empty;
    CHECK_THROWS_AS(empirical_lpp_norm(zero, empty, 3.0), InvalidArgument);
}

TEST_CASE("property: empirical_lpp_norm is absolutely homogeneous") {
    testing::for_cases(20, 29, [](Gen& g, int) {
        const auto mu = EmpiricalMeasure::uniform(g.matrix(30, 1));
        const double c = g.uniform(-5.0, 5.0);
        const double p = g.uniform(2.0, 6.0);
        const auto base = parse_field({"0"}, {}, {}, 1, 0);
        const auto f = parse_field({"sin(x1) + x1^2"}, {}, {}, 1, 0);
        const auto scaled = parse_field({"c*(sin(x1) + x1^2)"}, {}, {{"c", c}}, 1, 0);
        const auto a = empirical_lpp_norm(drift_difference(f, base), mu, p);
        const auto b = empirical_lpp_norm(drift_difference(scaled, base), mu, p);
        CHECK(b.lp == doctest::Approx(std::abs(c) * a.lp).epsilon(1e-12));
        CHECK(b.dlp == doctest::Approx(std::abs(c) * a.dlp).epsilon(1e-12));
        CHECK(b.lpp == doctest::Approx(std::abs(c) * a.lpp).epsilon(1e-12));
    });
}

TEST_CASE("check_monotonicity examples") {
    const auto o = parse_field({"-x1"}, {{"0.7"}}, {}, 1, 1);
    const auto r = check_monotonicity(o, 1000, 3.0, 1);
    REQUIRE(r.holds_with_lambda);
    CHECK(*r.holds_with_lambda == doctest::Approx(2.0).epsilon(1e-14));

    const auto gbm = testing::scalar_linear(1.0, 1.0);
    const auto r2 = check_monotonicity(gbm, 1000, 3.0, 1);
    CHECK_FALSE(r2.holds_with_lambda);
    CHECK(r2.worst_value == doctest::Approx(3.0));

    const auto r3 = check_monotonicity(testing::cubic_monotone(), 2000, 3.0, 1);
    REQUIRE(r3.holds_with_lambda);
    CHECK(*r3.holds_with_lambda >= 1.9);

    CHECK_THROWS_AS(check_monotonicity(o, 50, 3.0, 1), InvalidArgument);
    const auto a = check_monotonicity(testing::cubic_monotone(), 500, 2.0, 8);
    const auto b = check_monotonicity(testing::cubic_monotone(), 500, 2.0, 8);
    CHECK(a.worst_value == b.worst_value);
}

TEST_CASE("property: monotonicity quotient is symmetric") {
    const auto f = parse_field({"-x1 - x1^3 + x2", "sin(x1) - 2*x2"}, {{"0.3*cos(x2)", "0.2*x1"}}, {}, 2, 1);
    testing::for_cases(100, 31, [&](Gen& g, int) {
        const Vector x = g.vector(2, 2.0), y = g.vector(2, 2.0);
        CHECK(monotonicity_quotient(f, x, y) == monotonicity_quotient(f, y, x));
    });
}

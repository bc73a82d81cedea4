#include "support.hpp"

#include "lyapflow/errors.hpp"
#include "lyapflow/measure.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace lyapflow;
using testing::Gen;

namespace {

double mean(const EmpiricalMeasure& mu, int i) { return mu.weights.dot(mu.points.col(i)); }

double variance(const EmpiricalMeasure& mu, int i) {
    const double m = mean(mu, i);
    return mu.weights.dot((mu.points.col(i).array() - m).square().matrix());
}

}  // namespace

TEST_CASE("EmpiricalMeasure validation") {
    CHECK_NOTHROW(EmpiricalMeasure::uniform(Matrix::Ones(3, 2)).validate());
    CHECK_NOTHROW(EmpiricalMeasure::dirac(Vector::Ones(2)).validate());
    EmpiricalMeasure empty;
    CHECK_THROWS_AS(empty.validate(), InvalidArgument);
    auto m = EmpiricalMeasure::uniform(Matrix::Ones(2, 1));
    m.weights = Eigen::Vector2d(0.7, 0.4);
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
    m.weights = Eigen::Vector2d(1.5, -0.5);
    CHECK_THROWS_AS(m.validate(), InvalidArgument);
}

TEST_CASE("OU invariant measure") {
    const auto f = testing::ou({1.0}, 0.5);
    const auto mu = sample_invariant_measure(f, 10.0, 100000, 0.5, 0.005, 1, Vector::Zero(1));
    CHECK(mu.size() == 100000);
    const double v = variance(mu, 0);
    CHECK(std::abs(v - 0.125) <= 0.05 * 0.125);
    // thinning 0.5 leaves autocorrelation e^{-0.5}; inflate the naive SE accordingly
    const double rho = std::exp(-0.5);
    const double se = std::sqrt(v / mu.size() * (1 + rho) / (1 - rho));
    CHECK(std::abs(mean(mu, 0)) <= 3 * se);
    CHECK(mu.stationary);
    CHECK(mu.provenance.seed == 1);
    CHECK(mu.provenance.burn_in == 10.0);
}

TEST_CASE("attracting fixed point") {
    const auto f = parse_field({"1 - x1"}, {}, {}, 1, 0);
    const auto mu = sample_invariant_measure(f, 30.0, 50, 0.1, 0.01, 1, Vector::Constant(1, -3.0));
    for (int i = 0; i < mu.size(); ++i) CHECK(std::abs(mu.points(i, 0) - 1.0) < 1e-6);
}

TEST_CASE("doubling burn-in keeps the mean") {
    const auto f = testing::ou({1.0}, 0.5);
    const auto a = sample_invariant_measure(f, 10.0, 5000, 0.5, 0.01, 4, Vector::Constant(1, 2.0));
    const auto b = sample_invariant_measure(f, 20.0, 5000, 0.5, 0.01, 4, Vector::Constant(1, 2.0));
    const double pooled = std::sqrt((variance(a, 0) + variance(b, 0)) / 5000.0) * std::sqrt((1 + std::exp(-0.5)) / (1 - std::exp(-0.5)));
    CHECK(std::abs(mean(a, 0) - mean(b, 0)) < 3 * pooled);
}

TEST_CASE("sample_invariant_measure errors") {
    const auto f = testing::ou({1.0}, 0.5);
    CHECK_THROWS_AS(sample_invariant_measure(f, -1.0, 10, 0.5, 0.01, 1, Vector::Zero(1)), InvalidArgument);
    CHECK_THROWS_AS(sample_invariant_measure(f, 1.0, 10, 0.001, 0.01, 1, Vector::Zero(1)), InvalidArgument);
    CHECK_THROWS_AS(sample_invariant_measure(f, 1.0, 0, 0.5, 0.01, 1, Vector::Zero(1)), InvalidArgument);
    const auto unstable = parse_field({"x1^3"}, {{"1"}}, {}, 1, 1);
    CHECK_THROWS_AS(sample_invariant_measure(unstable, 10.0, 10, 0.5, 0.01, 1, Vector::Ones(1)), NonDissipative);
    const auto nonaut = parse_field({"-x1 + sin(t)"}, {}, {}, 1, 0);
    CHECK_THROWS_AS(sample_invariant_measure(nonaut, 1.0, 10, 0.5, 0.01, 1, Vector::Zero(1)), PreconditionError);
}

TEST_CASE("many-runs mode and determinism") {
    const auto f = testing::ou({1.0}, 0.5);
    MeasureOptions opt;
    opt.many_runs = true;
    opt.threads = 1;
    const auto a = sample_invariant_measure(f, 5.0, 500, 0.5, 0.01, 2, Vector::Zero(1), opt);
    opt.threads = 3;
    const auto b = sample_invariant_measure(f, 5.0, 500, 0.5, 0.01, 2, Vector::Zero(1), opt);
    CHECK(a.points == b.points);
    CHECK(std::abs(variance(a, 0) - 0.125) < 0.03);
}

TEST_CASE("stationarity diagnostic") {
    Gen g(5);
    Matrix flat = g.matrix(4000, 2);
    CHECK(stationarity_diagnostic(flat));
    Matrix drifting = flat;
    for (Eigen::Index i = 0; i < drifting.rows(); ++i) drifting(i, 0) += 3.0 * static_cast<double>(i) / 4000.0;
    CHECK_FALSE(stationarity_diagnostic(drifting));
    Matrix widening = flat;
    for (Eigen::Index i = 2000; i < widening.rows(); ++i) widening(i, 1) *= 2.0;
    CHECK_FALSE(stationarity_diagnostic(widening));
}

TEST_CASE("contraction for OU is exact") {
    const auto f = testing::ou({1.0}, 0.5);
    const auto pairs = sample_pairs(1, 16, 3.0, 1);
    const auto rows = check_contraction(f, pairs, {0.5, 1.0, 2.0}, 4, 2.0, 1);
    for (const auto& r : rows) {
        CHECK(std::abs(r.ratio - std::exp(-2 * r.t)) < 1e-8);
        CHECK(r.pass);
    }
    const std::vector<PointPair> same{{Vector::Ones(1), Vector::Ones(1)}};
    for (const auto& r : check_contraction(f, same, {0.5, 1.0}, 2, 2.0, 1)) CHECK(r.ratio == 0.0);
}

TEST_CASE("contraction for the monotone cubic field") {
    const auto f = testing::cubic_monotone();
    const auto pairs = sample_pairs(1, 32, 3.0, 2);
    const auto rows = check_contraction(f, pairs, {0.5, 1.0, 2.0}, 8, 1.9, 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].pass);
        if (i > 0) CHECK(rows[i].ratio <= rows[i - 1].ratio);
    }
    const auto gbm = testing::scalar_linear(1.0, 1.0);
    CHECK_THROWS_AS(check_contraction(f, {}, {1.0}, 2, 1.9, 1), InvalidArgument);
    const auto grows = check_contraction(gbm, sample_pairs(1, 4, 1.0, 1), {1.0}, 4, 1.0, 1);
    CHECK_FALSE(grows[0].pass);
}

TEST_CASE("sample_pairs stays in the box and avoids coincident points") {
    const auto pairs = sample_pairs(3, 200, 2.0, 9);
    CHECK(pairs.size() == 200);
    for (const auto& [x, y] : pairs) {
        CHECK(x.cwiseAbs().maxCoeff() <= 2.0);
        CHECK(y.cwiseAbs().maxCoeff() <= 2.0);
        CHECK((x - y).norm() >= 1e-12);
    }
    CHECK(sample_pairs(3, 5, 2.0, 9)[0].first == pairs[0].first);
}

TEST_CASE("weak distance examples") {
    const auto f = testing::ou({1.0}, 0.5);
    const auto a = sample_invariant_measure(f, 10.0, 10000, 0.5, 0.01, 1, Vector::Zero(1));
    const auto b = sample_invariant_measure(f, 10.0, 10000, 0.5, 0.01, 2, Vector::Zero(1));
    CHECK(weak_distance(a, a) == 0.0);
    const double null = weak_distance(a, b);
    CHECK(null <= 0.02);
    const auto wide = testing::ou({1.0}, 1.0);
    const auto c = sample_invariant_measure(wide, 10.0, 10000, 0.5, 0.01, 3, Vector::Zero(1));
    // null 99th percentile from resampling independent pairs
    std::vector<double> nulls;
    for (std::uint64_t s = 10; s < 20; ++s) {
        const auto x = sample_invariant_measure(f, 10.0, 10000, 0.5, 0.01, s, Vector::Zero(1));
        const auto y = sample_invariant_measure(f, 10.0, 10000, 0.5, 0.01, s + 100, Vector::Zero(1));
        nulls.push_back(weak_distance(x, y));
    }
    const double q99 = *std::max_element(nulls.begin(), nulls.end());
    CHECK(weak_distance(a, c) >= 5 * q99);
    CHECK_THROWS_AS(weak_distance(a, EmpiricalMeasure::dirac(Vector::Zero(2))), InvalidArgument);
}

TEST_CASE("weak distance matches a direct double sum") {
    Gen g(8);
    const auto a = EmpiricalMeasure::uniform(g.matrix(40, 2));
    const auto b = EmpiricalMeasure::uniform(g.matrix(30, 2, 1.5));
    auto cross = [](const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
        double s = 0.0;
        for (int i = 0; i < p.size(); ++i)
            for (int j = 0; j < q.size(); ++j) s += p.weights(i) * q.weights(j) * (p.point(i) - q.point(j)).norm();
        return s;
    };
    const double oracle = std::sqrt(2 * cross(a, b) - cross(a, a) - cross(b, b));
    CHECK(weak_distance(a, b) == doctest::Approx(oracle).epsilon(1e-12));
    // 1-d fast path against the same oracle
    const auto c = EmpiricalMeasure::uniform(g.matrix(50, 1));
    const auto d = EmpiricalMeasure::uniform(g.matrix(20, 1, 2.0));
    const double o1 = std::sqrt(2 * cross(c, d) - cross(c, c) - cross(d, d));
    CHECK(weak_distance(c, d) == doctest::Approx(o1).epsilon(1e-12));
}

TEST_CASE("property: weak distance is a symmetric metric") {
    testing::for_cases(30, 43, [](Gen& g, int) {
        const int d = g.integer(1, 3);
        const auto a = EmpiricalMeasure::uniform(g.matrix(g.integer(1, 40), d, g.uniform(0.5, 2)));
        const auto b = EmpiricalMeasure::uniform(g.matrix(g.integer(1, 40), d, g.uniform(0.5, 2)));
        const auto c = EmpiricalMeasure::uniform(g.matrix(g.integer(1, 40), d, g.uniform(0.5, 2)));
        CHECK(weak_distance(a, b) == weak_distance(b, a));
        CHECK(weak_distance(a, b) >= 0.0);
        CHECK(weak_distance(a, c) <= weak_distance(a, b) + weak_distance(b, c) + 1e-12);
        CHECK(weak_distance(a, a) == 0.0);
    });
}

TEST_CASE("measure csv") {
    Matrix pts(2, 2);
    pts << 0.5, -1, 2, 3;
    const auto mu = EmpiricalMeasure::uniform(pts);
    const auto file = std::filesystem::temp_directory_path() / "lyapflow_measure_test.csv";
    write_measure_csv(mu, file, "h");
    std::ifstream is(file);
    std::string line;
    std::getline(is, line);
    CHECK(line == "x_1,x_2,weight,config_hash");
    std::getline(is, line);
    CHECK(line == "0.5,-1,0.5,h");
    std::filesystem::remove(file);
}

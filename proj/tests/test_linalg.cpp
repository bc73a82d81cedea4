#include "support.hpp"

#include "lyapflow/errors.hpp"
#include "lyapflow/linalg.hpp"

#include <doctest.h>

#include <limits>

using namespace lyapflow;
using testing::Gen;

TEST_CASE("operator_norm examples") {
    CHECK(linalg::operator_norm(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-15));
    Matrix d = Eigen::Vector3d(3, -2, 1).asDiagonal();
    CHECK(linalg::operator_norm(d) == doctest::Approx(3.0).epsilon(1e-15));
    Matrix n(2, 2);
    n << 0, 1, 0, 0;
    CHECK(linalg::operator_norm(n) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("operator_norm rejects bad input") {
    CHECK_THROWS_AS(linalg::operator_norm(Matrix::Ones(2, 3)), InvalidArgument);
    Matrix m = Matrix::Identity(2, 2);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(linalg::operator_norm(m), InvalidArgument);
    m(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(linalg::wedge_norm(m, 1), InvalidArgument);
}

TEST_CASE("wedge_norm examples") {
    for (int l = 1; l <= 4; ++l) CHECK(linalg::wedge_norm(Matrix::Identity(4, 4), l) == doctest::Approx(1.0));
    Matrix d = Eigen::Vector3d(3, 2, 1).asDiagonal();
    CHECK(linalg::wedge_norm(d, 2) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(linalg::wedge_norm(d, 3) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK_THROWS_AS(linalg::wedge_norm(d, 0), InvalidArgument);
    CHECK_THROWS_AS(linalg::wedge_norm(d, 4), InvalidArgument);
    testing::for_cases(20, 11, [](Gen& g, int) {
        const Matrix m = g.matrix(3, 3);
        CHECK(linalg::wedge_norm(m, 1) == doctest::Approx(linalg::operator_norm(m)).epsilon(1e-14));
    });
}

TEST_CASE("log_wedge_norm is -inf on rank loss") {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 1.0;
    CHECK(linalg::log_wedge_norm(m, 1) == doctest::Approx(0.0));
    CHECK(linalg::log_wedge_norm(m, 2) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("svd matches the eigenvalue oracle and reconstructs") {
    testing::for_cases(50, 3, [](Gen& g, int) {
        const int d = g.integer(1, 6);
        const Matrix m = g.matrix(d, d, g.uniform(0.1, 10.0));
        const linalg::Svd s = linalg::svd(m);
        const auto oracle = testing::singular_values_oracle(m);
        for (int i = 0; i < d; ++i) {
            CHECK(s.singular_values(i) >= 0.0);
            if (i > 0) CHECK(s.singular_values(i) <= s.singular_values(i - 1));
            CHECK(s.singular_values(i) == doctest::Approx(oracle[static_cast<std::size_t>(i)]).epsilon(1e-7));
        }
        const Matrix rec = s.u * s.singular_values.asDiagonal() * s.v.transpose();
        CHECK((rec - m).norm() <= 1e-10 * std::max(1.0, linalg::operator_norm(m)));
        CHECK((s.u.transpose() * s.u - Matrix::Identity(d, d)).norm() < 1e-12);
        CHECK((s.v.transpose() * s.v - Matrix::Identity(d, d)).norm() < 1e-12);
    });
}

TEST_CASE("qr_positive examples") {
    auto id = linalg::qr_positive(Matrix::Identity(3, 3));
    CHECK((id.q - Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK((id.r - Matrix::Identity(3, 3)).norm() == 0.0);

    Matrix m = Eigen::Vector2d(-2, 1).asDiagonal();
    auto f = linalg::qr_positive(m);
    Matrix q = Eigen::Vector2d(-1, 1).asDiagonal();
    Matrix r = Eigen::Vector2d(2, 1).asDiagonal();
    CHECK((f.q - q).norm() < 1e-15);
    CHECK((f.r - r).norm() < 1e-15);

    Gen g(2024);
    const Matrix a = g.matrix(3, 3);
    auto fa = linalg::qr_positive(a);
    CHECK((fa.q * fa.r - a).norm() <= 1e-12 * linalg::operator_norm(a));
    CHECK(fa.r.diagonal().minCoeff() > 0.0);
}

TEST_CASE("qr_positive rejects rank-deficient frames") {
    Matrix m(2, 2);
    m << 1, 2, 2, 4;
    CHECK_THROWS_AS(linalg::qr_positive(m), DegenerateFrame);
    Matrix tiny = Eigen::Vector2d(1, 1e-14).asDiagonal();
    CHECK_THROWS_AS(linalg::qr_positive(tiny), DegenerateFrame);
    Matrix ok = Eigen::Vector2d(1, 1e-11).asDiagonal();
    CHECK_NOTHROW(linalg::qr_positive(ok));
}

TEST_CASE("property: qr_positive factors") {
    testing::for_cases(100, 7, [](Gen& g, int) {
        const int d = g.integer(1, 7);
        const Matrix m = g.matrix(d, d, g.uniform(1e-3, 1e3));
        const auto f = linalg::qr_positive(m);
        CHECK((f.q.transpose() * f.q - Matrix::Identity(d, d)).norm() < 1e-13);
        CHECK((f.q * f.r - m).norm() <= 1e-12 * linalg::operator_norm(m) * d);
        CHECK(f.r.diagonal().minCoeff() > 0.0);
        for (int j = 0; j < d; ++j)
            for (int i = j + 1; i < d; ++i) CHECK(f.r(i, j) == 0.0);
        // idempotent on its own Q
        const auto again = linalg::qr_positive(f.q);
        CHECK((again.q - f.q).norm() < 1e-12);
        CHECK((again.r - Matrix::Identity(d, d)).norm() < 1e-12);
    });
}

TEST_CASE("property: wedge norm submultiplicative and power bound") {
    testing::for_cases(200, 13, [](Gen& g, int) {
        const int d = g.integer(1, 5);
        const int l = g.integer(1, d);
        const Matrix m = g.matrix(d, d, g.uniform(0.2, 3.0));
        const Matrix n = g.matrix(d, d, g.uniform(0.2, 3.0));
        const double lhs = linalg::wedge_norm(m * n, l);
        CHECK(lhs <= linalg::wedge_norm(m, l) * linalg::wedge_norm(n, l) * (1 + 1e-12) + 1e-10);
        CHECK(linalg::wedge_norm(m, l) <= std::pow(linalg::operator_norm(m), l) * (1 + 1e-12) + 1e-10);
    });
}

TEST_CASE("property: wedge norm of the inverse") {
    testing::for_cases(100, 17, [](Gen& g, int) {
        const int d = g.integer(1, 5);
        const int l = g.integer(1, d);
        std::vector<double> sv;
        for (int i = 0; i < d; ++i) sv.push_back(g.uniform(0.2, 5.0));
        std::sort(sv.begin(), sv.end(), std::greater<>());
        const Matrix m = g.with_singular_values(sv);
        double smallest = 1.0;
        for (int i = 0; i < l; ++i) smallest *= sv[static_cast<std::size_t>(d - 1 - i)];
        CHECK(linalg::wedge_norm(m.inverse(), l) * smallest == doctest::Approx(1.0).epsilon(1e-8));
        double largest = 1.0;
        for (int i = 0; i < l; ++i) largest *= sv[static_cast<std::size_t>(i)];
        CHECK(linalg::wedge_norm(m, l) == doctest::Approx(largest).epsilon(1e-10));
    });
}

TEST_CASE("property: norm equivalence with C1 = sqrt(d)") {
    testing::for_cases(200, 19, [](Gen& g, int) {
        const int d = g.integer(1, 8);
        const Matrix m = g.matrix(d, d);
        const double c1 = std::sqrt(static_cast<double>(d));
        const double op = linalg::operator_norm(m);
        const double col = linalg::column_max_norm(m);
        CHECK(col / c1 <= op * (1 + 1e-12));
        CHECK(op <= c1 * col * (1 + 1e-12));
    });
}

TEST_CASE("expm and phi1") {
    Matrix d = Eigen::Vector2d(1.0, -2.0).asDiagonal();
    const Matrix e = linalg::expm(d);
    CHECK(e(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
    CHECK(e(1, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(e(0, 1) == 0.0);
    Matrix n(2, 2);
    n << 0, 1, 0, 0;
    const Matrix en = linalg::expm(n);
    CHECK(en(0, 1) == doctest::Approx(1.0));
    CHECK(en(0, 0) == doctest::Approx(1.0));
    // φ1(z) = (e^z − 1)/z on a diagonal
    const Vector v = linalg::phi1_times(d, Vector::Ones(2));
    CHECK(v(0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-13));
    CHECK(v(1) == doctest::Approx((std::exp(-2.0) - 1.0) / -2.0).epsilon(1e-13));
    // φ1(0) = I
    const Vector z = linalg::phi1_times(Matrix::Zero(2, 2), Eigen::Vector2d(3, 4));
    CHECK(z(0) == doctest::Approx(3.0));
    CHECK(z(1) == doctest::Approx(4.0));
}

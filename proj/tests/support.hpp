#pragma once

#include "lyapflow/family.hpp"
#include "lyapflow/field.hpp"
#include "lyapflow/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace testing {

using lyapflow::Matrix;
using lyapflow::Vector;

/// Seeded case generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

    Matrix matrix(int rows, int cols, double scale = 1.0) {
        Matrix m(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) m(i, j) = scale * normal();
        return m;
    }
    Vector vector(int n, double scale = 1.0) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v(i) = scale * normal();
        return v;
    }
    /// Random matrix with prescribed singular values.
    Matrix with_singular_values(const std::vector<double>& sv) {
        const int d = static_cast<int>(sv.size());
        Eigen::HouseholderQR<Matrix> qa(matrix(d, d)), qb(matrix(d, d));
        Matrix u = qa.householderQ(), v = qb.householderQ();
        Matrix s = Matrix::Zero(d, d);
        for (int i = 0; i < d; ++i) s(i, i) = sv[static_cast<std::size_t>(i)];
        return u * s * v.transpose();
    }

private:
    std::mt19937_64 eng_;
};

/// Runs `body` on `cases` generated inputs.
inline void for_cases(int cases, std::uint64_t seed, const std::function<void(Gen&, int)>& body) {
    Gen g(seed);
    for (int c = 0; c < cases; ++c) body(g, c);
}

/// Singular values from the eigenvalues of MᵀM, sorted non-increasing.
inline std::vector<double> singular_values_oracle(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m);
    std::vector<double> sv;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) sv.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i))));
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

inline lyapflow::CoefficientField scalar_linear(double a, double b) {
    return lyapflow::parse_field({"a*x1"}, {{"b*x1"}}, {{"a", a}, {"b", b}}, 1, 1);
}

inline lyapflow::CoefficientField ou(const std::vector<double>& theta, double sigma) {
    const int d = static_cast<int>(theta.size());
    std::vector<std::string> drift;
    std::vector<std::string> noise;
    std::map<std::string, double> params{{"sigma", sigma}};
    for (int i = 0; i < d; ++i) {
        const std::string t = "theta" + std::to_string(i + 1);
        params[t] = theta[static_cast<std::size_t>(i)];
        drift.push_back("-" + t + "*x" + std::to_string(i + 1));
        noise.push_back("sigma");
    }
    if (d == 1) return lyapflow::parse_field(drift, {noise}, params, 1, 1);
    // independent additive noise per coordinate
    std::vector<std::vector<std::string>> channels;
    for (int c = 0; c < d; ++c) {
        std::vector<std::string> ch(static_cast<std::size_t>(d), "0");
        ch[static_cast<std::size_t>(c)] = "sigma";
        channels.push_back(ch);
    }
    return lyapflow::parse_field(drift, channels, params, d, d);
}

inline lyapflow::CoefficientField cubic_monotone() {
    return lyapflow::parse_field({"-x1 - x1^3"}, {{"0.1*sin(x1)"}}, {}, 1, 1);
}

}  // namespace testing

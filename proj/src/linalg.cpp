#include "lyapflow/linalg.hpp"

#include "lyapflow/errors.hpp"

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <string>

namespace lyapflow::linalg {

namespace {

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw InvalidArgument(std::string(what) + ": expected a non-empty square matrix, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

}  // namespace

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw InvalidArgument(std::string(what) + ": matrix has non-finite entries");
}

Svd svd(const Matrix& m) {
    require_finite(m, "svd");
    if (m.size() == 0) throw InvalidArgument("svd: empty matrix");
    Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {solver.singularValues(), solver.matrixU(), solver.matrixV()};
}

Vector singular_values(const Matrix& m) {
    require_finite(m, "singular_values");
    if (m.size() == 0) throw InvalidArgument("singular_values: empty matrix");
    if (m.rows() == 1 && m.cols() == 1) return Vector::Constant(1, std::abs(m(0, 0)));
    return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

double operator_norm(const Matrix& m) {
    require_square(m, "operator_norm");
    return singular_values(m)(0);
}

double column_max_norm(const Matrix& m) {
    require_finite(m, "column_max_norm");
    if (m.size() == 0) return 0.0;
    return m.colwise().norm().maxCoeff();
}

double wedge_norm(const Matrix& m, int l) {
    require_square(m, "wedge_norm");
    if (l < 1 || l > m.rows()) {
        throw InvalidArgument("wedge_norm: l=" + std::to_string(l) + " outside [1, " +
                              std::to_string(m.rows()) + "]");
    }
    const Vector s = singular_values(m);
    double prod = 1.0;
    for (int i = 0; i < l; ++i) prod *= s(i);
    return prod;
}

double log_wedge_norm(const Matrix& m, int l) {
    require_square(m, "log_wedge_norm");
    if (l < 1 || l > m.rows()) {
        throw InvalidArgument("log_wedge_norm: l=" + std::to_string(l) + " outside [1, " +
                              std::to_string(m.rows()) + "]");
    }
    if (l == m.rows()) {
        // |det| via LU is more accurate than a product of singular values
        // when the spread is large.
        const Eigen::PartialPivLU<Matrix> lu(m);
        double acc = 0.0;
        for (int i = 0; i < l; ++i) acc += std::log(std::abs(lu.matrixLU()(i, i)));
        return acc;
    }
    const Vector s = singular_values(m);
    double acc = 0.0;
    for (int i = 0; i < l; ++i) acc += std::log(s(i));
    return acc;
}

QrFactors qr_positive(const Matrix& m) {
    require_square(m, "qr_positive");
    require_finite(m, "qr_positive");
    const Vector s = singular_values(m);
    if (!(s(s.size() - 1) > kRankTolerance * s(0))) {
        throw DegenerateFrame("qr_positive: frame is rank-deficient (sigma_min/sigma_max = " +
                              std::to_string(s(0) > 0 ? s(s.size() - 1) / s(0) : 0.0) + ")");
    }
    const Eigen::HouseholderQR<Matrix> qr(m);
    const Eigen::Index n = m.rows();
    QrFactors out{qr.householderQ() * Matrix::Identity(n, n),
                  qr.matrixQR().triangularView<Eigen::Upper>()};
    for (Eigen::Index i = 0; i < n; ++i) {
        if (out.r(i, i) < 0.0) {
            out.r.row(i) *= -1.0;
            out.q.col(i) *= -1.0;
        }
    }
    return out;
}

bool is_diagonal(const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (i != j && m(i, j) != 0.0) return false;
        }
    }
    return true;
}

Matrix expm(const Matrix& m) {
    if (m.rows() != m.cols()) throw InvalidArgument("expm: matrix must be square");
    if (is_diagonal(m)) {
        Matrix out = Matrix::Zero(m.rows(), m.cols());
        for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, i) = std::exp(m(i, i));
        return out;
    }
    return m.exp();
}

Vector phi1_times(const Matrix& m, const Vector& v) {
    const Eigen::Index n = m.rows();
    if (is_diagonal(m)) {
        Vector out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = m(i, i);
            out(i) = (z == 0.0 ? 1.0 : std::expm1(z) / z) * v(i);
        }
        return out;
    }
    // exp([[M, v], [0, 0]]) carries φ₁(M)v in its last column.
    Matrix aug = Matrix::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = m;
    aug.topRightCorner(n, 1) = v;
    const Matrix e = aug.exp();
    return e.topRightCorner(n, 1);
}

}  // namespace lyapflow::linalg

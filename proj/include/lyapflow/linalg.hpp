#pragma once

#include <Eigen/Dense>

#include <utility>

namespace lyapflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

struct Svd {
    Vector singular_values;  // non-increasing, non-negative
    Matrix u;
    Matrix v;
};

struct QrFactors {
    Matrix q;
    Matrix r;  // upper triangular, strictly positive diagonal
};

/// Relative rank tolerance below which a frame counts as collapsed.
inline constexpr double kRankTolerance = 1e-12;

/// Throws InvalidArgument unless every entry is finite.
void require_finite(const Matrix& m, const char* what);

Svd svd(const Matrix& m);
Vector singular_values(const Matrix& m);

/// Spectral norm sup |Mv|/|v|.
double operator_norm(const Matrix& m);

/// Largest Euclidean column norm, the entrywise matrix norm |M|.
double column_max_norm(const Matrix& m);

/// ‖∧^l M‖, the product of the l largest singular values.
double wedge_norm(const Matrix& m, int l);

/// ln ‖∧^l M‖ computed as a sum of logs; -inf for rank < l.
double log_wedge_norm(const Matrix& m, int l);

/// Householder QR normalized so that diag(R) > 0.
/// Throws DegenerateFrame when the smallest singular value is below
/// kRankTolerance times the largest.
QrFactors qr_positive(const Matrix& m);

/// Matrix exponential; elementwise fast path for diagonal input.
Matrix expm(const Matrix& m);

/// φ₁(M)·v with φ₁(z) = (e^z − 1)/z, via an augmented exponential.
Vector phi1_times(const Matrix& m, const Vector& v);

bool is_diagonal(const Matrix& m);

}  // namespace linalg
}  // namespace lyapflow

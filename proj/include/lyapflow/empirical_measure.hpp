#pragma once

#include "lyapflow/linalg.hpp"

#include <cstdint>
#include <string>

namespace lyapflow {

struct MeasureProvenance {
    std::string field_hash;
    double burn_in = 0.0;
    double thinning = 0.0;
    std::uint64_t seed = 0;
};

/// Weighted point cloud standing in for a probability measure on R^d.
/// `points` is n x d, one sample per row.
struct EmpiricalMeasure {
    Matrix points;
    Vector weights;
    MeasureProvenance provenance;
    bool stationary = true;

    int size() const noexcept { return static_cast<int>(points.rows()); }
    int dim() const noexcept { return static_cast<int>(points.cols()); }
    Vector point(int i) const { return points.row(i).transpose(); }

    /// Equal-weight measure over the rows of `points`.
    static EmpiricalMeasure uniform(Matrix points);
    /// Point mass at x.
    static EmpiricalMeasure dirac(const Vector& x);

    /// Throws InvalidArgument if empty, weights negative, or weights do not
    /// sum to 1 within 1e-12.
    void validate() const;
};

}  // namespace lyapflow

#pragma once

#include "lyapflow/empirical_measure.hpp"
#include "lyapflow/field.hpp"
#include "lyapflow/integrator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lyapflow {

struct MeasureOptions {
    Scheme scheme = Scheme::exponential;
    /// Recorded in the provenance; the CLI passes the config hash.
    std::string field_hash;
    /// Independent runs (one sample each, run i uses path index i) instead
    /// of a single thinned trajectory.
    bool many_runs = false;
    int threads = 0;
};

/// Samples an invariant measure from one long trajectory: integrate from
/// x_init, drop [0, burn_in], then record one point every `thinning` time
/// units. Sets `stationary` from a half-split comparison of means and
/// variances (relative gap < 0.1 per coordinate).
EmpiricalMeasure sample_invariant_measure(const CoefficientField& f, double burn_in, int n, double thinning,
                                          double dt, std::uint64_t seed, const Vector& x_init,
                                          const MeasureOptions& opts = {});

/// Half-split stationarity check used by sample_invariant_measure.
bool stationarity_diagnostic(const Matrix& points);

struct ContractionRow {
    double t = 0.0;
    double ratio = 0.0;
    double upper_confidence = 0.0;
    double bound = 0.0;
    bool pass = false;
};

using PointPair = std::pair<Vector, Vector>;

/// `count` seeded pairs drawn uniformly from [-radius, radius]^d.
std::vector<PointPair> sample_pairs(int d, int count, double radius, std::uint64_t seed);

struct ContractionOptions {
    double dt = 1e-3;
    Scheme scheme = Scheme::exponential;
    int threads = 0;
};

/// ratio(t) = mean of |Φ(x,t) − Φ(y,t)|²/|x − y|² over pairs and paths, both
/// points driven by the same noise; pass when the 99% upper confidence
/// limit is at most e^{−λt}(1 + 1e-3).
std::vector<ContractionRow> check_contraction(const CoefficientField& f, const std::vector<PointPair>& pairs,
                                              const std::vector<double>& t_list, int paths, double lambda,
                                              std::uint64_t seed, const ContractionOptions& opts = {});

/// Energy distance between two weighted samples, returned as the square
/// root of the (non-negative) V-statistic so that it is a metric.
double weak_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// One row per sample with columns x_1..x_d, weight, config_hash.
void write_measure_csv(const EmpiricalMeasure& mu, const std::filesystem::path& file, const std::string& config_hash);

}  // namespace lyapflow

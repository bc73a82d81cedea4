#pragma once

#include "lyapflow/empirical_measure.hpp"
#include "lyapflow/field.hpp"
#include "lyapflow/integrator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lyapflow {

struct SimConfig {
    double T = 100.0;
    double dt = 1e-2;
    int renorm_every = 10;
    int paths = 16;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::exponential;
    /// Leading fraction of [0, T] discarded before rates are accumulated.
    double transient_fraction = 0.25;
    int threads = 0;

    void validate() const;
};

/// Initial states for estimator paths: a fixed point or draws from an
/// empirical measure (one row per path, seeded by path index).
class X0Sampler {
public:
    static X0Sampler fixed(Vector x);
    static X0Sampler from_measure(EmpiricalMeasure mu);

    Vector draw(std::uint64_t seed, std::uint64_t path_index) const;
    bool is_fixed() const noexcept { return !measure_.has_value(); }
    int dim() const noexcept;

private:
    Vector fixed_;
    std::optional<EmpiricalMeasure> measure_;
};

struct LyapunovEstimate {
    std::vector<double> exponents;
    std::vector<double> standard_errors;
    std::string method;  // qr, wedge, furstenberg, tail_max
    double T = 0.0;
    double dt = 0.0;
    int paths = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    bool converged = true;
    bool fixed_x0 = false;
    int ordering_violations = 0;
    int restarts = 0;
    /// Per-path exponent estimates, paths x d; used for coupled differences.
    std::vector<std::vector<double>> path_values;
};

/// Benettin/QR spectrum. Rates are taken over [transient_fraction·T, T];
/// non-autonomous fields report the max running rate over the last quarter
/// (method tail_max). Standard errors are path-wise only.
LyapunovEstimate estimate_spectrum_qr(const CoefficientField& f, const X0Sampler& x0, const SimConfig& cfg);

struct ScalarEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    int paths = 0;
    bool converged = true;
    std::vector<double> path_values;
};

/// (1/T')·ln‖∧^l DΦ‖ over the post-transient window, accumulated from the
/// QR factors in blocks so nothing overflows.
ScalarEstimate estimate_wedge_sum(const CoefficientField& f, int l, const X0Sampler& x0, const SimConfig& cfg);

/// Mean of ln‖∧^l DΦ(x_j, 1, ω_j)‖ with x_j drawn from `mu`.
ScalarEstimate furstenberg_estimate(const CoefficientField& f, const EmpiricalMeasure& mu, int l, int samples,
                                    double dt, std::uint64_t seed, Scheme scheme = Scheme::exponential,
                                    int threads = 0);

struct SubadditivityOptions {
    double dt = 1e-2;
    Scheme scheme = Scheme::exponential;
    double x0_scale = 1.0;  // x ~ N(0, x0_scale² I)
    int threads = 0;
};

/// Max over trials of ln‖∧^l DΦ(x,m+n)‖ − ln‖∧^l DΦ(Φ(x,m),n)‖ − ln‖∧^l DΦ(x,m)‖.
double check_subadditivity(const CoefficientField& f, int l, int m, int n, int trials, std::uint64_t seed,
                           const SubadditivityOptions& opts = {});

struct MomentRow {
    double t = 0.0;
    double empirical = 0.0;
    double upper_confidence = 0.0;
    double bound = 0.0;
    bool pass = false;
};

/// Mean of ‖DΦ_{0,t}‖² from x = 0 against 3d·e^{3K²t²+3K²t}, where K is the
/// declared Jacobian bound (for a linear field DΦ is the flow itself); pass
/// when the 99% upper confidence limit is below the bound.
std::vector<MomentRow> check_moment_bound(const CoefficientField& f, const std::vector<double>& t_list, int paths,
                                          std::uint64_t seed, double dt = 1e-3,
                                          Scheme scheme = Scheme::exponential, int threads = 0);

}  // namespace lyapflow

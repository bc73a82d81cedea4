#pragma once

#include "lyapflow/expr.hpp"
#include "lyapflow/linalg.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lyapflow {

/// Regularity and structure flags carried by a coefficient field.
struct FieldMetadata {
    bool autonomous = true;
    bool linear_in_x = false;
    std::optional<double> jacobian_bound;      // K
    std::optional<double> lipschitz_seminorm;  // L, Lipschitz/Hölder seminorm of the Jacobians
    std::optional<double> holder_exponent;     // α ∈ (0, 1]
    bool jacobian_bound_empirical = false;
    bool lipschitz_seminorm_empirical = false;
};

/// A parameter replaced by `value` on the time window [start, end).
struct ParamOverride {
    double start = 0.0;
    double end = 0.0;
    int param = 0;
    double value = 0.0;
};

struct FieldOptions {
    /// Accept min/max; the field then has no Jacobians and only supports
    /// plain flow integration.
    bool allow_nonsmooth = false;
    std::optional<double> jacobian_bound;
    std::optional<double> lipschitz_seminorm;
    std::optional<double> holder_exponent;
};

/// Drift A(x,t) and diffusion channels B_i(x,t) on R^d with their Jacobians.
/// Immutable after construction; copies share the compiled programs.
class CoefficientField {
public:
    int dim() const noexcept { return dim_; }
    int channels() const noexcept { return channels_; }
    const FieldMetadata& metadata() const noexcept { return meta_; }
    bool has_jacobian() const noexcept { return code_->has_jacobian; }

    /// True when Milstein needs no Lévy areas: one channel, or d channels
    /// where channel i only moves coordinate i as a function of x_i.
    bool commutative_noise() const noexcept { return code_->diagonal_noise || channels_ <= 1; }

    const std::vector<std::string>& param_names() const noexcept { return code_->param_names; }
    const std::vector<double>& param_values() const noexcept { return params_; }
    const std::vector<ParamOverride>& schedule() const noexcept { return schedule_; }

    // Convenience evaluation.
    Vector drift(const Vector& x, double t) const;
    Vector diffusion(int channel, const Vector& x, double t) const;
    Matrix drift_jacobian(const Vector& x, double t) const;
    Matrix diffusion_jacobian(int channel, const Vector& x, double t) const;

    // Workspace evaluation used by the integrators. `params` comes from
    // resolve_params(t, ...).
    void resolve_params(double t, std::vector<double>& out) const;
    void eval_drift(std::span<const double> x, double t, std::span<const double> params,
                    std::span<double> out) const;
    void eval_diffusion(int channel, std::span<const double> x, double t, std::span<const double> params,
                        std::span<double> out) const;
    void eval_drift_jacobian(std::span<const double> x, double t, std::span<const double> params,
                             Matrix& out) const;
    void eval_diffusion_jacobian(int channel, std::span<const double> x, double t,
                                 std::span<const double> params, Matrix& out) const;
    /// g_i = DB_i·B_i, the Milstein correction direction for channel i.
    void eval_milstein(int channel, std::span<const double> x, double t, std::span<const double> params,
                       std::span<double> out) const;
    /// Dg_i, needed for the exact Jacobian of the Milstein map.
    void eval_milstein_jacobian(int channel, std::span<const double> x, double t,
                                std::span<const double> params, Matrix& out) const;

    /// Copy with some base parameters replaced.
    CoefficientField with_params(const std::map<std::string, double>& values) const;
    /// Copy with time-windowed parameter overrides; the result is non-autonomous.
    CoefficientField with_schedule(std::vector<ParamOverride> schedule) const;
    /// Copy with regularity metadata replaced.
    CoefficientField with_metadata(const FieldMetadata& meta) const;

    /// Source expressions, kept for reports.
    const std::vector<std::string>& drift_source() const noexcept { return code_->drift_src; }
    const std::vector<std::vector<std::string>>& diffusion_source() const noexcept { return code_->diffusion_src; }

private:
    friend CoefficientField parse_field(const std::vector<std::string>&, const std::vector<std::vector<std::string>>&,
                                        const std::map<std::string, double>&, int, int, const FieldOptions&);

    struct Compiled {
        std::vector<std::string> param_names;
        std::vector<std::string> drift_src;
        std::vector<std::vector<std::string>> diffusion_src;
        std::vector<expr::NodePtr> drift_ast;
        std::vector<std::vector<expr::NodePtr>> diffusion_ast;
        std::vector<expr::Program> drift;                        // d
        std::vector<std::vector<expr::Program>> diffusion;       // n x d
        std::vector<expr::Program> drift_jac;                    // d*d row-major
        std::vector<std::vector<expr::Program>> diffusion_jac;   // n x d*d
        std::vector<std::vector<expr::Program>> milstein;        // n x d
        std::vector<std::vector<expr::Program>> milstein_jac;    // n x d*d
        bool has_jacobian = false;
        bool diagonal_noise = false;
        bool references_time = false;
    };

    void refresh_structure();

    int dim_ = 0;
    int channels_ = 0;
    std::shared_ptr<const Compiled> code_;
    std::vector<double> params_;
    std::vector<ParamOverride> schedule_;
    FieldMetadata meta_;
};

/// Parses drift (d strings) and diffusion (n channels of d strings each).
/// Jacobians come from symbolic differentiation and are cross-checked
/// against central finite differences at 8 seeded points.
CoefficientField parse_field(const std::vector<std::string>& drift,
                             const std::vector<std::vector<std::string>>& diffusion,
                             const std::map<std::string, double>& params, int dim, int channels,
                             const FieldOptions& options = {});

struct RegularityEstimate {
    double jacobian_bound = 0.0;
    double lipschitz_seminorm = 0.0;
};

/// Box-sampled estimates of K = sup max(|DA|, |DB_i|) and of the Lipschitz
/// constant of the Jacobians on [-radius, radius]^d at t = 0.
RegularityEstimate estimate_regularity(const CoefficientField& f, double radius, int samples,
                                       std::uint64_t seed);

/// Fills unset K/L metadata from estimate_regularity and flags them empirical.
CoefficientField with_estimated_regularity(const CoefficientField& f, double radius, std::uint64_t seed,
                                           int samples = 10000);

}  // namespace lyapflow

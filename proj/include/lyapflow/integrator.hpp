#pragma once

#include "lyapflow/brownian.hpp"
#include "lyapflow/field.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lyapflow {

/// Fixed-step schemes.
///  - euler_maruyama: strong order 1/2.
///  - milstein: strong order 1, scalar or diagonal noise only.
///  - exponential: the tangent step is exp(DA·dt + ΣDB_i·ΔW_i − ½ΣDB_i²·dt)
///    and the state takes an exponential-Euler drift step (x ← E·x for
///    fields linear in x). Exact for constant commuting coefficients.
enum class Scheme { euler_maruyama, milstein, exponential };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

enum class InverseMode {
    sde,                 // propagate the inverse-Jacobian equation
    per_step_inversion,  // invert each step matrix; debugging cross-check
};

inline constexpr double kExplosionThreshold = 1e12;
inline constexpr double kUnderflowThreshold = 1e-300;

/// One-step map of a scheme together with its tangent and inverse factors:
/// V_{j+1} = E_j·V_j and U_{j+1} = U_j·F_j.
class Stepper {
public:
    Stepper(const CoefficientField& field, Scheme scheme, bool need_tangent);

    /// Advances `x` over [t, t + dt) with increments `dw`; `step_index` is
    /// reported by ExplosionError.
    void step(Vector& x, double t, double dt, std::span<const double> dw, long step_index);

    /// E_j from the last step().
    const Matrix& tangent_step() const noexcept { return tangent_; }
    /// F_j from the last step().
    Matrix inverse_step(InverseMode mode) const;

    const CoefficientField& field() const noexcept { return field_; }
    Scheme scheme() const noexcept { return scheme_; }

private:
    const CoefficientField& field_;
    Scheme scheme_;
    bool need_tangent_;
    int dim_;
    int channels_;
    bool static_params_;
    std::vector<double> params_;
    Vector drift_;
    Vector next_;
    std::vector<Vector> diffusion_;
    std::vector<Vector> milstein_;
    Matrix drift_jac_;
    std::vector<Matrix> diffusion_jac_;
    std::vector<Matrix> milstein_jac_;
    Matrix generator_;   // M for the exponential scheme
    Matrix noise_part_;  // Σ DB_i ΔW_i
    Matrix tangent_;
    double dt_ = 0.0;
    std::vector<double> dw_;
};

/// Per-path flow record: trajectory[j] = Φ(x0, t_j), jacobian[j] = DΦ(x0, t_j).
struct TangentFrames {
    std::vector<Vector> trajectory;
    std::vector<Matrix> jacobian;
    std::vector<Matrix> inverse_jacobian;
    Scheme scheme = Scheme::euler_maruyama;
    Vector origin;
    double dt = 0.0;
    long first_step = 0;

    double time(std::size_t j) const { return static_cast<double>(first_step + static_cast<long>(j)) * dt; }
};

TangentFrames integrate_flow(const CoefficientField& field, const Vector& x0, const BrownianPath& path,
                             Scheme scheme);

TangentFrames integrate_tangent(const CoefficientField& field, const Vector& x0, const BrownianPath& path,
                                Scheme scheme, bool with_inverse = false,
                                InverseMode inverse_mode = InverseMode::sde);

/// CSV with columns t, x_1..x_d and vec(DΦ) (column-major) when present.
void write_trajectory_csv(const TangentFrames& frames, const std::filesystem::path& file,
                          const std::string& config_hash = {});

}  // namespace lyapflow

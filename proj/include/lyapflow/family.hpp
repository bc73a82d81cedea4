#pragma once

#include "lyapflow/empirical_measure.hpp"
#include "lyapflow/field.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lyapflow {

/// Half-open time interval [start, end).
struct Interval {
    double start = 0.0;
    double end = 0.0;
    double length() const noexcept { return end - start; }
};

enum class FamilyKind { pointwise, property1, parametric };

const char* to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& s);

/// Everything parse_field needs, kept so members can be rebuilt.
struct FieldSpec {
    std::vector<std::string> drift;
    std::vector<std::vector<std::string>> diffusion;
    std::map<std::string, double> params;
    FieldOptions options;

    int dim() const noexcept { return static_cast<int>(drift.size()); }
    int channels() const noexcept { return static_cast<int>(diffusion.size()); }
    CoefficientField build() const;
};

/// Parameter `param` takes `value` on [start, end); all three are
/// expressions in k (and the base parameters). `end` may be "inf".
struct Bump {
    std::string param;
    std::string value;
    std::string start;
    std::string end;
};

struct FamilySpec {
    FamilyKind kind = FamilyKind::parametric;
    FieldSpec base;
    // pointwise: member drift/diffusion expressions that may use `k`
    std::vector<std::string> member_drift;
    std::vector<std::vector<std::string>> member_diffusion;
    // parametric: parameter name -> expression in k
    std::map<std::string, std::string> parameter_path;
    // property1: replacement windows
    std::vector<Bump> bumps;
};

/// Indexed coefficient family (A_k, B_k) around a base field, with the
/// declared exceptional sets U_{k,i} ⊂ [i-1, i).
class PerturbationFamily {
public:
    FamilyKind kind() const noexcept { return spec_.kind; }
    const FamilySpec& spec() const noexcept { return spec_; }
    const CoefficientField& base() const noexcept { return base_; }

    /// Member k ≥ 1.
    CoefficientField member(int k) const;

    /// Bump windows of member k, pairwise disjoint, sorted by start.
    std::vector<Interval> windows(int k) const;

    /// U_{k,i} for i ≥ 1: the declared windows clipped to [i-1, i).
    std::vector<Interval> support_set(int k, int i) const;
    /// L(U_{k,i}), the total length.
    double support_length(int k, int i) const;

private:
    friend PerturbationFamily build_perturbation_family(const FamilySpec&, const std::vector<int>&);

    double eval_k(const std::string& text, int k) const;

    FamilySpec spec_;
    CoefficientField base_;
};

/// Validates the spec (parses every expression, checks windows for overlap
/// at each k in `check_k`, plus k = 1) and returns the family.
PerturbationFamily build_perturbation_family(const FamilySpec& spec, const std::vector<int>& check_k = {});

enum class Property1Verdict { holds, fails, inconclusive };
const char* to_string(Property1Verdict v);

struct Property1Report {
    std::map<int, double> cesaro_values;  // k -> ŝ_k
    Property1Verdict verdict = Property1Verdict::inconclusive;
};

inline constexpr double kProperty1Tolerance = 1e-3;

/// Finite-horizon surrogate for the Property-1 limit: s_k(n) is the Cesàro
/// mean of sqrt(L(U_{k,i})) over i ≤ n and ŝ_k its max over the last quarter
/// of n ≤ n_max.
Property1Report verify_property1(const PerturbationFamily& fam, int n_max, const std::vector<int>& k_list);

/// A vector field φ with its Jacobian, evaluated at t = 0.
struct VectorFunction {
    std::function<Vector(const Vector&)> value;
    std::function<Matrix(const Vector&)> jacobian;
};

VectorFunction drift_difference(const CoefficientField& a, const CoefficientField& b);
VectorFunction diffusion_difference(const CoefficientField& a, const CoefficientField& b, int channel);

struct LppNorm {
    double lp = 0.0;
    double dlp = 0.0;
    double lpp = 0.0;
};

/// ‖φ‖_{L^p(μ)}, ‖Dφ‖_{L^p(μ)} and their sum against an empirical measure.
/// Vectors use the Euclidean norm, Jacobians the column-max norm.
LppNorm empirical_lpp_norm(const VectorFunction& delta, const EmpiricalMeasure& mu, double p);

struct MonotonicityReport {
    std::optional<double> holds_with_lambda;
    Vector worst_x;
    Vector worst_y;
    double worst_value = 0.0;  // sup Q
};

/// Q(x,y) = [2<x-y, A(x)-A(y)> + Σ|B_i(x)-B_i(y)|²] / |x-y|².
double monotonicity_quotient(const CoefficientField& f, const Vector& x, const Vector& y);

/// Sup of Q over seeded uniform pairs in [-box_radius, box_radius]^d.
MonotonicityReport check_monotonicity(const CoefficientField& f, int pair_count, double box_radius,
                                      std::uint64_t seed);

}  // namespace lyapflow

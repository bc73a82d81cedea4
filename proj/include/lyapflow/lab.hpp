#pragma once

#include "lyapflow/family.hpp"
#include "lyapflow/lyapunov.hpp"
#include "lyapflow/measure.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lyapflow {

enum class ExperimentKind { continuity_linear, continuity_autonomous, lipschitz, holder };
enum class Verdict { consistent, inconsistent, inconclusive };

const char* to_string(ExperimentKind k);
const char* to_string(Verdict v);
ExperimentKind experiment_kind_from_string(const std::string& s);
Verdict verdict_from_string(const std::string& s);

struct Thresholds {
    double slope_factor = 1.5;
    double r2_min = 0.9;
    double se_multiplier = 2.0;
    /// Absolute slack added to every SE comparison so that rounding-level
    /// gaps of deterministic examples count as zero.
    double gap_floor = 1e-8;
    /// Continuity: the last gap must be at most this fraction of the first
    /// when it is not already within the SE band.
    double decay_ratio = 0.5;
};

struct ExperimentRow {
    int k = 0;
    double distance = 0.0;
    std::string distance_norm;
    std::vector<double> gaps;
    std::vector<double> standard_errors;  // SE of each coupled gap
    double weak_distance = std::numeric_limits<double>::quiet_NaN();
    bool converged = true;
    bool failed = false;
    std::string failure;
};

struct ModulusFit {
    double slope = 0.0;        // y ≈ slope·x
    double exponent = 0.0;     // y ≈ coefficient·x^exponent (log-log)
    double coefficient = 0.0;
    double r2 = 0.0;           // r² of the fit that drives the verdict
    double loglog_r2 = 0.0;
    int points = 0;
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::continuity_linear;
    int dim = 1;
    std::vector<ExperimentRow> rows;
    std::optional<ModulusFit> fit;
    Verdict verdict = Verdict::inconclusive;
    Thresholds thresholds;
    std::string config_hash;
    LyapunovEstimate base;
    double p = 0.0;
    std::optional<double> declared_alpha;
    std::optional<double> monotonicity_lambda;
    std::vector<std::string> notes;
};

struct ExperimentConfig {
    SimConfig sim;
    Thresholds thresholds;
    /// Fixed initial state; when unset, autonomous experiments draw x0 from
    /// sampled invariant measures.
    std::optional<Vector> x0;
    // invariant-measure sampling
    double burn_in = 10.0;
    int measure_n = 2000;
    double thinning = 0.5;
    double measure_dt = 1e-2;
    std::optional<Vector> x_init;
    // monotonicity certificate
    int monotonicity_pairs = 2000;
    double box_radius = 3.0;
    std::string config_hash;
};

/// Exponent gaps |λ̂_{i,k} − λ̂_i| along a family, every member driven by the
/// same Brownian paths as the base. Linear/non-autonomous families compare
/// the top exponent; autonomous families the full spectrum plus the weak
/// distance between sampled invariant measures.
ExperimentReport run_continuity_experiment(const PerturbationFamily& fam, const std::vector<int>& k_list,
                                           const ExperimentConfig& cfg);

/// Modulus experiment: x_k = Σ ‖coefficient difference‖_{L^{p,p}(μ̂)} against
/// the base measure, y_{i,k} = exponent gaps, fitted by y = slope·x
/// (lipschitz) or log y = log c + α log x (holder).
ExperimentReport run_lipschitz_experiment(const PerturbationFamily& fam, double p, const std::vector<int>& k_list,
                                          const ExperimentConfig& cfg, bool holder = false);

/// Fit used by the modulus verdict, computed from the rows alone.
std::optional<ModulusFit> fit_modulus(ExperimentKind kind, const std::vector<ExperimentRow>& rows);

/// Verdict as a pure function of (kind, rows, thresholds).
Verdict derive_verdict(ExperimentKind kind, const std::vector<ExperimentRow>& rows, const Thresholds& th);

/// Writes report.json, rows.csv and plotdata.csv into out_dir.
void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// Reads rows.csv back (used to re-derive verdicts).
std::vector<ExperimentRow> read_rows_csv(const std::filesystem::path& file, int dim);

}  // namespace lyapflow

#include "lyapflow/lab.hpp"

#include "lyapflow/errors.hpp"
#include "lyapflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lyapflow {

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::continuity_linear: return "continuity_linear";
        case ExperimentKind::continuity_autonomous: return "continuity_autonomous";
        case ExperimentKind::lipschitz: return "lipschitz";
        case ExperimentKind::holder: return "holder";
    }
    return "?";
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::consistent: return "consistent";
        case Verdict::inconsistent: return "inconsistent";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "continuity_linear") return ExperimentKind::continuity_linear;
    if (s == "continuity_autonomous") return ExperimentKind::continuity_autonomous;
    if (s == "lipschitz") return ExperimentKind::lipschitz;
    if (s == "holder") return ExperimentKind::holder;
    throw InvalidArgument("unknown experiment kind '" + s + "'");
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "consistent") return Verdict::consistent;
    if (s == "inconsistent") return Verdict::inconsistent;
    if (s == "inconclusive") return Verdict::inconclusive;
    throw InvalidArgument("unknown verdict '" + s + "'");
}

// ---------------------------------------------------------------------------

std::optional<ModulusFit> fit_modulus(ExperimentKind kind, const std::vector<ExperimentRow>& rows) {
    if (kind != ExperimentKind::lipschitz && kind != ExperimentKind::holder) return std::nullopt;
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        if (r.failed) continue;
        double y = 0.0;
        for (double g : r.gaps) y = std::max(y, g);
        xs.push_back(r.distance);
        ys.push_back(y);
    }
    if (xs.empty()) return std::nullopt;

    ModulusFit fit;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    double sres = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - fit.slope * xs[i];
        sres += e * e;
    }
    const double through_origin_r2 = syy > 0.0 ? std::clamp(1.0 - sres / syy, 0.0, 1.0) : 1.0;

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] > 0.0 && ys[i] > 0.0) {
            lx.push_back(std::log(xs[i]));
            ly.push_back(std::log(ys[i]));
        }
    }
    fit.points = static_cast<int>(lx.size());
    if (lx.size() >= 2) {
        const double n = static_cast<double>(lx.size());
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= n;
        my /= n;
        double cxx = 0.0, cxy = 0.0, cyy = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            cxx += (lx[i] - mx) * (lx[i] - mx);
            cxy += (lx[i] - mx) * (ly[i] - my);
            cyy += (ly[i] - my) * (ly[i] - my);
        }
        if (cxx > 0.0) {
            fit.exponent = cxy / cxx;
            fit.coefficient = std::exp(my - fit.exponent * mx);
            fit.loglog_r2 = cyy > 0.0 ? std::min(1.0, (cxy * cxy) / (cxx * cyy)) : 1.0;
        }
    }
    if (kind == ExperimentKind::lipschitz) {
        fit.r2 = through_origin_r2;
    } else {
        if (lx.size() < 2) return std::nullopt;
        fit.r2 = fit.loglog_r2;
    }
    return fit;
}

Verdict derive_verdict(ExperimentKind kind, const std::vector<ExperimentRow>& rows, const Thresholds& th) {
    if (rows.empty()) return Verdict::inconclusive;
    for (const auto& r : rows) {
        if (r.failed || !r.converged) return Verdict::inconclusive;
    }
    auto band = [&](const ExperimentRow& r, std::size_t i) {
        const double se = i < r.standard_errors.size() ? r.standard_errors[i] : 0.0;
        return th.se_multiplier * se + th.gap_floor;
    };
    const std::size_t d = rows.front().gaps.size();

    if (kind == ExperimentKind::continuity_linear || kind == ExperimentKind::continuity_autonomous) {
        const std::size_t used = kind == ExperimentKind::continuity_linear ? std::min<std::size_t>(1, d) : d;
        for (std::size_t i = 0; i < used; ++i) {
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (rows[r].gaps[i] > rows[r - 1].gaps[i] + band(rows[r - 1], i) + band(rows[r], i)) {
                    return Verdict::inconsistent;
                }
            }
            const ExperimentRow& last = rows.back();
            const bool within_band = last.gaps[i] <= band(last, i);
            const bool decayed = rows.size() >= 2 && last.gaps[i] <= th.decay_ratio * rows.front().gaps[i];
            if (!within_band && !decayed) return Verdict::inconsistent;
        }
        return Verdict::consistent;
    }

    const auto fit = fit_modulus(kind, rows);
    if (!fit) return Verdict::inconclusive;
    if (!(fit->r2 >= th.r2_min)) return Verdict::inconsistent;
    for (const auto& r : rows) {
        const double curve = kind == ExperimentKind::lipschitz
                                 ? fit->slope * r.distance
                                 : (r.distance > 0.0 ? fit->coefficient * std::pow(r.distance, fit->exponent) : 0.0);
        for (std::size_t i = 0; i < r.gaps.size(); ++i) {
            if (r.gaps[i] > curve * th.slope_factor + band(r, i)) return Verdict::inconsistent;
        }
    }
    return Verdict::consistent;
}

// ---------------------------------------------------------------------------

namespace {

void fill_gaps(ExperimentRow& row, const LyapunovEstimate& base, const LyapunovEstimate& member) {
    const std::size_t d = base.exponents.size();
    const std::size_t paths = base.path_values.size();
    row.gaps.assign(d, 0.0);
    row.standard_errors.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        row.gaps[i] = std::abs(member.exponents[i] - base.exponents[i]);
        std::vector<double> diff(paths);
        for (std::size_t p = 0; p < paths; ++p) diff[p] = member.path_values[p][i] - base.path_values[p][i];
        row.standard_errors[i] = mean_and_se(diff).standard_error;
    }
    row.converged = base.converged && member.converged;
}

void mark_failed(ExperimentRow& row, int d, const std::string& what) {
    row.failed = true;
    row.converged = false;
    row.failure = what;
    row.gaps.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::quiet_NaN());
    row.standard_errors.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::quiet_NaN());
}

std::vector<int> sorted_ks(const std::vector<int>& k_list) {
    if (k_list.empty()) throw InvalidArgument("experiment k list is empty");
    std::set<int> ks(k_list.begin(), k_list.end());
    if (*ks.begin() < 1) throw InvalidArgument("experiment k values must be >= 1");
    return {ks.begin(), ks.end()};
}

/// Time mean over the step grid of the Jacobian differences at x:
/// column-max norms of DA_k − DA plus Σ_i DB_{i,k} − DB_i.
double time_mean_jacobian_distance(const CoefficientField& a, const CoefficientField& b, const Vector& x,
                                   const SimConfig& sim) {
    const long steps = step_count(sim.T, sim.dt);
    std::vector<double> pa(a.param_values()), pb(b.param_values());
    const auto d = static_cast<std::size_t>(a.dim());
    const std::span<const double> xs(x.data(), d);
    Matrix ja(a.dim(), a.dim()), jb(a.dim(), a.dim());
    std::vector<double> terms(static_cast<std::size_t>(steps));
    for (long j = 0; j < steps; ++j) {
        const double t = static_cast<double>(j) * sim.dt;
        a.resolve_params(t, pa);
        b.resolve_params(t, pb);
        a.eval_drift_jacobian(xs, t, pa, ja);
        b.eval_drift_jacobian(xs, t, pb, jb);
        double v = linalg::column_max_norm(ja - jb);
        for (int c = 0; c < a.channels(); ++c) {
            a.eval_diffusion_jacobian(c, xs, t, pa, ja);
            b.eval_diffusion_jacobian(c, xs, t, pb, jb);
            v += linalg::column_max_norm(ja - jb);
        }
        terms[static_cast<std::size_t>(j)] = v;
    }
    return pairwise_sum(terms) / static_cast<double>(steps);
}

/// Σ over drift and diffusion channels of ‖·‖_{L^{p,p}(μ)}.
double lpp_distance(const CoefficientField& member, const CoefficientField& base, const EmpiricalMeasure& mu,
                    double p) {
    double total = empirical_lpp_norm(drift_difference(member, base), mu, p).lpp;
    for (int c = 0; c < base.channels(); ++c) {
        total += empirical_lpp_norm(diffusion_difference(member, base, c), mu, p).lpp;
    }
    return total;
}

EmpiricalMeasure sample_for(const CoefficientField& f, const ExperimentConfig& cfg) {
    const Vector init = cfg.x_init ? *cfg.x_init : Vector::Zero(f.dim());
    MeasureOptions opts;
    opts.scheme = cfg.sim.scheme;
    opts.field_hash = cfg.config_hash;
    opts.threads = cfg.sim.threads;
    return sample_invariant_measure(f, cfg.burn_in, cfg.measure_n, cfg.thinning, cfg.measure_dt, cfg.sim.seed, init,
                                    opts);
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

ExperimentReport run_continuity_experiment(const PerturbationFamily& fam, const std::vector<int>& k_list,
                                           const ExperimentConfig& cfg) {
    const std::vector<int> ks = sorted_ks(k_list);
    const CoefficientField& base = fam.base();
    const int d = base.dim();

    std::vector<CoefficientField> members;
    bool autonomous = base.metadata().autonomous && !base.metadata().linear_in_x &&
                      fam.kind() != FamilyKind::property1;
    for (int k : ks) {
        members.push_back(fam.member(k));
        if (!members.back().metadata().autonomous) autonomous = false;
    }

    ExperimentReport report;
    report.kind = autonomous ? ExperimentKind::continuity_autonomous : ExperimentKind::continuity_linear;
    report.dim = d;
    report.thresholds = cfg.thresholds;
    report.config_hash = cfg.config_hash;

    std::optional<EmpiricalMeasure> base_mu;
    X0Sampler base_sampler = X0Sampler::fixed(cfg.x0 ? *cfg.x0 : Vector::Ones(d));
    if (autonomous) {
        base_mu = sample_for(base, cfg);
        if (!base_mu->stationary) report.notes.push_back("base measure failed the half-split stationarity check");
        if (!cfg.x0) base_sampler = X0Sampler::from_measure(*base_mu);
    }
    report.base = estimate_spectrum_qr(base, base_sampler, cfg.sim);
    report.base.config_hash = cfg.config_hash;

    for (std::size_t m = 0; m < ks.size(); ++m) {
        ExperimentRow row;
        row.k = ks[m];
        const CoefficientField& member = members[m];
        try {
            X0Sampler sampler = X0Sampler::fixed(cfg.x0 ? *cfg.x0 : Vector::Ones(d));
            if (autonomous) {
                const EmpiricalMeasure mu = sample_for(member, cfg);
                row.weak_distance = weak_distance(mu, *base_mu);
                row.distance = lpp_distance(member, base, *base_mu, 2.0);
                row.distance_norm = "L^{2,2}(mu_base)";
                if (!cfg.x0) sampler = X0Sampler::from_measure(mu);
            } else {
                row.distance = time_mean_jacobian_distance(member, base,
                                                           cfg.x0 ? *cfg.x0 : Vector::Ones(d), cfg.sim);
                row.distance_norm = "time_mean_jacobian";
            }
            const LyapunovEstimate est = estimate_spectrum_qr(member, sampler, cfg.sim);
            fill_gaps(row, report.base, est);
        } catch (const NumericalError& e) {
            mark_failed(row, d, e.what());
        }
        report.rows.push_back(std::move(row));
    }
    report.verdict = derive_verdict(report.kind, report.rows, report.thresholds);
    if (report.kind == ExperimentKind::continuity_linear) {
        report.notes.push_back("verdict compares the top exponent only");
    }
    return report;
}

ExperimentReport run_lipschitz_experiment(const PerturbationFamily& fam, double p, const std::vector<int>& k_list,
                                          const ExperimentConfig& cfg, bool holder) {
    if (!(p > 2.0) || !std::isfinite(p)) throw InvalidArgument("lipschitz experiment: p must be > 2");
    const std::vector<int> ks = sorted_ks(k_list);
    const CoefficientField& base = fam.base();
    const int d = base.dim();
    if (!base.metadata().autonomous) {
        throw PreconditionError("lipschitz experiment: the base field must be autonomous");
    }
    const MonotonicityReport mono = check_monotonicity(base, cfg.monotonicity_pairs, cfg.box_radius, cfg.sim.seed);
    if (!mono.holds_with_lambda) {
        throw PreconditionError(
            "lipschitz experiment: the base field does not satisfy the strict monotonicity (dissipativity) "
            "condition; sup Q = " + format_number(mono.worst_value) + " >= 0 on the sampled box");
    }

    ExperimentReport report;
    report.kind = holder ? ExperimentKind::holder : ExperimentKind::lipschitz;
    report.dim = d;
    report.thresholds = cfg.thresholds;
    report.config_hash = cfg.config_hash;
    report.p = p;
    report.monotonicity_lambda = mono.holds_with_lambda;
    report.declared_alpha = base.metadata().holder_exponent;

    const EmpiricalMeasure mu = sample_for(base, cfg);
    if (!mu.stationary) report.notes.push_back("base measure failed the half-split stationarity check");
    const X0Sampler sampler = cfg.x0 ? X0Sampler::fixed(*cfg.x0) : X0Sampler::from_measure(mu);
    report.base = estimate_spectrum_qr(base, sampler, cfg.sim);
    report.base.config_hash = cfg.config_hash;

    char norm_name[64];
    std::snprintf(norm_name, sizeof norm_name, "L^{%g,%g}(mu_base)", p, p);
    for (int k : ks) {
        ExperimentRow row;
        row.k = k;
        try {
            const CoefficientField member = fam.member(k);
            if (!member.metadata().autonomous) {
                throw PreconditionError("lipschitz experiment: member " + std::to_string(k) + " is not autonomous");
            }
            row.distance = lpp_distance(member, base, mu, p);
            row.distance_norm = norm_name;
            const LyapunovEstimate est = estimate_spectrum_qr(member, sampler, cfg.sim);
            fill_gaps(row, report.base, est);
        } catch (const NumericalError& e) {
            mark_failed(row, d, e.what());
        }
        report.rows.push_back(std::move(row));
    }
    report.fit = fit_modulus(report.kind, report.rows);
    report.verdict = derive_verdict(report.kind, report.rows, report.thresholds);
    if (holder && report.declared_alpha && report.fit) {
        report.notes.push_back("fitted exponent " + format_number(report.fit->exponent) + " vs declared alpha " +
                               format_number(*report.declared_alpha));
    }
    return report;
}

}  // namespace lyapflow

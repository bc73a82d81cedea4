#include "lyapflow/family.hpp"

#include "lyapflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace lyapflow {

const char* to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::pointwise: return "pointwise";
        case FamilyKind::property1: return "property1";
        case FamilyKind::parametric: return "parametric";
    }
    return "?";
}

FamilyKind family_kind_from_string(const std::string& s) {
    if (s == "pointwise") return FamilyKind::pointwise;
    if (s == "property1") return FamilyKind::property1;
    if (s == "parametric") return FamilyKind::parametric;
    throw InvalidSpecification("unknown family kind '" + s + "' (expected pointwise, property1 or parametric)");
}

const char* to_string(Property1Verdict v) {
    switch (v) {
        case Property1Verdict::holds: return "holds";
        case Property1Verdict::fails: return "fails";
        case Property1Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

CoefficientField FieldSpec::build() const {
    return parse_field(drift, diffusion, params, dim(), channels(), options);
}

// ---------------------------------------------------------------------------

double PerturbationFamily::eval_k(const std::string& text, int k) const {
    std::string trimmed = text;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
    if (trimmed == "inf" || trimmed == "+inf") return std::numeric_limits<double>::infinity();
    expr::SymbolTable symbols;
    symbols.dim = 0;
    symbols.allow_time = false;
    symbols.params.push_back("k");
    std::vector<double> values{static_cast<double>(k)};
    for (const auto& [name, v] : spec_.base.params) {
        if (name == "k") continue;
        symbols.params.push_back(name);
        values.push_back(v);
    }
    const expr::Program prog(expr::parse(trimmed, symbols));
    const double out = prog.eval({}, 0.0, values);
    if (std::isnan(out)) throw InvalidSpecification("expression '" + text + "' is NaN at k=" + std::to_string(k));
    return out;
}

CoefficientField PerturbationFamily::member(int k) const {
    if (k < 1) throw InvalidArgument("family member index must be >= 1");
    switch (spec_.kind) {
        case FamilyKind::pointwise: {
            FieldSpec s = spec_.base;
            if (!spec_.member_drift.empty()) s.drift = spec_.member_drift;
            if (!spec_.member_diffusion.empty()) s.diffusion = spec_.member_diffusion;
            s.params["k"] = static_cast<double>(k);
            return s.build();
        }
        case FamilyKind::parametric: {
            std::map<std::string, double> values;
            for (const auto& [name, text] : spec_.parameter_path) values[name] = eval_k(text, k);
            return base_.with_params(values);
        }
        case FamilyKind::property1: {
            std::vector<ParamOverride> schedule;
            const auto& names = base_.param_names();
            for (const Bump& b : spec_.bumps) {
                const auto it = std::find(names.begin(), names.end(), b.param);
                if (it == names.end()) throw InvalidSpecification("bump refers to unknown parameter '" + b.param + "'");
                ParamOverride o;
                o.param = static_cast<int>(it - names.begin());
                o.value = eval_k(b.value, k);
                o.start = eval_k(b.start, k);
                o.end = eval_k(b.end, k);
                if (!std::isfinite(o.value)) throw InvalidSpecification("bump value must be finite");
                if (o.end > o.start) schedule.push_back(o);
            }
            windows(k);  // overlap check
            return base_.with_schedule(std::move(schedule));
        }
    }
    return base_;
}

std::vector<Interval> PerturbationFamily::windows(int k) const {
    std::vector<Interval> out;
    if (spec_.kind != FamilyKind::property1) return out;
    for (const Bump& b : spec_.bumps) {
        Interval w{eval_k(b.start, k), eval_k(b.end, k)};
        if (!std::isfinite(w.start) || w.start < 0.0) {
            throw InvalidSpecification("bump start must be finite and non-negative");
        }
        if (w.end > w.start) out.push_back(w);
    }
    std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].start < out[i - 1].end) {
            throw InvalidSpecification("overlapping bump windows for k=" + std::to_string(k) + ": [" +
                                       std::to_string(out[i - 1].start) + ", " + std::to_string(out[i - 1].end) +
                                       ") and [" + std::to_string(out[i].start) + ", " +
                                       std::to_string(out[i].end) + ")");
        }
    }
    return out;
}

std::vector<Interval> PerturbationFamily::support_set(int k, int i) const {
    if (i < 1) throw InvalidArgument("support_set: i must be >= 1");
    const double lo = i - 1;
    const double hi = i;
    std::vector<Interval> out;
    for (const Interval& w : windows(k)) {
        const double a = std::max(lo, w.start);
        const double b = std::min(hi, w.end);
        if (b > a) out.push_back({a, b});
    }
    return out;
}

double PerturbationFamily::support_length(int k, int i) const {
    double total = 0.0;
    for (const Interval& w : support_set(k, i)) total += w.length();
    return total;
}

PerturbationFamily build_perturbation_family(const FamilySpec& spec, const std::vector<int>& check_k) {
    PerturbationFamily fam;
    fam.spec_ = spec;
    fam.base_ = spec.base.build();
    if (spec.kind == FamilyKind::parametric) {
        for (const auto& [name, text] : spec.parameter_path) {
            if (!spec.base.params.contains(name)) {
                throw InvalidSpecification("parametric path names unknown parameter '" + name + "'");
            }
            (void)text;
        }
    }
    if (spec.kind == FamilyKind::pointwise && !spec.member_drift.empty() &&
        static_cast<int>(spec.member_drift.size()) != spec.base.dim()) {
        throw InvalidSpecification("pointwise member drift has the wrong dimension");
    }
    std::vector<int> ks = check_k;
    ks.push_back(1);
    for (int k : ks) fam.member(k);
    return fam;
}

Property1Report verify_property1(const PerturbationFamily& fam, int n_max, const std::vector<int>& k_list) {
    if (n_max < 8) throw InvalidArgument("verify_property1: n_max must be at least 8");
    if (k_list.empty()) throw InvalidArgument("verify_property1: empty k list");
    std::vector<int> ks = k_list;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    Property1Report report;
    const int tail_start = n_max - n_max / 4 + 1;
    for (int k : ks) {
        const auto windows = fam.windows(k);
        double running = 0.0;
        double tail_max = 0.0;
        for (int n = 1; n <= n_max; ++n) {
            const double lo = n - 1;
            const double hi = n;
            double len = 0.0;
            for (const Interval& w : windows) {
                const double a = std::max(lo, w.start);
                const double b = std::min(hi, w.end);
                if (b > a) len += b - a;
            }
            running += std::sqrt(len);
            if (n >= tail_start) tail_max = std::max(tail_max, running / n);
        }
        report.cesaro_values[k] = tail_max;
    }

    std::vector<double> s;
    for (int k : ks) s.push_back(report.cesaro_values[k]);
    bool non_increasing = true;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] > s[i - 1] * (1.0 + 1e-12) + 1e-15) non_increasing = false;
    }
    const double last = s.back();
    const double second = s.size() > 1 ? s[s.size() - 2] : last;
    if (non_increasing && last < kProperty1Tolerance) {
        report.verdict = Property1Verdict::holds;
    } else if (last > 10.0 * kProperty1Tolerance && second > 10.0 * kProperty1Tolerance) {
        report.verdict = Property1Verdict::fails;
    } else {
        report.verdict = Property1Verdict::inconclusive;
    }
    return report;
}

// ---------------------------------------------------------------------------

VectorFunction drift_difference(const CoefficientField& a, const CoefficientField& b) {
    if (a.dim() != b.dim()) throw InvalidArgument("drift_difference: dimension mismatch");
    return {[a, b](const Vector& x) { return Vector(a.drift(x, 0.0) - b.drift(x, 0.0)); },
            [a, b](const Vector& x) { return Matrix(a.drift_jacobian(x, 0.0) - b.drift_jacobian(x, 0.0)); }};
}

VectorFunction diffusion_difference(const CoefficientField& a, const CoefficientField& b, int channel) {
    if (a.dim() != b.dim() || a.channels() != b.channels()) {
        throw InvalidArgument("diffusion_difference: shape mismatch");
    }
    if (channel < 0 || channel >= a.channels()) throw InvalidArgument("diffusion_difference: bad channel");
    return {[a, b, channel](const Vector& x) {
                return Vector(a.diffusion(channel, x, 0.0) - b.diffusion(channel, x, 0.0));
            },
            [a, b, channel](const Vector& x) {
                return Matrix(a.diffusion_jacobian(channel, x, 0.0) - b.diffusion_jacobian(channel, x, 0.0));
            }};
}

LppNorm empirical_lpp_norm(const VectorFunction& delta, const EmpiricalMeasure& mu, double p) {
    if (mu.size() == 0) throw InvalidArgument("empirical_lpp_norm: empty measure");
    mu.validate();
    if (!(p >= 2.0) || !std::isfinite(p)) throw InvalidArgument("empirical_lpp_norm: p must be >= 2");
    double acc_v = 0.0;
    double acc_j = 0.0;
    for (int j = 0; j < mu.size(); ++j) {
        const Vector x = mu.point(j);
        const double w = mu.weights(j);
        acc_v += w * std::pow(delta.value(x).norm(), p);
        acc_j += w * std::pow(linalg::column_max_norm(delta.jacobian(x)), p);
    }
    LppNorm out;
    out.lp = std::pow(acc_v, 1.0 / p);
    out.dlp = std::pow(acc_j, 1.0 / p);
    out.lpp = out.lp + out.dlp;
    return out;
}

// ---------------------------------------------------------------------------

double monotonicity_quotient(const CoefficientField& f, const Vector& x, const Vector& y) {
    const Vector dx = x - y;
    const double d2 = dx.squaredNorm();
    if (!(d2 > 0.0)) throw InvalidArgument("monotonicity_quotient: x and y coincide");
    double num = 2.0 * dx.dot(f.drift(x, 0.0) - f.drift(y, 0.0));
    for (int i = 0; i < f.channels(); ++i) num += (f.diffusion(i, x, 0.0) - f.diffusion(i, y, 0.0)).squaredNorm();
    return num / d2;
}

MonotonicityReport check_monotonicity(const CoefficientField& f, int pair_count, double box_radius,
                                      std::uint64_t seed) {
    if (!f.metadata().autonomous) throw PreconditionError("check_monotonicity: field must be autonomous");
    if (pair_count < 100) throw InvalidArgument("check_monotonicity: pair_count must be at least 100");
    if (!(box_radius > 0.0)) throw InvalidArgument("check_monotonicity: box_radius must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-box_radius, box_radius);
    const int d = f.dim();
    MonotonicityReport report;
    report.worst_value = -std::numeric_limits<double>::infinity();
    Vector x(d), y(d);
    for (int k = 0; k < pair_count; ++k) {
        do {
            for (int i = 0; i < d; ++i) x(i) = unif(rng);
            for (int i = 0; i < d; ++i) y(i) = unif(rng);
        } while ((x - y).norm() < 1e-12);
        const double q = monotonicity_quotient(f, x, y);
        if (q > report.worst_value) {
            report.worst_value = q;
            report.worst_x = x;
            report.worst_y = y;
        }
    }
    if (report.worst_value < 0.0) report.holds_with_lambda = -report.worst_value;
    return report;
}

}  // namespace lyapflow

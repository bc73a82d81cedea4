#include "lyapflow/field.hpp"

#include "lyapflow/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace lyapflow {

namespace {

using expr::NodePtr;
using expr::Program;

constexpr double kFdStep = 1e-6;
constexpr double kFdRelTol = 1e-4;
constexpr int kFdPoints = 8;
constexpr std::uint64_t kFdSeed = 0x6a09e667f3bcc909ULL;

bool reserved_name(const std::string& name) {
    static const std::array<const char*, 8> reserved = {"t", "x", "sin", "cos", "exp", "tanh", "min", "max"};
    for (const char* r : reserved) {
        if (name == r) return true;
    }
    if (name.size() >= 2 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return true;
    }
    return false;
}

bool valid_identifier(const std::string& name) {
    if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    return std::all_of(name.begin(), name.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool uses_state(const NodePtr& n, int dim, int nparams) {
    const auto u = expr::usage(n, dim, nparams);
    return std::any_of(u.variables.begin(), u.variables.end(), [](bool b) { return b; });
}

void check_finite_out(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericalError(std::string(what) + " evaluated to a non-finite value");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Evaluation

void CoefficientField::resolve_params(double t, std::vector<double>& out) const {
    out.assign(params_.begin(), params_.end());
    const double eps = 1e-9 * std::max(1.0, std::abs(t));
    for (const ParamOverride& o : schedule_) {
        if (t >= o.start - eps && t < o.end - eps) out[static_cast<std::size_t>(o.param)] = o.value;
    }
}

void CoefficientField::eval_drift(std::span<const double> x, double t, std::span<const double> params,
                                  std::span<double> out) const {
    for (int r = 0; r < dim_; ++r) out[static_cast<std::size_t>(r)] = code_->drift[static_cast<std::size_t>(r)].eval(x, t, params);
}

void CoefficientField::eval_diffusion(int channel, std::span<const double> x, double t,
                                      std::span<const double> params, std::span<double> out) const {
    const auto& progs = code_->diffusion[static_cast<std::size_t>(channel)];
    for (int r = 0; r < dim_; ++r) out[static_cast<std::size_t>(r)] = progs[static_cast<std::size_t>(r)].eval(x, t, params);
}

namespace {
void eval_matrix(const std::vector<Program>& progs, int dim, std::span<const double> x, double t,
                 std::span<const double> params, Matrix& out) {
    out.resize(dim, dim);
    for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
            const Program& p = progs[static_cast<std::size_t>(r * dim + c)];
            out(r, c) = p.is_zero() ? 0.0 : p.eval(x, t, params);
        }
    }
}
}  // namespace

void CoefficientField::eval_drift_jacobian(std::span<const double> x, double t, std::span<const double> params,
                                           Matrix& out) const {
    if (!code_->has_jacobian) throw UnsupportedExpression("field has no symbolic Jacobian (min/max present)");
    eval_matrix(code_->drift_jac, dim_, x, t, params, out);
}

void CoefficientField::eval_diffusion_jacobian(int channel, std::span<const double> x, double t,
                                               std::span<const double> params, Matrix& out) const {
    if (!code_->has_jacobian) throw UnsupportedExpression("field has no symbolic Jacobian (min/max present)");
    eval_matrix(code_->diffusion_jac[static_cast<std::size_t>(channel)], dim_, x, t, params, out);
}

void CoefficientField::eval_milstein(int channel, std::span<const double> x, double t,
                                     std::span<const double> params, std::span<double> out) const {
    if (!code_->has_jacobian) throw UnsupportedExpression("Milstein needs Jacobians (min/max present)");
    const auto& progs = code_->milstein[static_cast<std::size_t>(channel)];
    for (int r = 0; r < dim_; ++r) out[static_cast<std::size_t>(r)] = progs[static_cast<std::size_t>(r)].eval(x, t, params);
}

void CoefficientField::eval_milstein_jacobian(int channel, std::span<const double> x, double t,
                                              std::span<const double> params, Matrix& out) const {
    if (!code_->has_jacobian) throw UnsupportedExpression("Milstein needs Jacobians (min/max present)");
    eval_matrix(code_->milstein_jac[static_cast<std::size_t>(channel)], dim_, x, t, params, out);
}

Vector CoefficientField::drift(const Vector& x, double t) const {
    if (x.size() != dim_) throw InvalidArgument("drift: state dimension mismatch");
    std::vector<double> p;
    resolve_params(t, p);
    Vector out(dim_);
    eval_drift({x.data(), static_cast<std::size_t>(dim_)}, t, p, {out.data(), static_cast<std::size_t>(dim_)});
    check_finite_out({out.data(), static_cast<std::size_t>(dim_)}, "drift");
    return out;
}

Vector CoefficientField::diffusion(int channel, const Vector& x, double t) const {
    if (x.size() != dim_) throw InvalidArgument("diffusion: state dimension mismatch");
    if (channel < 0 || channel >= channels_) throw InvalidArgument("diffusion: channel out of range");
    std::vector<double> p;
    resolve_params(t, p);
    Vector out(dim_);
    eval_diffusion(channel, {x.data(), static_cast<std::size_t>(dim_)}, t, p,
                   {out.data(), static_cast<std::size_t>(dim_)});
    check_finite_out({out.data(), static_cast<std::size_t>(dim_)}, "diffusion");
    return out;
}

Matrix CoefficientField::drift_jacobian(const Vector& x, double t) const {
    if (x.size() != dim_) throw InvalidArgument("drift_jacobian: state dimension mismatch");
    std::vector<double> p;
    resolve_params(t, p);
    Matrix out;
    eval_drift_jacobian({x.data(), static_cast<std::size_t>(dim_)}, t, p, out);
    return out;
}

Matrix CoefficientField::diffusion_jacobian(int channel, const Vector& x, double t) const {
    if (x.size() != dim_) throw InvalidArgument("diffusion_jacobian: state dimension mismatch");
    if (channel < 0 || channel >= channels_) throw InvalidArgument("diffusion_jacobian: channel out of range");
    std::vector<double> p;
    resolve_params(t, p);
    Matrix out;
    eval_diffusion_jacobian(channel, {x.data(), static_cast<std::size_t>(dim_)}, t, p, out);
    return out;
}

// ---------------------------------------------------------------------------
// Derived copies

CoefficientField CoefficientField::with_params(const std::map<std::string, double>& values) const {
    CoefficientField out = *this;
    for (const auto& [name, v] : values) {
        const auto& names = code_->param_names;
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw NameError("unknown parameter '" + name + "'");
        out.params_[static_cast<std::size_t>(it - names.begin())] = v;
    }
    out.refresh_structure();
    return out;
}

CoefficientField CoefficientField::with_schedule(std::vector<ParamOverride> schedule) const {
    for (const auto& o : schedule) {
        if (o.param < 0 || o.param >= static_cast<int>(params_.size())) {
            throw InvalidArgument("with_schedule: parameter index out of range");
        }
        if (!(o.end > o.start)) throw InvalidArgument("with_schedule: empty or reversed window");
    }
    CoefficientField out = *this;
    out.schedule_ = std::move(schedule);
    out.refresh_structure();
    return out;
}

CoefficientField CoefficientField::with_metadata(const FieldMetadata& meta) const {
    CoefficientField out = *this;
    const bool autonomous = out.meta_.autonomous;
    const bool linear = out.meta_.linear_in_x;
    out.meta_ = meta;
    out.meta_.autonomous = autonomous;
    out.meta_.linear_in_x = linear;
    return out;
}

void CoefficientField::refresh_structure() {
    meta_.autonomous = !code_->references_time && schedule_.empty();
    meta_.linear_in_x = false;
    if (!code_->has_jacobian) return;
    const int np = static_cast<int>(params_.size());
    for (const auto& j : code_->drift_ast) {
        for (int c = 0; c < dim_; ++c) {
            if (uses_state(expr::differentiate(j, c), dim_, np)) return;
        }
    }
    for (const auto& ch : code_->diffusion_ast) {
        for (const auto& j : ch) {
            for (int c = 0; c < dim_; ++c) {
                if (uses_state(expr::differentiate(j, c), dim_, np)) return;
            }
        }
    }
    // Affine in x; linear iff the offset vanishes at every probed time and
    // under every scheduled parameter set.
    std::vector<double> probe_times = {0.0, 1.0, std::numbers::e, 7.5, 100.0};
    for (const auto& o : schedule_) {
        probe_times.push_back(o.start);
        if (std::isfinite(o.end)) probe_times.push_back(std::max(o.start, o.end - 1e-3));
    }
    const std::vector<double> zero(static_cast<std::size_t>(dim_), 0.0);
    std::vector<double> p;
    for (double t : probe_times) {
        resolve_params(t, p);
        for (const auto& prog : code_->drift) {
            if (prog.eval(zero, t, p) != 0.0) return;
        }
        for (const auto& ch : code_->diffusion) {
            for (const auto& prog : ch) {
                if (prog.eval(zero, t, p) != 0.0) return;
            }
        }
    }
    meta_.linear_in_x = true;
}

// ---------------------------------------------------------------------------
// Construction

CoefficientField parse_field(const std::vector<std::string>& drift,
                             const std::vector<std::vector<std::string>>& diffusion,
                             const std::map<std::string, double>& params, int dim, int channels,
                             const FieldOptions& options) {
    if (dim < 1) throw InvalidArgument("parse_field: dimension must be positive");
    if (channels < 0) throw InvalidArgument("parse_field: channel count must be non-negative");
    if (static_cast<int>(drift.size()) != dim) {
        throw InvalidArgument("parse_field: expected " + std::to_string(dim) + " drift expressions, got " +
                              std::to_string(drift.size()));
    }
    if (static_cast<int>(diffusion.size()) != channels) {
        throw InvalidArgument("parse_field: expected " + std::to_string(channels) + " diffusion channels, got " +
                              std::to_string(diffusion.size()));
    }
    for (const auto& ch : diffusion) {
        if (static_cast<int>(ch.size()) != dim) {
            throw InvalidArgument("parse_field: every diffusion channel needs " + std::to_string(dim) +
                                  " expressions");
        }
    }
    for (const auto& [name, v] : params) {
        if (!valid_identifier(name) || reserved_name(name)) {
            throw InvalidArgument("parse_field: '" + name + "' is not a usable parameter name");
        }
        if (!std::isfinite(v)) throw InvalidArgument("parse_field: parameter '" + name + "' is not finite");
    }
    if (options.holder_exponent && !(*options.holder_exponent > 0.0 && *options.holder_exponent <= 1.0)) {
        throw InvalidArgument("parse_field: Hölder exponent must lie in (0, 1]");
    }

    auto code = std::make_shared<CoefficientField::Compiled>();
    CoefficientField f;
    f.dim_ = dim;
    f.channels_ = channels;
    for (const auto& [name, v] : params) {
        code->param_names.push_back(name);
        f.params_.push_back(v);
    }
    const int np = static_cast<int>(f.params_.size());
    const expr::SymbolTable symbols{dim, code->param_names, true};

    code->drift_src = drift;
    code->diffusion_src = diffusion;
    bool nonsmooth = false;
    auto note = [&](const NodePtr& n) {
        const auto u = expr::usage(n, dim, np);
        nonsmooth = nonsmooth || u.nonsmooth;
        code->references_time = code->references_time || u.time;
    };
    for (const auto& s : drift) {
        code->drift_ast.push_back(expr::parse(s, symbols));
        note(code->drift_ast.back());
        code->drift.emplace_back(code->drift_ast.back());
    }
    for (const auto& ch : diffusion) {
        code->diffusion_ast.emplace_back();
        code->diffusion.emplace_back();
        for (const auto& s : ch) {
            code->diffusion_ast.back().push_back(expr::parse(s, symbols));
            note(code->diffusion_ast.back().back());
            code->diffusion.back().emplace_back(code->diffusion_ast.back().back());
        }
    }

    code->has_jacobian = !(nonsmooth && options.allow_nonsmooth);
    if (code->has_jacobian) {
        // Throws UnsupportedExpression for min/max.
        std::vector<std::vector<NodePtr>> diff_jac_ast(static_cast<std::size_t>(channels));
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) {
                code->drift_jac.emplace_back(expr::differentiate(code->drift_ast[static_cast<std::size_t>(r)], c));
            }
        }
        for (int i = 0; i < channels; ++i) {
            const auto& b = code->diffusion_ast[static_cast<std::size_t>(i)];
            auto& jac_ast = diff_jac_ast[static_cast<std::size_t>(i)];
            code->diffusion_jac.emplace_back();
            for (int r = 0; r < dim; ++r) {
                for (int c = 0; c < dim; ++c) {
                    jac_ast.push_back(expr::differentiate(b[static_cast<std::size_t>(r)], c));
                    code->diffusion_jac.back().emplace_back(jac_ast.back());
                }
            }
            code->milstein.emplace_back();
            code->milstein_jac.emplace_back();
            std::vector<NodePtr> g(static_cast<std::size_t>(dim));
            for (int r = 0; r < dim; ++r) {
                NodePtr acc = expr::constant(0.0);
                for (int c = 0; c < dim; ++c) {
                    acc = expr::add(acc, expr::mul(jac_ast[static_cast<std::size_t>(r * dim + c)],
                                                   b[static_cast<std::size_t>(c)]));
                }
                g[static_cast<std::size_t>(r)] = acc;
                code->milstein.back().emplace_back(acc);
            }
            for (int r = 0; r < dim; ++r) {
                for (int c = 0; c < dim; ++c) {
                    code->milstein_jac.back().emplace_back(expr::differentiate(g[static_cast<std::size_t>(r)], c));
                }
            }
        }
        bool diagonal = channels == dim && channels > 1;
        for (int i = 0; diagonal && i < channels; ++i) {
            for (int r = 0; r < dim && diagonal; ++r) {
                if (r != i && !expr::is_zero(code->diffusion_ast[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)])) {
                    diagonal = false;
                }
                for (int c = 0; c < dim && diagonal; ++c) {
                    if ((r != i || c != i) &&
                        !expr::is_zero(diff_jac_ast[static_cast<std::size_t>(i)][static_cast<std::size_t>(r * dim + c)])) {
                        diagonal = false;
                    }
                }
            }
        }
        code->diagonal_noise = diagonal;
    }
    f.code_ = code;
    f.meta_.jacobian_bound = options.jacobian_bound;
    f.meta_.lipschitz_seminorm = options.lipschitz_seminorm;
    f.meta_.holder_exponent = options.holder_exponent;
    f.refresh_structure();

    if (code->has_jacobian) {
        // Symbolic vs central-difference agreement at seeded points.
        std::mt19937_64 rng(kFdSeed);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const auto d = static_cast<std::size_t>(dim);
        std::vector<double> x(d), xp(d), xm(d), fp(d), fm(d), f0(d);
        Matrix jac;
        auto check = [&](const char* what, auto&& eval_vec, auto&& eval_jac, double t) {
            eval_jac(x, t, jac);
            eval_vec(x, t, std::span<double>(f0));
            for (int c = 0; c < dim; ++c) {
                xp = x;
                xm = x;
                xp[static_cast<std::size_t>(c)] += kFdStep;
                xm[static_cast<std::size_t>(c)] -= kFdStep;
                eval_vec(xp, t, std::span<double>(fp));
                eval_vec(xm, t, std::span<double>(fm));
                for (int r = 0; r < dim; ++r) {
                    const auto ru = static_cast<std::size_t>(r);
                    const double fd = (fp[ru] - fm[ru]) / (2.0 * kFdStep);
                    const double sym = jac(r, c);
                    if (!std::isfinite(fd) || !std::isfinite(sym)) continue;
                    const double tol = kFdRelTol * std::max(1.0, std::abs(sym)) +
                                       8.0 * std::numeric_limits<double>::epsilon() * std::abs(f0[ru]) / kFdStep;
                    if (std::abs(sym - fd) > tol) {
                        throw InvalidArgument(std::string("parse_field: symbolic ") + what + " Jacobian entry (" +
                                              std::to_string(r) + "," + std::to_string(c) +
                                              ") disagrees with finite differences");
                    }
                }
            }
        };
        std::vector<double> p;
        for (int k = 0; k < kFdPoints; ++k) {
            for (auto& xi : x) xi = normal(rng);
            const double t = unif(rng);
            f.resolve_params(t, p);
            check("drift",
                  [&](const std::vector<double>& xx, double tt, std::span<double> out) { f.eval_drift(xx, tt, p, out); },
                  [&](const std::vector<double>& xx, double tt, Matrix& out) { f.eval_drift_jacobian(xx, tt, p, out); },
                  t);
            for (int i = 0; i < channels; ++i) {
                check("diffusion",
                      [&](const std::vector<double>& xx, double tt, std::span<double> out) {
                          f.eval_diffusion(i, xx, tt, p, out);
                      },
                      [&](const std::vector<double>& xx, double tt, Matrix& out) {
                          f.eval_diffusion_jacobian(i, xx, tt, p, out);
                      },
                      t);
            }
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Regularity

RegularityEstimate estimate_regularity(const CoefficientField& f, double radius, int samples,
                                       std::uint64_t seed) {
    if (!f.has_jacobian()) throw UnsupportedExpression("estimate_regularity: field has no Jacobian");
    if (samples < 2) throw InvalidArgument("estimate_regularity: need at least 2 samples");
    if (!(radius > 0.0)) throw InvalidArgument("estimate_regularity: radius must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-radius, radius);
    const int d = f.dim();
    std::vector<double> p;
    f.resolve_params(0.0, p);
    auto jacobians = [&](const std::vector<double>& x) {
        std::vector<Matrix> out(static_cast<std::size_t>(f.channels() + 1));
        f.eval_drift_jacobian(x, 0.0, p, out[0]);
        for (int i = 0; i < f.channels(); ++i) f.eval_diffusion_jacobian(i, x, 0.0, p, out[static_cast<std::size_t>(i + 1)]);
        return out;
    };
    RegularityEstimate est;
    std::vector<double> prev_x;
    std::vector<Matrix> prev_j;
    for (int s = 0; s < samples; ++s) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (auto& xi : x) xi = unif(rng);
        auto js = jacobians(x);
        for (const auto& j : js) est.jacobian_bound = std::max(est.jacobian_bound, linalg::column_max_norm(j));
        if (!prev_x.empty()) {
            double dist2 = 0.0;
            for (int i = 0; i < d; ++i) {
                const double diff = x[static_cast<std::size_t>(i)] - prev_x[static_cast<std::size_t>(i)];
                dist2 += diff * diff;
            }
            const double dist = std::sqrt(dist2);
            if (dist > 1e-12) {
                for (std::size_t m = 0; m < js.size(); ++m) {
                    est.lipschitz_seminorm =
                        std::max(est.lipschitz_seminorm, linalg::column_max_norm(js[m] - prev_j[m]) / dist);
                }
            }
        }
        prev_x = std::move(x);
        prev_j = std::move(js);
    }
    return est;
}

CoefficientField with_estimated_regularity(const CoefficientField& f, double radius, std::uint64_t seed,
                                           int samples) {
    FieldMetadata meta = f.metadata();
    if (meta.jacobian_bound && meta.lipschitz_seminorm) return f;
    const auto est = estimate_regularity(f, radius, samples, seed);
    if (!meta.jacobian_bound) {
        meta.jacobian_bound = est.jacobian_bound;
        meta.jacobian_bound_empirical = true;
    }
    if (!meta.lipschitz_seminorm) {
        meta.lipschitz_seminorm = est.lipschitz_seminorm;
        meta.lipschitz_seminorm_empirical = true;
    }
    return f.with_metadata(meta);
}

}  // namespace lyapflow

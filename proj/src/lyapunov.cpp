#include "lyapflow/lyapunov.hpp"

#include "lyapflow/brownian.hpp"
#include "lyapflow/errors.hpp"
#include "lyapflow/parallel.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace lyapflow {

void SimConfig::validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("simulation.T must be positive");
    if (!(dt > 0.0) || dt > T) throw InvalidArgument("simulation.dt must lie in (0, T]");
    if (renorm_every < 1) throw InvalidArgument("simulation.renorm_every must be >= 1");
    if (paths < 1) throw InvalidArgument("simulation.paths must be >= 1");
    if (!(transient_fraction >= 0.0 && transient_fraction < 0.75)) {
        throw InvalidArgument("simulation.transient_fraction must lie in [0, 0.75)");
    }
    if (threads < 0) throw InvalidArgument("threads must be >= 0");
}

X0Sampler X0Sampler::fixed(Vector x) {
    if (x.size() == 0 || !x.allFinite()) throw InvalidArgument("X0Sampler: fixed point must be finite and non-empty");
    X0Sampler s;
    s.fixed_ = std::move(x);
    return s;
}

X0Sampler X0Sampler::from_measure(EmpiricalMeasure mu) {
    mu.validate();
    X0Sampler s;
    s.measure_ = std::move(mu);
    return s;
}

int X0Sampler::dim() const noexcept {
    return measure_ ? measure_->dim() : static_cast<int>(fixed_.size());
}

Vector X0Sampler::draw(std::uint64_t seed, std::uint64_t path_index) const {
    if (!measure_) return fixed_;
    auto eng = make_engine(seed, path_index, Stream::initial_state);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
    const Vector& w = measure_->weights;
    double acc = 0.0;
    int idx = measure_->size() - 1;
    for (int i = 0; i < measure_->size(); ++i) {
        acc += w(i);
        if (u < acc) {
            idx = i;
            break;
        }
    }
    return measure_->point(idx);
}

namespace {

constexpr int kMaxRestarts = 3;
constexpr double kBlockSpread = 25.0;

Matrix random_frame(std::uint64_t seed, std::uint64_t path_index, int restart, int d) {
    auto eng = make_engine(seed + 0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(restart), path_index,
                           Stream::frame);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(d, d);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) g(i, j) = normal(eng);
    }
    return linalg::qr_positive(g).q;
}

struct PathRun {
    std::vector<double> times;
    std::vector<Vector> sums;  // cumulative log diag(R)
    std::size_t window_start = 0;  // checkpoint index of the transient cut
    double wedge = 0.0;
    int restarts = 0;
};

/// Accumulates ln‖∧^l (R_N···R_1)‖ in blocks; a block is closed once its
/// diagonal spread between the top and the l-th entry exceeds kBlockSpread.
class WedgeAccumulator {
public:
    WedgeAccumulator(int d, int l) : l_(l), block_(Matrix::Identity(d, d)), tmp_(d, d) {}

    void push(const Matrix& r) {
        tmp_.noalias() = r * block_;
        block_.swap(tmp_);
        const double s = block_.cwiseAbs().maxCoeff();
        block_ /= s;
        log_scale_ += std::log(s);
        open_ = true;
        if (l_ > 1) {
            std::vector<double> ld(static_cast<std::size_t>(block_.rows()));
            for (Eigen::Index i = 0; i < block_.rows(); ++i) ld[static_cast<std::size_t>(i)] = std::log(std::abs(block_(i, i)));
            std::sort(ld.begin(), ld.end(), std::greater<>());
            if (ld[0] - ld[static_cast<std::size_t>(l_ - 1)] > kBlockSpread) close();
        }
    }

    double finish() {
        if (open_) close();
        return total_;
    }

private:
    void close() {
        total_ += static_cast<double>(l_) * log_scale_ + linalg::log_wedge_norm(block_, l_);
        block_.setIdentity();
        log_scale_ = 0.0;
        open_ = false;
    }

    int l_;
    Matrix block_;
    Matrix tmp_;
    double log_scale_ = 0.0;
    double total_ = 0.0;
    bool open_ = false;
};

PathRun run_benettin(const CoefficientField& f, const Vector& x0, const SimConfig& cfg, std::uint64_t path_index,
                     int wedge_l) {
    const int d = f.dim();
    const long steps = step_count(cfg.T, cfg.dt);
    const long cut = std::lround(cfg.transient_fraction * static_cast<double>(steps));
    std::vector<double> dw(static_cast<std::size_t>(f.channels()));
    // DA and DB do not see the state of a linear field, so only its direction matters.
    const bool rescale_state = f.metadata().linear_in_x;

    for (int restart = 0; restart <= kMaxRestarts; ++restart) {
        try {
            PathRun run;
            run.restarts = restart;
            BrownianStream noise(cfg.seed, path_index, cfg.dt, f.channels());
            Stepper stepper(f, cfg.scheme, true);
            Vector x = x0;
            Matrix v = random_frame(cfg.seed, path_index, restart, d);
            Matrix tmp(d, d);
            Vector sum = Vector::Zero(d);
            run.times.push_back(0.0);
            run.sums.push_back(sum);
            std::optional<WedgeAccumulator> wedge;
            if (wedge_l > 0) wedge.emplace(d, wedge_l);
            for (long j = 0; j < steps; ++j) {
                noise.next(dw);
                stepper.step(x, static_cast<double>(j) * cfg.dt, cfg.dt, dw, j);
                tmp.noalias() = stepper.tangent_step() * v;
                v.swap(tmp);
                const long done = j + 1;
                if (done % cfg.renorm_every == 0 || done == steps || done == cut) {
                    if (!v.allFinite()) {
                        throw ExplosionError("tangent frame overflowed between renormalizations; lower renorm_every",
                                             j);
                    }
                    const linalg::QrFactors qr = linalg::qr_positive(v);
                    for (int i = 0; i < d; ++i) sum(i) += std::log(qr.r(i, i));
                    v = qr.q;
                    if (rescale_state) {
                        const double nx = x.norm();
                        if (nx > 0.0) x /= nx;
                    }
                    run.times.push_back(static_cast<double>(done) * cfg.dt);
                    run.sums.push_back(sum);
                    if (done == cut) run.window_start = run.sums.size() - 1;
                    if (wedge && done > cut) wedge->push(qr.r);
                }
            }
            if (wedge) run.wedge = wedge->finish();
            return run;
        } catch (const DegenerateFrame&) {
            continue;
        }
    }
    throw EstimationFailed("tangent frame collapsed after " + std::to_string(kMaxRestarts) +
                           " restarts (path " + std::to_string(path_index) + ")");
}

std::size_t checkpoint_near(const PathRun& run, double t) {
    const auto it = std::lower_bound(run.times.begin(), run.times.end(), t - 1e-9);
    if (it == run.times.end()) return run.times.size() - 1;
    return static_cast<std::size_t>(it - run.times.begin());
}

struct PathRates {
    Vector rates;
    Vector early;  // rate over [T/2, 3T/4]
    Vector late;   // rate over [3T/4, T]
    int ordering_violations = 0;
};

PathRates path_rates(const PathRun& run, bool tail_max, double horizon) {
    const std::size_t last = run.sums.size() - 1;
    const std::size_t b = run.window_start;
    const double tb = run.times[b];
    const Eigen::Index d = run.sums[0].size();
    PathRates out;
    if (!tail_max) {
        out.rates = (run.sums[last] - run.sums[b]) / (run.times[last] - tb);
    } else {
        out.rates = Vector::Constant(d, -std::numeric_limits<double>::infinity());
        const double tail_start = 0.75 * horizon;
        for (std::size_t c = b + 1; c <= last; ++c) {
            if (run.times[c] < tail_start - 1e-9) continue;
            const Vector r = (run.sums[c] - run.sums[b]) / (run.times[c] - tb);
            out.rates = out.rates.cwiseMax(r);
        }
    }
    const std::size_t half = checkpoint_near(run, 0.5 * horizon);
    const std::size_t three = checkpoint_near(run, 0.75 * horizon);
    const double w1 = run.times[three] - run.times[half];
    const double w2 = run.times[last] - run.times[three];
    out.early = w1 > 0 ? Vector((run.sums[three] - run.sums[half]) / w1) : Vector::Zero(d);
    out.late = w2 > 0 ? Vector((run.sums[last] - run.sums[three]) / w2) : Vector::Zero(d);
    const Vector total = run.sums[last] - run.sums[b];
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        if (total(i) < total(i + 1) - 1e-8 * horizon) ++out.ordering_violations;
    }
    return out;
}

bool windows_agree(const std::vector<PathRates>& rates) {
    const Eigen::Index d = rates.front().early.size();
    for (Eigen::Index i = 0; i < d; ++i) {
        std::vector<double> e, l, diff;
        for (const auto& r : rates) {
            e.push_back(r.early(i));
            l.push_back(r.late(i));
            diff.push_back(r.late(i) - r.early(i));
        }
        const double me = mean_and_se(e).mean;
        const double ml = mean_and_se(l).mean;
        const MeanSe md = mean_and_se(diff);
        const double gap = std::abs(ml - me);
        const double scale = std::max(std::abs(me), std::abs(ml));
        const bool rel_ok = gap <= 0.05 * scale || gap <= 1e-12;
        const bool se_ok = gap <= 2.0 * md.standard_error;
        if (!rel_ok && !se_ok) return false;
    }
    return true;
}

void check_dims(const CoefficientField& f, const X0Sampler& x0) {
    if (x0.dim() != f.dim()) throw InvalidArgument("initial-state sampler dimension does not match the field");
    if (!f.has_jacobian()) throw UnsupportedExpression("exponent estimation needs Jacobians; the field uses min/max");
}

}  // namespace

LyapunovEstimate estimate_spectrum_qr(const CoefficientField& f, const X0Sampler& x0, const SimConfig& cfg) {
    cfg.validate();
    check_dims(f, x0);
    const bool tail_max = !f.metadata().autonomous;
    const auto n = static_cast<std::size_t>(cfg.paths);
    std::vector<PathRates> rates(n);
    std::vector<int> restarts(n, 0);
    parallel_for(n, cfg.threads, [&](std::size_t p) {
        const PathRun run = run_benettin(f, x0.draw(cfg.seed, p), cfg, p, 0);
        rates[p] = path_rates(run, tail_max, cfg.T);
        restarts[p] = run.restarts;
    });

    const int d = f.dim();
    LyapunovEstimate est;
    est.method = tail_max ? "tail_max" : "qr";
    est.T = cfg.T;
    est.dt = cfg.dt;
    est.paths = cfg.paths;
    est.seed = cfg.seed;
    est.fixed_x0 = x0.is_fixed();
    est.path_values.assign(n, std::vector<double>(static_cast<std::size_t>(d)));
    for (std::size_t p = 0; p < n; ++p) {
        for (int i = 0; i < d; ++i) est.path_values[p][static_cast<std::size_t>(i)] = rates[p].rates(i);
        est.ordering_violations += rates[p].ordering_violations;
        est.restarts += restarts[p];
    }
    for (int i = 0; i < d; ++i) {
        std::vector<double> col(n);
        for (std::size_t p = 0; p < n; ++p) col[p] = rates[p].rates(i);
        const MeanSe m = mean_and_se(col);
        est.exponents.push_back(m.mean);
        est.standard_errors.push_back(m.standard_error);
    }
    est.converged = windows_agree(rates);
    return est;
}

ScalarEstimate estimate_wedge_sum(const CoefficientField& f, int l, const X0Sampler& x0, const SimConfig& cfg) {
    cfg.validate();
    check_dims(f, x0);
    if (l < 1 || l > f.dim()) throw InvalidArgument("estimate_wedge_sum: l must lie in [1, d]");
    const auto n = static_cast<std::size_t>(cfg.paths);
    std::vector<double> values(n);
    std::vector<PathRates> rates(n);
    parallel_for(n, cfg.threads, [&](std::size_t p) {
        const PathRun run = run_benettin(f, x0.draw(cfg.seed, p), cfg, p, l);
        const double window = run.times.back() - run.times[run.window_start];
        values[p] = run.wedge / window;
        rates[p] = path_rates(run, false, cfg.T);
    });
    ScalarEstimate out;
    const MeanSe m = mean_and_se(values);
    out.value = m.mean;
    out.standard_error = m.standard_error;
    out.paths = cfg.paths;
    out.converged = windows_agree(rates);
    out.path_values = std::move(values);
    return out;
}

namespace {

/// DΦ(x0, steps·dt) along path `path_index` without storing intermediate frames.
struct FactoredProduct {
    Matrix q;
    Matrix r;

    explicit FactoredProduct(int d) : q(Matrix::Identity(d, d)), r(Matrix::Identity(d, d)) {}

    void apply(const Matrix& step) {
        const Eigen::HouseholderQR<Matrix> qr(step * q);
        q = qr.householderQ();
        const Matrix t = qr.matrixQR().triangularView<Eigen::Upper>();
        r = (t * r).eval();
        if (!r.allFinite()) throw ExplosionError("tangent matrix overflowed", 0);
    }
};

Matrix propagate_jacobian(const CoefficientField& f, Vector x, std::uint64_t seed, std::uint64_t path_index,
                          long steps, double dt, Scheme scheme, const std::vector<long>& marks,
                          std::vector<Matrix>* at_marks) {
    const int d = f.dim();
    BrownianStream noise(seed, path_index, dt, f.channels());
    Stepper stepper(f, scheme, true);
    std::vector<double> dw(static_cast<std::size_t>(f.channels()));
    Matrix v = Matrix::Identity(d, d);
    Matrix tmp(d, d);
    std::size_t next_mark = 0;
    for (long j = 0; j < steps; ++j) {
        noise.next(dw);
        stepper.step(x, static_cast<double>(j) * dt, dt, dw, j);
        tmp.noalias() = stepper.tangent_step() * v;
        v.swap(tmp);
        while (at_marks && next_mark < marks.size() && marks[next_mark] == j + 1) {
            at_marks->push_back(v);
            ++next_mark;
        }
    }
    if (!v.allFinite()) throw ExplosionError("tangent matrix overflowed", steps);
    return v;
}

}  // namespace

ScalarEstimate furstenberg_estimate(const CoefficientField& f, const EmpiricalMeasure& mu, int l, int samples,
                                    double dt, std::uint64_t seed, Scheme scheme, int threads) {
    if (!f.metadata().autonomous) throw PreconditionError("furstenberg_estimate: field must be autonomous");
    if (mu.dim() != f.dim()) throw InvalidArgument("furstenberg_estimate: measure dimension mismatch");
    if (l < 1 || l > f.dim()) throw InvalidArgument("furstenberg_estimate: l must lie in [1, d]");
    if (samples < 1) throw InvalidArgument("furstenberg_estimate: samples must be >= 1");
    if (!f.has_jacobian()) throw UnsupportedExpression("furstenberg_estimate: field has no Jacobian");
    const X0Sampler sampler = X0Sampler::from_measure(mu);
    const long steps = step_count(1.0, dt);
    const auto n = static_cast<std::size_t>(samples);
    std::vector<double> values(n);
    parallel_for(n, threads, [&](std::size_t j) {
        const Matrix v = propagate_jacobian(f, sampler.draw(seed, j), seed, j, steps, dt, scheme, {}, nullptr);
        values[j] = linalg::log_wedge_norm(v, l);
    });
    ScalarEstimate out;
    const MeanSe m = mean_and_se(values);
    out.value = m.mean;
    out.standard_error = m.standard_error;
    out.paths = samples;
    out.path_values = std::move(values);
    return out;
}

double check_subadditivity(const CoefficientField& f, int l, int m, int n, int trials, std::uint64_t seed,
                           const SubadditivityOptions& opts) {
    if (m < 1 || n < 1) throw InvalidArgument("check_subadditivity: m and n must be >= 1");
    if (trials < 1) throw InvalidArgument("check_subadditivity: trials must be >= 1");
    if (l < 1 || l > f.dim()) throw InvalidArgument("check_subadditivity: l must lie in [1, d]");
    const long sm = step_count(static_cast<double>(m), opts.dt);
    const long total = sm + step_count(static_cast<double>(n), opts.dt);
    const auto t = static_cast<std::size_t>(trials);
    std::vector<double> violation(t);
    parallel_for(t, opts.threads, [&](std::size_t k) {
        auto eng = make_engine(seed, k, Stream::initial_state);
        std::normal_distribution<double> normal(0.0, opts.x0_scale);
        Vector x(f.dim());
        for (int i = 0; i < f.dim(); ++i) x(i) = normal(eng);
        // Products are kept as Q·R so the small singular directions survive
        // long horizons; the raw product loses them to rounding.
        BrownianStream noise(seed, k, opts.dt, f.channels());
        Stepper stepper(f, opts.scheme, true);
        std::vector<double> dw(static_cast<std::size_t>(f.channels()));
        FactoredProduct whole(f.dim());
        FactoredProduct tail(f.dim());
        Matrix head_r;
        for (long j = 0; j < total; ++j) {
            noise.next(dw);
            stepper.step(x, static_cast<double>(j) * opts.dt, opts.dt, dw, j);
            whole.apply(stepper.tangent_step());
            if (j >= sm) tail.apply(stepper.tangent_step());
            if (j + 1 == sm) head_r = whole.r;
        }
        violation[k] = linalg::log_wedge_norm(whole.r, l) - linalg::log_wedge_norm(tail.r, l) -
                       linalg::log_wedge_norm(head_r, l);
    });
    double worst = -std::numeric_limits<double>::infinity();
    for (double v : violation) worst = std::max(worst, v);
    return worst;
}

std::vector<MomentRow> check_moment_bound(const CoefficientField& f, const std::vector<double>& t_list, int paths,
                                          std::uint64_t seed, double dt, Scheme scheme, int threads) {
    const auto& meta = f.metadata();
    if (!meta.jacobian_bound) throw InvalidArgument("check_moment_bound: the field has no declared bound K");
    if (f.channels() > 1) throw InvalidArgument("check_moment_bound: at most one noise channel");
    if (paths < 2) throw InvalidArgument("check_moment_bound: paths must be >= 2");
    if (t_list.empty()) throw InvalidArgument("check_moment_bound: empty t list");
    std::vector<long> marks;
    for (double t : t_list) {
        if (!(t > 0.0)) throw InvalidArgument("check_moment_bound: times must be positive");
        marks.push_back(step_count(t, dt));
    }
    std::vector<long> sorted = marks;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    const auto np = static_cast<std::size_t>(paths);
    std::vector<std::vector<double>> norms(np);
    parallel_for(np, threads, [&](std::size_t p) {
        std::vector<Matrix> at;
        propagate_jacobian(f, Vector::Zero(f.dim()), seed, p, sorted.back(), dt, scheme, sorted, &at);
        for (const Matrix& v : at) {
            const double s = linalg::operator_norm(v);
            norms[p].push_back(s * s);
        }
    });

    const double k = *meta.jacobian_bound;
    const double d = f.dim();
    std::vector<MomentRow> out;
    for (std::size_t q = 0; q < t_list.size(); ++q) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), marks[q]) -
                                                  sorted.begin());
        std::vector<double> col(np);
        for (std::size_t p = 0; p < np; ++p) col[p] = norms[p][pos];
        const MeanSe ms = mean_and_se(col);
        MomentRow row;
        row.t = t_list[q];
        row.empirical = ms.mean;
        row.upper_confidence = ms.mean + kZ99 * ms.standard_error;
        const double t = t_list[q];
        row.bound = 3.0 * d * std::exp(3.0 * k * k * t * t + 3.0 * k * k * t);
        row.pass = row.upper_confidence <= row.bound;
        out.push_back(row);
    }
    return out;
}

}  // namespace lyapflow

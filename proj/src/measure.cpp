#include "lyapflow/measure.hpp"

#include "lyapflow/brownian.hpp"
#include "lyapflow/errors.hpp"
#include "lyapflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace lyapflow {

EmpiricalMeasure EmpiricalMeasure::uniform(Matrix points) {
    EmpiricalMeasure mu;
    const Eigen::Index n = points.rows();
    mu.points = std::move(points);
    mu.weights = Vector::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
    return mu;
}

EmpiricalMeasure EmpiricalMeasure::dirac(const Vector& x) {
    Matrix p(1, x.size());
    p.row(0) = x.transpose();
    return uniform(std::move(p));
}

void EmpiricalMeasure::validate() const {
    if (points.rows() == 0 || points.cols() == 0) throw InvalidArgument("empirical measure is empty");
    if (weights.size() != points.rows()) throw InvalidArgument("empirical measure: weight count does not match points");
    if (!points.allFinite()) throw InvalidArgument("empirical measure has non-finite points");
    if ((weights.array() < 0.0).any()) throw InvalidArgument("empirical measure has negative weights");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw InvalidArgument("empirical measure weights do not sum to 1");
}

bool stationarity_diagnostic(const Matrix& points) {
    const Eigen::Index n = points.rows();
    if (n < 4) return true;
    const Eigen::Index h = n / 2;
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
        const Vector a = points.col(c).head(h);
        const Vector b = points.col(c).tail(n - h);
        const double ma = a.mean();
        const double mb = b.mean();
        const double va = (a.array() - ma).square().sum() / static_cast<double>(h - 1);
        const double vb = (b.array() - mb).square().sum() / static_cast<double>(n - h - 1);
        const double pooled = std::sqrt(0.5 * (va + vb));
        const double mean_gap = std::abs(ma - mb);
        if (pooled > 0.0) {
            if (mean_gap / pooled >= 0.1) return false;
        } else if (mean_gap > 1e-12 * std::max(1.0, std::abs(ma))) {
            return false;
        }
        const double vmax = std::max(va, vb);
        if (vmax > 0.0 && std::abs(va - vb) / vmax >= 0.1) return false;
    }
    return true;
}

namespace {

NonDissipative explosion_message(const ExplosionError& e, double dt, bool burn) {
    return NonDissipative(std::string("trajectory exploded ") + (burn ? "during burn-in" : "while sampling") +
                          " at t=" + std::to_string(static_cast<double>(e.step()) * dt) +
                          "; the field may not be dissipative (run check_monotonicity)");
}

}  // namespace

EmpiricalMeasure sample_invariant_measure(const CoefficientField& f, double burn_in, int n, double thinning,
                                          double dt, std::uint64_t seed, const Vector& x_init,
                                          const MeasureOptions& opts) {
    if (!f.metadata().autonomous) throw PreconditionError("sample_invariant_measure: field must be autonomous");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("measure dt must be positive");
    if (!(burn_in >= 0.0) || !std::isfinite(burn_in)) throw InvalidArgument("burn_in must be >= 0");
    if (n < 1) throw InvalidArgument("measure sample count must be >= 1");
    if (!(thinning >= dt * (1.0 - 1e-12))) throw InvalidArgument("thinning must be >= dt");
    if (x_init.size() != f.dim() || !x_init.allFinite()) throw InvalidArgument("x_init has the wrong dimension");

    const long burn = std::lround(burn_in / dt);
    const long thin = std::max(1L, std::lround(thinning / dt));
    const int d = f.dim();
    Matrix points(n, d);

    if (opts.many_runs) {
        const long steps = std::max(1L, burn);
        parallel_for(static_cast<std::size_t>(n), opts.threads, [&](std::size_t i) {
            BrownianStream noise(seed, i, dt, f.channels());
            Stepper stepper(f, opts.scheme, false);
            std::vector<double> dw(static_cast<std::size_t>(f.channels()));
            Vector x = x_init;
            try {
                for (long j = 0; j < steps; ++j) {
                    noise.next(dw);
                    stepper.step(x, static_cast<double>(j) * dt, dt, dw, j);
                }
            } catch (const ExplosionError& e) {
                throw explosion_message(e, dt, true);
            }
            points.row(static_cast<Eigen::Index>(i)) = x.transpose();
        });
    } else {
        BrownianStream noise(seed, 0, dt, f.channels());
        Stepper stepper(f, opts.scheme, false);
        std::vector<double> dw(static_cast<std::size_t>(f.channels()));
        Vector x = x_init;
        long j = 0;
        try {
            for (; j < burn; ++j) {
                noise.next(dw);
                stepper.step(x, static_cast<double>(j) * dt, dt, dw, j);
            }
        } catch (const ExplosionError& e) {
            throw explosion_message(e, dt, true);
        }
        try {
            for (int s = 0; s < n; ++s) {
                for (long k = 0; k < thin; ++k, ++j) {
                    noise.next(dw);
                    stepper.step(x, static_cast<double>(j) * dt, dt, dw, j);
                }
                points.row(s) = x.transpose();
            }
        } catch (const ExplosionError& e) {
            throw explosion_message(e, dt, false);
        }
    }

    EmpiricalMeasure mu = EmpiricalMeasure::uniform(std::move(points));
    mu.provenance = {opts.field_hash, burn_in, thinning, seed};
    mu.stationary = stationarity_diagnostic(mu.points);
    return mu;
}

std::vector<PointPair> sample_pairs(int d, int count, double radius, std::uint64_t seed) {
    if (d < 1 || count < 1) throw InvalidArgument("sample_pairs: d and count must be >= 1");
    if (!(radius > 0.0)) throw InvalidArgument("sample_pairs: radius must be positive");
    auto eng = make_engine(seed, 0, Stream::pairs);
    std::uniform_real_distribution<double> unif(-radius, radius);
    std::vector<PointPair> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        Vector x(d), y(d);
        for (int i = 0; i < d; ++i) x(i) = unif(eng);
        for (int i = 0; i < d; ++i) y(i) = unif(eng);
        out.emplace_back(std::move(x), std::move(y));
    }
    return out;
}

std::vector<ContractionRow> check_contraction(const CoefficientField& f, const std::vector<PointPair>& pairs,
                                              const std::vector<double>& t_list, int paths, double lambda,
                                              std::uint64_t seed, const ContractionOptions& opts) {
    if (!f.metadata().autonomous) throw PreconditionError("check_contraction: field must be autonomous");
    if (pairs.empty()) throw InvalidArgument("check_contraction: no pairs");
    if (paths < 1) throw InvalidArgument("check_contraction: paths must be >= 1");
    if (t_list.empty()) throw InvalidArgument("check_contraction: empty t list");
    if (!std::isfinite(lambda)) throw InvalidArgument("check_contraction: lambda must be finite");
    std::vector<long> marks;
    for (double t : t_list) {
        if (!(t > 0.0)) throw InvalidArgument("check_contraction: times must be positive");
        marks.push_back(step_count(t, opts.dt));
    }
    const long steps = *std::max_element(marks.begin(), marks.end());
    const std::size_t np = pairs.size();
    const auto nq = static_cast<std::size_t>(paths);
    // ratios[p * paths + q][t index]
    std::vector<std::vector<double>> ratios(np * nq, std::vector<double>(t_list.size(), 0.0));
    parallel_for(np * nq, opts.threads, [&](std::size_t idx) {
        const std::size_t p = idx / nq;
        const std::size_t q = idx % nq;
        Vector x = pairs[p].first;
        Vector y = pairs[p].second;
        if (x.size() != f.dim() || y.size() != f.dim()) throw InvalidArgument("check_contraction: pair dimension");
        const double d0 = (x - y).squaredNorm();
        if (d0 == 0.0) return;
        BrownianStream noise(seed, q, opts.dt, f.channels());
        Stepper sx(f, opts.scheme, false);
        Stepper sy(f, opts.scheme, false);
        std::vector<double> dw(static_cast<std::size_t>(f.channels()));
        for (long j = 0; j < steps; ++j) {
            noise.next(dw);
            const double t = static_cast<double>(j) * opts.dt;
            sx.step(x, t, opts.dt, dw, j);
            sy.step(y, t, opts.dt, dw, j);
            for (std::size_t m = 0; m < marks.size(); ++m) {
                if (marks[m] == j + 1) ratios[idx][m] = (x - y).squaredNorm() / d0;
            }
        }
    });
    std::vector<ContractionRow> out;
    for (std::size_t m = 0; m < t_list.size(); ++m) {
        std::vector<double> col(ratios.size());
        for (std::size_t i = 0; i < ratios.size(); ++i) col[i] = ratios[i][m];
        const MeanSe ms = mean_and_se(col);
        ContractionRow row;
        row.t = t_list[m];
        row.ratio = ms.mean;
        row.upper_confidence = ms.mean + kZ99 * ms.standard_error;
        row.bound = std::exp(-lambda * row.t);
        row.pass = row.upper_confidence <= row.bound * (1.0 + 1e-3);
        out.push_back(row);
    }
    return out;
}

namespace {

/// Σ_i Σ_j w_i v_j |a_i − b_j|.
double cross_term(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    const Eigen::Index na = a.points.rows();
    const Eigen::Index nb = b.points.rows();
    if (a.dim() == 1) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(nb));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
            return b.points(i, 0) < b.points(j, 0) || (b.points(i, 0) == b.points(j, 0) && i < j);
        });
        std::vector<double> xs(static_cast<std::size_t>(nb));
        std::vector<double> cw(static_cast<std::size_t>(nb) + 1, 0.0);   // cumulative weight
        std::vector<double> cwx(static_cast<std::size_t>(nb) + 1, 0.0);  // cumulative weight·x
        for (std::size_t k = 0; k < order.size(); ++k) {
            const double x = b.points(order[k], 0);
            const double w = b.weights(order[k]);
            xs[k] = x;
            cw[k + 1] = cw[k] + w;
            cwx[k + 1] = cwx[k] + w * x;
        }
        const double wt = cw.back();
        const double sx = cwx.back();
        double total = 0.0;
        for (Eigen::Index i = 0; i < na; ++i) {
            const double x = a.points(i, 0);
            const auto k = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
            const double below = x * cw[k] - cwx[k];
            const double above = (sx - cwx[k]) - x * (wt - cw[k]);
            total += a.weights(i) * (below + above);
        }
        return total;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < na; ++i) {
        double inner = 0.0;
        for (Eigen::Index j = 0; j < nb; ++j) inner += b.weights(j) * (a.points.row(i) - b.points.row(j)).norm();
        total += a.weights(i) * inner;
    }
    return total;
}

bool canonical_less(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.points.rows() != b.points.rows()) return a.points.rows() < b.points.rows();
    const double* pa = a.points.data();
    const double* pb = b.points.data();
    const auto np = static_cast<std::size_t>(a.points.size());
    if (!std::equal(pa, pa + np, pb)) return std::lexicographical_compare(pa, pa + np, pb, pb + np);
    const double* wa = a.weights.data();
    const double* wb = b.weights.data();
    const auto nw = static_cast<std::size_t>(a.weights.size());
    return std::lexicographical_compare(wa, wa + nw, wb, wb + nw);
}

}  // namespace

double weak_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim()) throw InvalidArgument("weak_distance: dimension mismatch");
    if (a.points.rows() == b.points.rows() && a.points == b.points && a.weights == b.weights) return 0.0;
    const bool swap = canonical_less(b, a);
    const EmpiricalMeasure& first = swap ? b : a;
    const EmpiricalMeasure& second = swap ? a : b;
    const double cab = cross_term(first, second);
    const double caa = cross_term(first, first);
    const double cbb = cross_term(second, second);
    const double e = 2.0 * cab - (caa + cbb);
    return std::sqrt(std::max(0.0, e));
}

void write_measure_csv(const EmpiricalMeasure& mu, const std::filesystem::path& file, const std::string& config_hash) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    for (int i = 0; i < mu.dim(); ++i) os << "x_" << i + 1 << ",";
    os << "weight,config_hash\n";
    char buf[64];
    for (int r = 0; r < mu.size(); ++r) {
        for (int i = 0; i < mu.dim(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,", mu.points(r, i));
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", mu.weights(r));
        os << buf << "," << config_hash << "\n";
    }
    if (!os) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace lyapflow

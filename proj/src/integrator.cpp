#include "lyapflow/integrator.hpp"

#include "lyapflow/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace lyapflow {

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::euler_maruyama: return "euler_maruyama";
        case Scheme::milstein: return "milstein";
        case Scheme::exponential: return "exponential";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "euler_maruyama" || s == "euler") return Scheme::euler_maruyama;
    if (s == "milstein") return Scheme::milstein;
    if (s == "exponential") return Scheme::exponential;
    throw InvalidArgument("unknown scheme '" + s + "' (expected euler_maruyama, milstein or exponential)");
}

Stepper::Stepper(const CoefficientField& field, Scheme scheme, bool need_tangent)
    : field_(field),
      scheme_(scheme),
      need_tangent_(need_tangent),
      dim_(field.dim()),
      channels_(field.channels()),
      static_params_(field.schedule().empty()),
      params_(field.param_values()),
      drift_(field.dim()),
      next_(field.dim()),
      diffusion_(static_cast<std::size_t>(field.channels()), Vector(field.dim())),
      milstein_(static_cast<std::size_t>(field.channels()), Vector(field.dim())),
      drift_jac_(field.dim(), field.dim()),
      diffusion_jac_(static_cast<std::size_t>(field.channels()), Matrix(field.dim(), field.dim())),
      milstein_jac_(static_cast<std::size_t>(field.channels()), Matrix(field.dim(), field.dim())),
      generator_(field.dim(), field.dim()),
      noise_part_(field.dim(), field.dim()),
      tangent_(Matrix::Identity(field.dim(), field.dim())) {
    if (scheme == Scheme::milstein && !field.commutative_noise()) {
        throw InvalidArgument(
            "milstein requires scalar or diagonal noise; use euler_maruyama for non-commuting channels");
    }
    if ((need_tangent || scheme != Scheme::euler_maruyama) && !field.has_jacobian()) {
        throw UnsupportedExpression("scheme needs Jacobians but the field contains min/max");
    }
}

void Stepper::step(Vector& x, double t, double dt, std::span<const double> dw, long step_index) {
    dt_ = dt;
    dw_.assign(dw.begin(), dw.end());
    if (!static_params_) field_.resolve_params(t, params_);
    const auto d = static_cast<std::size_t>(dim_);
    const std::span<const double> xs(x.data(), d);

    field_.eval_drift(xs, t, params_, {drift_.data(), d});
    for (int i = 0; i < channels_; ++i) {
        field_.eval_diffusion(i, xs, t, params_, {diffusion_[static_cast<std::size_t>(i)].data(), d});
    }
    const bool jac = need_tangent_ || scheme_ != Scheme::euler_maruyama;
    if (jac) {
        field_.eval_drift_jacobian(xs, t, params_, drift_jac_);
        noise_part_.setZero();
        for (int i = 0; i < channels_; ++i) {
            auto& db = diffusion_jac_[static_cast<std::size_t>(i)];
            field_.eval_diffusion_jacobian(i, xs, t, params_, db);
            noise_part_ += dw[static_cast<std::size_t>(i)] * db;
        }
    }

    switch (scheme_) {
        case Scheme::euler_maruyama:
        case Scheme::milstein: {
            next_ = x + dt * drift_;
            for (int i = 0; i < channels_; ++i) next_ += dw[static_cast<std::size_t>(i)] * diffusion_[static_cast<std::size_t>(i)];
            if (need_tangent_) {
                tangent_ = drift_jac_ * dt + noise_part_;
                tangent_.diagonal().array() += 1.0;
            }
            if (scheme_ == Scheme::milstein) {
                for (int i = 0; i < channels_; ++i) {
                    const auto iu = static_cast<std::size_t>(i);
                    const double c = 0.5 * (dw[iu] * dw[iu] - dt);
                    field_.eval_milstein(i, xs, t, params_, {milstein_[iu].data(), d});
                    next_ += c * milstein_[iu];
                    if (need_tangent_) {
                        field_.eval_milstein_jacobian(i, xs, t, params_, milstein_jac_[iu]);
                        tangent_ += c * milstein_jac_[iu];
                    }
                }
            }
            break;
        }
        case Scheme::exponential: {
            const bool linear = field_.metadata().linear_in_x;
            if (need_tangent_ || linear) {
                generator_ = drift_jac_ * dt + noise_part_;
                for (int i = 0; i < channels_; ++i) {
                    const auto& db = diffusion_jac_[static_cast<std::size_t>(i)];
                    generator_.noalias() -= (0.5 * dt) * (db * db);
                }
                tangent_ = linalg::expm(generator_);
            }
            if (linear) {
                next_.noalias() = tangent_ * x;
            } else {
                next_ = x + linalg::phi1_times(drift_jac_ * dt, drift_ * dt);
                for (int i = 0; i < channels_; ++i) {
                    next_ += dw[static_cast<std::size_t>(i)] * diffusion_[static_cast<std::size_t>(i)];
                }
            }
            break;
        }
    }

    if (!next_.allFinite() || next_.norm() > kExplosionThreshold) {
        throw ExplosionError("state norm exceeded " + std::to_string(kExplosionThreshold), step_index);
    }
    x.swap(next_);
}

Matrix Stepper::inverse_step(InverseMode mode) const {
    if (!need_tangent_) throw InvalidArgument("inverse_step: stepper built without tangent propagation");
    if (mode == InverseMode::per_step_inversion) {
        const Eigen::FullPivLU<Matrix> lu(tangent_);
        if (!lu.isInvertible()) throw DegenerateFrame("inverse_step: singular step matrix");
        return lu.inverse();
    }
    if (scheme_ == Scheme::exponential) return linalg::expm(-generator_);
    // Realized-square form of the inverse equation
    // dU = U(−DA + ΣDB_i²)dt − U·ΣDB_i dW_i: with E = I + H the step is
    // F = I − H + H², so E·F = I + H³.
    Matrix h = tangent_;
    h.diagonal().array() -= 1.0;
    Matrix f = h * h - h;
    f.diagonal().array() += 1.0;
    return f;
}

namespace {

void check_path(const CoefficientField& field, const Vector& x0, const BrownianPath& path) {
    if (x0.size() != field.dim()) throw InvalidArgument("initial state has the wrong dimension");
    if (!x0.allFinite()) throw InvalidArgument("initial state is not finite");
    if (path.channels != field.channels()) {
        throw InvalidArgument("Brownian path has " + std::to_string(path.channels) + " channels, field has " +
                              std::to_string(field.channels()));
    }
}

}  // namespace

TangentFrames integrate_flow(const CoefficientField& field, const Vector& x0, const BrownianPath& path,
                             Scheme scheme) {
    check_path(field, x0, path);
    Stepper stepper(field, scheme, false);
    TangentFrames out;
    out.scheme = scheme;
    out.origin = x0;
    out.dt = path.dt;
    out.first_step = path.first_step;
    out.trajectory.reserve(static_cast<std::size_t>(path.steps + 1));
    Vector x = x0;
    out.trajectory.push_back(x);
    for (long j = 0; j < path.steps; ++j) {
        stepper.step(x, path.time(j), path.dt, path.step(j), path.first_step + j);
        out.trajectory.push_back(x);
    }
    return out;
}

TangentFrames integrate_tangent(const CoefficientField& field, const Vector& x0, const BrownianPath& path,
                                Scheme scheme, bool with_inverse, InverseMode inverse_mode) {
    check_path(field, x0, path);
    if (!field.has_jacobian()) throw UnsupportedExpression("integrate_tangent: field has no Jacobian");
    Stepper stepper(field, scheme, true);
    const int d = field.dim();
    TangentFrames out;
    out.scheme = scheme;
    out.origin = x0;
    out.dt = path.dt;
    out.first_step = path.first_step;
    const auto n = static_cast<std::size_t>(path.steps + 1);
    out.trajectory.reserve(n);
    out.jacobian.reserve(n);
    if (with_inverse) out.inverse_jacobian.reserve(n);

    Vector x = x0;
    Matrix v = Matrix::Identity(d, d);
    Matrix u = Matrix::Identity(d, d);
    Matrix tmp(d, d);
    out.trajectory.push_back(x);
    out.jacobian.push_back(v);
    if (with_inverse) out.inverse_jacobian.push_back(u);
    for (long j = 0; j < path.steps; ++j) {
        stepper.step(x, path.time(j), path.dt, path.step(j), path.first_step + j);
        tmp.noalias() = stepper.tangent_step() * v;
        v.swap(tmp);
        if (v.colwise().norm().maxCoeff() < kUnderflowThreshold) {
            throw UnderflowError("tangent frame underflowed at step " + std::to_string(path.first_step + j) +
                                 "; use the renormalized (QR) estimator for long horizons");
        }
        if (!v.allFinite()) {
            throw ExplosionError("tangent frame overflowed; use the renormalized (QR) estimator",
                                 path.first_step + j);
        }
        out.trajectory.push_back(x);
        out.jacobian.push_back(v);
        if (with_inverse) {
            tmp.noalias() = u * stepper.inverse_step(inverse_mode);
            u.swap(tmp);
            out.inverse_jacobian.push_back(u);
        }
    }
    return out;
}

void write_trajectory_csv(const TangentFrames& frames, const std::filesystem::path& file,
                          const std::string& config_hash) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    const int d = frames.trajectory.empty() ? 0 : static_cast<int>(frames.trajectory.front().size());
    const bool with_jac = frames.jacobian.size() == frames.trajectory.size();
    os << "t";
    for (int i = 0; i < d; ++i) os << ",x_" << i + 1;
    if (with_jac) {
        for (int c = 0; c < d; ++c) {
            for (int r = 0; r < d; ++r) os << ",dphi_" << r + 1 << "_" << c + 1;
        }
    }
    if (!config_hash.empty()) os << ",config_hash";
    os << "\n" << std::setprecision(17);
    for (std::size_t j = 0; j < frames.trajectory.size(); ++j) {
        os << frames.time(j);
        for (int i = 0; i < d; ++i) os << "," << frames.trajectory[j](i);
        if (with_jac) {
            for (int c = 0; c < d; ++c) {
                for (int r = 0; r < d; ++r) os << "," << frames.jacobian[j](r, c);
            }
        }
        if (!config_hash.empty()) os << "," << config_hash;
        os << "\n";
    }
    if (!os) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace lyapflow

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lyapflow {

/// Independent random streams derived from one (seed, path_index) pair.
enum class Stream : std::uint64_t {
    increments = 0,
    frame = 1,
    initial_state = 2,
    pairs = 3,
    auxiliary = 4,
};

/// Engine for (seed, index, stream). Distinct triples give unrelated
/// sequences: the triple is hashed through splitmix64 into a seed_seq.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index, Stream stream);

/// Sequential Wiener increments, N(0, dt) per channel, for one path.
class BrownianStream {
public:
    BrownianStream(std::uint64_t seed, std::uint64_t path_index, double dt, int channels);

    void next(std::span<double> out);
    double dt() const noexcept { return dt_; }
    int channels() const noexcept { return channels_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    double dt_;
    double sqrt_dt_;
    int channels_;
};

/// Materialized increments over a fixed horizon. `first_step` is non-zero
/// for slices, so step j covers [(first_step + j)·dt, (first_step + j + 1)·dt).
struct BrownianPath {
    double dt = 0.0;
    long steps = 0;
    int channels = 0;
    std::vector<double> increments;  // steps x channels, row-major
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    long first_step = 0;

    std::span<const double> step(long j) const {
        return {increments.data() + j * channels, static_cast<std::size_t>(channels)};
    }
    double time(long j) const { return static_cast<double>(first_step + j) * dt; }
    double start_time() const { return time(0); }
    double end_time() const { return time(steps); }

    /// Steps [begin, end) as a path of their own.
    BrownianPath slice(long begin, long end) const;
};

BrownianPath sample_brownian(std::uint64_t seed, std::uint64_t path_index, double horizon, double dt, int channels);

/// round(horizon / dt), validated.
long step_count(double horizon, double dt);

}  // namespace lyapflow

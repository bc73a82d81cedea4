#include "lyapflow/brownian.hpp"

#include "lyapflow/errors.hpp"

#include <array>
#include <cmath>
#include <string>

namespace lyapflow {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index, Stream stream) {
    std::uint64_t state = seed;
    const std::uint64_t a = splitmix64(state);
    state ^= index * 0xd1b54a32d192ed03ULL;
    const std::uint64_t b = splitmix64(state);
    state ^= static_cast<std::uint64_t>(stream) * 0x8cb92ba72f3d8dd7ULL;
    const std::uint64_t c = splitmix64(state);
    std::array<std::uint32_t, 6> words{};
    for (int i = 0; i < 2; ++i) {
        words[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(a >> (32 * i));
        words[static_cast<std::size_t>(i + 2)] = static_cast<std::uint32_t>(b >> (32 * i));
        words[static_cast<std::size_t>(i + 4)] = static_cast<std::uint32_t>(c >> (32 * i));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

BrownianStream::BrownianStream(std::uint64_t seed, std::uint64_t path_index, double dt, int channels)
    : engine_(make_engine(seed, path_index, Stream::increments)),
      normal_(0.0, 1.0),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      channels_(channels) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("BrownianStream: dt must be positive");
    if (channels < 0) throw InvalidArgument("BrownianStream: negative channel count");
}

void BrownianStream::next(std::span<double> out) {
    for (int i = 0; i < channels_; ++i) out[static_cast<std::size_t>(i)] = sqrt_dt_ * normal_(engine_);
}

long step_count(double horizon, double dt) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon T must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (dt > horizon * (1.0 + 1e-12)) throw InvalidArgument("dt must not exceed the horizon");
    const long n = std::lround(horizon / dt);
    return n < 1 ? 1 : n;
}

BrownianPath sample_brownian(std::uint64_t seed, std::uint64_t path_index, double horizon, double dt,
                             int channels) {
    if (channels < 0) throw InvalidArgument("sample_brownian: negative channel count");
    BrownianPath path;
    path.dt = dt;
    path.steps = step_count(horizon, dt);
    path.channels = channels;
    path.seed = seed;
    path.path_index = path_index;
    path.increments.resize(static_cast<std::size_t>(path.steps) * static_cast<std::size_t>(channels));
    BrownianStream stream(seed, path_index, dt, channels);
    for (long j = 0; j < path.steps; ++j) {
        stream.next({path.increments.data() + j * channels, static_cast<std::size_t>(channels)});
    }
    return path;
}

BrownianPath BrownianPath::slice(long begin, long end) const {
    if (begin < 0 || end > steps || begin >= end) {
        throw InvalidArgument("BrownianPath::slice: bad range [" + std::to_string(begin) + ", " +
                              std::to_string(end) + ")");
    }
    BrownianPath out;
    out.dt = dt;
    out.steps = end - begin;
    out.channels = channels;
    out.seed = seed;
    out.path_index = path_index;
    out.first_step = first_step + begin;
    out.increments.assign(increments.begin() + begin * channels, increments.begin() + end * channels);
    return out;
}

}  // namespace lyapflow

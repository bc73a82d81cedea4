#include "lyapflow/config.hpp"
#include "lyapflow/errors.hpp"

#include <doctest.h>

using namespace lyapflow;
using nlohmann::json;

namespace {

json minimal() { return json::parse(R"({"drift": ["-x1"], "diffusion": [["0.5"]]})"); }

}  // namespace

TEST_CASE("defaults") {
    const auto rc = parse_config(minimal());
    CHECK(rc.sim.T == 100.0);
    CHECK(rc.sim.dt == 0.01);
    CHECK(rc.sim.renorm_every == 10);
    CHECK(rc.sim.scheme == Scheme::exponential);
    CHECK(rc.field.dim() == 1);
    CHECK(rc.field.channels() == 1);
    CHECK_FALSE(rc.family);
    CHECK(rc.out_dir == "out");
    CHECK(rc.config_hash.size() == 64);
}

TEST_CASE("overrides replace scalar fields") {
    Overrides ov;
    ov.seed = 9;
    ov.paths = 3;
    ov.out_dir = "elsewhere";
    const auto rc = parse_config(minimal(), ov);
    CHECK(rc.sim.seed == 9);
    CHECK(rc.sim.paths == 3);
    CHECK(rc.out_dir == "elsewhere");
    CHECK(rc.effective["simulation"]["seed"] == 9);
}

TEST_CASE("config hash is canonical") {
    const auto a = parse_config(json::parse(R"({"drift": ["-x1"], "simulation": {"T": 20, "dt": 0.1}})"));
    const auto b = parse_config(json::parse(R"({"simulation": {"dt": 0.1, "T": 20}, "drift": ["-x1"]})"));
    CHECK(a.config_hash == b.config_hash);
    Overrides out;
    out.out_dir = "x";
    out.threads = 3;
    const auto c = parse_config(json::parse(R"({"drift": ["-x1"], "simulation": {"T": 20, "dt": 0.1}})"), out);
    CHECK(a.config_hash == c.config_hash);
    Overrides seed;
    seed.seed = 2;
    const auto d = parse_config(json::parse(R"({"drift": ["-x1"], "simulation": {"T": 20, "dt": 0.1}})"), seed);
    CHECK(a.config_hash != d.config_hash);
    // SHA-256 of the empty object "{}"
    CHECK(config_hash(json::object()) == "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
}

TEST_CASE("config errors") {
    auto bad = [](const char* text) { return parse_config(json::parse(text)); };
    CHECK_THROWS_AS(bad(R"({"diffusion": [["1"]]})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1 +"]})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["y"]})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "typo": 1})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "simulation": {"dt": -1}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "simulation": {"paths": 0}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "simulation": {"scheme": "rk4"}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "simulation": {"seed": -3}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "simulation": {"x0": [1, 2]}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "measure": {"thinning": 0.001}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "experiment": {"p": 2}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "experiment": {"mode": "other"}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "experiment": {"k_list": [0, 1]}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "estimate": {"l": 2}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["x1"], "family": {"kind": "weird"}})"), ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["a*x1"], "params": {"a": 1},
                            "family": {"kind": "property1", "schedule": [{"param": "b", "value": "2", "start": "k", "end": "k+1"}]}})"),
                    ConfigError);
    CHECK_THROWS_AS(bad(R"({"drift": ["a*x1"], "params": {"a": 1},
                            "family": {"kind": "property1", "schedule": [{"param": "a", "value": "2", "start": "k", "end": "k+2"},
                                                                      {"param": "a", "value": "3", "start": "k+1", "end": "k+3"}]}})"),
                    ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/lyapflow.json"), ConfigError);
}

TEST_CASE("family sections") {
    const auto rc = parse_config(json::parse(R"({
        "drift": ["-theta*x1"], "diffusion": [["s"]], "params": {"theta": 1, "s": 0.5},
        "family": {"kind": "parametric", "schedule": {"theta": "1 + 1/k"}},
        "experiment": {"k_list": [4, 1, 2], "p": 3.5, "mode": "holder", "thresholds": {"r2_min": 0.8}}
    })"));
    REQUIRE(rc.family);
    CHECK(rc.family->kind == FamilyKind::parametric);
    CHECK(rc.experiment.p == 3.5);
    CHECK(rc.experiment.mode == "holder");
    CHECK(rc.experiment.thresholds.r2_min == 0.8);
    const auto ec = rc.experiment_config();
    CHECK(ec.thresholds.r2_min == 0.8);
    CHECK(ec.config_hash == rc.config_hash);
}

TEST_CASE("metadata section") {
    const auto rc = parse_config(json::parse(R"({"drift": ["x1"], "metadata": {"K": 1.5, "L": 0, "alpha": 0.5}})"));
    const auto f = rc.field.build();
    REQUIRE(f.metadata().jacobian_bound);
    CHECK(*f.metadata().jacobian_bound == 1.5);
    CHECK(*f.metadata().holder_exponent == 0.5);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"drift": ["x1"], "metadata": {"alpha": 1.5}})")), ConfigError);
}

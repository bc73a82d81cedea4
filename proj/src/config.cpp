#include "lyapflow/config.hpp"

#include "lyapflow/errors.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>

namespace lyapflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.contains(key)) fail(where, "unknown key '" + key + "'");
    }
}

double get_number(const json& obj, const std::string& key, const std::string& where, double fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(where + "." + key, "must be finite");
    return x;
}

int get_int(const json& obj, const std::string& key, const std::string& where, int fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
    return v.get<int>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& where, bool fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    if (!obj.at(key).is_boolean()) fail(where + "." + key, "expected true or false");
    return obj.at(key).get<bool>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& where,
                       const std::string& fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    if (!obj.at(key).is_string()) fail(where + "." + key, "expected a string");
    return obj.at(key).get<std::string>();
}

std::string expression(const json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    fail(where, "expected an expression string or a number");
}

std::vector<std::string> expression_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected a list of expressions");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expression(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::vector<std::string>> channel_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected a list of channels (each a list of d expressions)");
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expression_list(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::optional<Vector> get_vector(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_array() || v.empty()) fail(where + "." + key, "expected a non-empty list of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(where + "." + key, "expected numbers");
        out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
}

template <typename T>
std::vector<T> get_list(const json& obj, const std::string& key, const std::string& where, std::vector<T> fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    const json& v = obj.at(key);
    if (!v.is_array() || v.empty()) fail(where + "." + key, "expected a non-empty list");
    std::vector<T> out;
    for (const auto& x : v) {
        if constexpr (std::is_integral_v<T>) {
            if (!x.is_number_integer()) fail(where + "." + key, "expected integers");
        } else {
            if (!x.is_number()) fail(where + "." + key, "expected numbers");
        }
        out.push_back(x.get<T>());
    }
    return out;
}

const json& section(const json& j, const std::string& key) {
    static const json empty = json::object();
    if (!j.contains(key) || j.at(key).is_null()) return empty;
    return j.at(key);
}

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, text.data(), text.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

FieldSpec parse_field_spec(const json& j) {
    FieldSpec spec;
    if (!j.contains("drift")) fail("config", "missing 'drift'");
    spec.drift = expression_list(j.at("drift"), "drift");
    if (spec.drift.empty()) fail("drift", "needs at least one component");
    if (j.contains("diffusion") && !j.at("diffusion").is_null()) spec.diffusion = channel_list(j.at("diffusion"), "diffusion");
    if (j.contains("params") && !j.at("params").is_null()) {
        const json& p = j.at("params");
        if (!p.is_object()) fail("params", "expected an object of name -> number");
        for (const auto& [name, value] : p.items()) {
            if (!value.is_number()) fail("params." + name, "expected a number");
            spec.params[name] = value.get<double>();
        }
    }
    const json& meta = section(j, "metadata");
    check_keys(meta, "metadata", {"K", "L", "alpha", "allow_nonsmooth"});
    if (meta.contains("K")) spec.options.jacobian_bound = get_number(meta, "K", "metadata", 0.0);
    if (meta.contains("L")) spec.options.lipschitz_seminorm = get_number(meta, "L", "metadata", 0.0);
    if (meta.contains("alpha")) {
        const double a = get_number(meta, "alpha", "metadata", 1.0);
        if (!(a > 0.0 && a <= 1.0)) fail("metadata.alpha", "must lie in (0, 1]");
        spec.options.holder_exponent = a;
    }
    if (spec.options.jacobian_bound && *spec.options.jacobian_bound < 0.0) fail("metadata.K", "must be >= 0");
    spec.options.allow_nonsmooth = get_bool(meta, "allow_nonsmooth", "metadata", false);
    return spec;
}

FamilySpec parse_family_spec(const json& fam, const FieldSpec& base) {
    check_keys(fam, "family", {"kind", "schedule", "drift", "diffusion"});
    FamilySpec spec;
    spec.base = base;
    try {
        spec.kind = family_kind_from_string(get_string(fam, "kind", "family", "parametric"));
    } catch (const InvalidSpecification& e) {
        fail("family.kind", e.what());
    }
    const json& sched = section(fam, "schedule");
    switch (spec.kind) {
        case FamilyKind::parametric:
            if (!sched.is_object() || sched.empty()) {
                fail("family.schedule", "parametric families need an object of parameter -> expression in k");
            }
            for (const auto& [name, value] : sched.items()) spec.parameter_path[name] = expression(value, "family.schedule." + name);
            break;
        case FamilyKind::property1:
            if (!sched.is_array()) fail("family.schedule", "property1 families need a list of bumps");
            for (std::size_t i = 0; i < sched.size(); ++i) {
                const std::string where = "family.schedule[" + std::to_string(i) + "]";
                check_keys(sched[i], where, {"param", "value", "start", "end"});
                Bump b;
                b.param = get_string(sched[i], "param", where, "");
                if (b.param.empty()) fail(where, "missing 'param'");
                for (const char* key : {"value", "start", "end"}) {
                    if (!sched[i].contains(key)) fail(where, std::string("missing '") + key + "'");
                }
                b.value = expression(sched[i].at("value"), where + ".value");
                b.start = expression(sched[i].at("start"), where + ".start");
                b.end = expression(sched[i].at("end"), where + ".end");
                spec.bumps.push_back(std::move(b));
            }
            break;
        case FamilyKind::pointwise:
            if (fam.contains("drift")) spec.member_drift = expression_list(fam.at("drift"), "family.drift");
            if (fam.contains("diffusion")) spec.member_diffusion = channel_list(fam.at("diffusion"), "family.diffusion");
            if (spec.member_drift.empty() && spec.member_diffusion.empty()) {
                fail("family", "pointwise families need 'drift' and/or 'diffusion' expressions in k");
            }
            break;
    }
    return spec;
}

json strip_for_hash(json j) {
    j.erase("output");
    if (j.contains("simulation") && j["simulation"].is_object()) j["simulation"].erase("threads");
    return j;
}

}  // namespace

std::string config_hash(const json& j) { return sha256_hex(strip_for_hash(j).dump()); }

ExperimentConfig RunConfig::experiment_config() const {
    ExperimentConfig cfg;
    cfg.sim = sim;
    cfg.thresholds = experiment.thresholds;
    cfg.x0 = x0;
    cfg.burn_in = measure.burn_in;
    cfg.measure_n = measure.n;
    cfg.thinning = measure.thinning;
    cfg.measure_dt = measure.dt;
    cfg.x_init = measure.x_init;
    cfg.monotonicity_pairs = experiment.monotonicity_pairs;
    cfg.box_radius = experiment.box_radius;
    cfg.config_hash = config_hash;
    return cfg;
}

RunConfig parse_config(json j, const Overrides& ov) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    check_keys(j, "config", {"drift", "diffusion", "params", "metadata", "family", "simulation", "measure",
                             "experiment", "estimate", "verify", "output"});
    if (!j.contains("simulation") || j["simulation"].is_null()) j["simulation"] = json::object();
    if (ov.seed) j["simulation"]["seed"] = *ov.seed;
    if (ov.paths) j["simulation"]["paths"] = *ov.paths;
    if (ov.threads) j["simulation"]["threads"] = *ov.threads;
    if (ov.out_dir || ov.dump_paths) {
        if (!j.contains("output") || j["output"].is_null()) j["output"] = json::object();
        if (ov.out_dir) j["output"]["out_dir"] = *ov.out_dir;
        if (ov.dump_paths) j["output"]["dump_paths"] = true;
    }

    RunConfig rc;
    rc.field = parse_field_spec(j);
    try {
        rc.field.build();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("coefficients: ") + e.what());
    }

    const json& sim = section(j, "simulation");
    check_keys(sim, "simulation",
               {"T", "dt", "paths", "seed", "renorm_every", "scheme", "transient_fraction", "x0", "threads"});
    rc.sim.T = get_number(sim, "T", "simulation", rc.sim.T);
    rc.sim.dt = get_number(sim, "dt", "simulation", rc.sim.dt);
    rc.sim.paths = get_int(sim, "paths", "simulation", rc.sim.paths);
    if (sim.contains("seed")) {
        if (!sim.at("seed").is_number_unsigned()) fail("simulation.seed", "expected a non-negative integer");
        rc.sim.seed = sim.at("seed").get<std::uint64_t>();
    }
    rc.sim.renorm_every = get_int(sim, "renorm_every", "simulation", rc.sim.renorm_every);
    rc.sim.transient_fraction = get_number(sim, "transient_fraction", "simulation", rc.sim.transient_fraction);
    rc.sim.threads = get_int(sim, "threads", "simulation", 0);
    try {
        rc.sim.scheme = scheme_from_string(get_string(sim, "scheme", "simulation", "exponential"));
        rc.sim.validate();
    } catch (const InvalidArgument& e) {
        fail("simulation", e.what());
    }
    if (rc.sim.T < 10.0) rc.warnings.push_back("simulation.T < 10; exponent estimates will be noisy");
    rc.x0 = get_vector(sim, "x0", "simulation");
    if (rc.x0 && rc.x0->size() != rc.field.dim()) fail("simulation.x0", "length must equal the dimension");

    const json& meas = section(j, "measure");
    check_keys(meas, "measure", {"burn_in", "n", "thinning", "dt", "x_init", "many_runs"});
    rc.measure.burn_in = get_number(meas, "burn_in", "measure", rc.measure.burn_in);
    rc.measure.n = get_int(meas, "n", "measure", rc.measure.n);
    rc.measure.thinning = get_number(meas, "thinning", "measure", rc.measure.thinning);
    rc.measure.dt = get_number(meas, "dt", "measure", rc.measure.dt);
    rc.measure.x_init = get_vector(meas, "x_init", "measure");
    rc.measure.many_runs = get_bool(meas, "many_runs", "measure", false);
    if (rc.measure.burn_in < 0.0) fail("measure.burn_in", "must be >= 0");
    if (rc.measure.n < 1) fail("measure.n", "must be >= 1");
    if (!(rc.measure.dt > 0.0)) fail("measure.dt", "must be positive");
    if (rc.measure.thinning < rc.measure.dt) fail("measure.thinning", "must be >= measure.dt");
    if (rc.measure.x_init && rc.measure.x_init->size() != rc.field.dim()) {
        fail("measure.x_init", "length must equal the dimension");
    }

    const json& ex = section(j, "experiment");
    check_keys(ex, "experiment", {"k_list", "p", "mode", "thresholds", "n_max", "monotonicity_pairs", "box_radius"});
    rc.experiment.k_list = get_list<int>(ex, "k_list", "experiment", rc.experiment.k_list);
    for (int k : rc.experiment.k_list) {
        if (k < 1) fail("experiment.k_list", "k values must be >= 1");
    }
    rc.experiment.p = get_number(ex, "p", "experiment", rc.experiment.p);
    rc.experiment.mode = get_string(ex, "mode", "experiment", rc.experiment.mode);
    if (rc.experiment.mode != "lipschitz" && rc.experiment.mode != "holder") {
        fail("experiment.mode", "expected lipschitz or holder");
    }
    if (!(rc.experiment.p > 2.0)) fail("experiment.p", "must be > 2");
    rc.experiment.n_max = get_int(ex, "n_max", "experiment", rc.experiment.n_max);
    if (rc.experiment.n_max < 8) fail("experiment.n_max", "must be >= 8");
    rc.experiment.monotonicity_pairs = get_int(ex, "monotonicity_pairs", "experiment", rc.experiment.monotonicity_pairs);
    if (rc.experiment.monotonicity_pairs < 100) fail("experiment.monotonicity_pairs", "must be >= 100");
    rc.experiment.box_radius = get_number(ex, "box_radius", "experiment", rc.experiment.box_radius);
    if (!(rc.experiment.box_radius > 0.0)) fail("experiment.box_radius", "must be positive");
    const json& th = section(ex, "thresholds");
    check_keys(th, "experiment.thresholds", {"slope_factor", "r2_min", "se_multiplier", "gap_floor", "decay_ratio"});
    Thresholds& t = rc.experiment.thresholds;
    t.slope_factor = get_number(th, "slope_factor", "experiment.thresholds", t.slope_factor);
    t.r2_min = get_number(th, "r2_min", "experiment.thresholds", t.r2_min);
    t.se_multiplier = get_number(th, "se_multiplier", "experiment.thresholds", t.se_multiplier);
    t.gap_floor = get_number(th, "gap_floor", "experiment.thresholds", t.gap_floor);
    t.decay_ratio = get_number(th, "decay_ratio", "experiment.thresholds", t.decay_ratio);
    if (t.slope_factor < 1.0 || t.r2_min < 0.0 || t.r2_min > 1.0 || t.se_multiplier < 0.0 || t.gap_floor < 0.0 ||
        t.decay_ratio < 0.0 || t.decay_ratio > 1.0) {
        fail("experiment.thresholds", "out of range");
    }

    const json& est = section(j, "estimate");
    check_keys(est, "estimate", {"method", "l", "samples"});
    rc.estimate.method = get_string(est, "method", "estimate", rc.estimate.method);
    if (rc.estimate.method != "wedge" && rc.estimate.method != "furstenberg") {
        fail("estimate.method", "expected wedge or furstenberg");
    }
    rc.estimate.l = get_int(est, "l", "estimate", rc.estimate.l);
    if (rc.estimate.l < 1 || rc.estimate.l > rc.field.dim()) fail("estimate.l", "must lie in [1, d]");
    rc.estimate.samples = get_int(est, "samples", "estimate", rc.estimate.samples);
    if (rc.estimate.samples < 1) fail("estimate.samples", "must be >= 1");

    const json& ver = section(j, "verify");
    check_keys(ver, "verify", {"monotonicity_pairs", "box_radius", "contraction", "subadditivity", "moment"});
    VerifySettings& v = rc.verify;
    v.monotonicity_pairs = get_int(ver, "monotonicity_pairs", "verify", v.monotonicity_pairs);
    if (v.monotonicity_pairs < 100) fail("verify.monotonicity_pairs", "must be >= 100");
    v.box_radius = get_number(ver, "box_radius", "verify", v.box_radius);
    if (!(v.box_radius > 0.0)) fail("verify.box_radius", "must be positive");
    const json& con = section(ver, "contraction");
    check_keys(con, "verify.contraction", {"t_list", "pairs", "paths", "lambda", "dt"});
    v.contraction_t = get_list<double>(con, "t_list", "verify.contraction", v.contraction_t);
    v.contraction_pairs = get_int(con, "pairs", "verify.contraction", v.contraction_pairs);
    v.contraction_paths = get_int(con, "paths", "verify.contraction", v.contraction_paths);
    if (con.contains("lambda") && !con.at("lambda").is_null()) {
        v.contraction_lambda = get_number(con, "lambda", "verify.contraction", 0.0);
    }
    v.contraction_dt = get_number(con, "dt", "verify.contraction", v.contraction_dt);
    const json& sub = section(ver, "subadditivity");
    check_keys(sub, "verify.subadditivity", {"l_list", "m", "n", "trials", "dt"});
    v.subadditivity_l = get_list<int>(sub, "l_list", "verify.subadditivity", v.subadditivity_l);
    v.subadditivity_m = get_int(sub, "m", "verify.subadditivity", v.subadditivity_m);
    v.subadditivity_n = get_int(sub, "n", "verify.subadditivity", v.subadditivity_n);
    v.subadditivity_trials = get_int(sub, "trials", "verify.subadditivity", v.subadditivity_trials);
    v.subadditivity_dt = get_number(sub, "dt", "verify.subadditivity", v.subadditivity_dt);
    const json& mom = section(ver, "moment");
    check_keys(mom, "verify.moment", {"t_list", "paths", "dt"});
    v.moment_t = get_list<double>(mom, "t_list", "verify.moment", v.moment_t);
    v.moment_paths = get_int(mom, "paths", "verify.moment", v.moment_paths);
    v.moment_dt = get_number(mom, "dt", "verify.moment", v.moment_dt);
    if (v.contraction_pairs < 1 || v.contraction_paths < 1 || v.subadditivity_m < 1 || v.subadditivity_n < 1 ||
        v.subadditivity_trials < 1 || v.moment_paths < 2 || !(v.contraction_dt > 0.0) ||
        !(v.subadditivity_dt > 0.0) || !(v.moment_dt > 0.0)) {
        fail("verify", "counts must be positive and step sizes > 0");
    }
    for (int l : v.subadditivity_l) {
        if (l < 1 || l > rc.field.dim()) fail("verify.subadditivity.l_list", "entries must lie in [1, d]");
    }
    for (double tt : v.contraction_t) {
        if (!(tt > 0.0)) fail("verify.contraction.t_list", "times must be positive");
    }
    for (double tt : v.moment_t) {
        if (!(tt > 0.0)) fail("verify.moment.t_list", "times must be positive");
    }

    if (j.contains("family") && !j.at("family").is_null()) {
        rc.family = parse_family_spec(j.at("family"), rc.field);
        try {
            build_perturbation_family(*rc.family, rc.experiment.k_list);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("family: ") + e.what());
        }
    }

    const json& out = section(j, "output");
    check_keys(out, "output", {"out_dir", "dump_paths"});
    rc.out_dir = get_string(out, "out_dir", "output", "out");
    rc.dump_paths = get_bool(out, "dump_paths", "output", false);

    rc.effective = std::move(j);
    rc.config_hash = config_hash(rc.effective);
    return rc;
}

RunConfig load_config(const std::filesystem::path& file, const Overrides& overrides) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot read config file " + file.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(std::move(j), overrides);
}

}  // namespace lyapflow

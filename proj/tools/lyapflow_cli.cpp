// lyapflow command-line driver.
//
// Exit codes: 0 success, 1 I/O or internal error, 2 configuration error,
// 3 numerical failure, 4 non-consistent verdict or failed check under --strict.

#include "lyapflow/config.hpp"
#include "lyapflow/errors.hpp"
#include "lyapflow/lab.hpp"
#include "lyapflow/lyapunov.hpp"
#include "lyapflow/measure.hpp"
#include "lyapflow/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lyapflow;

namespace {

struct Args {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<std::string> out;
    std::optional<int> threads;
    bool strict = false;
    bool dump_paths = false;
};

void log(const std::string& msg) { std::cerr << "[lyapflow] " << msg << "\n"; }

RunConfig load(const Args& a) {
    Overrides ov;
    ov.seed = a.seed;
    ov.paths = a.paths;
    ov.out_dir = a.out;
    ov.threads = a.threads;
    ov.dump_paths = a.dump_paths;
    if (a.threads && *a.threads < 1) throw ConfigError("--threads must be >= 1");
    RunConfig rc = load_config(a.config, ov);
    for (const auto& w : rc.warnings) log("warning: " + w);
    std::error_code ec;
    fs::create_directories(rc.out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + rc.out_dir.string() + ": " + ec.message());
    return rc;
}

/// x0 sampler for estimators: config x0, else the sampled invariant measure
/// for nonlinear autonomous fields, else the all-ones vector.
X0Sampler make_sampler(const RunConfig& rc, const CoefficientField& f) {
    if (rc.x0) return X0Sampler::fixed(*rc.x0);
    if (f.metadata().autonomous && !f.metadata().linear_in_x) {
        MeasureOptions mo;
        mo.scheme = rc.sim.scheme;
        mo.field_hash = rc.config_hash;
        mo.many_runs = rc.measure.many_runs;
        mo.threads = rc.sim.threads;
        const Vector init = rc.measure.x_init ? *rc.measure.x_init : Vector::Zero(f.dim());
        return X0Sampler::from_measure(sample_invariant_measure(f, rc.measure.burn_in, rc.measure.n,
                                                                rc.measure.thinning, rc.measure.dt, rc.sim.seed,
                                                                init, mo));
    }
    return X0Sampler::fixed(Vector::Ones(f.dim()));
}

void dump_path(const RunConfig& rc, const CoefficientField& f, const X0Sampler& sampler) {
    if (!rc.dump_paths) return;
    const BrownianPath path = sample_brownian(rc.sim.seed, 0, rc.sim.T, rc.sim.dt, f.channels());
    TangentFrames frames;
    try {
        frames = integrate_tangent(f, sampler.draw(rc.sim.seed, 0), path, rc.sim.scheme);
    } catch (const NumericalError& e) {
        log(std::string("warning: path dump skipped, the unrenormalized flow failed: ") + e.what());
        return;
    }
    write_trajectory_csv(frames, rc.out_dir / "path_0.csv", rc.config_hash);
    log("wrote " + (rc.out_dir / "path_0.csv").string());
}

int cmd_spectrum(const Args& a) {
    const RunConfig rc = load(a);
    const CoefficientField f = rc.field.build();
    const X0Sampler sampler = make_sampler(rc, f);
    LyapunovEstimate est = estimate_spectrum_qr(f, sampler, rc.sim);
    est.config_hash = rc.config_hash;
    write_json(to_json(est), rc.out_dir / "estimate.json");
    log("wrote " + (rc.out_dir / "estimate.json").string());
    dump_path(rc, f, sampler);
    return 0;
}

int cmd_estimate(const Args& a) {
    const RunConfig rc = load(a);
    const CoefficientField f = rc.field.build();
    json j;
    j["method"] = rc.estimate.method;
    j["l"] = rc.estimate.l;
    j["seed"] = rc.sim.seed;
    j["config_hash"] = rc.config_hash;
    j["dt"] = rc.sim.dt;
    if (rc.estimate.method == "wedge") {
        const X0Sampler sampler = make_sampler(rc, f);
        const ScalarEstimate e = estimate_wedge_sum(f, rc.estimate.l, sampler, rc.sim);
        j["value"] = e.value;
        j["standard_error"] = e.standard_error;
        j["paths"] = e.paths;
        j["T"] = rc.sim.T;
        j["converged"] = e.converged;
        j["fixed_x0"] = sampler.is_fixed();
        dump_path(rc, f, sampler);
    } else {
        if (!f.metadata().autonomous) throw PreconditionError("furstenberg estimate needs an autonomous field");
        MeasureOptions mo;
        mo.scheme = rc.sim.scheme;
        mo.field_hash = rc.config_hash;
        mo.many_runs = rc.measure.many_runs;
        mo.threads = rc.sim.threads;
        const Vector init = rc.measure.x_init ? *rc.measure.x_init : Vector::Zero(f.dim());
        const EmpiricalMeasure mu = sample_invariant_measure(f, rc.measure.burn_in, rc.measure.n, rc.measure.thinning,
                                                             rc.measure.dt, rc.sim.seed, init, mo);
        const ScalarEstimate e = furstenberg_estimate(f, mu, rc.estimate.l, rc.estimate.samples, rc.sim.dt,
                                                      rc.sim.seed, rc.sim.scheme, rc.sim.threads);
        j["value"] = e.value;
        j["standard_error"] = e.standard_error;
        j["samples"] = e.paths;
        j["measure_stationary"] = mu.stationary;
    }
    j["standard_error_note"] = "path-wise only; autocorrelation within a path is not corrected";
    write_json(j, rc.out_dir / "estimate.json");
    log("wrote " + (rc.out_dir / "estimate.json").string());
    return 0;
}

int cmd_measure(const Args& a) {
    const RunConfig rc = load(a);
    const CoefficientField f = rc.field.build();
    MeasureOptions mo;
    mo.scheme = rc.sim.scheme;
    mo.field_hash = rc.config_hash;
    mo.many_runs = rc.measure.many_runs;
    mo.threads = rc.sim.threads;
    const Vector init = rc.measure.x_init ? *rc.measure.x_init : Vector::Zero(f.dim());
    const EmpiricalMeasure mu = sample_invariant_measure(f, rc.measure.burn_in, rc.measure.n, rc.measure.thinning,
                                                         rc.measure.dt, rc.sim.seed, init, mo);
    write_measure_csv(mu, rc.out_dir / "measure.csv", rc.config_hash);
    write_json(measure_sidecar(mu, rc.config_hash), rc.out_dir / "measure.json");
    if (!mu.stationary) log("warning: half-split stationarity check failed; consider a longer burn-in");
    log("wrote " + (rc.out_dir / "measure.csv").string());
    return 0;
}

int verdict_exit(const Args& a, Verdict v) {
    if (a.strict && v != Verdict::consistent) return 4;
    return 0;
}

int cmd_continuity(const Args& a) {
    const RunConfig rc = load(a);
    if (!rc.family) throw ConfigError("continuity needs a 'family' section");
    const PerturbationFamily fam = build_perturbation_family(*rc.family, rc.experiment.k_list);
    const ExperimentReport report = run_continuity_experiment(fam, rc.experiment.k_list, rc.experiment_config());
    emit_report(report, rc.out_dir);
    log(std::string("verdict: ") + to_string(report.verdict) + "; wrote " + (rc.out_dir / "report.json").string());
    return verdict_exit(a, report.verdict);
}

int cmd_lipschitz(const Args& a) {
    const RunConfig rc = load(a);
    if (!rc.family) throw ConfigError("lipschitz needs a 'family' section");
    const PerturbationFamily fam = build_perturbation_family(*rc.family, rc.experiment.k_list);
    const ExperimentReport report = run_lipschitz_experiment(fam, rc.experiment.p, rc.experiment.k_list,
                                                             rc.experiment_config(), rc.experiment.mode == "holder");
    emit_report(report, rc.out_dir);
    log(std::string("verdict: ") + to_string(report.verdict) + "; wrote " + (rc.out_dir / "report.json").string());
    return verdict_exit(a, report.verdict);
}

int cmd_verify(const Args& a) {
    const RunConfig rc = load(a);
    const CoefficientField f = rc.field.build();
    const VerifySettings& v = rc.verify;
    json out;
    out["config_hash"] = rc.config_hash;
    json skipped = json::array();
    bool all_pass = true;

    std::optional<double> lambda = v.contraction_lambda;
    if (f.metadata().autonomous) {
        const MonotonicityReport mono = check_monotonicity(f, v.monotonicity_pairs, v.box_radius, rc.sim.seed);
        json m;
        m["sup_q"] = mono.worst_value;
        m["holds_with_lambda"] = mono.holds_with_lambda ? json(*mono.holds_with_lambda) : json(nullptr);
        m["pass"] = mono.holds_with_lambda.has_value();
        out["monotonicity"] = m;
        all_pass = all_pass && mono.holds_with_lambda.has_value();
        if (!lambda) lambda = mono.holds_with_lambda;
    } else {
        skipped.push_back("monotonicity and contraction: field is not autonomous");
    }

    if (f.metadata().autonomous && lambda) {
        ContractionOptions co;
        co.dt = v.contraction_dt;
        co.scheme = rc.sim.scheme;
        co.threads = rc.sim.threads;
        const auto pairs = sample_pairs(f.dim(), v.contraction_pairs, v.box_radius, rc.sim.seed);
        json rows = json::array();
        for (const auto& r : check_contraction(f, pairs, v.contraction_t, v.contraction_paths, *lambda, rc.sim.seed, co)) {
            rows.push_back({{"t", r.t}, {"ratio", r.ratio}, {"upper_confidence", r.upper_confidence},
                            {"bound", r.bound}, {"pass", r.pass}});
            all_pass = all_pass && r.pass;
        }
        out["contraction"] = {{"lambda", *lambda}, {"rows", rows}};
    } else if (f.metadata().autonomous) {
        skipped.push_back("contraction: no monotonicity certificate and no verify.contraction.lambda");
    }

    if (f.has_jacobian()) {
        SubadditivityOptions so;
        so.dt = v.subadditivity_dt;
        so.scheme = rc.sim.scheme;
        so.threads = rc.sim.threads;
        json rows = json::array();
        for (int l : v.subadditivity_l) {
            const double worst =
                check_subadditivity(f, l, v.subadditivity_m, v.subadditivity_n, v.subadditivity_trials, rc.sim.seed, so);
            const bool pass = worst <= 1e-10;
            rows.push_back({{"l", l}, {"max_violation", worst}, {"pass", pass}});
            all_pass = all_pass && pass;
        }
        out["subadditivity"] = {{"m", v.subadditivity_m}, {"n", v.subadditivity_n},
                                {"trials", v.subadditivity_trials}, {"rows", rows}};
    } else {
        skipped.push_back("subadditivity: field has no Jacobian");
    }

    if (f.metadata().jacobian_bound && f.channels() <= 1) {
        json rows = json::array();
        for (const auto& r : check_moment_bound(f, v.moment_t, v.moment_paths, rc.sim.seed, v.moment_dt,
                                                rc.sim.scheme, rc.sim.threads)) {
            rows.push_back({{"t", r.t}, {"empirical", r.empirical}, {"upper_confidence", r.upper_confidence},
                            {"bound", r.bound}, {"pass", r.pass}});
            all_pass = all_pass && r.pass;
        }
        out["moment"] = {{"K", *f.metadata().jacobian_bound}, {"rows", rows}};
    } else {
        skipped.push_back("moment bound: needs a declared K and at most one channel");
    }

    out["skipped"] = skipped;
    out["all_pass"] = all_pass;
    write_json(out, rc.out_dir / "verify.json");
    log(std::string("verify: ") + (all_pass ? "all checks pass" : "some checks failed") + "; wrote " +
        (rc.out_dir / "verify.json").string());
    return (a.strict && !all_pass) ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lyapflow: Lyapunov spectra of SDEs and coefficient-continuity experiments"};
    app.require_subcommand(1);
    Args args;
    std::function<int(const Args&)> action;

    struct Entry {
        const char* name;
        const char* help;
        int (*fn)(const Args&);
    };
    const Entry entries[] = {
        {"estimate", "wedge-sum or Furstenberg estimate of the sum of the top l exponents", cmd_estimate},
        {"spectrum", "full spectrum by the renormalized QR method", cmd_spectrum},
        {"measure", "sample the invariant measure", cmd_measure},
        {"continuity", "exponent gaps along a coefficient family", cmd_continuity},
        {"lipschitz", "Lipschitz or Holder modulus experiment", cmd_lipschitz},
        {"verify", "monotonicity, contraction, subadditivity and moment checks", cmd_verify},
    };
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", args.config, "experiment JSON config")->required();
        sub->add_option("--seed", args.seed, "override simulation.seed");
        sub->add_option("--paths", args.paths, "override simulation.paths");
        sub->add_option("--out", args.out, "override output.out_dir");
        sub->add_option("--threads", args.threads, "cap worker threads (results do not depend on it)");
        sub->add_flag("--strict", args.strict, "exit 4 unless the verdict is consistent");
        sub->add_flag("--dump-paths", args.dump_paths, "also write the first path's trajectory and Jacobians");
        auto fn = e.fn;
        sub->callback([&action, fn] { action = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        return action(args);
    } catch (const ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return 2;
    } catch (const PreconditionError& e) {
        log(std::string("precondition failed: ") + e.what());
        return 2;
    } catch (const NumericalError& e) {
        log(std::string("numerical failure: ") + e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        log(std::string("invalid input: ") + e.what());
        return 2;
    } catch (const ParseError& e) {
        log(std::string("expression error: ") + e.what());
        return 2;
    } catch (const NameError& e) {
        log(std::string("expression error: ") + e.what());
        return 2;
    } catch (const UnsupportedExpression& e) {
        log(std::string("expression error: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log(std::string("error: ") + e.what());
        return 1;
    }
}

#pragma once

#include "lyapflow/family.hpp"
#include "lyapflow/lab.hpp"
#include "lyapflow/lyapunov.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lyapflow {

struct MeasureSettings {
    double burn_in = 10.0;
    int n = 2000;
    double thinning = 0.5;
    double dt = 1e-2;
    std::optional<Vector> x_init;
    bool many_runs = false;
};

struct ExperimentSettings {
    std::vector<int> k_list{1, 2, 4, 8};
    double p = 3.0;
    std::string mode = "lipschitz";  // lipschitz | holder
    Thresholds thresholds;
    int n_max = 10000;
    int monotonicity_pairs = 2000;
    double box_radius = 3.0;
};

struct EstimateSettings {
    std::string method = "wedge";  // wedge | furstenberg
    int l = 1;
    int samples = 10000;
};

struct VerifySettings {
    int monotonicity_pairs = 1000;
    double box_radius = 3.0;
    std::vector<double> contraction_t{0.5, 1.0, 2.0};
    int contraction_pairs = 64;
    int contraction_paths = 16;
    std::optional<double> contraction_lambda;
    double contraction_dt = 1e-3;
    std::vector<int> subadditivity_l{1};
    int subadditivity_m = 5;
    int subadditivity_n = 5;
    int subadditivity_trials = 100;
    double subadditivity_dt = 1e-2;
    std::vector<double> moment_t{0.5, 1.0, 2.0};
    int moment_paths = 256;
    double moment_dt = 1e-3;
};

/// Command-line values that replace scalar config fields.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> paths;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    bool dump_paths = false;
};

struct RunConfig {
    nlohmann::json effective;  // config after overrides
    std::string config_hash;
    FieldSpec field;
    std::optional<FamilySpec> family;
    SimConfig sim;
    std::optional<Vector> x0;
    MeasureSettings measure;
    ExperimentSettings experiment;
    EstimateSettings estimate;
    VerifySettings verify;
    std::filesystem::path out_dir = "out";
    bool dump_paths = false;
    std::vector<std::string> warnings;

    ExperimentConfig experiment_config() const;
};

/// Parses and validates a config; every problem becomes a ConfigError.
RunConfig parse_config(nlohmann::json j, const Overrides& overrides = {});
RunConfig load_config(const std::filesystem::path& file, const Overrides& overrides = {});

/// SHA-256 (hex) of the sorted-key compact dump of `j` without the
/// `output` section and `simulation.threads`.
std::string config_hash(const nlohmann::json& j);

}  // namespace lyapflow

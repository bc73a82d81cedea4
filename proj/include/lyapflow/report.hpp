#pragma once

#include "lyapflow/lab.hpp"
#include "lyapflow/lyapunov.hpp"
#include "lyapflow/measure.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace lyapflow {

nlohmann::json to_json(const LyapunovEstimate& est);
nlohmann::json to_json(const ExperimentReport& report);
nlohmann::json measure_sidecar(const EmpiricalMeasure& mu, const std::string& config_hash);

/// Pretty-printed JSON with a trailing newline. Keys are sorted, so equal
/// content gives equal bytes.
void write_json(const nlohmann::json& j, const std::filesystem::path& file);

/// %.17g, or "nan"/"inf"/"-inf".
std::string format_double(double v);

}  // namespace lyapflow

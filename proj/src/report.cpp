#include "lyapflow/report.hpp"

#include "lyapflow/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lyapflow {

namespace {

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

nlohmann::json numbers(const std::vector<double>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (double x : v) out.push_back(number_or_null(x));
    return out;
}

std::ofstream open_for_write(const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    return os;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json to_json(const LyapunovEstimate& est) {
    nlohmann::json j;
    j["exponents"] = numbers(est.exponents);
    j["standard_errors"] = numbers(est.standard_errors);
    j["method"] = est.method;
    j["T"] = est.T;
    j["dt"] = est.dt;
    j["paths"] = est.paths;
    j["seed"] = est.seed;
    j["config_hash"] = est.config_hash;
    j["converged"] = est.converged;
    j["fixed_x0"] = est.fixed_x0;
    j["ordering_violations"] = est.ordering_violations;
    j["restarts"] = est.restarts;
    j["standard_error_note"] = "path-wise only; autocorrelation within a path is not corrected";
    return j;
}

nlohmann::json to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["kind"] = to_string(report.kind);
    j["dim"] = report.dim;
    j["config_hash"] = report.config_hash;
    j["verdict"] = to_string(report.verdict);
    j["thresholds"] = {{"slope_factor", report.thresholds.slope_factor},
                       {"r2_min", report.thresholds.r2_min},
                       {"se_multiplier", report.thresholds.se_multiplier},
                       {"gap_floor", report.thresholds.gap_floor},
                       {"decay_ratio", report.thresholds.decay_ratio}};
    j["base"] = to_json(report.base);
    if (report.kind == ExperimentKind::lipschitz || report.kind == ExperimentKind::holder) j["p"] = report.p;
    j["declared_alpha"] = report.declared_alpha ? nlohmann::json(*report.declared_alpha) : nlohmann::json(nullptr);
    j["monotonicity_lambda"] =
        report.monotonicity_lambda ? nlohmann::json(*report.monotonicity_lambda) : nlohmann::json(nullptr);
    if (report.fit) {
        j["fit"] = {{"slope", number_or_null(report.fit->slope)},
                    {"exponent", number_or_null(report.fit->exponent)},
                    {"coefficient", number_or_null(report.fit->coefficient)},
                    {"r2", number_or_null(report.fit->r2)},
                    {"loglog_r2", number_or_null(report.fit->loglog_r2)},
                    {"points", report.fit->points}};
    } else {
        j["fit"] = nullptr;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row;
        row["k"] = r.k;
        row["distance"] = number_or_null(r.distance);
        row["distance_norm"] = r.distance_norm;
        row["gaps"] = numbers(r.gaps);
        row["standard_errors"] = numbers(r.standard_errors);
        row["weak_distance"] = number_or_null(r.weak_distance);
        row["converged"] = r.converged;
        row["failed"] = r.failed;
        if (r.failed) row["failure"] = r.failure;
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    j["notes"] = report.notes;
    return j;
}

nlohmann::json measure_sidecar(const EmpiricalMeasure& mu, const std::string& config_hash) {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["n"] = mu.size();
    j["dim"] = mu.dim();
    j["burn_in"] = mu.provenance.burn_in;
    j["thinning"] = mu.provenance.thinning;
    j["seed"] = mu.provenance.seed;
    j["field_hash"] = mu.provenance.field_hash;
    j["stationary"] = mu.stationary;
    std::vector<double> mean(static_cast<std::size_t>(mu.dim())), var(static_cast<std::size_t>(mu.dim()));
    for (int i = 0; i < mu.dim(); ++i) {
        const double m = mu.weights.dot(mu.points.col(i));
        mean[static_cast<std::size_t>(i)] = m;
        var[static_cast<std::size_t>(i)] = mu.weights.dot((mu.points.col(i).array() - m).square().matrix());
    }
    j["mean"] = numbers(mean);
    j["variance"] = numbers(var);
    return j;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& file) {
    auto os = open_for_write(file);
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("failed writing " + file.string());
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
    write_json(to_json(report), out_dir / "report.json");

    const int d = report.dim;
    {
        auto os = open_for_write(out_dir / "rows.csv");
        os << "k,distance";
        for (int i = 1; i <= d; ++i) os << ",gap_" << i;
        for (int i = 1; i <= d; ++i) os << ",se_" << i;
        os << ",weak_distance,converged,config_hash\n";
        for (const auto& r : report.rows) {
            os << r.k << "," << format_double(r.distance);
            for (int i = 0; i < d; ++i) os << "," << format_double(r.gaps[static_cast<std::size_t>(i)]);
            for (int i = 0; i < d; ++i) os << "," << format_double(r.standard_errors[static_cast<std::size_t>(i)]);
            os << "," << format_double(r.weak_distance) << "," << (r.converged ? "true" : "false") << ","
               << report.config_hash << "\n";
        }
        if (!os) throw std::runtime_error("failed writing " + (out_dir / "rows.csv").string());
    }
    {
        auto os = open_for_write(out_dir / "plotdata.csv");
        os << "k,log_distance,log_gap,config_hash\n";
        for (const auto& r : report.rows) {
            if (r.failed) continue;
            double y = 0.0;
            for (double g : r.gaps) y = std::max(y, g);
            if (r.distance > 0.0 && y > 0.0) {
                os << r.k << "," << format_double(std::log(r.distance)) << "," << format_double(std::log(y)) << ","
                   << report.config_hash << "\n";
            }
        }
        if (!os) throw std::runtime_error("failed writing " + (out_dir / "plotdata.csv").string());
    }
}

std::vector<ExperimentRow> read_rows_csv(const std::filesystem::path& file, int dim) {
    std::ifstream is(file);
    if (!is) throw std::runtime_error("cannot open " + file.string());
    std::string line;
    std::getline(is, line);
    std::vector<ExperimentRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != 2 * dim + 5) {
            throw InvalidArgument(file.string() + ": expected " + std::to_string(2 * dim + 5) + " columns");
        }
        ExperimentRow r;
        r.k = std::stoi(cells[0]);
        r.distance = std::strtod(cells[1].c_str(), nullptr);
        for (int i = 0; i < dim; ++i) r.gaps.push_back(std::strtod(cells[2 + i].c_str(), nullptr));
        for (int i = 0; i < dim; ++i) r.standard_errors.push_back(std::strtod(cells[2 + dim + i].c_str(), nullptr));
        r.weak_distance = std::strtod(cells[2 + 2 * dim].c_str(), nullptr);
        r.converged = cells[3 + 2 * dim] == "true";
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace lyapflow

#ifndef STATLIN_ARTIFACTS_HPP
#define STATLIN_ARTIFACTS_HPP

#include "statlin/ocp.hpp"
#include "statlin/sde.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace statlin {

inline constexpr const char* kCsvSchemaLine = "# statlin-plan v1";

/// Writes via a temporary file in the same directory plus rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    Eigen::Index column_index(const std::string& name) const;
};

std::string to_csv(const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// t, mean components, covariance upper triangle (row-major).
CsvTable belief_trajectory_table(const BeliefTrajectory& traj);
/// t, ensemble mean, covariance upper triangle.
CsvTable ensemble_stats_table(const EnsembleStats& stats);
/// t, mean_rel_err, cov_rel_err.
CsvTable relative_errors_table(const std::vector<double>& times,
                               const std::vector<double>& mean_err,
                               const std::vector<double>& cov_err);
/// Node times and per-interval decision controls plus the realized control
/// norm at the mean state (the final row repeats the last interval's value).
CsvTable control_table(const ControlTrajectory& ctrl,
                       const std::vector<double>& norms);
/// Rebuilds the piecewise-constant control written by control_table.
ControlTrajectory control_from_table(const CsvTable& table, int control_dim);
/// Long-format sample paths: t, path, state components.
CsvTable paths_sample_table(const std::vector<double>& times,
                            const std::vector<std::vector<StateVector>>& paths);

/// Minimal structural validation covering the subset of JSON Schema used by
/// schemas/report.schema.json (type, required, properties, items, bounds).
/// Returns an empty string when valid, else the first violation found.
std::string validate_against_schema(const nlohmann::json& value,
                                    const nlohmann::json& schema);

}  // namespace statlin

#endif

#include "statlin/artifacts.hpp"

#include <cinttypes>
#include <cstdlib>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace statlin {

namespace {

std::string format_value(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

}  // namespace

void atomic_write(const std::filesystem::path& path,
                  const std::string& content) {
    std::filesystem::path dir = path.parent_path();
    if (dir.empty()) dir = ".";
    std::filesystem::create_directories(dir);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        }
        out << content;
        if (!out.good()) {
            throw std::runtime_error("atomic_write: write failed for " +
                                     tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Eigen::Index CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw std::invalid_argument("csv: no column named " + name);
}

std::string to_csv(const CsvTable& table) {
    std::ostringstream out;
    out << kCsvSchemaLine << "\n";
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out << ',';
        out << table.columns[i];
    }
    out << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw std::invalid_argument("csv: ragged row");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_value(row[i]);
        }
        out << "\n";
    }
    return out.str();
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path.string());
    CsvTable table;
    std::string line;
    bool have_header = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            table.columns = cells;
            have_header = true;
            continue;
        }
        std::vector<double> values;
        values.reserve(cells.size());
        for (const auto& c : cells) {
            try {
                values.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw std::runtime_error("csv: bad number '" + c + "' at line " +
                                         std::to_string(line_no) + " of " +
                                         path.string());
            }
        }
        if (values.size() != table.columns.size()) {
            throw std::runtime_error("csv: ragged row at line " +
                                     std::to_string(line_no) + " of " +
                                     path.string());
        }
        table.rows.push_back(std::move(values));
    }
    if (!have_header) {
        throw std::runtime_error("csv: missing header in " + path.string());
    }
    return table;
}

CsvTable belief_trajectory_table(const BeliefTrajectory& traj) {
    CsvTable table;
    const Eigen::Index n = traj.beliefs.front().dim();
    table.columns.push_back("t");
    for (Eigen::Index i = 0; i < n; ++i) {
        table.columns.push_back("m" + std::to_string(i + 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            table.columns.push_back("P" + std::to_string(i + 1) + "_" +
                                    std::to_string(j + 1));
        }
    }
    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::vector<double> row;
        row.push_back(traj.times[k]);
        const Matrix cov = psd_projected(traj.beliefs[k].cov);
        for (Eigen::Index i = 0; i < n; ++i) row.push_back(traj.beliefs[k].mean[i]);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) row.push_back(cov(i, j));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

CsvTable ensemble_stats_table(const EnsembleStats& stats) {
    CsvTable table;
    const Eigen::Index n = stats.mean.front().size();
    table.columns.push_back("t");
    for (Eigen::Index i = 0; i < n; ++i) {
        table.columns.push_back("m" + std::to_string(i + 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            table.columns.push_back("P" + std::to_string(i + 1) + "_" +
                                    std::to_string(j + 1));
        }
    }
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        std::vector<double> row;
        row.push_back(stats.times[k]);
        for (Eigen::Index i = 0; i < n; ++i) row.push_back(stats.mean[k][i]);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) row.push_back(stats.cov[k](i, j));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

CsvTable relative_errors_table(const std::vector<double>& times,
                               const std::vector<double>& mean_err,
                               const std::vector<double>& cov_err) {
    CsvTable table;
    table.columns = {"t", "mean_rel_err", "cov_rel_err"};
    for (std::size_t k = 0; k < times.size(); ++k) {
        table.rows.push_back({times[k], mean_err[k], cov_err[k]});
    }
    return table;
}

CsvTable control_table(const ControlTrajectory& ctrl,
                       const std::vector<double>& norms) {
    if (ctrl.mode() != ControlTrajectory::Mode::piecewise_constant) {
        throw std::invalid_argument("control_table: expects piecewise-constant");
    }
    if (norms.size() != ctrl.nodes().size()) {
        throw std::invalid_argument("control_table: norm column size mismatch");
    }
    CsvTable table;
    const Eigen::Index k = ctrl.dim();
    table.columns.push_back("t");
    for (Eigen::Index i = 0; i < k; ++i) {
        table.columns.push_back("u" + std::to_string(i + 1));
    }
    table.columns.push_back("norm_u");
    for (std::size_t node = 0; node < ctrl.nodes().size(); ++node) {
        std::vector<double> row;
        row.push_back(ctrl.nodes()[node]);
        const ControlVector& u =
            ctrl.values()[std::min(node, ctrl.values().size() - 1)];
        for (Eigen::Index i = 0; i < k; ++i) row.push_back(u[i]);
        row.push_back(norms[node]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

ControlTrajectory control_from_table(const CsvTable& table, int control_dim) {
    const Eigen::Index t_col = table.column_index("t");
    std::vector<Eigen::Index> u_cols;
    for (int i = 0; i < control_dim; ++i) {
        u_cols.push_back(table.column_index("u" + std::to_string(i + 1)));
    }
    if (table.rows.size() < 2) {
        throw std::runtime_error("control table needs at least two rows");
    }
    std::vector<double> nodes;
    std::vector<ControlVector> values;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        nodes.push_back(table.rows[r][t_col]);
        if (r + 1 < table.rows.size()) {
            ControlVector u(control_dim);
            for (int i = 0; i < control_dim; ++i) u[i] = table.rows[r][u_cols[i]];
            values.push_back(std::move(u));
        }
    }
    return ControlTrajectory(std::move(nodes), std::move(values),
                             ControlTrajectory::Mode::piecewise_constant);
}

CsvTable paths_sample_table(const std::vector<double>& times,
                            const std::vector<std::vector<StateVector>>& paths) {
    CsvTable table;
    if (paths.empty()) {
        table.columns = {"t", "path"};
        return table;
    }
    const Eigen::Index n = paths.front().front().size();
    table.columns.push_back("t");
    table.columns.push_back("path");
    for (Eigen::Index i = 0; i < n; ++i) {
        table.columns.push_back("x" + std::to_string(i + 1));
    }
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (std::size_t k = 0; k < times.size(); ++k) {
            std::vector<double> row;
            row.push_back(times[k]);
            row.push_back(static_cast<double>(p));
            for (Eigen::Index i = 0; i < n; ++i) row.push_back(paths[p][k][i]);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

namespace {

std::string type_name(const nlohmann::json& v) {
    if (v.is_object()) return "object";
    if (v.is_array()) return "array";
    if (v.is_string()) return "string";
    if (v.is_boolean()) return "boolean";
    if (v.is_number()) return "number";
    if (v.is_null()) return "null";
    return "unknown";
}

bool type_matches(const std::string& want, const nlohmann::json& v) {
    if (want == "number") return v.is_number();
    if (want == "integer") return v.is_number_integer();
    return type_name(v) == want;
}

std::string validate_impl(const nlohmann::json& value,
                          const nlohmann::json& schema,
                          const std::string& where) {
    if (schema.contains("type")) {
        const std::string want = schema["type"].get<std::string>();
        if (!type_matches(want, value)) {
            return where + ": expected " + want + ", got " + type_name(value);
        }
    }
    if (schema.contains("required")) {
        for (const auto& key : schema["required"]) {
            if (!value.contains(key.get<std::string>())) {
                return where + ": missing required key " + key.get<std::string>();
            }
        }
    }
    if (schema.contains("properties") && value.is_object()) {
        for (const auto& [key, child] : schema["properties"].items()) {
            if (value.contains(key)) {
                const std::string err =
                    validate_impl(value[key], child, where + "." + key);
                if (!err.empty()) return err;
            }
        }
    }
    if (value.is_array()) {
        if (schema.contains("minItems") &&
            value.size() < schema["minItems"].get<std::size_t>()) {
            return where + ": too few items";
        }
        if (schema.contains("maxItems") &&
            value.size() > schema["maxItems"].get<std::size_t>()) {
            return where + ": too many items";
        }
        if (schema.contains("items")) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                const std::string err =
                    validate_impl(value[i], schema["items"],
                                  where + "[" + std::to_string(i) + "]");
                if (!err.empty()) return err;
            }
        }
    }
    return "";
}

}  // namespace

std::string validate_against_schema(const nlohmann::json& value,
                                    const nlohmann::json& schema) {
    return validate_impl(value, schema, "$");
}

}  // namespace statlin

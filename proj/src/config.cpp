#include "statlin/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace statlin {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

struct ParsedFile {
    // section -> key -> (value text, line number)
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> data;

    const std::pair<std::string, int>* find(const std::string& section,
                                            const std::string& key) const {
        auto s = data.find(section);
        if (s == data.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        return &k->second;
    }
};

ParsedFile parse_sections(const std::string& text) {
    ParsedFile out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": empty section name");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        }
        if (section.empty()) {
            throw ConfigError("line " + std::to_string(line_no) +
                              ": key outside any [section]");
        }
        out.data[section][key] = {value, line_no};
    }
    return out;
}

double to_double(const std::string& text, int line) {
    if (text == "inf" || text == "+inf") {
        return std::numeric_limits<double>::infinity();
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) +
                          ": expected a number, got '" + text + "'");
    }
    if (used != text.size()) {
        throw ConfigError("line " + std::to_string(line) +
                          ": trailing characters after number in '" + text + "'");
    }
    return v;
}

std::vector<double> to_doubles(const std::string& text, int line) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string word;
    while (in >> word) out.push_back(to_double(word, line));
    if (out.empty()) {
        throw ConfigError("line " + std::to_string(line) +
                          ": expected a list of numbers");
    }
    return out;
}

class Reader {
public:
    explicit Reader(const ParsedFile& file) : file_(file) {}

    void number(const std::string& section, const std::string& key, double* dst) {
        if (const auto* e = file_.find(section, key)) {
            *dst = to_double(e->first, e->second);
        }
    }
    void integer(const std::string& section, const std::string& key, int* dst) {
        if (const auto* e = file_.find(section, key)) {
            const double v = to_double(e->first, e->second);
            if (std::abs(v - std::round(v)) > 1e-9) {
                throw ConfigError("line " + std::to_string(e->second) + ": " +
                                  key + " must be an integer");
            }
            *dst = static_cast<int>(std::llround(v));
        }
    }
    void unsigned64(const std::string& section, const std::string& key,
                    std::uint64_t* dst) {
        if (const auto* e = file_.find(section, key)) {
            try {
                *dst = std::stoull(e->first);
            } catch (const std::exception&) {
                throw ConfigError("line " + std::to_string(e->second) + ": " +
                                  key + " must be an unsigned integer");
            }
        }
    }
    void word(const std::string& section, const std::string& key,
              std::string* dst) {
        if (const auto* e = file_.find(section, key)) *dst = e->first;
    }
    void numbers(const std::string& section, const std::string& key,
                 std::vector<double>* dst, int expected = -1) {
        if (const auto* e = file_.find(section, key)) {
            std::vector<double> v = to_doubles(e->first, e->second);
            if (expected >= 0 && static_cast<int>(v.size()) != expected) {
                throw ConfigError("line " + std::to_string(e->second) + ": " +
                                  key + " expects " + std::to_string(expected) +
                                  " entries");
            }
            *dst = std::move(v);
        }
    }

private:
    const ParsedFile& file_;
};

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // Shortest representation that parses back to the same double.
    for (int prec = 15; prec <= 17; ++prec) {
        std::ostringstream out;
        out.precision(prec);
        out << v;
        if (std::stod(out.str()) == v) return out.str();
    }
    return {};
}

std::string format_list(const std::vector<double>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        out << format_number(v[i]);
    }
    return out.str();
}

}  // namespace

void RunConfig::validate() const {
    if (scenario != "problem4" && scenario != "problem5" &&
        scenario != "problem6") {
        throw ConfigError("scenario must be problem4, problem5 or problem6");
    }
    try {
        rocket.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (descent.initial_mean.size() != 5 || descent.initial_cov.rows() != 5) {
        throw ConfigError("initial state must have 5 entries");
    }
    if (!(descent.initial_mean[4] > 0.0)) {
        throw ConfigError("initial mass must be positive");
    }
    if (descent.q_diag.size() != 5 || descent.qf_diag.size() != 5) {
        throw ConfigError("cost diagonals must have 5 entries");
    }
    if (descent.q_diag.minCoeff() < 0.0 || descent.qf_diag.minCoeff() < 0.0) {
        throw ConfigError("covariance penalties must be nonnegative");
    }
    if (!(descent.tf_min > 0.0) || !(descent.tf_max >= descent.tf_min)) {
        throw ConfigError("horizon requires 0 < t_min <= t_max");
    }
    if (!(descent.chance_probability > 0.5) ||
        !(descent.chance_probability < 1.0)) {
        throw ConfigError("chance probability must lie in (0.5, 1)");
    }
    if (!(descent.eps_sat > 0.0)) {
        throw ConfigError("eps_sat must be positive");
    }
    if (nodes < 10) throw ConfigError("solver nodes must be >= 10");
    if (steps_per_interval < 1 || sim_steps_per_interval < 1) {
        throw ConfigError("steps_per_interval must be >= 1");
    }
    if (max_outer < 1 || max_inner < 1) {
        throw ConfigError("iteration limits must be >= 1");
    }
    if (!(tol_kkt > 0.0) || !(tol_feas > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    if (n_paths < 2) throw ConfigError("n_paths must be >= 2");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    if (eta_list.empty()) throw ConfigError("probe eta list must be non-empty");
    for (double eta : eta_list) {
        if (!(eta > 0.0) || eta > 1.0) {
            throw ConfigError("probe eta values must lie in (0, 1]");
        }
    }
    if (probe_p0_diag.size() != 3) {
        throw ConfigError("probe p0_diag expects 3 entries");
    }
    if (!(probe_noise >= 0.0)) throw ConfigError("probe noise must be >= 0");
    if (acc_points < 1 || acc_fb_points < 1 || acc_fb_samples < 2) {
        throw ConfigError("accessibility sampling counts too small");
    }
    if (acc_depth < 2 || acc_fb_depth < 2) {
        throw ConfigError("accessibility depth must be >= 2");
    }
    if (!(acc_tol_sv > 0.0)) throw ConfigError("tol_sv must be positive");
    if (out_dir.empty()) throw ConfigError("output directory must be set");
}

RobustOCP RunConfig::build_problem() const {
    if (scenario == "problem4") return build_problem4(rocket, descent);
    if (scenario == "problem5") return build_problem5(rocket, descent);
    if (scenario == "problem6") return build_problem6(rocket, descent);
    throw ConfigError("unknown scenario " + scenario);
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.rocket = reference_rocket();
    cfg.descent = DescentScenario::reference();
    return cfg;
}

RunConfig parse_config_text(const std::string& text) {
    const ParsedFile file = parse_sections(text);
    RunConfig cfg = default_run_config();
    Reader r(file);

    r.word("scenario", "problem", &cfg.scenario);

    r.number("rocket", "thrust_max", &cfg.rocket.thrust_max);
    r.number("rocket", "mass_flow", &cfg.rocket.mass_flow);
    r.number("rocket", "gravity", &cfg.rocket.gravity);
    r.number("rocket", "u_min", &cfg.rocket.u_min);
    r.number("rocket", "u_max", &cfg.rocket.u_max);
    r.number("rocket", "sigma_y", &cfg.rocket.sigma_y);
    r.number("rocket", "sigma_z", &cfg.rocket.sigma_z);
    std::string mode = cfg.rocket.dispersion_mode == DispersionMode::mass_scaled
                           ? "mass_scaled"
                           : "constant";
    r.word("rocket", "dispersion_mode", &mode);
    if (mode == "constant") {
        cfg.rocket.dispersion_mode = DispersionMode::constant_vector;
    } else if (mode == "mass_scaled") {
        cfg.rocket.dispersion_mode = DispersionMode::mass_scaled;
    } else {
        throw ConfigError("dispersion_mode must be constant or mass_scaled");
    }

    std::vector<double> mean(cfg.descent.initial_mean.data(),
                             cfg.descent.initial_mean.data() + 5);
    r.numbers("initial", "mean", &mean, 5);
    cfg.descent.initial_mean =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), 5);
    std::vector<double> cov_diag(5);
    Eigen::Map<Eigen::VectorXd>(cov_diag.data(), 5) =
        cfg.descent.initial_cov.diagonal();
    r.numbers("initial", "cov_diag", &cov_diag, 5);
    cfg.descent.initial_cov =
        Eigen::Map<const Eigen::VectorXd>(cov_diag.data(), 5).asDiagonal();
    cfg.rocket.mass_ref = cfg.descent.initial_mean[4];
    r.number("rocket", "mass_ref", &cfg.rocket.mass_ref);

    std::vector<double> q(cfg.descent.q_diag.data(),
                          cfg.descent.q_diag.data() + 5);
    std::vector<double> qf(cfg.descent.qf_diag.data(),
                           cfg.descent.qf_diag.data() + 5);
    r.numbers("cost", "q_diag", &q, 5);
    r.numbers("cost", "qf_diag", &qf, 5);
    cfg.descent.q_diag = Eigen::Map<const Eigen::VectorXd>(q.data(), 5);
    cfg.descent.qf_diag = Eigen::Map<const Eigen::VectorXd>(qf.data(), 5);

    r.number("horizon", "t_min", &cfg.descent.tf_min);
    r.number("horizon", "t_max", &cfg.descent.tf_max);
    r.number("horizon", "t_guess", &cfg.descent.tf_guess);

    r.integer("solver", "nodes", &cfg.nodes);
    r.integer("solver", "steps_per_interval", &cfg.steps_per_interval);
    r.integer("solver", "max_outer", &cfg.max_outer);
    r.integer("solver", "max_inner", &cfg.max_inner);
    r.number("solver", "tol_kkt", &cfg.tol_kkt);
    r.number("solver", "tol_feas", &cfg.tol_feas);
    r.number("solver", "chance_probability", &cfg.descent.chance_probability);
    r.number("solver", "eps_sat", &cfg.descent.eps_sat);
    r.unsigned64("solver", "seed", &cfg.seed);

    r.integer("simulation", "n_paths", &cfg.n_paths);
    r.integer("simulation", "steps_per_interval", &cfg.sim_steps_per_interval);

    r.number("bound", "epsilon", &cfg.epsilon);

    r.numbers("probe", "eta_list", &cfg.eta_list);
    r.number("probe", "noise", &cfg.probe_noise);
    r.numbers("probe", "p0_diag", &cfg.probe_p0_diag, 3);

    r.integer("accessibility", "points", &cfg.acc_points);
    r.integer("accessibility", "depth", &cfg.acc_depth);
    r.integer("accessibility", "feedback_points", &cfg.acc_fb_points);
    r.integer("accessibility", "feedback_depth", &cfg.acc_fb_depth);
    r.integer("accessibility", "feedback_samples", &cfg.acc_fb_samples);
    r.number("accessibility", "tol_sv", &cfg.acc_tol_sv);

    r.word("output", "directory", &cfg.out_dir);

    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "# statlin-plan configuration\n";
    out << "\n[scenario]\nproblem = " << cfg.scenario << "\n";
    out << "\n[rocket]\n";
    out << "thrust_max = " << format_number(cfg.rocket.thrust_max) << "\n";
    out << "mass_flow = " << format_number(cfg.rocket.mass_flow) << "\n";
    out << "gravity = " << format_number(cfg.rocket.gravity) << "\n";
    out << "u_min = " << format_number(cfg.rocket.u_min) << "\n";
    out << "u_max = " << format_number(cfg.rocket.u_max) << "\n";
    out << "sigma_y = " << format_number(cfg.rocket.sigma_y) << "\n";
    out << "sigma_z = " << format_number(cfg.rocket.sigma_z) << "\n";
    out << "dispersion_mode = "
        << (cfg.rocket.dispersion_mode == DispersionMode::mass_scaled
                ? "mass_scaled"
                : "constant")
        << "\n";
    out << "mass_ref = " << format_number(cfg.rocket.mass_ref) << "\n";
    out << "\n[initial]\n";
    out << "mean = "
        << format_list({cfg.descent.initial_mean[0], cfg.descent.initial_mean[1],
                        cfg.descent.initial_mean[2], cfg.descent.initial_mean[3],
                        cfg.descent.initial_mean[4]})
        << "\n";
    const Eigen::VectorXd d = cfg.descent.initial_cov.diagonal();
    out << "cov_diag = " << format_list({d[0], d[1], d[2], d[3], d[4]}) << "\n";
    out << "\n[cost]\n";
    out << "q_diag = "
        << format_list({cfg.descent.q_diag[0], cfg.descent.q_diag[1],
                        cfg.descent.q_diag[2], cfg.descent.q_diag[3],
                        cfg.descent.q_diag[4]})
        << "\n";
    out << "qf_diag = "
        << format_list({cfg.descent.qf_diag[0], cfg.descent.qf_diag[1],
                        cfg.descent.qf_diag[2], cfg.descent.qf_diag[3],
                        cfg.descent.qf_diag[4]})
        << "\n";
    out << "\n[horizon]\n";
    out << "t_min = " << format_number(cfg.descent.tf_min) << "\n";
    out << "t_max = " << format_number(cfg.descent.tf_max) << "\n";
    out << "t_guess = " << format_number(cfg.descent.tf_guess) << "\n";
    out << "\n[solver]\n";
    out << "nodes = " << cfg.nodes << "\n";
    out << "steps_per_interval = " << cfg.steps_per_interval << "\n";
    out << "max_outer = " << cfg.max_outer << "\n";
    out << "max_inner = " << cfg.max_inner << "\n";
    out << "tol_kkt = " << format_number(cfg.tol_kkt) << "\n";
    out << "tol_feas = " << format_number(cfg.tol_feas) << "\n";
    out << "chance_probability = "
        << format_number(cfg.descent.chance_probability) << "\n";
    out << "eps_sat = " << format_number(cfg.descent.eps_sat) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "\n[simulation]\n";
    out << "n_paths = " << cfg.n_paths << "\n";
    out << "steps_per_interval = " << cfg.sim_steps_per_interval << "\n";
    out << "\n[bound]\n";
    out << "epsilon = " << format_number(cfg.epsilon) << "\n";
    out << "\n[probe]\n";
    out << "eta_list = " << format_list(cfg.eta_list) << "\n";
    out << "noise = " << format_number(cfg.probe_noise) << "\n";
    out << "p0_diag = " << format_list(cfg.probe_p0_diag) << "\n";
    out << "\n[accessibility]\n";
    out << "points = " << cfg.acc_points << "\n";
    out << "depth = " << cfg.acc_depth << "\n";
    out << "feedback_points = " << cfg.acc_fb_points << "\n";
    out << "feedback_depth = " << cfg.acc_fb_depth << "\n";
    out << "feedback_samples = " << cfg.acc_fb_samples << "\n";
    out << "tol_sv = " << format_number(cfg.acc_tol_sv) << "\n";
    out << "\n[output]\n";
    out << "directory = " << cfg.out_dir << "\n";
    return out.str();
}

}  // namespace statlin

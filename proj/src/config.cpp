#include "disorder/config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace disorder {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

} // namespace

bool RunConfig::operator==(const RunConfig& o) const {
    return params.mu0 == o.params.mu0 && params.mu1 == o.params.mu1 &&
           params.sigma == o.params.sigma && params.lambda == o.params.lambda &&
           params.r == o.params.r && params.a == o.params.a && params.b == o.params.b &&
           params.pi0 == o.params.pi0 && formulation == o.formulation && sim.dt == o.sim.dt &&
           sim.horizon == o.sim.horizon && sim.n_paths == o.sim.n_paths &&
           sim.seed == o.sim.seed && sim.series_cutoff == o.sim.series_cutoff &&
           output_dir == o.output_dir && sweep_param == o.sweep_param &&
           sweep_values == o.sweep_values;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DomainError("config: missing '=' in line: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "model.mu0") cfg.params.mu0 = std::stod(val);
        else if (key == "model.mu1") cfg.params.mu1 = std::stod(val);
        else if (key == "model.sigma") cfg.params.sigma = std::stod(val);
        else if (key == "model.lambda") cfg.params.lambda = std::stod(val);
        else if (key == "model.r") cfg.params.r = std::stod(val);
        else if (key == "model.a") cfg.params.a = std::stod(val);
        else if (key == "model.b") cfg.params.b = std::stod(val);
        else if (key == "model.pi0") cfg.params.pi0 = std::stod(val);
        else if (key == "formulation") cfg.formulation = formulation_from_string(val);
        else if (key == "sim.dt") cfg.sim.dt = std::stod(val);
        else if (key == "sim.horizon") cfg.sim.horizon = std::stod(val);
        else if (key == "sim.n_paths") cfg.sim.n_paths = std::stoi(val);
        else if (key == "sim.seed") cfg.sim.seed = std::stoull(val);
        else if (key == "sim.series_cutoff") cfg.sim.series_cutoff = std::stoi(val);
        else if (key == "output_dir") cfg.output_dir = val;
        else if (key == "sweep.param") cfg.sweep_param = val;
        else if (key == "sweep.values") cfg.sweep_values = parse_list(val);
        else throw DomainError("config: unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string write_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "model.mu0 = " << csv_num(cfg.params.mu0) << "\n";
    os << "model.mu1 = " << csv_num(cfg.params.mu1) << "\n";
    os << "model.sigma = " << csv_num(cfg.params.sigma) << "\n";
    os << "model.lambda = " << csv_num(cfg.params.lambda) << "\n";
    os << "model.r = " << csv_num(cfg.params.r) << "\n";
    os << "model.a = " << csv_num(cfg.params.a) << "\n";
    os << "model.b = " << csv_num(cfg.params.b) << "\n";
    os << "model.pi0 = " << csv_num(cfg.params.pi0) << "\n";
    os << "formulation = " << to_string(cfg.formulation) << "\n";
    os << "sim.dt = " << csv_num(cfg.sim.dt) << "\n";
    os << "sim.horizon = " << csv_num(cfg.sim.horizon) << "\n";
    os << "sim.n_paths = " << cfg.sim.n_paths << "\n";
    os << "sim.seed = " << cfg.sim.seed << "\n";
    os << "sim.series_cutoff = " << cfg.sim.series_cutoff << "\n";
    os << "output_dir = " << cfg.output_dir << "\n";
    os << "sweep.param = " << cfg.sweep_param << "\n";
    os << "sweep.values = ";
    for (size_t i = 0; i < cfg.sweep_values.size(); ++i)
        os << (i ? "," : "") << csv_num(cfg.sweep_values[i]);
    os << "\n";
    return os.str();
}

std::string solution_to_json(const ThresholdSolution& sol) {
    nlohmann::json j;
    j["formulation"] = to_string(sol.formulation);
    j["lower"] = sol.lower;
    j["upper"] = sol.upper;
    j["coeff_lower"] = sol.coeff_lower;
    j["coeff_upper"] = sol.coeff_upper;
    j["bar_lower"] = sol.bar_lower;
    j["bar_upper"] = sol.bar_upper;
    j["residuals"] = {
        {"match_c0", sol.residuals.match_c0},
        {"match_c1", sol.residuals.match_c1},
        {"instop_lower", sol.residuals.instop_lower},
        {"instop_upper", sol.residuals.instop_upper},
        {"smooth_lower", sol.residuals.smooth_lower},
        {"smooth_upper", sol.residuals.smooth_upper},
    };
    j["admissible"] = sol.admissible;
    return j.dump(2) + "\n";
}

ThresholdSolution solution_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ThresholdSolution sol;
    sol.formulation = formulation_from_string(j.at("formulation").get<std::string>());
    sol.lower = j.at("lower").get<double>();
    sol.upper = j.at("upper").get<double>();
    sol.coeff_lower = j.at("coeff_lower").get<double>();
    sol.coeff_upper = j.at("coeff_upper").get<double>();
    sol.bar_lower = j.at("bar_lower").get<double>();
    sol.bar_upper = j.at("bar_upper").get<double>();
    const auto& res = j.at("residuals");
    sol.residuals.match_c0 = res.at("match_c0").get<double>();
    sol.residuals.match_c1 = res.at("match_c1").get<double>();
    sol.residuals.instop_lower = res.at("instop_lower").get<double>();
    sol.residuals.instop_upper = res.at("instop_upper").get<double>();
    sol.residuals.smooth_lower = res.at("smooth_lower").get<double>();
    sol.residuals.smooth_upper = res.at("smooth_upper").get<double>();
    sol.admissible = j.at("admissible").get<bool>();
    return sol;
}

} // namespace disorder

#pragma once

#include "disorder/model.hpp"
#include "disorder/sim.hpp"
#include "disorder/solver.hpp"

#include <string>
#include <vector>

namespace disorder {

// Flat key=value run configuration with section prefixes
// (model.mu0=..., sim.dt=..., formulation=f1|f2, output_dir=..., sweep.*=...).
struct RunConfig {
    ModelParams params;
    Formulation formulation = Formulation::F1;
    SimConfig sim;
    std::string output_dir = ".";
    std::string sweep_param = "a";
    std::vector<double> sweep_values;

    bool operator==(const RunConfig& o) const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string write_config_text(const RunConfig& cfg);

// solution.json payload
std::string solution_to_json(const ThresholdSolution& sol);
ThresholdSolution solution_from_json(const std::string& text);

// 17-significant-digit CSV field
std::string csv_num(double v);

} // namespace disorder

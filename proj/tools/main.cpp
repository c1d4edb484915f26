#include "disorder/config.hpp"
#include "disorder/model.hpp"
#include "disorder/sim.hpp"
#include "disorder/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace disorder;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInadmissible = 2;
constexpr int kExitVerification = 3;
constexpr int kExitNonConvergence = 4;

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot write " + path.string());
    out << content;
}

std::string value_function_csv(const Model& m, const ThresholdSolution& sol, int grid_n) {
    std::ostringstream os;
    os << "pi,v0,v1,vmin\r\n";
    for (int k = 0; k <= grid_n; ++k) {
        const double pi = kPiLo + (kPiHi - kPiLo) * k / grid_n;
        const double v0 = bayes_risk(m, sol, 0, pi);
        const double v1 = bayes_risk(m, sol, 1, pi);
        os << csv_num(pi) << ',' << csv_num(v0) << ',' << csv_num(v1) << ','
           << csv_num(std::min(v0, v1)) << "\r\n";
    }
    return os.str();
}

int cmd_solve(const RunConfig& cfg) {
    Model m(cfg.params);
    const ThresholdSolution sol = solve_boundaries(m, cfg.formulation);
    write_file(fs::path(cfg.output_dir) / "solution.json", solution_to_json(sol));
    write_file(fs::path(cfg.output_dir) / "value_function.csv", value_function_csv(m, sol, 1000));
    std::cout << "solved " << to_string(cfg.formulation) << ": lower = " << sol.lower
              << ", upper = " << sol.upper << "\n";
    return kExitOk;
}

int cmd_verify(const RunConfig& cfg) {
    Model m(cfg.params);
    const ThresholdSolution sol = solve_boundaries(m, cfg.formulation);
    const VariationalReport rep = verify_variational(m, sol, 2000, /*throw_on_violation=*/false);
    nlohmann::json j;
    j["pass"] = rep.pass;
    j["min_gap_lower"] = rep.min_gap_lower;
    j["min_gap_upper"] = rep.min_gap_upper;
    j["min_gen_lower"] = rep.min_gen_lower;
    j["min_gen_upper"] = rep.min_gen_upper;
    j["max_boundary_gap"] = rep.max_boundary_gap;
    j["violations"] = rep.violations;
    write_file(fs::path(cfg.output_dir) / "verify.json", j.dump(2) + "\n");
    std::cout << (rep.pass ? "verify: pass\n" : "verify: FAIL\n");
    return rep.pass ? kExitOk : kExitVerification;
}

int cmd_simulate(const RunConfig& cfg) {
    Model m(cfg.params);
    const ThresholdSolution sol = solve_boundaries(m, cfg.formulation);
    std::ostringstream os;
    os << "t,theta,x,pi,phase\r\n";
    for (int idx = 0; idx < cfg.sim.n_paths; ++idx) {
        const PathRecord rec = run_detection(m, sol, cfg.sim, 0, cfg.params.pi0, uint64_t(idx));
        for (size_t k = 0; k < rec.times.size(); ++k) {
            os << csv_num(rec.times[k]) << ',' << rec.theta[k] << ',' << csv_num(rec.x[k]) << ','
               << csv_num(rec.pi_filter[k]) << ',' << rec.phase[k] << "\r\n";
        }
    }
    write_file(fs::path(cfg.output_dir) / "paths.csv", os.str());
    std::cout << "simulated " << cfg.sim.n_paths << " path(s)\n";
    return kExitOk;
}

int cmd_validate(const RunConfig& cfg) {
    Model m(cfg.params);
    const ThresholdSolution sol = solve_boundaries(m, cfg.formulation);
    nlohmann::json rows = nlohmann::json::array();
    bool all_pass = true;
    for (int i = 0; i <= 1; ++i) {
        for (const double pi : {0.2, 0.5, 0.8}) {
            const double cf = bayes_risk(m, sol, i, pi);
            SimConfig sc = cfg.sim;
            // horizon such that the truncation bound is <= 0.5% of the value
            const double r = cfg.params.r;
            const double t_needed = -std::log(std::max(0.005 * cf * r, 1e-300)) / r;
            sc.horizon = std::max(sc.horizon, std::ceil(t_needed));
            const RiskEstimate est = estimate_risk_mc(m, sol, i, pi, sc);
            const double tol = 3.0 * est.stderr_mean + est.truncation_bound;
            const bool pass = std::fabs(est.mean - cf) <= tol;
            all_pass = all_pass && pass;
            rows.push_back({{"phase", i},
                            {"pi", pi},
                            {"closed_form", cf},
                            {"mc_mean", est.mean},
                            {"stderr", est.stderr_mean},
                            {"truncation_bound", est.truncation_bound},
                            {"n_paths", est.n_paths},
                            {"horizon", sc.horizon},
                            {"pass", pass}});
            std::cout << "validate phase " << i << " pi " << pi << ": mc " << est.mean
                      << " vs closed form " << cf << " (tol " << tol << ") "
                      << (pass ? "ok" : "FAIL") << "\n";
        }
    }
    nlohmann::json j;
    j["formulation"] = to_string(cfg.formulation);
    j["pass"] = all_pass;
    j["rows"] = rows;
    write_file(fs::path(cfg.output_dir) / "validate.json", j.dump(2) + "\n");
    return all_pass ? kExitOk : kExitVerification;
}

int cmd_sweep(const RunConfig& cfg) {
    std::vector<double> values = cfg.sweep_values;
    if (values.empty()) values = {0.5, 1.0, 2.0};
    std::ostringstream os;
    os << "param,value,lower,upper,coeff_lower,coeff_upper,admissible\r\n";
    for (const double v : values) {
        RunConfig c = cfg;
        if (cfg.sweep_param == "a") c.params.a = v;
        else if (cfg.sweep_param == "b") c.params.b = v;
        else if (cfg.sweep_param == "lambda") c.params.lambda = v;
        else if (cfg.sweep_param == "r") c.params.r = v;
        else if (cfg.sweep_param == "sigma") c.params.sigma = v;
        else throw DomainError("sweep.param must be one of a, b, lambda, r, sigma");
        Model m(c.params);
        const ThresholdSolution sol = solve_boundaries(m, c.formulation);
        os << cfg.sweep_param << ',' << csv_num(v) << ',' << csv_num(sol.lower) << ','
           << csv_num(sol.upper) << ',' << csv_num(sol.coeff_lower) << ','
           << csv_num(sol.coeff_upper) << ',' << (sol.admissible ? 1 : 0) << "\r\n";
    }
    write_file(fs::path(cfg.output_dir) / "sweep.csv", os.str());
    std::cout << "swept " << cfg.sweep_param << " over " << values.size() << " value(s)\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal switching thresholds and Monte Carlo validation for "
                 "drift-change monitoring of a Brownian observation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string formulation;
    uint64_t seed = 0;
    bool seed_set = false;

    const std::vector<std::string> names = {"solve", "verify", "simulate", "validate", "sweep"};
    for (const auto& n : names) {
        auto* sub = app.add_subcommand(n);
        sub->add_option("--config", config_path, "key=value run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--formulation", formulation, "f1 or f2 (overrides config)");
        sub->add_option("--seed", seed, "RNG seed (overrides sim.seed)")
            ->each([&seed_set](const std::string&) { seed_set = true; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (!formulation.empty()) cfg.formulation = formulation_from_string(formulation);
        if (seed_set) cfg.sim.seed = seed;
        fs::create_directories(cfg.output_dir);

        for (const auto& n : names) {
            if (app.got_subcommand(n)) {
                if (n == "solve") return cmd_solve(cfg);
                if (n == "verify") return cmd_verify(cfg);
                if (n == "simulate") return cmd_simulate(cfg);
                if (n == "validate") return cmd_validate(cfg);
                if (n == "sweep") return cmd_sweep(cfg);
            }
        }
        return kExitUsage;
    } catch (const Inadmissible& e) {
        std::cerr << "inadmissible: " << e.what() << "\n";
        return kExitInadmissible;
    } catch (const VerificationFailure& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return kExitVerification;
    } catch (const NonConvergence& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const NoSolution& e) {
        std::cerr << "no solution: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

#pragma once

#include "disorder/model.hpp"
#include "disorder/rng.hpp"
#include "disorder/solver.hpp"

#include <cstdint>
#include <vector>

namespace disorder {

struct SimConfig {
    double dt = 1e-3;
    double horizon = 10.0;
    int n_paths = 10000;
    uint64_t seed = 1;
    int series_cutoff = 64; // alarm cycles accumulated per path

    void validate() const {
        if (!(dt > 0.0)) throw DomainError("SimConfig: dt must be > 0");
        if (!(horizon >= dt)) throw DomainError("SimConfig: horizon must be >= dt");
        if (n_paths <= 0) throw DomainError("SimConfig: n_paths must be positive");
        if (series_cutoff <= 0) throw DomainError("SimConfig: series_cutoff must be positive");
    }
};

enum class AlarmDirection { Down, Up }; // Down: filter hit the lower threshold

struct Alarm {
    double time = 0.0;
    AlarmDirection dir = AlarmDirection::Down;
};

struct PathRecord {
    std::vector<double> times;
    std::vector<int> theta;
    std::vector<double> x;
    std::vector<double> pi_filter;
    std::vector<int> phase;
    std::vector<Alarm> alarms;
    std::vector<double> disorder_times;
};

struct RiskEstimate {
    double mean = 0.0;
    double stderr_mean = 0.0;
    int n_paths = 0;
    double truncation_bound = 0.0; // e^{-r T} / r
};

// One alarm cycle of the second formulation.
struct CycleRecord {
    double start = 0.0;
    double end = 0.0;       // alarm closing the cycle (horizon if !closed)
    double eta = 0.0;       // disorder drawn for this cycle
    int post_state = 0;     // regime after the disorder
    double lhs_integral = 0.0; // grid integral of e^{-rt} I(theta = post_state)
    bool closed = false;
};

struct PathStats {
    double cost = 0.0;
    long steps = 0;
    long clamp_count = 0;
    int n_alarms = 0;
    double first_alarm_time = -1.0; // < 0 when no alarm fired
    std::vector<CycleRecord> cycles; // F2 only
};

enum class F2Branch { Drop, Rise };

// One Euler-Maruyama filter step driven by the innovation of the observation
// increment dx over cfg.dt; result clamped to [1e-9, 1-1e-9].
double filter_step_f1(double pi_prev, double dx, const ModelParams& p, const SimConfig& cfg,
                      long* clamp_count = nullptr);
double filter_step_f2(F2Branch branch, double pi_prev, double dx, const ModelParams& p,
                      const SimConfig& cfg, long* clamp_count = nullptr);

// Telegraph regime sampled onto the grid; switch times drawn exactly.
std::vector<int> simulate_theta_f1(const SimConfig& cfg, const ModelParams& p, PathRng& rng);

// Disorder draw for one F2 cycle starting at the alarm with the given filter
// value: the regime starts at Bernoulli(pi); the disorder is immediate when
// the drawn regime already equals the post-switch state, else Exp(lambda).
struct F2Cycle {
    double eta = 0.0;
    int pre_state = 0;
    int post_state = 0;
};
F2Cycle simulate_theta_f2(F2Branch branch, double pi_at_alarm, double t_alarm,
                          const ModelParams& p, PathRng& rng);

// Observation increments over a grid-sampled regime path.
std::vector<double> simulate_observation(const std::vector<int>& theta, const ModelParams& p,
                                         const SimConfig& cfg, PathRng& rng);

// Core engine: one path of the sequential detection procedure with the given
// thresholds, starting in the given phase (0 seeks the lower threshold).
PathStats run_path(const ModelParams& p, Formulation form, double lower, double upper,
                   const SimConfig& cfg, int start_phase, double pi0, uint64_t path_index,
                   PathRecord* record = nullptr);

PathRecord run_detection(const Model& m, const ThresholdSolution& sol, const SimConfig& cfg,
                         int start_phase, double pi0, uint64_t path_index = 0);

// Monte Carlo estimate of the phase-i Bayesian risk from belief pi.
RiskEstimate estimate_risk_mc(const Model& m, const ThresholdSolution& sol, int i, double pi,
                              const SimConfig& cfg);

// Aggregate step/clamp counters for a batch run.
struct BatchStats {
    long steps = 0;
    long clamps = 0;
};

// Same estimator with explicit thresholds (paired perturbation studies).
RiskEstimate estimate_risk_mc_at(const Model& m, Formulation form, double lower, double upper,
                                 int i, double pi, const SimConfig& cfg,
                                 std::vector<double>* per_path = nullptr,
                                 BatchStats* stats = nullptr);

// Per-cycle comparison of the two sides of the discounted-delay identity on
// shared F2 paths.
struct DelayCycleStat {
    int cycle_index = 0;
    int count = 0;
    double mean_lhs = 0.0;
    double mean_rhs = 0.0;
    double se_lhs = 0.0;
    double se_rhs = 0.0;
};
std::vector<DelayCycleStat> check_delay_identity(const Model& m, const ThresholdSolution& sol,
                                                 const SimConfig& cfg, int max_cycles = 4);

// Worker count: DISORDER_SWITCH_THREADS caps it, hardware parallelism default.
int worker_count();

} // namespace disorder

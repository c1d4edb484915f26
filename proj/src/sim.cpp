#include "disorder/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace disorder {

int worker_count() {
    int hw = (int)std::thread::hardware_concurrency();
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("DISORDER_SWITCH_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) return std::min(cap, hw) > 0 ? std::min(cap, hw) : 1;
    }
    return hw;
}

namespace {

constexpr double kFilterEps = 1e-9;

double clamp_filter(double pi, long* clamp_count) {
    if (pi < kFilterEps) {
        if (clamp_count) ++*clamp_count;
        return kFilterEps;
    }
    if (pi > 1.0 - kFilterEps) {
        if (clamp_count) ++*clamp_count;
        return 1.0 - kFilterEps;
    }
    return pi;
}

double euler_filter_step(double drift, double pi_prev, double dx, const ModelParams& p,
                         const SimConfig& cfg, long* clamp_count) {
    const double dt = cfg.dt;
    const double innov = (dx - (p.mu0 + (p.mu1 - p.mu0) * pi_prev) * dt) / p.sigma;
    const double diffusion = (p.mu1 - p.mu0) / p.sigma * pi_prev * (1.0 - pi_prev);
    return clamp_filter(pi_prev + drift * dt + diffusion * innov, clamp_count);
}

} // namespace

double filter_step_f1(double pi_prev, double dx, const ModelParams& p, const SimConfig& cfg,
                      long* clamp_count) {
    return euler_filter_step(p.lambda * (1.0 - 2.0 * pi_prev), pi_prev, dx, p, cfg, clamp_count);
}

double filter_step_f2(F2Branch branch, double pi_prev, double dx, const ModelParams& p,
                      const SimConfig& cfg, long* clamp_count) {
    const double drift =
        branch == F2Branch::Drop ? -p.lambda * pi_prev : p.lambda * (1.0 - pi_prev);
    return euler_filter_step(drift, pi_prev, dx, p, cfg, clamp_count);
}

std::vector<int> simulate_theta_f1(const SimConfig& cfg, const ModelParams& p, PathRng& rng) {
    cfg.validate();
    const long n = std::lround(cfg.horizon / cfg.dt);
    std::vector<int> theta(size_t(n) + 1);
    int state = rng.next_bernoulli(p.pi0) ? 1 : 0;
    double next_switch = rng.next_exponential(p.lambda);
    for (long k = 0; k <= n; ++k) {
        const double t = k * cfg.dt;
        while (next_switch <= t) {
            state ^= 1;
            next_switch += rng.next_exponential(p.lambda);
        }
        theta[size_t(k)] = state;
    }
    return theta;
}

F2Cycle simulate_theta_f2(F2Branch branch, double pi_at_alarm, double t_alarm,
                          const ModelParams& p, PathRng& rng) {
    F2Cycle c;
    c.post_state = branch == F2Branch::Drop ? 0 : 1;
    c.pre_state = 1 - c.post_state;
    const int start_state = rng.next_bernoulli(pi_at_alarm) ? 1 : 0;
    if (start_state == c.post_state) {
        c.eta = t_alarm; // disorder coincides with the alarm
    } else {
        c.eta = t_alarm + rng.next_exponential(p.lambda);
    }
    return c;
}

std::vector<double> simulate_observation(const std::vector<int>& theta, const ModelParams& p,
                                         const SimConfig& cfg, PathRng& rng) {
    cfg.validate();
    std::vector<double> dx(theta.empty() ? 0 : theta.size() - 1);
    const double sdt = std::sqrt(cfg.dt);
    for (size_t k = 0; k < dx.size(); ++k) {
        const double drift = p.mu0 + (p.mu1 - p.mu0) * theta[k];
        dx[k] = drift * cfg.dt + p.sigma * sdt * rng.normal_at(k);
    }
    return dx;
}

PathStats run_path(const ModelParams& p, Formulation form, double lower, double upper,
                   const SimConfig& cfg, int start_phase, double pi0, uint64_t path_index,
                   PathRecord* record) {
    cfg.validate();
    if (start_phase != 0 && start_phase != 1) throw DomainError("run_path: phase must be 0 or 1");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw DomainError("run_path: pi0 outside [0,1]");

    PathRng rng(cfg.seed, path_index);
    PathStats st;
    const double dt = cfg.dt;
    const long n_steps = std::lround(cfg.horizon / dt);
    const double decay = std::exp(-p.r * dt);
    const double step_weight = (1.0 - decay) / p.r; // exact integral of e^{-r s} over one step

    int phase = start_phase;
    double pi = std::clamp(pi0, kFilterEps, 1.0 - kFilterEps);
    double disc = 1.0;
    double x_cum = 0.0;
    int cycles_done = 0;

    // regime machinery
    int theta = 0;
    double next_switch = 0.0; // F1
    F2Cycle cyc;              // F2
    CycleRecord cyc_rec;
    const bool f2 = form == Formulation::F2;

    auto f2_open_cycle = [&](double t) {
        cyc = simulate_theta_f2(phase == 0 ? F2Branch::Drop : F2Branch::Rise, pi, t, p, rng);
        cyc_rec = CycleRecord{};
        cyc_rec.start = t;
        cyc_rec.eta = cyc.eta;
        cyc_rec.post_state = cyc.post_state;
        if (record) record->disorder_times.push_back(cyc.eta);
    };
    auto f2_close_cycle = [&](double t, bool closed) {
        cyc_rec.end = t;
        cyc_rec.closed = closed;
        st.cycles.push_back(cyc_rec);
    };

    if (f2) {
        f2_open_cycle(0.0);
    } else {
        theta = rng.next_bernoulli(pi0) ? 1 : 0;
        next_switch = rng.next_exponential(p.lambda);
    }

    auto sound_alarm = [&](double t, double disc_t) {
        if (phase == 0) {
            st.cost += p.a * disc_t * pi;
            if (record) record->alarms.push_back({t, AlarmDirection::Down});
        } else {
            st.cost += p.b * disc_t * (1.0 - pi);
            if (record) record->alarms.push_back({t, AlarmDirection::Up});
        }
        ++st.n_alarms;
        if (st.first_alarm_time < 0.0) st.first_alarm_time = t;
        if (f2) f2_close_cycle(t, true);
        phase ^= 1;
        ++cycles_done;
        if (f2 && cycles_done < cfg.series_cutoff) f2_open_cycle(t);
    };

    // immediate alarm when the belief already sits in the stopping region
    if ((phase == 0 && pi <= lower) || (phase == 1 && pi >= upper)) sound_alarm(0.0, 1.0);

    for (long k = 0; k < n_steps && cycles_done < cfg.series_cutoff; ++k) {
        const double t = k * dt;
        if (f2) {
            theta = (t >= cyc.eta) ? cyc.post_state : cyc.pre_state;
        } else {
            while (next_switch <= t) {
                theta ^= 1;
                next_switch += rng.next_exponential(p.lambda);
            }
        }
        if (record) {
            record->times.push_back(t);
            record->theta.push_back(theta);
            record->x.push_back(x_cum);
            record->pi_filter.push_back(pi);
            record->phase.push_back(phase);
        }

        const double z = rng.normal_at(uint64_t(k));
        const double dx = (p.mu0 + (p.mu1 - p.mu0) * theta) * dt + p.sigma * std::sqrt(dt) * z;

        const double w = disc * step_weight;
        st.cost += w * (phase == 0 ? (1.0 - pi) : pi);
        if (f2 && theta == cyc.post_state) cyc_rec.lhs_integral += w;

        pi = f2 ? filter_step_f2(phase == 0 ? F2Branch::Drop : F2Branch::Rise, pi, dx, p, cfg,
                                 &st.clamp_count)
                : filter_step_f1(pi, dx, p, cfg, &st.clamp_count);
        x_cum += dx;
        disc *= decay;
        ++st.steps;

        const double t_next = (k + 1) * dt;
        if (phase == 0 && pi <= lower) {
            sound_alarm(t_next, disc);
        } else if (phase == 1 && pi >= upper) {
            sound_alarm(t_next, disc);
        }
    }
    if (f2 && cycles_done < cfg.series_cutoff) f2_close_cycle(n_steps * dt, false);

    if (record) {
        record->times.push_back(n_steps * dt);
        record->theta.push_back(theta);
        record->x.push_back(x_cum);
        record->pi_filter.push_back(pi);
        record->phase.push_back(phase);
    }
    return st;
}

PathRecord run_detection(const Model& m, const ThresholdSolution& sol, const SimConfig& cfg,
                         int start_phase, double pi0, uint64_t path_index) {
    PathRecord rec;
    run_path(m.params(), sol.formulation, sol.lower, sol.upper, cfg, start_phase, pi0, path_index,
             &rec);
    return rec;
}

namespace {

void reduce_estimate(const std::vector<double>& per_path, double r, double horizon,
                     RiskEstimate* out) {
    const int n = (int)per_path.size();
    double sum = 0.0;
    for (double v : per_path) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : per_path) ss += (v - mean) * (v - mean);
    out->mean = mean;
    out->stderr_mean = n > 1 ? std::sqrt(ss / (double(n) - 1.0) / n) : 0.0;
    out->n_paths = n;
    out->truncation_bound = std::exp(-r * horizon) / r;
}

} // namespace

RiskEstimate estimate_risk_mc_at(const Model& m, Formulation form, double lower, double upper,
                                 int i, double pi, const SimConfig& cfg,
                                 std::vector<double>* per_path_out, BatchStats* stats) {
    cfg.validate();
    if (i != 0 && i != 1) throw DomainError("estimate_risk_mc: i must be 0 or 1");
    const int n = cfg.n_paths;
    std::vector<double> per_path(static_cast<size_t>(n));
    std::vector<long> steps(static_cast<size_t>(n)), clamps(static_cast<size_t>(n));

    const int workers = std::max(1, std::min(worker_count(), n));
    auto work = [&](int w) {
        for (int idx = w; idx < n; idx += workers) {
            const PathStats st =
                run_path(m.params(), form, lower, upper, cfg, i, pi, uint64_t(idx), nullptr);
            per_path[size_t(idx)] = st.cost;
            steps[size_t(idx)] = st.steps;
            clamps[size_t(idx)] = st.clamp_count;
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(size_t(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    RiskEstimate est;
    reduce_estimate(per_path, m.params().r, cfg.horizon, &est);
    if (stats) {
        BatchStats bs;
        for (int idx = 0; idx < n; ++idx) {
            bs.steps += steps[size_t(idx)];
            bs.clamps += clamps[size_t(idx)];
        }
        *stats = bs;
    }
    if (per_path_out) *per_path_out = std::move(per_path);
    return est;
}

RiskEstimate estimate_risk_mc(const Model& m, const ThresholdSolution& sol, int i, double pi,
                              const SimConfig& cfg) {
    return estimate_risk_mc_at(m, sol.formulation, sol.lower, sol.upper, i, pi, cfg);
}

std::vector<DelayCycleStat> check_delay_identity(const Model& m, const ThresholdSolution& sol,
                                                 const SimConfig& cfg, int max_cycles) {
    if (sol.formulation != Formulation::F2)
        throw DomainError("check_delay_identity: second formulation only");
    cfg.validate();
    const ModelParams& p = m.params();
    const int n = cfg.n_paths;

    std::vector<std::vector<double>> lhs(static_cast<size_t>(max_cycles)), rhs(static_cast<size_t>(max_cycles));
    std::vector<PathStats> stats(static_cast<size_t>(n));

    const int workers = std::max(1, std::min(worker_count(), n));
    auto work = [&](int w) {
        for (int idx = w; idx < n; idx += workers)
            stats[size_t(idx)] = run_path(p, Formulation::F2, sol.lower, sol.upper, cfg, 0,
                                          p.pi0, uint64_t(idx), nullptr);
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    for (const auto& st : stats) {
        for (size_t c = 0; c < st.cycles.size() && c < size_t(max_cycles); ++c) {
            const CycleRecord& cr = st.cycles[c];
            if (!cr.closed) continue;
            const double over = std::max(cr.end - cr.eta, 0.0);
            const double side_rhs =
                std::exp(-p.r * cr.end) * (std::exp(p.r * over) - 1.0) / p.r;
            lhs[c].push_back(cr.lhs_integral);
            rhs[c].push_back(side_rhs);
        }
    }

    std::vector<DelayCycleStat> out;
    for (int c = 0; c < max_cycles; ++c) {
        DelayCycleStat s;
        s.cycle_index = c + 1;
        s.count = (int)lhs[size_t(c)].size();
        if (s.count > 1) {
            auto mean_se = [&](const std::vector<double>& v, double* mean, double* se) {
                double sum = 0.0;
                for (double x : v) sum += x;
                *mean = sum / double(v.size());
                double ss = 0.0;
                for (double x : v) ss += (x - *mean) * (x - *mean);
                *se = std::sqrt(ss / (double(v.size()) - 1.0) / double(v.size()));
            };
            mean_se(lhs[size_t(c)], &s.mean_lhs, &s.se_lhs);
            mean_se(rhs[size_t(c)], &s.mean_rhs, &s.se_rhs);
        }
        out.push_back(s);
    }
    return out;
}

} // namespace disorder

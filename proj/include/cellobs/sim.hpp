#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "cellobs/hybrid.hpp"
#include "cellobs/model.hpp"
#include "cellobs/ocv.hpp"
#include "cellobs/profile.hpp"

namespace cellobs {

// Closed-loop scenario: a high-fidelity plant (optionally augmented with
// electrolyte overvoltage lags and a redundant innermost-shell bookkeeping
// state) against an observer bank fed the biased current and the noisy
// measured voltage. Fixed-step RK4 over the stacked flow; the switching jump
// rule runs after every step until the flow set is re-entered.
struct Scenario {
    double dt_s = 1e-3;          // integrator step; must resolve the noise
    double horizon_s = 1500.0;
    double store_dt_s = 0.1;     // decimated storage grid
    double window_tran_s = 150.0;  // transient/steady metrics split

    double plant_soc0 = 100.0;   // plant starts uniform at this SOC (%)
    std::vector<double> init_c_neg;  // per-mode initial estimates (mol/L)
    std::vector<double> init_c_pos;
    Eigen::VectorXd eta0;        // per-mode initial monitoring costs
    int sigma0 = 0;              // initially selected mode (0-based)

    double noise_amp_v = 0.05;   // measurement noise amp_w * sin(omega_w t)
    double noise_omega = 30.0;   // rad/s
    double bias_precision = 0.01;  // current-sensor full-scale fraction
    bool electrolyte = true;     // plant-only overvoltage lags

    std::uint64_t seed = 1;      // recorded in outputs; drives nothing in-run
    bool store_full_state = false;  // keep stacked states at grid samples
};

struct SimSetup {
    StateSpaceModel plant;
    StateSpaceModel observer;
    OcvCurve curve_neg;   // shared by plant and observers
    OcvCurve curve_pos;
    Eigen::MatrixXd gains;  // observer.dim x n_modes; column 0 = nominal
    MonitorParams monitor;
    SwitchParams sw;
    CurrentProfile profile;
    Scenario scn;
};

// Offsets into the stacked integration state.
struct StackedLayout {
    int plant_dim = 0;
    int c1_index = 0;       // redundant innermost-negative-shell diagnostic
    int rho_offset = -1;    // -1 when electrolyte is disabled
    int modes_offset = 0;
    int obs_dim = 0;
    int n_modes = 0;
    int eta_offset = 0;
    int filter_offset = 0;
    int total = 0;

    int mode_offset(int k) const { return modes_offset + k * obs_dim; }
};

struct JumpRecord {
    double t = 0.0;
    long j_before = 0;         // jump counter before the reset
    int sigma_before = 0;      // 0-based
    int sigma_after = 0;
    Eigen::VectorXd eta_before;  // monitoring costs that triggered the jump
};

// Stored samples: the decimated grid plus a pre- and post-reset row at every
// jump (event rows are flagged and excluded from metrics averaging).
// (t, j) is lexicographically non-decreasing.
struct SimResult {
    std::vector<double> t;
    std::vector<long> j;
    std::vector<int> sigma;            // 0-based
    std::vector<char> event_row;       // 1 = pre/post jump row, 0 = grid row
    std::vector<double> soc_true, soc_nominal, soc_sigma, soc_filtered;
    std::vector<double> c_surf_neg_true, c_surf_pos_true;
    std::vector<double> c_surf_neg_est, c_surf_pos_est;  // selected mode
    std::vector<Eigen::VectorXd> eta;  // n_modes entries per sample

    std::vector<JumpRecord> jumps;

    // Diagnostics
    double conservation_max_rel = 0.0;  // lithium drift vs. the initial total
    double c1_consistency_max = 0.0;    // integrated vs. reconstructed c1_neg
    long domain_violations = 0;         // clamped stoichiometry lookups
    bool aborted = false;               // non-finite state encountered
    double abort_t = 0.0;

    int n_modes = 0;
    StackedLayout layout;
    std::vector<Eigen::VectorXd> full_state;  // grid samples; only if requested
};

SimResult simulate(const SimSetup& setup);

// MAE/RMSE of the SOC error for the nominal, selected-mode, and filtered
// estimates over the windows tot [0, t_end], tran [0, t_tran] and
// end [t_tran, t_end], uniformly weighted over grid samples. Throws
// std::invalid_argument when a window contains no samples.
struct MetricsReport {
    // [window][estimator]: windows tot/tran/end, estimators nominal/sigma/filtered
    double mae[3][3] = {};
    double rmse[3][3] = {};
    double window_lo[3] = {};
    double window_hi[3] = {};
    long window_samples[3] = {};
    long jump_count = 0;
    double conservation_max_rel = 0.0;
    long domain_violations = 0;
    bool aborted = false;
};
MetricsReport compute_metrics(const SimResult& r, double t_tran, double t_end);

// Monte-Carlo campaign: per-run initial SOC estimates drawn independently per
// mode, uniform in [0, 100] %; the plant stays at the base scenario's initial
// SOC. Runs execute on `jobs` workers with per-run seeds derived from
// (seed, run index); aggregation is a sequential mean over run index, so the
// result is identical for any jobs count.
struct MonteCarloResult {
    std::vector<MetricsReport> runs;
    std::vector<std::uint64_t> run_seeds;
    MetricsReport aggregate;       // mean mae/rmse; summed counts
    bool ordering_mae_ok = false;  // aggregate MAE_end(sigma) <= MAE_end(nominal)
    bool ordering_rmse_ok = false;
    double elapsed_s = 0.0;
};
MonteCarloResult monte_carlo(const SimSetup& base, int n_runs, std::uint64_t seed, int jobs);

// Output writers. All floating-point is rendered with %.17g so identical
// results are identical bytes.
void write_timeseries_csv(const std::string& path, const SimResult& r);
void write_jumps_csv(const std::string& path, const SimResult& r);
std::string metrics_to_json(const MetricsReport& m);
void write_metrics_json(const std::string& path, const MetricsReport& m);
std::string mc_aggregate_json(const MonteCarloResult& mc);
std::string mc_table(const MonteCarloResult& mc);  // 6 x 3 summary table
void write_mc_runs_csv(const std::string& path, const MonteCarloResult& mc);

}  // namespace cellobs

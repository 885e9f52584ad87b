#pragma once

#include <Eigen/Dense>

#include "cellobs/battery_params.hpp"
#include "cellobs/sphere.hpp"

namespace cellobs {

// Reduced solid-phase diffusion model of a two-electrode cell.
//
// Each electrode is one representative spherical particle discretized into
// equal-volume shells. The state vector stacks
//
//     x = (c_2 .. c_Nn of the negative particle,  c_1 .. c_Np of the positive)
//
// in mol/L, dimension Nn + Np - 1. The innermost negative shell c_1 is
// eliminated through total-lithium bookkeeping (gamma-weighted mean
// concentrations sum to q_li, a constant of the motion) and reconstructed
// algebraically as c_1 = kbar + beta * x.
//
// Dynamics: dx/dt = A x + B u + K (+ E v on the current channel), u in amps,
// u > 0 on discharge. Voltage output: y = ocv_pos(h_pos x) - ocv_neg(h_neg x)
// + g(u), with g the current-dependent overpotential/ohmic terms below.
struct StateSpaceModel {
    int n_neg = 0;   // negative-particle shell count Nn (>= 3)
    int n_pos = 0;   // positive-particle shell count Np (>= 2)
    int dim = 0;     // state dimension Nn + Np - 1

    Eigen::MatrixXd A;   // 1/s
    Eigen::VectorXd B;   // (mol/L)/(s A), single current input column
    Eigen::VectorXd K;   // (mol/L)/s, constant drift from the eliminated shell
    Eigen::MatrixXd E;   // disturbance input, equals B by default

    // Surface stoichiometry selectors: theta_s = h_s * x. Each row has a
    // single nonzero entry 1/cmax_s at the electrode's surface index.
    Eigen::RowVectorXd h_neg;
    Eigen::RowVectorXd h_pos;
    int idx_surf_neg = 0;  // index of the negative surface shell within x
    int idx_surf_pos = 0;  // index of the positive surface shell within x

    // Reconstruction of the eliminated innermost negative shell:
    // c1_neg = kbar + beta * x.
    double kbar = 0.0;
    Eigen::RowVectorXd beta;

    // Bookkeeping
    double gamma_neg = 0.0;  // Ah per (mol/L) of mean electrode concentration
    double gamma_pos = 0.0;
    SphereShells shells_neg;
    SphereShells shells_pos;
    BatteryParams params;

    int pos_offset() const { return n_neg - 1; }  // first positive index in x
};

// Assembles the reduced model. Throws std::invalid_argument when n_neg < 3 or
// n_pos < 2 (the coupled first row and the surface rows must exist) or when
// params.validate() fails.
StateSpaceModel assemble_model(const BatteryParams& params, int n_neg, int n_pos);

// Innermost negative-shell concentration implied by lithium conservation.
double reconstruct_c1_neg(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

// Total cyclable lithium (Ah) for an explicitly supplied innermost negative
// concentration. With c1_neg = reconstruct_c1_neg(m, x) this returns
// params.q_li_ah identically; passing an independently integrated c1 turns it
// into a conservation diagnostic.
double total_lithium_ah(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                        double c1_neg);

// Volume-weighted mean positive-electrode concentration (mol/L).
double mean_pos_concentration(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

// SOC (%) = 100 * (mean_pos - c0_pos) / (c100_pos - c0_pos).
double soc_percent(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

// State with every tracked shell at the given concentration pair.
Eigen::VectorXd uniform_state(const StateSpaceModel& m, double c_neg, double c_pos);

// Uniform-concentration state at a given SOC (%), both electrodes
// interpolated linearly between their 0 %/100 % anchors.
Eigen::VectorXd state_at_soc(const StateSpaceModel& m, double soc);

// Current-dependent output terms (volts; u in amps, positive = discharge):
// charge-transfer overpotentials of each electrode (asinh kinetics) and the
// linear ohmic drop. All three are odd in u; g_total(0) = 0.
double g_overpotential_pos(const BatteryParams& p, double u);
double g_overpotential_neg(const BatteryParams& p, double u);
double g_ohmic(const BatteryParams& p, double u);
double g_total(const BatteryParams& p, double u);

// First-order electrolyte overvoltage lags (pos, neg, sep), rho in volts:
// d(rho_r)/dt = -rho_r / tau_r + u * res_r / tau_r, steady state res_r * u.
// The measured cell voltage subtracts the sum of the three states.
Eigen::Vector3d electrolyte_derivative(const BatteryParams& p, const Eigen::Vector3d& rho,
                                       double u);

// Sensor-bias model: the measured current carries a sign-preserving offset of
// `precision` times the running max of |i| seen so far. Exactly zero current
// reads exactly zero. The tracker is an explicit value threaded by the
// caller; running_max never decreases.
struct BiasTracker {
    double running_max_abs_a = 0.0;
    double precision = 0.01;

    // Update the running max with |i|, then return the biased reading.
    double measure(double i) {
        double a = i < 0.0 ? -i : i;
        if (a > running_max_abs_a) running_max_abs_a = a;
        return bias(i);
    }

    // Biased reading for the current running max (no update).
    double bias(double i) const {
        if (i > 0.0) return i + precision * running_max_abs_a;
        if (i < 0.0) return i - precision * running_max_abs_a;
        return 0.0;
    }
};

}  // namespace cellobs

#pragma once

#include <Eigen/Dense>

#include <vector>

namespace cellobs {

// Multi-observer switching layer: a bank of observer copies distinguished
// only by their injection gains, per-mode monitoring costs eta_k, an
// epsilon-hysteresis switching rule, and a first-order filtered estimate.
//
// Monitoring flow (per mode):  d(eta_k)/dt = -nu eta_k
//                                            + lambda1 |y - yhat_k|^2
//                                            + lambda2 |L_k (y - yhat_k)|^2
//
// Flow set:  eta_k >= eps * eta_sigma for all k   (keep the current mode)
// Jump set:  exists k != sigma with eta_k <= eps * eta_sigma
//
// Jump: sigma <- argmin_k eta_k (ties: smallest index); ALL mode estimates
// and ALL eta are reset to the argmin mode's values; the filtered estimate is
// untouched; the jump counter increments; continuous time does not advance.
// Because the reset leaves every eta equal, the post-jump state lies in the
// closed flow set for any eps <= 1 — one jump per trigger, no chattering.

struct MonitorParams {
    double nu = 0.005;      // discount rate, must satisfy 0 < nu <= alpha
    double lambda1 = 1.0;   // output-error weight
    double lambda2 = 0.005; // correction-effort weight
};

struct SwitchParams {
    double epsilon = 0.95;  // hysteresis factor in (0, 1]
    double zeta = 3.0;      // filtered-estimate pole, 1/s
    double min_dwell_s = 0.0;  // optional extra dwell time between jumps
};

// d(eta)/dt for one mode; ey is the mode's output residual and l2norm2 the
// squared Euclidean norm of its gain column.
inline double monitoring_rate(const MonitorParams& mp, double eta, double ey, double l2norm2) {
    return -mp.nu * eta + (mp.lambda1 + mp.lambda2 * l2norm2) * ey * ey;
}

// Flow-set membership (closed: equality stays in the flow set).
bool in_flow_set(const Eigen::Ref<const Eigen::VectorXd>& eta, int sigma, double epsilon);

// Jump-set membership (closed: equality permits a jump). The two sets overlap
// on the boundary; the executor flows there, jumping only once the flow set
// is strictly left.
bool in_jump_set(const Eigen::Ref<const Eigen::VectorXd>& eta, int sigma, double epsilon);

// Index of the smallest eta; ties resolve to the smallest index.
int argmin_eta(const Eigen::Ref<const Eigen::VectorXd>& eta);

// Switching reset applied in place: estimates is dim x n_modes (one column
// per mode). Returns the new sigma.
int apply_jump(Eigen::Ref<Eigen::MatrixXd> estimates, Eigen::Ref<Eigen::VectorXd> eta, int sigma,
               long& jump_count);

// Gain bank [L1, L1/10, L1/100, 0] (or custom scales); returns dim x size.
Eigen::MatrixXd build_default_bank(const Eigen::VectorXd& L1,
                                   const std::vector<double>& scales = {1.0, 0.1, 0.01, 0.0});

// Quadrature reference for the monitoring flow: integrates
//
//   eta(t) = e^{-nu t} eta0 + integral_0^t e^{-nu (t-s)} phi(s) ds,
//   phi(s) = (lambda1 + lambda2 |L|^2) ey(s)^2,
//
// with composite Simpson steps over uniformly sampled ey (sample count must
// be odd: an even number of intervals). Used as a test oracle against the
// ODE-integrated eta.
double monitoring_integral_oracle(const MonitorParams& mp, double eta0,
                                  const Eigen::Ref<const Eigen::VectorXd>& L_k,
                                  const std::vector<double>& ey_samples, double dt);

}  // namespace cellobs

#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace cellobs {

// Vertex-wise observer-gain feasibility problem: find L, P > 0 and
// multipliers (mu_v, mu_w, mu_d) such that for every vertex row C_i the
// block matrix
//
//         [ H_i + alpha P    P E      -P L     -P     ]
//   M_i = [   (P E)^T      -mu_v I     0        0     ]   is negative
//         [  (-P L)^T         0      -mu_w      0     ]   semidefinite,
//         [    -P             0        0     -mu_d I  ]
//
//   H_i = (A - L C_i)^T P + P (A - L C_i),
//
// which certifies exponential decay at rate alpha of the estimation error
// plus ISS gains against input disturbance (mu_v), measurement noise (mu_w)
// and estimate resets (mu_d).
struct LmiProblem {
    Eigen::MatrixXd A;                        // n x n
    Eigen::MatrixXd E;                        // n x n_v
    std::array<Eigen::RowVectorXd, 4> C;      // output-map vertices, 1 x n
    double alpha = 0.01;                      // decay rate, 1/s
};

struct GainCertificate {
    Eigen::VectorXd L;   // n x 1 injection gain
    Eigen::MatrixXd P;   // n x n symmetric positive definite
    double alpha = 0.0;
    double mu_v = 0.0;
    double mu_w = 0.0;
    double mu_d = 0.0;
    // max over vertices of lambda_max(M_i), computed on the scaled problem
    // (A normalized to unit spectral norm); negative for strictly feasible
    // certificates.
    double max_eigenvalue_residual = 0.0;
};

struct SynthOptions {
    double rho = 1e-3;        // strict-feasibility margin on the scaled LMI
    double p_floor = 1e-6;    // eigenvalue floor for P (trace(P) is pinned to n,
                              // so this equals 1e-6 * trace(P)/n)
    double mu_min = 1e-9;     // multiplier box, original units
    double mu_max = 1e6;
    int max_iters = 60000;    // per solve attempt
    double time_budget_s = 50.0;  // overall wall budget
    int check_every = 100;    // feasibility test cadence (iterations)
    double seed_rate = 2.5;   // target output-injection rate (1/s) of the seed gain
    std::vector<double> kappa_ladder = {1.0, 0.5, 2.0, 0.25, 4.0, 0.125, 8.0};
    bool allow_free_gain = true;  // free-gain splitting as last resort
};

struct SynthResult {
    bool feasible = false;
    GainCertificate certificate;  // valid only when feasible
    double best_residual = 0.0;   // best max-eigenvalue residual seen (scaled)
    int iterations = 0;           // iterations of the accepted (or last) attempt
    double elapsed_s = 0.0;
    double kappa = 0.0;           // accepted seed multiplier; 0 on the free-gain path
    bool free_gain = false;
    Eigen::VectorXd Y;            // final P*L iterate (substitution consistency check)
    std::string message;          // diagnostics, esp. on infeasible-after-budget
};

// Splitting solver over the product of the affine structure (matrix blocks
// generated by (P, Y, mu) with Y = P L and trace(P) = n) and the cone
// constraints (M_i <= -rho I, P >= floor, mu boxed). The problem is
// pre-scaled to unit spectral norm of A; the returned certificate is in
// original units. Never returns an unverified gain: the accepted iterate is
// re-checked with verify_certificate before being reported feasible.
SynthResult synthesize_gain(const LmiProblem& problem, const SynthOptions& opts = {});

// Independent certificate check: rebuilds every vertex block matrix directly
// from (L, P, mu) — not from the solver's Y parametrization — on the scaled
// problem, and reports the worst eigenvalue. PASS iff the worst eigenvalue is
// <= tolerance and P is positive definite (and dimensions/alpha match).
struct VerifyReport {
    bool pass = false;
    double residual = 0.0;      // max over vertices of lambda_max(M_i), scaled
    double p_min_eig = 0.0;     // smallest eigenvalue of P
    std::string reason;         // non-empty on FAIL
};
VerifyReport verify_certificate(const LmiProblem& problem, const GainCertificate& cert,
                                double tolerance = 1e-8);

// Trajectory-based decrease check of the certified Lyapunov function
// V(e) = e^T P e along uniformly sampled (x, xhat, v, w) with finite-
// difference dV/dt:
//
//   dV/dt <= -alpha V + mu_v v^2 + mu_w w^2 + slack
//
// plus the sandwich bound lmin(P)|e|^2 <= V <= lmax(P)|e|^2. The estimate-
// reset channel (mu_d) is zero along flows and is not exercised here.
struct DecreaseReport {
    int samples = 0;
    int violations = 0;
    double max_violation = 0.0;  // worst dV/dt excess over the budget
    bool sandwich_ok = false;
    bool pass = false;
};
DecreaseReport lyapunov_decrease_check(const GainCertificate& cert,
                                       const std::vector<Eigen::VectorXd>& x,
                                       const std::vector<Eigen::VectorXd>& xhat,
                                       const std::vector<double>& v,
                                       const std::vector<double>& w,
                                       double dt, double slack);

// JSON (de)serialization of certificates (upper-triangular P storage).
std::string certificate_to_json(const GainCertificate& cert, const std::string& solver_info);
GainCertificate certificate_from_json(const std::string& text);  // throws ParseError

}  // namespace cellobs

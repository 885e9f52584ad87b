#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "cellobs/errors.hpp"
#include "cellobs/model.hpp"
#include "cellobs/rng.hpp"

namespace cellobs {

// Piecewise-linear open-circuit-voltage curve over stoichiometry theta.
// Linear interpolation between breakpoints, constant extrapolation outside
// [theta.front(), theta.back()].
struct OcvCurve {
    Eigen::VectorXd theta;  // strictly increasing breakpoints in [0, 1]
    Eigen::VectorXd volt;   // voltages at the breakpoints
    std::string tag;        // "neg" | "pos" (informational)

    double eval(double th) const;
    int segments() const { return static_cast<int>(theta.size()) - 1; }

    // Secant slope between two stoichiometries (th_a != th_b).
    double secant(double th_a, double th_b) const {
        return (eval(th_b) - eval(th_a)) / (th_b - th_a);
    }
};

// Loads a curve from a two-column CSV `theta,voltage_V` (header required,
// theta strictly ascending, >= 2 rows). Throws ParseError with the row index.
OcvCurve load_ocv(const std::string& path, const std::string& tag);

// Builds a curve from an in-memory breakpoint table (validated the same way).
OcvCurve make_ocv(const std::vector<std::pair<double, double>>& table, const std::string& tag);

// Min/max of the per-segment finite-difference slopes (signed; a decreasing
// curve yields negative bounds).
struct SlopeBounds {
    double min_slope = 0.0;
    double max_slope = 0.0;
};
SlopeBounds slope_bounds(const OcvCurve& curve);

// Slope-box embedding of the output nonlinearity: the voltage difference
// between two states factors as h(x) - h(x') = C(x,x') (x - x') where C lies
// in the convex hull of four constant rows
//
//     C_i = s_pos * h_pos - s_neg * h_neg,
//
// s_pos and s_neg ranging over the {min,max} secant slopes of each curve.
// Vertex order: (sn_min,sp_min), (sn_max,sp_min), (sn_min,sp_max),
// (sn_max,sp_max).
struct OcvPolytope {
    OcvCurve curve_neg;
    OcvCurve curve_pos;
    SlopeBounds neg;
    SlopeBounds pos;
    std::array<Eigen::RowVectorXd, 4> vertices;
    Eigen::RowVectorXd h_neg;  // copies of the model selector rows, so the
    Eigen::RowVectorXd h_pos;  // exact C(s) can be rebuilt for any slope pair
    int dim = 0;
};

// Throws std::invalid_argument when the model's selector rows are missing.
OcvPolytope build_vertices(const OcvCurve& curve_neg, const OcvCurve& curve_pos,
                           const StateSpaceModel& m);

// Interpolation weights placing the slope pair (s_neg, s_pos) inside the
// vertex box: bilinear in the normalized coordinates, each in [0,1], summing
// to 1. Slopes equal to a bound saturate the weight at exactly 0/1; a
// degenerate (min == max) interval saturates at 0.
std::array<double, 4> vertex_weights(const OcvPolytope& p, double s_neg, double s_pos);

// Brute-force secant scan: draws random in-domain stoichiometry pairs for
// both electrodes and checks that every secant slope lies inside its bounds
// and that the vertex weights reconstruct C(x,x') exactly.
struct SectorReport {
    int samples = 0;
    // Worst secant excess outside its slope box, measured in volts (slope
    // distance scaled by the pair's stoichiometry separation, which keeps the
    // check roundoff-robust for nearly coincident pairs).
    double max_slope_violation = 0.0;
    double max_weight_error = 0.0;      // |sum(lambda) - 1| and range excess
    double max_reconstruction_error = 0.0;  // ||sum(lambda_i C_i) - C(s)||_inf
    bool pass = false;
};
SectorReport verify_sector(const OcvPolytope& p, int n_samples, Rng& rng, double tol = 1e-12);

// Voltage output h(x) + g(u). Stoichiometries are clamped to
// [1e-6, 1 - 1e-6] before curve lookup; when clamping was needed the optional
// flag counter is incremented (domain violation, not fatal).
double eval_output(const StateSpaceModel& m, const OcvCurve& curve_neg, const OcvCurve& curve_pos,
                   const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                   long* domain_violations = nullptr);

}  // namespace cellobs

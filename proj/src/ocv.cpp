#include "cellobs/ocv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cellobs {

namespace {

// Validates breakpoints shared by the file and in-memory loaders; `where`
// prefixes error messages (path or "<table>").
OcvCurve finish_curve(std::vector<double> th, std::vector<double> v, const std::string& tag,
                      const std::string& where) {
    if (th.size() < 2)
        throw ParseError(where + ": OCV curve needs at least 2 breakpoints, got " +
                         std::to_string(th.size()));
    for (size_t k = 0; k < th.size(); ++k) {
        if (!std::isfinite(th[k]) || !std::isfinite(v[k]))
            throw ParseError(where + ": non-finite value at data row " + std::to_string(k + 1));
        if (th[k] < 0.0 || th[k] > 1.0)
            throw ParseError(where + ": stoichiometry outside [0,1] at data row " +
                             std::to_string(k + 1));
        if (k > 0 && !(th[k] > th[k - 1]))
            throw ParseError(where + ": theta not strictly increasing at data row " +
                             std::to_string(k + 1));
    }
    OcvCurve c;
    c.theta = Eigen::Map<Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(th.size()));
    c.volt = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    c.tag = tag;
    return c;
}

}  // namespace

double OcvCurve::eval(double th) const {
    const Eigen::Index n = theta.size();
    if (th <= theta[0]) return volt[0];              // constant extrapolation
    if (th >= theta[n - 1]) return volt[n - 1];
    // Curves are short (a handful of segments); a linear scan beats binary
    // search on branch prediction in the simulation hot path.
    Eigen::Index k = 1;
    while (theta[k] < th) ++k;
    const double w = (th - theta[k - 1]) / (theta[k] - theta[k - 1]);
    return volt[k - 1] + w * (volt[k] - volt[k - 1]);
}

OcvCurve load_ocv(const std::string& path, const std::string& tag) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open OCV file");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty OCV file");
    // Tolerate UTF-8 BOM and trailing CR from foreign editors.
    if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "theta,voltage_V")
        throw ParseError(path + ": row 1: expected header 'theta,voltage_V', got '" + line + "'");

    std::vector<double> th, v;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        double a, b;
        char comma;
        if (!(ss >> a >> comma >> b) || comma != ',')
            throw ParseError(path + ": row " + std::to_string(row) + ": malformed line '" +
                             line + "'");
        th.push_back(a);
        v.push_back(b);
    }
    return finish_curve(std::move(th), std::move(v), tag, path);
}

OcvCurve make_ocv(const std::vector<std::pair<double, double>>& table, const std::string& tag) {
    std::vector<double> th, v;
    th.reserve(table.size());
    v.reserve(table.size());
    for (const auto& [a, b] : table) {
        th.push_back(a);
        v.push_back(b);
    }
    return finish_curve(std::move(th), std::move(v), tag, "<table>");
}

SlopeBounds slope_bounds(const OcvCurve& curve) {
    SlopeBounds b;
    b.min_slope = std::numeric_limits<double>::infinity();
    b.max_slope = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < curve.segments(); ++k) {
        const double s =
            (curve.volt[k + 1] - curve.volt[k]) / (curve.theta[k + 1] - curve.theta[k]);
        b.min_slope = std::min(b.min_slope, s);
        b.max_slope = std::max(b.max_slope, s);
    }
    return b;
}

OcvPolytope build_vertices(const OcvCurve& curve_neg, const OcvCurve& curve_pos,
                           const StateSpaceModel& m) {
    if (m.h_neg.size() != m.dim || m.h_pos.size() != m.dim)
        throw std::invalid_argument("build_vertices: model selector rows missing");
    OcvPolytope p;
    p.curve_neg = curve_neg;
    p.curve_pos = curve_pos;
    p.neg = slope_bounds(curve_neg);
    p.pos = slope_bounds(curve_pos);
    p.h_neg = m.h_neg;
    p.h_pos = m.h_pos;
    p.dim = m.dim;
    const double sn[2] = {p.neg.min_slope, p.neg.max_slope};
    const double sp[2] = {p.pos.min_slope, p.pos.max_slope};
    // Vertex order: (sn_min,sp_min), (sn_max,sp_min), (sn_min,sp_max), (sn_max,sp_max).
    for (int ip = 0; ip < 2; ++ip)
        for (int in = 0; in < 2; ++in)
            p.vertices[2 * ip + in] = sp[ip] * m.h_pos - sn[in] * m.h_neg;
    return p;
}

std::array<double, 4> vertex_weights(const OcvPolytope& p, double s_neg, double s_pos) {
    // Normalized box coordinates; a degenerate interval saturates at 0, as
    // does a slope sitting exactly on a bound (clamped against roundoff).
    auto coord = [](double s, double lo, double hi) {
        if (!(hi > lo)) return 0.0;
        return std::clamp((s - lo) / (hi - lo), 0.0, 1.0);
    };
    const double a = coord(s_neg, p.neg.min_slope, p.neg.max_slope);
    const double b = coord(s_pos, p.pos.min_slope, p.pos.max_slope);
    return {(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b};
}

SectorReport verify_sector(const OcvPolytope& p, int n_samples, Rng& rng, double tol) {
    SectorReport rep;
    rep.samples = n_samples;

    // Sample inside the tabulated spans; beyond them the constant
    // extrapolation flattens secants below the slope box by design.
    const double n_lo = p.curve_neg.theta[0], n_hi = p.curve_neg.theta[p.curve_neg.theta.size() - 1];
    const double p_lo = p.curve_pos.theta[0], p_hi = p.curve_pos.theta[p.curve_pos.theta.size() - 1];

    Eigen::RowVectorXd reconstructed(p.dim);
    for (int s = 0; s < n_samples; ++s) {
        const double tn_a = rng.uniform(n_lo, n_hi);
        double tn_b = rng.uniform(n_lo, n_hi);
        const double tp_a = rng.uniform(p_lo, p_hi);
        double tp_b = rng.uniform(p_lo, p_hi);
        // Coincident draws are trivially representable; nudge to keep the
        // secant defined.
        if (tn_b == tn_a) tn_b = tn_a + (tn_a < 0.5 * (n_lo + n_hi) ? 1e-9 : -1e-9);
        if (tp_b == tp_a) tp_b = tp_a + (tp_a < 0.5 * (p_lo + p_hi) ? 1e-9 : -1e-9);

        const double s_neg = p.curve_neg.secant(tn_a, tn_b);
        const double s_pos = p.curve_pos.secant(tp_a, tp_b);

        auto excess = [](double v, double lo, double hi) {
            if (v < lo) return lo - v;
            if (v > hi) return v - hi;
            return 0.0;
        };
        // A raw slope excess over a pair dth apart is the 1/dth-amplified
        // roundoff of two curve lookups, so the robust measure is the excess
        // in the voltage domain: slope distance times the pair separation.
        rep.max_slope_violation =
            std::max(rep.max_slope_violation, excess(s_neg, p.neg.min_slope, p.neg.max_slope) *
                                                  std::abs(tn_b - tn_a));
        rep.max_slope_violation =
            std::max(rep.max_slope_violation, excess(s_pos, p.pos.min_slope, p.pos.max_slope) *
                                                  std::abs(tp_b - tp_a));

        // Weights clamp to the box, so reconstruct against the projected
        // slopes; the violation term above already accounts for the excess.
        const double sn_c = std::clamp(s_neg, p.neg.min_slope, p.neg.max_slope);
        const double sp_c = std::clamp(s_pos, p.pos.min_slope, p.pos.max_slope);
        const auto lam = vertex_weights(p, sn_c, sp_c);
        double lam_sum = 0.0;
        for (double l : lam) {
            lam_sum += l;
            rep.max_weight_error = std::max(rep.max_weight_error, std::max(-l, l - 1.0));
        }
        rep.max_weight_error = std::max(rep.max_weight_error, std::abs(lam_sum - 1.0));

        // C(s_neg, s_pos) is bilinear in the slope pair, so the box weights
        // must reproduce it exactly (up to roundoff).
        reconstructed.setZero();
        for (int k = 0; k < 4; ++k) reconstructed.noalias() += lam[k] * p.vertices[k];
        reconstructed -= sp_c * p.h_pos;
        reconstructed += sn_c * p.h_neg;
        rep.max_reconstruction_error =
            std::max(rep.max_reconstruction_error, reconstructed.cwiseAbs().maxCoeff());
    }
    rep.pass = rep.max_slope_violation <= tol && rep.max_weight_error <= tol &&
               rep.max_reconstruction_error <= tol;
    return rep;
}

double eval_output(const StateSpaceModel& m, const OcvCurve& curve_neg, const OcvCurve& curve_pos,
                   const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                   long* domain_violations) {
    double th_n = m.h_neg.dot(x);
    double th_p = m.h_pos.dot(x);
    const double lo = 1e-6, hi = 1.0 - 1e-6;
    if (th_n < lo || th_n > hi || th_p < lo || th_p > hi) {
        if (domain_violations) ++*domain_violations;
        th_n = std::clamp(th_n, lo, hi);
        th_p = std::clamp(th_p, lo, hi);
    }
    return curve_pos.eval(th_p) - curve_neg.eval(th_n) + g_total(m.params, u);
}

}  // namespace cellobs

#include "cellobs/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cellobs {

namespace {

// Diffusion stencil coefficient of shell i (1-based) across boundary j:
// mu_{i,j} = D / V_i * S_j / (r_{j+1} - r_j). Boundaries outside 1..n-1
// (particle center and the outer surface, which is driven by the current
// input instead) contribute zero.
double mu(const SphereShells& sh, double diffusion, int i, int j) {
    const int n = sh.n_shells;
    if (j < 1 || j > n - 1) return 0.0;
    return diffusion / sh.volumes[i - 1] * sh.surfaces[j - 1] / (sh.radii[j + 1] - sh.radii[j]);
}

// Surface-shell current coefficient (mol/L per second per amp). The molar
// flux density over the particle surface is u / (F * a_spec * area * d) with
// a_spec = 3*volfrac/R the specific interfacial area; multiplying by the
// outer surface S_tot and dividing by the shell volume (x1000 for mol/L)
// gives the concentration rate. `sign` is -1 for the negative electrode
// (discharge removes lithium) and +1 for the positive.
double surface_input(const SphereShells& sh, double volfrac, double radius, double area,
                     double thickness, double faraday, double sign) {
    const double a_spec = 3.0 * volfrac / radius;
    const double v_surf = sh.volumes[sh.n_shells - 1];
    return sign * sh.total_surface() /
           (1000.0 * faraday * a_spec * area * thickness * v_surf);
}

}  // namespace

StateSpaceModel assemble_model(const BatteryParams& params, int n_neg, int n_pos) {
    if (n_neg < 3) throw std::invalid_argument("assemble_model: n_neg must be >= 3");
    if (n_pos < 2) throw std::invalid_argument("assemble_model: n_pos must be >= 2");
    if (std::string err = params.validate(); !err.empty())
        throw std::invalid_argument("assemble_model: " + err);

    StateSpaceModel m;
    m.n_neg = n_neg;
    m.n_pos = n_pos;
    m.dim = n_neg + n_pos - 1;
    m.params = params;
    m.shells_neg = SphereShells::equal_volume(n_neg, params.particle_radius_neg_m);
    m.shells_pos = SphereShells::equal_volume(n_pos, params.particle_radius_pos_m);
    m.gamma_neg = params.capacity_gamma_neg();
    m.gamma_pos = params.capacity_gamma_pos();

    const SphereShells& sn = m.shells_neg;
    const SphereShells& sp = m.shells_pos;
    const double dn = params.diffusion_neg_m2s;
    const double dp = params.diffusion_pos_m2s;
    const int q = m.pos_offset();

    // Ah per (mol/L) of a single shell: a_s = gamma_s / V_tot. Equal volumes
    // make a_s * V_i identical across shells of one electrode.
    const double a_neg = m.gamma_neg / sn.volumes.sum();
    const double a_pos = m.gamma_pos / sp.volumes.sum();

    // Eliminated innermost negative shell: c1 = kbar + beta * x solves
    // a_neg * sum(V_i c_i) + a_pos * sum(V_i c_i) = q_li for c1.
    const double v1n = sn.volumes[0];
    m.kbar = params.q_li_ah / (a_neg * v1n);
    m.beta = Eigen::RowVectorXd::Zero(m.dim);
    for (int i = 2; i <= n_neg; ++i) m.beta[i - 2] = -sn.volumes[i - 1] / v1n;
    for (int i = 1; i <= n_pos; ++i) m.beta[q + i - 1] = -(a_pos * sp.volumes[i - 1]) / (a_neg * v1n);

    m.A = Eigen::MatrixXd::Zero(m.dim, m.dim);
    m.B = Eigen::VectorXd::Zero(m.dim);
    m.K = Eigen::VectorXd::Zero(m.dim);

    // --- negative block: tracked shells 2..n_neg at x-indices 0..n_neg-2 ---
    // Shell 2 couples to the eliminated c1; substituting the reconstruction
    // smears mu_21 * beta over the whole state and leaves the constant drift
    // mu_21 * kbar in K.
    {
        const double m21 = mu(sn, dn, 2, 1);
        const double m22 = mu(sn, dn, 2, 2);
        m.A.row(0) = m21 * m.beta;
        m.A(0, 0) += -(m21 + m22);
        m.A(0, 1) += m22;
        m.K[0] = m21 * m.kbar;
    }
    for (int i = 3; i <= n_neg - 1; ++i) {
        const int r = i - 2;
        const double lo = mu(sn, dn, i, i - 1);
        const double hi = mu(sn, dn, i, i);
        m.A(r, r - 1) = lo;
        m.A(r, r) = -(lo + hi);
        m.A(r, r + 1) = hi;
    }
    {
        const int r = n_neg - 2;  // surface shell
        const double lo = mu(sn, dn, n_neg, n_neg - 1);
        m.A(r, r - 1) += lo;
        m.A(r, r) += -lo;
        m.B[r] = surface_input(sn, params.volfrac_neg, params.particle_radius_neg_m,
                               params.cell_area_m2, params.thickness_neg_m,
                               params.faraday_c_mol, -1.0);
    }

    // --- positive block: shells 1..n_pos at x-indices q..q+n_pos-1 ---
    {
        const double m11 = mu(sp, dp, 1, 1);
        m.A(q, q) = -m11;
        m.A(q, q + 1) = m11;
    }
    for (int i = 2; i <= n_pos - 1; ++i) {
        const int r = q + i - 1;
        const double lo = mu(sp, dp, i, i - 1);
        const double hi = mu(sp, dp, i, i);
        m.A(r, r - 1) = lo;
        m.A(r, r) = -(lo + hi);
        m.A(r, r + 1) = hi;
    }
    {
        const int r = q + n_pos - 1;  // surface shell
        const double lo = mu(sp, dp, n_pos, n_pos - 1);
        m.A(r, r - 1) += lo;
        m.A(r, r) += -lo;
        m.B[r] = surface_input(sp, params.volfrac_pos, params.particle_radius_pos_m,
                               params.cell_area_m2, params.thickness_pos_m,
                               params.faraday_c_mol, +1.0);
    }

    m.E = m.B;  // disturbance enters on the current channel

    m.idx_surf_neg = n_neg - 2;
    m.idx_surf_pos = m.dim - 1;
    m.h_neg = Eigen::RowVectorXd::Zero(m.dim);
    m.h_pos = Eigen::RowVectorXd::Zero(m.dim);
    m.h_neg[m.idx_surf_neg] = 1.0 / params.cmax_neg_moll;
    m.h_pos[m.idx_surf_pos] = 1.0 / params.cmax_pos_moll;

    return m;
}

double reconstruct_c1_neg(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != m.dim)
        throw std::invalid_argument("reconstruct_c1_neg: state dimension mismatch");
    return m.kbar + m.beta.dot(x);
}

double total_lithium_ah(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                        double c1_neg) {
    if (x.size() != m.dim) throw std::invalid_argument("total_lithium_ah: dimension mismatch");
    const int q = m.pos_offset();
    double sum_neg = m.shells_neg.volumes[0] * c1_neg;
    for (int i = 2; i <= m.n_neg; ++i) sum_neg += m.shells_neg.volumes[i - 1] * x[i - 2];
    double sum_pos = 0.0;
    for (int i = 1; i <= m.n_pos; ++i) sum_pos += m.shells_pos.volumes[i - 1] * x[q + i - 1];
    return m.gamma_neg * sum_neg / m.shells_neg.volumes.sum() +
           m.gamma_pos * sum_pos / m.shells_pos.volumes.sum();
}

double mean_pos_concentration(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != m.dim)
        throw std::invalid_argument("mean_pos_concentration: dimension mismatch");
    const int q = m.pos_offset();
    double sum = 0.0;
    for (int i = 1; i <= m.n_pos; ++i) sum += m.shells_pos.volumes[i - 1] * x[q + i - 1];
    return sum / m.shells_pos.volumes.sum();
}

double soc_percent(const StateSpaceModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double cbar = mean_pos_concentration(m, x);
    return 100.0 * (cbar - m.params.c0_pos_moll) /
           (m.params.c100_pos_moll - m.params.c0_pos_moll);
}

Eigen::VectorXd uniform_state(const StateSpaceModel& m, double c_neg, double c_pos) {
    Eigen::VectorXd x(m.dim);
    x.head(m.n_neg - 1).setConstant(c_neg);
    x.tail(m.n_pos).setConstant(c_pos);
    return x;
}

Eigen::VectorXd state_at_soc(const StateSpaceModel& m, double soc) {
    const BatteryParams& p = m.params;
    const double f = soc / 100.0;
    const double c_neg = p.c0_neg_moll + f * (p.c100_neg_moll - p.c0_neg_moll);
    const double c_pos = p.c0_pos_moll + f * (p.c100_pos_moll - p.c0_pos_moll);
    return uniform_state(m, c_neg, c_pos);
}

double g_overpotential_pos(const BatteryParams& p, double u) {
    const double thermal = 2.0 * p.gas_constant * p.temperature_k / p.faraday_c_mol;
    const double xi = -p.particle_radius_pos_m * u /
                      (6.0 * p.volfrac_pos * p.exch_current_pos * p.cell_area_m2 *
                       p.thickness_pos_m);
    return thermal * std::asinh(xi);
}

double g_overpotential_neg(const BatteryParams& p, double u) {
    const double thermal = 2.0 * p.gas_constant * p.temperature_k / p.faraday_c_mol;
    const double xi = p.particle_radius_neg_m * u /
                      (6.0 * p.volfrac_neg * p.exch_current_neg * p.cell_area_m2 *
                       p.thickness_neg_m);
    return -thermal * std::asinh(xi);
}

double g_ohmic(const BatteryParams& p, double u) {
    const double r_solid = (p.thickness_neg_m / p.conductivity_neg_sm +
                            p.thickness_pos_m / p.conductivity_pos_sm) /
                           (2.0 * p.cell_area_m2);
    return -(r_solid + p.omega_add_ohm) * u;
}

double g_total(const BatteryParams& p, double u) {
    return g_overpotential_pos(p, u) + g_overpotential_neg(p, u) + g_ohmic(p, u);
}

Eigen::Vector3d electrolyte_derivative(const BatteryParams& p, const Eigen::Vector3d& rho,
                                       double u) {
    Eigen::Vector3d d;
    for (int r = 0; r < 3; ++r)
        d[r] = (-rho[r] + p.electrolyte_res_ohm[r] * u) / p.electrolyte_tau_s[r];
    return d;
}

}  // namespace cellobs

#include <cmath>

#include "cellobs/model.hpp"
#include "cellobs/rng.hpp"
#include "doctest.h"

using namespace cellobs;

namespace {

// Lithium inventory consistent with the stoichiometry anchors and electrode
// volumes (gamma_neg * c_neg + gamma_pos * c_pos at either anchor pair).
BatteryParams consistent_params() {
    BatteryParams p;
    p.q_li_ah = 14.175211036436664;
    return p;
}

Eigen::VectorXd random_state(const StateSpaceModel& m, Rng& rng) {
    Eigen::VectorXd x(m.dim);
    for (int i = 0; i < m.n_neg - 1; ++i) x[i] = rng.uniform(1.0, 15.0);
    for (int i = m.pos_offset(); i < m.dim; ++i) x[i] = rng.uniform(5.0, 23.0);
    return x;
}

}  // namespace

TEST_CASE("equal-volume shells: radii, volumes, surfaces") {
    const SphereShells sh = SphereShells::equal_volume(6, 1e-6);
    REQUIRE(sh.n_shells == 6);
    REQUIRE(sh.radii.size() == 7);
    CHECK(sh.radii[0] == 0.0);
    CHECK(sh.radii[6] == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(sh.radii[3] == doctest::Approx(std::cbrt(3.0 / 6.0) * 1e-6).epsilon(1e-14));
    const double v_total = 4.0 / 3.0 * M_PI * 1e-18;
    for (int j = 0; j < 6; ++j)
        CHECK(sh.volumes[j] == doctest::Approx(v_total / 6.0).epsilon(1e-12));
    CHECK(sh.total_surface() == doctest::Approx(4.0 * M_PI * 1e-12).epsilon(1e-14));
    CHECK_THROWS_AS(SphereShells::equal_volume(0, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(SphereShells::equal_volume(3, -1.0), std::invalid_argument);
}

TEST_CASE("model dimensions and selector rows") {
    const BatteryParams p = consistent_params();
    const StateSpaceModel m66 = assemble_model(p, 6, 6);
    CHECK(m66.dim == 11);
    const StateSpaceModel m = assemble_model(p, 4, 4);
    CHECK(m.dim == 7);
    CHECK(m.pos_offset() == 3);
    CHECK(m.idx_surf_neg == 2);
    CHECK(m.idx_surf_pos == 6);
    CHECK(m.h_neg[m.idx_surf_neg] == doctest::Approx(1.0 / p.cmax_neg_moll).epsilon(1e-15));
    CHECK(m.h_pos[m.idx_surf_pos] == doctest::Approx(1.0 / p.cmax_pos_moll).epsilon(1e-15));
    CHECK(m.h_neg.squaredNorm() ==
          doctest::Approx(1.0 / (p.cmax_neg_moll * p.cmax_neg_moll)).epsilon(1e-15));
    CHECK_THROWS_AS(assemble_model(p, 2, 4), std::invalid_argument);
    CHECK_THROWS_AS(assemble_model(p, 4, 1), std::invalid_argument);
}

TEST_CASE("capacity per concentration unit of each electrode") {
    const BatteryParams p;
    CHECK(p.capacity_gamma_neg() == doctest::Approx(0.8123715383333332).epsilon(1e-15));
    CHECK(p.capacity_gamma_pos() == doctest::Approx(0.50423060999999991).epsilon(1e-15));
}

TEST_CASE("uniform lithium-consistent state is an equilibrium") {
    const BatteryParams p = consistent_params();
    for (auto [nn, np] : {std::pair{4, 4}, std::pair{6, 6}}) {
        const StateSpaceModel m = assemble_model(p, nn, np);
        // Choose c_neg freely; c_pos follows from the fixed total inventory.
        const double cn = 7.3;
        const double cp = (p.q_li_ah - m.gamma_neg * cn) / m.gamma_pos;
        const Eigen::VectorXd x = uniform_state(m, cn, cp);
        CHECK(reconstruct_c1_neg(m, x) == doctest::Approx(cn).epsilon(1e-12));
        const Eigen::VectorXd dx = m.A * x + m.K;
        CHECK(dx.cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("uniform inventory-preserving shift is in the null space of A") {
    const BatteryParams p = consistent_params();
    const StateSpaceModel m = assemble_model(p, 5, 6);
    Eigen::VectorXd v(m.dim);
    v.head(m.pos_offset()).setOnes();
    v.tail(m.dim - m.pos_offset()).setConstant(-m.gamma_neg / m.gamma_pos);
    CHECK((m.A * v).cwiseAbs().maxCoeff() <= 1e-12);
    // The eliminated innermost shell must shift with its electrode.
    CHECK(m.beta.dot(v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("input column moves charge at u/3600 Ah per second into the positive electrode") {
    const BatteryParams p = consistent_params();
    const StateSpaceModel m = assemble_model(p, 4, 5);
    // Volume-weighted positive mean is linear, so applying it to B gives the
    // mean concentration rate per ampere.
    const double rate = mean_pos_concentration(m, m.B);
    CHECK(m.gamma_pos * rate == doctest::Approx(1.0 / 3600.0).epsilon(1e-12));
    CHECK(m.B[m.idx_surf_pos] > 0.0);   // discharge fills the positive surface
    CHECK(m.B[m.idx_surf_neg] < 0.0);   // and drains the negative surface
    CHECK((m.E - m.B).cwiseAbs().maxCoeff() == 0.0);
    // Only the surface shells receive current directly.
    for (int i = 0; i < m.dim; ++i)
        if (i != m.idx_surf_neg && i != m.idx_surf_pos) CHECK(m.B[i] == 0.0);
}

TEST_CASE("spectral norm of the 4+4-shell dynamics matrix") {
    const StateSpaceModel m = assemble_model(BatteryParams{}, 4, 4);
    const double norm = m.A.jacobiSvd().singularValues()[0];
    CHECK(norm == doctest::Approx(0.10098391336064697).epsilon(1e-9));
}

TEST_CASE("innermost-shell reconstruction at the SOC anchors") {
    const BatteryParams p = consistent_params();
    const StateSpaceModel m = assemble_model(p, 6, 6);
    const Eigen::VectorXd x100 = state_at_soc(m, 100.0);
    CHECK(x100[0] == doctest::Approx(11.75).epsilon(1e-15));
    CHECK(x100[m.dim - 1] == doctest::Approx(9.182).epsilon(1e-15));
    CHECK(reconstruct_c1_neg(m, x100) == doctest::Approx(11.75).epsilon(1e-12));
    // The published anchor pairs carry slightly different capacities
    // (gamma_neg * (c100 - c0) differs from gamma_pos * (c0 - c100) by ~1e-5
    // relative), so with the inventory pinned at the 100 % state the 0 % state
    // sits just off the conservation manifold: the reconstructed innermost
    // shell absorbs the ~1e-4 Ah mismatch instead of matching 3.167 exactly.
    const Eigen::VectorXd x0 = state_at_soc(m, 0.0);
    CHECK(reconstruct_c1_neg(m, x0) == doctest::Approx(3.167).epsilon(5e-4));
    CHECK(soc_percent(m, x100) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(soc_percent(m, x0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(soc_percent(m, state_at_soc(m, 37.5)) == doctest::Approx(37.5).epsilon(1e-12));
}

TEST_CASE("total lithium equals the configured inventory on the consistent manifold") {
    const BatteryParams p = consistent_params();
    const StateSpaceModel m = assemble_model(p, 4, 6);
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd x = random_state(m, rng);
        const double c1 = reconstruct_c1_neg(m, x);
        CHECK(total_lithium_ah(m, x, c1) == doctest::Approx(p.q_li_ah).epsilon(1e-12));
        // An off-manifold innermost shell shows up as an inventory error.
        CHECK(std::abs(total_lithium_ah(m, x, c1 + 1.0) - p.q_li_ah) > 1e-3);
    }
}

TEST_CASE("current-dependent output terms") {
    const BatteryParams p;
    CHECK(g_ohmic(p, 1.0) == doctest::Approx(-1.9613471106008426e-6).epsilon(1e-12));
    CHECK(g_total(p, 0.0) == 0.0);
    CHECK(g_total(p, 5.0) < 0.0);  // discharge sags the terminal voltage
    for (double u : {0.3, 1.0, 7.5, 30.0}) {
        CHECK(g_total(p, -u) == doctest::Approx(-g_total(p, u)).epsilon(1e-14));
        CHECK(g_overpotential_pos(p, -u) ==
              doctest::Approx(-g_overpotential_pos(p, u)).epsilon(1e-14));
        CHECK(g_overpotential_neg(p, -u) ==
              doctest::Approx(-g_overpotential_neg(p, u)).epsilon(1e-14));
    }
    // Charge-transfer terms follow asinh kinetics: sublinear growth.
    const double g1 = std::abs(g_overpotential_pos(p, 1.0));
    const double g10 = std::abs(g_overpotential_pos(p, 10.0));
    CHECK(g10 < 10.0 * g1);
}

TEST_CASE("electrolyte lags settle at res * u") {
    const BatteryParams p;
    const double u = 1.0;
    Eigen::Vector3d rho_ss;
    for (int r = 0; r < 3; ++r) rho_ss[r] = p.electrolyte_res_ohm[r] * u;
    CHECK(rho_ss[0] == doctest::Approx(153.9e-6).epsilon(1e-15));
    const Eigen::Vector3d d = electrolyte_derivative(p, rho_ss, u);
    CHECK(d.cwiseAbs().maxCoeff() <= 1e-18);
    // From rest the states charge toward the steady values.
    const Eigen::Vector3d d0 = electrolyte_derivative(p, Eigen::Vector3d::Zero(), u);
    for (int r = 0; r < 3; ++r)
        CHECK(d0[r] == doctest::Approx(p.electrolyte_res_ohm[r] / p.electrolyte_tau_s[r] * u)
                           .epsilon(1e-14));
}

TEST_CASE("current-sensor bias tracks the running full scale") {
    BiasTracker b;
    b.precision = 0.01;
    CHECK(b.measure(0.0) == 0.0);
    CHECK(b.measure(1.0) == doctest::Approx(1.01).epsilon(1e-15));
    CHECK(b.measure(-2.0) == doctest::Approx(-2.02).epsilon(1e-15));
    CHECK(b.measure(0.5) == doctest::Approx(0.52).epsilon(1e-15));
    CHECK(b.measure(0.0) == 0.0);  // exactly zero current reads exactly zero
    CHECK(b.running_max_abs_a == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(b.bias(1.0) == doctest::Approx(1.02).epsilon(1e-15));  // no update
    CHECK(b.running_max_abs_a == doctest::Approx(2.0).epsilon(1e-15));
}

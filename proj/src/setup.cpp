#include "cellobs/setup.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cellobs/errors.hpp"

namespace cellobs {

namespace {

// Built-in OCV breakpoint tables, used when no CSV paths are configured; the
// shipped data/ocv_*.csv files carry the same tables so both paths agree.
OcvCurve default_ocv_neg() {
    return make_ocv({{0.0, 0.35}, {0.1, 0.25}, {0.3, 0.15}, {0.6, 0.11}, {1.0, 0.08}}, "neg");
}

// The positive curve is steep across the stoichiometry window traversed at
// high state of charge: the monitoring costs can only distinguish modes
// through the voltage signature of their estimate errors, so the local slope
// there sets how small an error the switching logic can still detect.
OcvCurve default_ocv_pos() {
    return make_ocv({{0.0, 4.20}, {0.35, 4.0075}, {0.5, 3.6325}, {1.0, 3.3825}}, "pos");
}

OcvCurve curve_from_config(const Config& cfg, const std::string& key, const std::string& tag,
                           OcvCurve (*fallback)()) {
    if (!cfg.has(key)) return fallback();
    return load_ocv(cfg.resolve_path(cfg.get_string(key)), tag);
}

void require_positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError(key + ": must be > 0");
}

void require_nonnegative(double v, const std::string& key) {
    if (!(v >= 0.0)) throw ConfigError(key + ": must be >= 0");
}

int shell_count(const Config& cfg, const std::string& key, long dflt, long lo) {
    long n = cfg.get_long_or(key, dflt);
    if (n < lo || n > 64)
        throw ConfigError(key + ": must lie in [" + std::to_string(lo) + ", 64]");
    return static_cast<int>(n);
}

double lerp(double a, double b, double f) { return a + (b - a) * f; }

}  // namespace

BatteryParams params_from_config(const Config& cfg) {
    BatteryParams p;
    p.q_li_ah = cfg.get_double_or("cell.q_li_ah", p.q_li_ah);
    p.q_cell_ah = cfg.get_double_or("cell.capacity_ah", p.q_cell_ah);
    p.faraday_c_mol = cfg.get_double_or("cell.faraday_c_mol", p.faraday_c_mol);
    p.gas_constant = cfg.get_double_or("cell.gas_constant", p.gas_constant);
    p.temperature_k = cfg.get_double_or("cell.temperature_k", p.temperature_k);
    p.cell_area_m2 = cfg.get_double_or("cell.area_m2", p.cell_area_m2);
    p.thickness_neg_m = cfg.get_double_or("cell.thickness_neg_m", p.thickness_neg_m);
    p.thickness_pos_m = cfg.get_double_or("cell.thickness_pos_m", p.thickness_pos_m);
    p.diffusion_neg_m2s = cfg.get_double_or("cell.diffusion_neg_m2_s", p.diffusion_neg_m2s);
    p.diffusion_pos_m2s = cfg.get_double_or("cell.diffusion_pos_m2_s", p.diffusion_pos_m2s);
    p.particle_radius_neg_m = cfg.get_double_or("cell.radius_neg_m", p.particle_radius_neg_m);
    p.particle_radius_pos_m = cfg.get_double_or("cell.radius_pos_m", p.particle_radius_pos_m);
    p.volfrac_neg = cfg.get_double_or("cell.volfrac_neg", p.volfrac_neg);
    p.volfrac_pos = cfg.get_double_or("cell.volfrac_pos", p.volfrac_pos);
    p.cmax_neg_moll = cfg.get_double_or("cell.cmax_neg_mol_l", p.cmax_neg_moll);
    p.cmax_pos_moll = cfg.get_double_or("cell.cmax_pos_mol_l", p.cmax_pos_moll);
    p.c0_neg_moll = cfg.get_double_or("cell.c0_neg_mol_l", p.c0_neg_moll);
    p.c0_pos_moll = cfg.get_double_or("cell.c0_pos_mol_l", p.c0_pos_moll);
    p.c100_neg_moll = cfg.get_double_or("cell.c100_neg_mol_l", p.c100_neg_moll);
    p.c100_pos_moll = cfg.get_double_or("cell.c100_pos_mol_l", p.c100_pos_moll);
    p.conductivity_neg_sm = cfg.get_double_or("cell.conductivity_neg_s_m", p.conductivity_neg_sm);
    p.conductivity_pos_sm = cfg.get_double_or("cell.conductivity_pos_s_m", p.conductivity_pos_sm);
    p.exch_current_neg = cfg.get_double_or("cell.exch_current_neg_a_m2", p.exch_current_neg);
    p.exch_current_pos = cfg.get_double_or("cell.exch_current_pos_a_m2", p.exch_current_pos);
    p.omega_add_ohm = cfg.get_double_or("cell.film_resistance_ohm", p.omega_add_ohm);

    const std::vector<double> tau = cfg.get_list_or(
        "cell.electrolyte_tau_s",
        {p.electrolyte_tau_s[0], p.electrolyte_tau_s[1], p.electrolyte_tau_s[2]});
    if (tau.size() != 3)
        throw ConfigError("cell.electrolyte_tau_s: expected 3 values (pos, neg, separator)");
    const std::vector<double> res = cfg.get_list_or(
        "cell.electrolyte_res_uohm", {p.electrolyte_res_ohm[0] * 1e6,
                                      p.electrolyte_res_ohm[1] * 1e6,
                                      p.electrolyte_res_ohm[2] * 1e6});
    if (res.size() != 3)
        throw ConfigError("cell.electrolyte_res_uohm: expected 3 values (pos, neg, separator)");
    for (int r = 0; r < 3; ++r) {
        p.electrolyte_tau_s[r] = tau[r];
        p.electrolyte_res_ohm[r] = res[r] * 1e-6;  // configured in micro-ohms
    }

    const std::string msg = p.validate();
    if (!msg.empty()) throw ConfigError("cell parameters: " + msg);
    return p;
}

DesignSetup build_design(const Config& cfg) {
    DesignSetup d;
    const BatteryParams p = params_from_config(cfg);

    const int nn = shell_count(cfg, "model.obs_shells_neg", 4, 3);
    const int np = shell_count(cfg, "model.obs_shells_pos", 4, 2);
    d.observer = assemble_model(p, nn, np);

    d.curve_neg = curve_from_config(cfg, "ocv.neg_csv", "neg", &default_ocv_neg);
    d.curve_pos = curve_from_config(cfg, "ocv.pos_csv", "pos", &default_ocv_pos);
    d.polytope = build_vertices(d.curve_neg, d.curve_pos, d.observer);

    d.problem.A = d.observer.A;
    d.problem.E = d.observer.E;
    d.problem.C = d.polytope.vertices;
    d.problem.alpha = cfg.get_double_or("design.alpha", 0.01);
    require_positive(d.problem.alpha, "design.alpha");

    d.synth.rho = cfg.get_double_or("design.rho", d.synth.rho);
    require_positive(d.synth.rho, "design.rho");
    d.synth.p_floor = cfg.get_double_or("design.p_floor", d.synth.p_floor);
    require_positive(d.synth.p_floor, "design.p_floor");
    d.synth.mu_min = cfg.get_double_or("design.mu_min", d.synth.mu_min);
    d.synth.mu_max = cfg.get_double_or("design.mu_max", d.synth.mu_max);
    if (!(d.synth.mu_min > 0.0) || !(d.synth.mu_max > d.synth.mu_min))
        throw ConfigError("design.mu_min: need 0 < mu_min < design.mu_max");
    d.synth.max_iters = static_cast<int>(cfg.get_long_or("design.max_iters", d.synth.max_iters));
    if (d.synth.max_iters < 1) throw ConfigError("design.max_iters: must be >= 1");
    d.synth.time_budget_s = cfg.get_double_or("design.time_budget_s", d.synth.time_budget_s);
    require_positive(d.synth.time_budget_s, "design.time_budget_s");
    d.synth.seed_rate = cfg.get_double_or("design.seed_rate", d.synth.seed_rate);
    require_positive(d.synth.seed_rate, "design.seed_rate");
    d.synth.allow_free_gain = cfg.get_bool_or("design.allow_free_gain", d.synth.allow_free_gain);
    return d;
}

SimSetup build_sim(const Config& cfg, const Eigen::VectorXd& L1) {
    SimSetup s;
    const BatteryParams p = params_from_config(cfg);

    // The plant may carry a finer discretization than the observer bank; the
    // defaults are a 6+6-shell plant against 4+4-shell observers.
    s.plant = assemble_model(p, shell_count(cfg, "model.plant_shells_neg", 6, 3),
                             shell_count(cfg, "model.plant_shells_pos", 6, 2));
    s.observer = assemble_model(p, shell_count(cfg, "model.obs_shells_neg", 4, 3),
                                shell_count(cfg, "model.obs_shells_pos", 4, 2));

    s.curve_neg = curve_from_config(cfg, "ocv.neg_csv", "neg", &default_ocv_neg);
    s.curve_pos = curve_from_config(cfg, "ocv.pos_csv", "pos", &default_ocv_pos);

    if (L1.size() != s.observer.dim)
        throw ConfigError("gain length " + std::to_string(L1.size()) +
                          " does not match the observer dimension " +
                          std::to_string(s.observer.dim) +
                          " (model.obs_shells_neg/model.obs_shells_pos)");
    const std::vector<double> scales =
        cfg.get_list_or("switch.gain_scales", {1.0, 0.1, 0.01, 0.0});
    if (scales.empty()) throw ConfigError("switch.gain_scales: need at least one mode");
    s.gains = build_default_bank(L1, scales);
    const int n_modes = static_cast<int>(scales.size());

    s.monitor.nu = cfg.get_double_or("monitor.nu", s.monitor.nu);
    require_positive(s.monitor.nu, "monitor.nu");
    const double alpha = cfg.get_double_or("design.alpha", 0.01);
    if (s.monitor.nu > alpha)
        throw ConfigError("monitor.nu: must not exceed design.alpha (the certified decay rate)");
    s.monitor.lambda1 = cfg.get_double_or("monitor.lambda1", s.monitor.lambda1);
    require_positive(s.monitor.lambda1, "monitor.lambda1");
    s.monitor.lambda2 = cfg.get_double_or("monitor.lambda2", s.monitor.lambda2);
    require_nonnegative(s.monitor.lambda2, "monitor.lambda2");

    s.sw.epsilon = cfg.get_double_or("switch.epsilon", s.sw.epsilon);
    if (!(s.sw.epsilon > 0.0 && s.sw.epsilon <= 1.0))
        throw ConfigError("switch.epsilon: must lie in (0, 1]");
    s.sw.zeta = cfg.get_double_or("switch.zeta", s.sw.zeta);
    require_nonnegative(s.sw.zeta, "switch.zeta");
    s.sw.min_dwell_s = cfg.get_double_or("switch.min_dwell_s", s.sw.min_dwell_s);
    require_nonnegative(s.sw.min_dwell_s, "switch.min_dwell_s");

    Scenario& scn = s.scn;
    scn.dt_s = cfg.get_double_or("sim.dt_s", scn.dt_s);
    require_positive(scn.dt_s, "sim.dt_s");
    scn.horizon_s = cfg.get_double_or("sim.horizon_s", scn.horizon_s);
    if (!(scn.horizon_s >= scn.dt_s))
        throw ConfigError("sim.horizon_s: must cover at least one integrator step");
    scn.store_dt_s = cfg.get_double_or("sim.store_dt_s", scn.store_dt_s);
    if (!(scn.store_dt_s >= scn.dt_s))
        throw ConfigError("sim.store_dt_s: must be >= sim.dt_s");
    // Short horizons pull the transient/steady split back to the final time,
    // so the steady window degenerates to the last sample instead of emptying.
    scn.window_tran_s = cfg.get_double_or("sim.window_tran_s", scn.window_tran_s);
    require_positive(scn.window_tran_s, "sim.window_tran_s");
    scn.window_tran_s = std::min(scn.window_tran_s, scn.horizon_s);

    scn.plant_soc0 = cfg.get_double_or("sim.plant_soc0_pct", scn.plant_soc0);
    if (!(scn.plant_soc0 >= 0.0 && scn.plant_soc0 <= 100.0))
        throw ConfigError("sim.plant_soc0_pct: must lie in [0, 100]");

    double c_neg_init = 3.069;  // estimates start at a fully discharged guess
    double c_pos_init = 23.01;
    const bool explicit_c = cfg.has("sim.observer_init_c_neg_mol_l") ||
                            cfg.has("sim.observer_init_c_pos_mol_l");
    if (cfg.has("sim.observer_soc0_pct")) {
        if (explicit_c)
            throw ConfigError(
                "sim.observer_soc0_pct: conflicts with sim.observer_init_c_*_mol_l");
        const double soc = cfg.get_double("sim.observer_soc0_pct");
        if (!(soc >= 0.0 && soc <= 100.0))
            throw ConfigError("sim.observer_soc0_pct: must lie in [0, 100]");
        c_neg_init = lerp(p.c0_neg_moll, p.c100_neg_moll, soc / 100.0);
        c_pos_init = lerp(p.c0_pos_moll, p.c100_pos_moll, soc / 100.0);
    } else if (explicit_c) {
        c_neg_init = cfg.get_double_or("sim.observer_init_c_neg_mol_l", c_neg_init);
        c_pos_init = cfg.get_double_or("sim.observer_init_c_pos_mol_l", c_pos_init);
    }
    scn.init_c_neg.assign(n_modes, c_neg_init);
    scn.init_c_pos.assign(n_modes, c_pos_init);

    std::vector<double> eta0_dflt(n_modes, 10.0);
    eta0_dflt[0] = 1.0;  // the initially selected mode starts cheapest
    const std::vector<double> eta0 = cfg.get_list_or("switch.eta0", eta0_dflt);
    if (eta0.size() != static_cast<size_t>(n_modes))
        throw ConfigError("switch.eta0: need one entry per mode in switch.gain_scales");
    scn.eta0.resize(n_modes);
    for (int k = 0; k < n_modes; ++k) {
        if (!(eta0[k] > 0.0)) throw ConfigError("switch.eta0: entries must be > 0");
        scn.eta0[k] = eta0[k];
    }
    scn.sigma0 = 0;

    scn.noise_amp_v = cfg.get_double_or("sim.noise_amp_v", scn.noise_amp_v);
    require_nonnegative(scn.noise_amp_v, "sim.noise_amp_v");
    scn.noise_omega = cfg.get_double_or("sim.noise_omega_rad_s", scn.noise_omega);
    require_nonnegative(scn.noise_omega, "sim.noise_omega_rad_s");
    if (scn.noise_amp_v > 0.0) {
        if (!(scn.noise_omega > 0.0))
            throw ConfigError("sim.noise_omega_rad_s: must be > 0 when noise is enabled");
        const double dt_max = 2.0 * M_PI / scn.noise_omega / 10.0;
        if (scn.dt_s > dt_max)
            throw ConfigError("sim.dt_s: too coarse to resolve the measurement noise (need <= " +
                              std::to_string(dt_max) + " s)");
    }
    scn.bias_precision = cfg.get_double_or("sim.bias_precision", scn.bias_precision);
    require_nonnegative(scn.bias_precision, "sim.bias_precision");
    scn.electrolyte = cfg.get_bool_or("sim.electrolyte", scn.electrolyte);
    scn.seed = static_cast<std::uint64_t>(cfg.get_long_or("sim.seed", 1));

    const std::string kind = cfg.get_string_or("profile.kind", "synthetic");
    const std::string hold_s = cfg.get_string_or("profile.hold", "zoh");
    CurrentProfile::Hold hold;
    if (hold_s == "zoh") {
        hold = CurrentProfile::Hold::ZeroOrder;
    } else if (hold_s == "linear") {
        hold = CurrentProfile::Hold::Linear;
    } else {
        throw ConfigError("profile.hold: must be 'zoh' or 'linear'");
    }
    if (kind == "csv") {
        s.profile = load_profile(cfg.resolve_path(cfg.get_string("profile.csv")), hold);
    } else if (kind == "synthetic") {
        const double ph = cfg.get_double_or("profile.horizon_s", scn.horizon_s);
        require_positive(ph, "profile.horizon_s");
        const double pmin = cfg.get_double_or("profile.pulse_min_s", 2.0);
        const double pmax = cfg.get_double_or("profile.pulse_max_s", 20.0);
        if (!(pmin > 0.0 && pmax >= pmin))
            throw ConfigError("profile.pulse_min_s: need 0 < pulse_min_s <= profile.pulse_max_s");
        const double amp = cfg.get_double_or("profile.amp_a", 10.0);
        require_nonnegative(amp, "profile.amp_a");
        const double bias = cfg.get_double_or("profile.bias_a", 2.0);
        const std::uint64_t pseed =
            static_cast<std::uint64_t>(cfg.get_long_or("profile.seed", 7));
        s.profile = synthetic_pulse_profile(ph, pmin, pmax, amp, bias, pseed);
    } else {
        throw ConfigError("profile.kind: must be 'csv' or 'synthetic'");
    }
    return s;
}

}  // namespace cellobs

#pragma once

#include <array>
#include <string>

namespace cellobs {

// Physical parameters of the cell.
//
// Unit convention: concentrations are carried in mol/L (as tabulated for this
// chemistry); everything geometric/electrical is SI. The single mol/L <-> SI
// conversion site is the 1000 L/m^3 factor inside capacity_gamma_* and the
// current-input scaling of the state-space assembly; no other code converts.
struct BatteryParams {
    // Geometry and transport
    double cell_area_m2 = 1.0452;       // electrode plate area
    double thickness_pos_m = 36e-6;     // positive electrode thickness
    double thickness_neg_m = 50e-6;     // negative electrode thickness
    double diffusion_pos_m2s = 3.723e-16;  // solid-phase diffusivity
    double diffusion_neg_m2s = 2.0e-16;
    double particle_radius_pos_m = 1e-6;
    double particle_radius_neg_m = 1e-6;
    double volfrac_pos = 0.5;           // active-material volume fraction
    double volfrac_neg = 0.58;

    // Stoichiometry anchors (mol/L)
    double c0_pos_moll = 23.01;         // positive concentration at 0 % SOC
    double c0_neg_moll = 3.167;
    double c100_pos_moll = 9.182;       // positive concentration at 100 % SOC
    double c100_neg_moll = 11.75;
    double cmax_pos_moll = 23.9;        // saturation concentration
    double cmax_neg_moll = 16.1;

    // Kinetics and ohmics
    double conductivity_pos_sm = 10.0;  // solid-phase conductivity
    double conductivity_neg_sm = 100.0;
    double exch_current_pos = 0.5417;   // exchange-current density, A/m^2
    double exch_current_neg = 0.75;
    double omega_add_ohm = 0.0;         // lumped extra contact resistance

    // Inventory
    double q_li_ah = 14.8318;           // total cyclable lithium
    double q_cell_ah = 6.9725;          // nameplate capacity

    // Constants
    double faraday_c_mol = 96485.0;
    double gas_constant = 8.3145;       // J/(mol K)
    double temperature_k = 298.15;

    // Electrolyte overvoltage lags (pos, neg, separator): first-order states
    // rho_r (volts) with time constants tau and steady gain res (ohm), i.e.
    // rho_r -> res_r * u under constant current u.
    std::array<double, 3> electrolyte_tau_s = {13.0, 17.3, 12.3};
    std::array<double, 3> electrolyte_res_ohm = {153.9e-6, 209.5e-6, 115.1e-6};

    // Ah carried per unit volume-averaged concentration (mol/L) of one
    // electrode's active volume: (F/3600) * volfrac * area * thickness * 1000.
    double capacity_gamma_pos() const {
        return faraday_c_mol / 3600.0 * volfrac_pos * cell_area_m2 * thickness_pos_m * 1000.0;
    }
    double capacity_gamma_neg() const {
        return faraday_c_mol / 3600.0 * volfrac_neg * cell_area_m2 * thickness_neg_m * 1000.0;
    }

    // Returns an empty string when all fields are admissible, otherwise a
    // message naming the offending field.
    std::string validate() const;
};

}  // namespace cellobs

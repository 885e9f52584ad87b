#include "cellobs/battery_params.hpp"

#include <cmath>

namespace cellobs {

namespace {

bool pos_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

std::string BatteryParams::validate() const {
    struct Item {
        const char* name;
        double value;
    };
    const Item positives[] = {
        {"cell_area_m2", cell_area_m2},
        {"thickness_pos_m", thickness_pos_m},
        {"thickness_neg_m", thickness_neg_m},
        {"diffusion_pos_m2s", diffusion_pos_m2s},
        {"diffusion_neg_m2s", diffusion_neg_m2s},
        {"particle_radius_pos_m", particle_radius_pos_m},
        {"particle_radius_neg_m", particle_radius_neg_m},
        {"c0_pos_moll", c0_pos_moll},
        {"c0_neg_moll", c0_neg_moll},
        {"c100_pos_moll", c100_pos_moll},
        {"c100_neg_moll", c100_neg_moll},
        {"cmax_pos_moll", cmax_pos_moll},
        {"cmax_neg_moll", cmax_neg_moll},
        {"conductivity_pos_sm", conductivity_pos_sm},
        {"conductivity_neg_sm", conductivity_neg_sm},
        {"exch_current_pos", exch_current_pos},
        {"exch_current_neg", exch_current_neg},
        {"q_li_ah", q_li_ah},
        {"q_cell_ah", q_cell_ah},
        {"faraday_c_mol", faraday_c_mol},
        {"gas_constant", gas_constant},
        {"temperature_k", temperature_k},
    };
    for (const auto& it : positives) {
        if (!pos_finite(it.value)) return std::string(it.name) + " must be finite and > 0";
    }
    if (!(volfrac_pos > 0.0 && volfrac_pos < 1.0)) return "volfrac_pos must lie in (0,1)";
    if (!(volfrac_neg > 0.0 && volfrac_neg < 1.0)) return "volfrac_neg must lie in (0,1)";
    if (!(std::isfinite(omega_add_ohm) && omega_add_ohm >= 0.0))
        return "omega_add_ohm must be finite and >= 0";
    if (!(c0_pos_moll > c100_pos_moll)) return "c0_pos_moll must exceed c100_pos_moll";
    if (!(c100_neg_moll > c0_neg_moll)) return "c100_neg_moll must exceed c0_neg_moll";
    if (cmax_pos_moll < c0_pos_moll || cmax_pos_moll < c100_pos_moll)
        return "cmax_pos_moll must dominate both positive anchors";
    if (cmax_neg_moll < c0_neg_moll || cmax_neg_moll < c100_neg_moll)
        return "cmax_neg_moll must dominate both negative anchors";
    for (int r = 0; r < 3; ++r) {
        if (!pos_finite(electrolyte_tau_s[r])) return "electrolyte_tau_s must be finite and > 0";
        if (!(std::isfinite(electrolyte_res_ohm[r]) && electrolyte_res_ohm[r] >= 0.0))
            return "electrolyte_res_ohm must be finite and >= 0";
    }
    return {};
}

}  // namespace cellobs

#pragma once

#include <string>

#include "cellobs/config.hpp"
#include "cellobs/lmi.hpp"
#include "cellobs/sim.hpp"

namespace cellobs {

// Glue between the flat config schema and the domain structs. One config file
// drives everything: cell parameters, discretizations, OCV data paths, gain
// synthesis, bank/switching knobs, and the scenario. See data/default.cfg for
// the documented schema; reject_unknown_keys enforces it.

BatteryParams params_from_config(const Config& cfg);

// Observer-side design problem: observer model, OCV curves and polytope, the
// gain feasibility problem at the configured decay rate, solver options.
struct DesignSetup {
    StateSpaceModel observer;
    OcvCurve curve_neg;
    OcvCurve curve_pos;
    OcvPolytope polytope;
    LmiProblem problem;
    SynthOptions synth;
};
DesignSetup build_design(const Config& cfg);

// Full closed-loop setup; the nominal gain column comes from the certificate.
SimSetup build_sim(const Config& cfg, const Eigen::VectorXd& L1);

}  // namespace cellobs

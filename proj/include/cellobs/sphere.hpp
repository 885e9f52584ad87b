#pragma once

#include <Eigen/Dense>

namespace cellobs {

// Radial discretization of a spherical particle into n shells of equal
// volume. Boundary radii follow r_i = R * (i/n)^(1/3) (i = 0..n), which is
// exactly what equal shell volumes force; S_j = 4*pi*r_j^2 is the area of the
// j-th boundary. The flux denominators of the diffusion stencil use the
// boundary spacing r_{j+1} - r_j.
struct SphereShells {
    Eigen::VectorXd radii;     // n+1 boundary radii, radii[0] = 0, radii[n] = R
    Eigen::VectorXd volumes;   // n shell volumes, all equal by construction
    Eigen::VectorXd surfaces;  // n boundary areas S_1..S_n (S_n = outer surface)
    double radius = 0.0;       // particle radius R
    int n_shells = 0;

    double total_surface() const { return surfaces[n_shells - 1]; }

    // Throws std::invalid_argument for radius <= 0 or n < 1.
    static SphereShells equal_volume(int n, double radius);
};

}  // namespace cellobs

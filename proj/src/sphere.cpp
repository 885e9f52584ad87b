#include "cellobs/sphere.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cellobs {

SphereShells SphereShells::equal_volume(int n, double radius) {
    if (n < 1) throw std::invalid_argument("sphere discretization needs at least one shell");
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("sphere radius must be finite and > 0");

    SphereShells s;
    s.n_shells = n;
    s.radius = radius;
    s.radii.resize(n + 1);
    s.volumes.resize(n);
    s.surfaces.resize(n);

    const double pi = std::numbers::pi;
    for (int k = 0; k <= n; ++k)
        s.radii[k] = radius * std::cbrt(static_cast<double>(k) / static_cast<double>(n));
    for (int k = 1; k <= n; ++k) {
        s.volumes[k - 1] =
            4.0 / 3.0 * pi * (std::pow(s.radii[k], 3) - std::pow(s.radii[k - 1], 3));
        s.surfaces[k - 1] = 4.0 * pi * s.radii[k] * s.radii[k];
    }
    return s;
}

}  // namespace cellobs

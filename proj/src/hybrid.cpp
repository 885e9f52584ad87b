#include "cellobs/hybrid.hpp"

#include <cmath>
#include <stdexcept>

namespace cellobs {

bool in_flow_set(const Eigen::Ref<const Eigen::VectorXd>& eta, int sigma, double epsilon) {
    const double floor = epsilon * eta[sigma];
    for (Eigen::Index k = 0; k < eta.size(); ++k)
        if (eta[k] < floor) return false;
    return true;
}

bool in_jump_set(const Eigen::Ref<const Eigen::VectorXd>& eta, int sigma, double epsilon) {
    const double floor = epsilon * eta[sigma];
    for (Eigen::Index k = 0; k < eta.size(); ++k)
        if (k != sigma && eta[k] <= floor) return true;
    return false;
}

int argmin_eta(const Eigen::Ref<const Eigen::VectorXd>& eta) {
    int best = 0;
    for (Eigen::Index k = 1; k < eta.size(); ++k)
        if (eta[k] < eta[best]) best = static_cast<int>(k);
    return best;
}

int apply_jump(Eigen::Ref<Eigen::MatrixXd> estimates, Eigen::Ref<Eigen::VectorXd> eta, int sigma,
               long& jump_count) {
    (void)sigma;  // the reset target depends only on the winner
    const int k_star = argmin_eta(eta);
    const Eigen::VectorXd winner = estimates.col(k_star);
    for (Eigen::Index k = 0; k < estimates.cols(); ++k) estimates.col(k) = winner;
    eta.setConstant(eta[k_star]);
    ++jump_count;
    return k_star;
}

Eigen::MatrixXd build_default_bank(const Eigen::VectorXd& L1, const std::vector<double>& scales) {
    if (scales.empty()) throw std::invalid_argument("build_default_bank: empty scale list");
    Eigen::MatrixXd bank(L1.size(), static_cast<Eigen::Index>(scales.size()));
    for (size_t k = 0; k < scales.size(); ++k) bank.col(static_cast<Eigen::Index>(k)) = scales[k] * L1;
    return bank;
}

double monitoring_integral_oracle(const MonitorParams& mp, double eta0,
                                  const Eigen::Ref<const Eigen::VectorXd>& L_k,
                                  const std::vector<double>& ey_samples, double dt) {
    const size_t n = ey_samples.size();
    if (n < 3 || n % 2 == 0)
        throw std::invalid_argument(
            "monitoring_integral_oracle: need an odd sample count >= 3 (even interval count)");
    if (!(dt > 0.0)) throw std::invalid_argument("monitoring_integral_oracle: dt must be > 0");

    const double w = mp.lambda1 + mp.lambda2 * L_k.squaredNorm();
    auto phi = [&](size_t i) { return w * ey_samples[i] * ey_samples[i]; };

    // Incremental pairwise form of the damped convolution: advancing the
    // window by 2h multiplies the accumulated integral by e^{-2 nu h} and adds
    // one Simpson panel, so the discount factors never underflow for long
    // horizons.
    const double d1 = std::exp(-mp.nu * dt);
    const double d2 = d1 * d1;
    double eta = eta0;
    for (size_t i = 0; i + 2 < n; i += 2)
        eta = eta * d2 + (dt / 3.0) * (d2 * phi(i) + 4.0 * d1 * phi(i + 1) + phi(i + 2));
    return eta;
}

}  // namespace cellobs

#include "cellobs/lmi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cellobs/errors.hpp"
#include "json.hpp"

namespace cellobs {

namespace {

// The feasibility problem is solved on a time-rescaled copy (tau = s t with
// s = ||A||_2) so every attempt starts from comparable conditioning. A
// certificate (L, P, mu) in original units maps to the scaled problem via
//
//   Lt = L / s,   mu_v~ = mu_v / s,   mu_w~ = mu_w / s,   mu_d~ = mu_d * s,
//
// P unchanged; the two block matrices are congruent (M = s D Mt D with
// D = diag(I, I, 1, I/s)), so semidefiniteness transfers exactly.
struct ScaledLmi {
    Eigen::MatrixXd As;   // A / s
    Eigen::MatrixXd Es;   // E / s
    std::array<Eigen::RowVectorXd, 4> C;  // output rows are dimensionless
    double alphas = 0.0;  // alpha / s
    double s = 1.0;
    int n = 0, nv = 0, m = 0;

    // Assembles one vertex block matrix for given (P, Y = P Lt, mu~).
    void build_block(const Eigen::MatrixXd& P, const Eigen::VectorXd& Y,
                     const Eigen::Vector3d& mu, const Eigen::RowVectorXd& Ci,
                     Eigen::MatrixXd& M) const {
        M.setZero(m, m);
        Eigen::MatrixXd H = As.transpose() * P + P * As + alphas * P;
        H.noalias() -= Ci.transpose() * Y.transpose();
        H.noalias() -= Y * Ci;
        M.topLeftCorner(n, n) = H;
        const Eigen::MatrixXd PE = P * Es;
        M.block(0, n, n, nv) = PE;
        M.block(n, 0, nv, n) = PE.transpose();
        M.block(0, n + nv, n, 1) = -Y;
        M.block(n + nv, 0, 1, n) = -Y.transpose();
        M.block(0, n + nv + 1, n, n) = -P;
        M.block(n + nv + 1, 0, n, n) = -P;
        M.block(n, n, nv, nv) = -mu[0] * Eigen::MatrixXd::Identity(nv, nv);
        M(n + nv, n + nv) = -mu[1];
        M.block(n + nv + 1, n + nv + 1, n, n) = -mu[2] * Eigen::MatrixXd::Identity(n, n);
    }
};

ScaledLmi scale_problem(const LmiProblem& problem) {
    ScaledLmi sc;
    sc.n = static_cast<int>(problem.A.rows());
    if (problem.A.cols() != sc.n || sc.n < 1)
        throw std::invalid_argument("lmi: A must be square and non-empty");
    if (problem.E.rows() != sc.n || problem.E.cols() < 1)
        throw std::invalid_argument("lmi: E must have the state dimension rows");
    for (const auto& Ci : problem.C)
        if (Ci.size() != sc.n)
            throw std::invalid_argument("lmi: every output vertex must have state dimension");
    if (!(problem.alpha > 0.0)) throw std::invalid_argument("lmi: alpha must be > 0");
    sc.nv = static_cast<int>(problem.E.cols());
    sc.m = 2 * sc.n + sc.nv + 1;
    const double s = problem.A.jacobiSvd().singularValues()(0);
    sc.s = s > 0.0 ? s : 1.0;  // A = 0 is degenerate but should not divide by zero
    sc.As = problem.A / sc.s;
    sc.Es = problem.E / sc.s;
    sc.C = problem.C;
    sc.alphas = problem.alpha / sc.s;
    return sc;
}

// Variable vector layout: vech(P) upper triangle row-major, then (free-gain
// mode only) the n entries of Y, then the three scaled multipliers.
struct VarLayout {
    int n = 0, npp = 0, nz = 0;
    bool frozen = false;
    Eigen::VectorXd L0;  // scaled seed gain; Y = P L0 when frozen
    std::vector<std::pair<int, int>> vidx;

    VarLayout(int n_, bool frozen_, const Eigen::VectorXd& L0_) : n(n_), frozen(frozen_), L0(L0_) {
        npp = n * (n + 1) / 2;
        nz = npp + (frozen ? 0 : n) + 3;
        vidx.reserve(npp);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) vidx.emplace_back(i, j);
    }

    void unpack(const Eigen::VectorXd& z, Eigen::MatrixXd& P, Eigen::VectorXd& Y,
                Eigen::Vector3d& mu) const {
        P.setZero(n, n);
        for (int k = 0; k < npp; ++k) {
            const auto [i, j] = vidx[k];
            P(i, j) = z[k];
            P(j, i) = z[k];
        }
        if (frozen)
            Y.noalias() = P * L0;
        else
            Y = z.segment(npp, n);
        mu = z.segment(npp + (frozen ? 0 : n), 3);
    }
};

// One Douglas-Rachford attempt over the affine set {stacked blocks generated
// by (P, Y, mu), trace(P) = n} and the cone set {M_i <= -rho I, P >= delta I,
// mu in box}. Returns true and fills (P, Y, mu) on convergence.
struct Attempt {
    const ScaledLmi& sc;
    const VarLayout lay;
    const SynthOptions& opts;

    Eigen::MatrixXd G;          // stacked linear map, nbig x nz
    Eigen::VectorXd trace_sel;  // selects diagonal vech entries
    Eigen::PartialPivLU<Eigen::MatrixXd> kkt;
    int nbig = 0;

    Attempt(const ScaledLmi& sc_, bool frozen, const Eigen::VectorXd& L0,
            const SynthOptions& opts_)
        : sc(sc_), lay(sc_.n, frozen, L0), opts(opts_) {
        const int n = sc.n, m = sc.m;
        nbig = 4 * m * m + n * n + 3;
        G.resize(nbig, lay.nz);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(lay.nz);
        Eigen::VectorXd col(nbig);
        for (int k = 0; k < lay.nz; ++k) {
            e[k] = 1.0;
            stack(e, col);
            G.col(k) = col;
            e[k] = 0.0;
        }
        trace_sel = Eigen::VectorXd::Zero(lay.nz);
        for (int k = 0; k < lay.npp; ++k)
            if (lay.vidx[k].first == lay.vidx[k].second) trace_sel[k] = 1.0;
        Eigen::MatrixXd KKT = Eigen::MatrixXd::Zero(lay.nz + 1, lay.nz + 1);
        KKT.topLeftCorner(lay.nz, lay.nz) = G.transpose() * G;
        KKT.topRightCorner(lay.nz, 1) = trace_sel;
        KKT.bottomLeftCorner(1, lay.nz) = trace_sel.transpose();
        kkt.compute(KKT);
    }

    // z -> stacked [M_0 .. M_3, P, mu] (all blocks are linear in z).
    void stack(const Eigen::VectorXd& z, Eigen::VectorXd& X) const {
        const int n = sc.n, m = sc.m;
        Eigen::MatrixXd P, M;
        Eigen::VectorXd Y;
        Eigen::Vector3d mu;
        lay.unpack(z, P, Y, mu);
        int off = 0;
        for (const auto& Ci : sc.C) {
            sc.build_block(P, Y, mu, Ci, M);
            X.segment(off, m * m) = Eigen::Map<const Eigen::VectorXd>(M.data(), m * m);
            off += m * m;
        }
        X.segment(off, n * n) = Eigen::Map<const Eigen::VectorXd>(P.data(), n * n);
        off += n * n;
        X.segment(off, 3) = mu;
    }

    // Least-squares preimage of Xbar under the stacked map, trace pinned to n.
    void proj_affine(const Eigen::VectorXd& Xbar, Eigen::VectorXd& Xa, Eigen::VectorXd& z) const {
        Eigen::VectorXd rhs(lay.nz + 1);
        rhs.head(lay.nz).noalias() = G.transpose() * Xbar;
        rhs[lay.nz] = static_cast<double>(sc.n);
        const Eigen::VectorXd sol = kkt.solve(rhs);
        z = sol.head(lay.nz);
        Xa.noalias() = G * z;
    }

    void proj_cone(Eigen::VectorXd& X, const Eigen::Vector3d& mu_lo,
                   const Eigen::Vector3d& mu_hi) const {
        const int n = sc.n, m = sc.m;
        int off = 0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
        for (int vtx = 0; vtx < 4; ++vtx) {
            Eigen::Map<Eigen::MatrixXd> Mv(X.data() + off, m, m);
            Eigen::MatrixXd Sym = 0.5 * (Mv + Mv.transpose());
            eig.compute(Sym);
            const Eigen::VectorXd w = eig.eigenvalues().cwiseMin(-opts.rho);
            Mv = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
            off += m * m;
        }
        Eigen::Map<Eigen::MatrixXd> Pm(X.data() + off, n, n);
        Eigen::MatrixXd Sym = 0.5 * (Pm + Pm.transpose());
        eig.compute(Sym);
        const Eigen::VectorXd w = eig.eigenvalues().cwiseMax(opts.p_floor);
        Pm = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
        off += n * n;
        for (int k = 0; k < 3; ++k)
            X[off + k] = std::clamp(X[off + k], mu_lo[k], mu_hi[k]);
    }

    // Worst vertex eigenvalue and smallest P eigenvalue at a variable point.
    void violation(const Eigen::VectorXd& z, double& worst, double& pmin) const {
        Eigen::MatrixXd P, M;
        Eigen::VectorXd Y;
        Eigen::Vector3d mu;
        lay.unpack(z, P, Y, mu);
        worst = -std::numeric_limits<double>::infinity();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
        for (const auto& Ci : sc.C) {
            sc.build_block(P, Y, mu, Ci, M);
            eig.compute(M, Eigen::EigenvaluesOnly);
            worst = std::max(worst, eig.eigenvalues().maxCoeff());
        }
        eig.compute(P, Eigen::EigenvaluesOnly);
        pmin = eig.eigenvalues().minCoeff();
    }
};

GainCertificate extract_certificate(const ScaledLmi& sc, const Eigen::MatrixXd& P,
                                    const Eigen::VectorXd& Y, const Eigen::Vector3d& mu_scaled,
                                    double alpha_orig, const SynthOptions& opts) {
    GainCertificate cert;
    cert.P = 0.5 * (P + P.transpose());
    cert.L = sc.s * cert.P.ldlt().solve(Y);
    cert.alpha = alpha_orig;
    cert.mu_v = std::clamp(sc.s * mu_scaled[0], opts.mu_min, opts.mu_max);
    cert.mu_w = std::clamp(sc.s * mu_scaled[1], opts.mu_min, opts.mu_max);
    cert.mu_d = std::clamp(mu_scaled[2] / sc.s, opts.mu_min, opts.mu_max);
    return cert;
}

}  // namespace

SynthResult synthesize_gain(const LmiProblem& problem, const SynthOptions& opts) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(clock::now() - t_start).count();
    };

    const ScaledLmi sc = scale_problem(problem);
    const int n = sc.n;

    SynthResult res;
    res.best_residual = std::numeric_limits<double>::infinity();

    // Seed direction: slowest singular direction of the scaled dynamics,
    // signed so the mean output row sees it positively; the seed gain injects
    // at opts.seed_rate (1/s, original time) along it.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sc.As, Eigen::ComputeFullV);
    Eigen::VectorXd v0 = svd.matrixV().col(n - 1);
    Eigen::RowVectorXd Cbar = Eigen::RowVectorXd::Zero(n);
    for (const auto& Ci : sc.C) Cbar += 0.25 * Ci;
    double cv = Cbar.dot(v0);
    const bool seed_ok = std::abs(cv) >= 1e-12;
    Eigen::VectorXd L0 = Eigen::VectorXd::Zero(n);
    if (seed_ok) {
        if (cv < 0.0) {
            v0 = -v0;
            cv = -cv;
        }
        L0 = (opts.seed_rate / sc.s / cv) * v0;
    }

    const Eigen::Vector3d mu_lo(opts.mu_min / sc.s, opts.mu_min / sc.s, opts.mu_min * sc.s);
    const Eigen::Vector3d mu_hi(opts.mu_max / sc.s, opts.mu_max / sc.s, opts.mu_max * sc.s);

    std::ostringstream log;
    if (!seed_ok) log << "seed direction degenerate (mean output row orthogonal); "
                         "frozen-gain phase skipped. ";

    struct Plan {
        bool frozen;
        double kappa;
    };
    std::vector<Plan> plans;
    if (seed_ok)
        for (double k : opts.kappa_ladder) plans.push_back({true, k});
    if (opts.allow_free_gain) plans.push_back({false, 0.0});

    for (const Plan& plan : plans) {
        if (elapsed() >= opts.time_budget_s) {
            log << "wall budget exhausted before attempt. ";
            break;
        }
        const Eigen::VectorXd Lseed = plan.frozen ? (plan.kappa * L0).eval() : L0;
        Attempt att(sc, plan.frozen, Lseed, opts);

        Eigen::VectorXd z0 = Eigen::VectorXd::Zero(att.lay.nz);
        for (int k = 0; k < att.lay.npp; ++k)
            if (att.lay.vidx[k].first == att.lay.vidx[k].second) z0[k] = 1.0;
        if (!plan.frozen) z0.segment(att.lay.npp, n) = Lseed;
        z0.tail(3).setOnes();

        Eigen::VectorXd u(att.nbig), Xa(att.nbig), refl(att.nbig), z(att.lay.nz);
        att.stack(z0, u);

        bool converged = false;
        int it = 0;
        for (; it < opts.max_iters; ++it) {
            att.proj_affine(u, Xa, z);
            refl = 2.0 * Xa - u;
            att.proj_cone(refl, mu_lo, mu_hi);
            u += refl - Xa;
            if (it % opts.check_every == 0) {
                double worst, pmin;
                att.violation(z, worst, pmin);
                res.best_residual = std::min(res.best_residual, worst);
                if (worst <= -0.5 * opts.rho && pmin >= 0.99 * opts.p_floor) {
                    converged = true;
                    break;
                }
                if (elapsed() >= opts.time_budget_s) break;
            }
        }
        res.iterations = it;
        if (!converged) {
            log << (plan.frozen ? "frozen kappa=" : "free-gain")
                << (plan.frozen ? std::to_string(plan.kappa) : std::string())
                << " attempt stopped after " << it << " iterations. ";
            continue;
        }

        Eigen::MatrixXd P;
        Eigen::VectorXd Y;
        Eigen::Vector3d mu;
        att.lay.unpack(z, P, Y, mu);
        GainCertificate cert = extract_certificate(sc, P, Y, mu, problem.alpha, opts);
        const VerifyReport rep = verify_certificate(problem, cert);
        res.best_residual = std::min(res.best_residual, rep.residual);
        if (!rep.pass) {
            log << "converged iterate failed independent verification (" << rep.reason
                << "); continuing. ";
            continue;
        }
        cert.max_eigenvalue_residual = rep.residual;
        res.feasible = true;
        res.certificate = cert;
        res.kappa = plan.kappa;
        res.free_gain = !plan.frozen;
        res.Y = Y;
        res.elapsed_s = elapsed();
        log << (plan.frozen ? "accepted frozen-gain attempt, kappa="
                            : "accepted free-gain attempt")
            << (plan.frozen ? std::to_string(plan.kappa) : std::string()) << " after " << it
            << " iterations.";
        res.message = log.str();
        return res;
    }

    res.elapsed_s = elapsed();
    log << "no feasible certificate within budget (best scaled residual " << res.best_residual
        << ").";
    res.message = log.str();
    return res;
}

VerifyReport verify_certificate(const LmiProblem& problem, const GainCertificate& cert,
                                double tolerance) {
    VerifyReport rep;
    const int n = static_cast<int>(problem.A.rows());
    if (cert.L.size() != n || cert.P.rows() != n || cert.P.cols() != n) {
        rep.reason = "certificate dimensions do not match the problem";
        return rep;
    }
    if (std::abs(cert.alpha - problem.alpha) >
        1e-12 * std::max(1.0, std::abs(problem.alpha))) {
        rep.reason = "certificate alpha does not match the problem";
        return rep;
    }
    const double psym = (cert.P - cert.P.transpose()).cwiseAbs().maxCoeff();
    if (psym > 1e-12 * std::max(1.0, cert.P.cwiseAbs().maxCoeff())) {
        rep.reason = "P is not symmetric";
        return rep;
    }

    // Rebuild the scaled blocks directly from (L, P, mu) — the solver's
    // Y-parametrization is deliberately not reused here.
    ScaledLmi sc;
    try {
        sc = scale_problem(problem);
    } catch (const std::invalid_argument& e) {
        rep.reason = e.what();
        return rep;
    }
    const Eigen::VectorXd Lt = cert.L / sc.s;
    const Eigen::VectorXd Y = cert.P * Lt;
    const Eigen::Vector3d mu(cert.mu_v / sc.s, cert.mu_w / sc.s, cert.mu_d * sc.s);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    Eigen::MatrixXd M;
    rep.residual = -std::numeric_limits<double>::infinity();
    for (const auto& Ci : sc.C) {
        sc.build_block(cert.P, Y, mu, Ci, M);
        eig.compute(M, Eigen::EigenvaluesOnly);
        rep.residual = std::max(rep.residual, eig.eigenvalues().maxCoeff());
    }
    eig.compute(cert.P, Eigen::EigenvaluesOnly);
    rep.p_min_eig = eig.eigenvalues().minCoeff();

    if (!(rep.p_min_eig > 0.0))
        rep.reason = "P is not positive definite";
    else if (!(rep.residual <= tolerance))
        rep.reason = "worst vertex eigenvalue exceeds tolerance";
    else
        rep.pass = true;
    return rep;
}

DecreaseReport lyapunov_decrease_check(const GainCertificate& cert,
                                       const std::vector<Eigen::VectorXd>& x,
                                       const std::vector<Eigen::VectorXd>& xhat,
                                       const std::vector<double>& v,
                                       const std::vector<double>& w, double dt, double slack) {
    if (x.size() < 2 || x.size() != xhat.size() || x.size() != v.size() || x.size() != w.size())
        throw std::invalid_argument("lyapunov_decrease_check: need >= 2 aligned samples");
    if (!(dt > 0.0)) throw std::invalid_argument("lyapunov_decrease_check: dt must be > 0");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cert.P, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();

    DecreaseReport rep;
    rep.samples = static_cast<int>(x.size()) - 1;
    rep.sandwich_ok = true;

    std::vector<double> V(x.size());
    for (size_t k = 0; k < x.size(); ++k) {
        const Eigen::VectorXd e = x[k] - xhat[k];
        V[k] = e.dot(cert.P * e);
        const double nrm2 = e.squaredNorm();
        const double tol = 1e-9 * std::max(1.0, std::abs(V[k]));
        if (V[k] < lmin * nrm2 - tol || V[k] > lmax * nrm2 + tol) rep.sandwich_ok = false;
    }
    for (size_t k = 0; k + 1 < x.size(); ++k) {
        const double dV = (V[k + 1] - V[k]) / dt;
        const double budget =
            -cert.alpha * V[k] + cert.mu_v * v[k] * v[k] + cert.mu_w * w[k] * w[k] + slack;
        const double excess = dV - budget;
        if (excess > 0.0) {
            ++rep.violations;
            rep.max_violation = std::max(rep.max_violation, excess);
        }
    }
    rep.pass = rep.violations == 0 && rep.sandwich_ok;
    return rep;
}

std::string certificate_to_json(const GainCertificate& cert, const std::string& solver_info) {
    nlohmann::json j;
    j["format"] = "gain-certificate-v1";
    const int n = static_cast<int>(cert.L.size());
    j["n"] = n;
    j["alpha"] = cert.alpha;
    j["mu_v"] = cert.mu_v;
    j["mu_w"] = cert.mu_w;
    j["mu_d"] = cert.mu_d;
    j["max_eigenvalue_residual"] = cert.max_eigenvalue_residual;
    j["L"] = std::vector<double>(cert.L.data(), cert.L.data() + n);
    std::vector<double> pu;
    pu.reserve(static_cast<size_t>(n) * (n + 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) pu.push_back(cert.P(i, k));
    j["P_upper"] = pu;
    j["solver_info"] = solver_info;
    return j.dump(2) + "\n";
}

GainCertificate certificate_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("certificate JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "gain-certificate-v1")
            throw ParseError("certificate JSON: unknown format tag");
        const int n = j.at("n").get<int>();
        if (n < 1) throw ParseError("certificate JSON: invalid dimension");
        GainCertificate cert;
        cert.alpha = j.at("alpha").get<double>();
        cert.mu_v = j.at("mu_v").get<double>();
        cert.mu_w = j.at("mu_w").get<double>();
        cert.mu_d = j.at("mu_d").get<double>();
        cert.max_eigenvalue_residual = j.at("max_eigenvalue_residual").get<double>();
        const auto L = j.at("L").get<std::vector<double>>();
        const auto pu = j.at("P_upper").get<std::vector<double>>();
        if (L.size() != static_cast<size_t>(n) ||
            pu.size() != static_cast<size_t>(n) * (n + 1) / 2)
            throw ParseError("certificate JSON: array lengths do not match n");
        cert.L = Eigen::Map<const Eigen::VectorXd>(L.data(), n);
        cert.P.setZero(n, n);
        size_t idx = 0;
        for (int i = 0; i < n; ++i)
            for (int k = i; k < n; ++k) {
                cert.P(i, k) = pu[idx];
                cert.P(k, i) = pu[idx];
                ++idx;
            }
        return cert;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("certificate JSON: ") + e.what());
    }
}

}  // namespace cellobs

#include "cellobs/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cellobs/errors.hpp"
#include "cellobs/rng.hpp"

namespace cellobs {

namespace {

// All numeric output goes through one shortest-lossless formatter so equal
// results are equal bytes. Non-finite values render as JSON null.
std::string fd(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

StackedLayout make_layout(const SimSetup& setup) {
    StackedLayout lay;
    lay.plant_dim = setup.plant.dim;
    lay.c1_index = setup.plant.dim;
    lay.rho_offset = setup.scn.electrolyte ? setup.plant.dim + 1 : -1;
    lay.modes_offset = setup.plant.dim + 1 + (setup.scn.electrolyte ? 3 : 0);
    lay.obs_dim = setup.observer.dim;
    lay.n_modes = static_cast<int>(setup.gains.cols());
    lay.eta_offset = lay.modes_offset + lay.n_modes * lay.obs_dim;
    lay.filter_offset = lay.eta_offset + lay.n_modes;
    lay.total = lay.filter_offset + lay.obs_dim;
    return lay;
}

void validate_setup(const SimSetup& setup, const StackedLayout& lay) {
    const Scenario& scn = setup.scn;
    if (!(scn.dt_s > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    if (!(scn.horizon_s >= scn.dt_s))
        throw std::invalid_argument("simulate: horizon must cover at least one step");
    if (!(scn.store_dt_s >= scn.dt_s))
        throw std::invalid_argument("simulate: storage interval must be >= dt");
    if (lay.n_modes < 1) throw std::invalid_argument("simulate: gain bank is empty");
    if (setup.gains.rows() != setup.observer.dim)
        throw std::invalid_argument("simulate: gain rows must match the observer dimension");
    if (scn.sigma0 < 0 || scn.sigma0 >= lay.n_modes)
        throw std::invalid_argument("simulate: sigma0 outside the mode range");
    if (scn.eta0.size() != lay.n_modes)
        throw std::invalid_argument("simulate: eta0 must have one entry per mode");
    for (int k = 0; k < lay.n_modes; ++k)
        if (!(scn.eta0[k] > 0.0))
            throw std::invalid_argument("simulate: eta0 entries must be > 0");
    if (scn.init_c_neg.size() != static_cast<size_t>(lay.n_modes) ||
        scn.init_c_pos.size() != static_cast<size_t>(lay.n_modes))
        throw std::invalid_argument("simulate: per-mode initial concentrations missing");
    if (!(setup.sw.epsilon > 0.0 && setup.sw.epsilon <= 1.0))
        throw std::invalid_argument("simulate: epsilon must lie in (0, 1]");
    if (!(setup.monitor.nu > 0.0)) throw std::invalid_argument("simulate: nu must be > 0");
    if (!(setup.sw.zeta >= 0.0)) throw std::invalid_argument("simulate: zeta must be >= 0");
    if (setup.profile.t.empty()) throw std::invalid_argument("simulate: empty current profile");
    if (!(scn.noise_amp_v >= 0.0) || !(scn.noise_omega >= 0.0) ||
        !(scn.bias_precision >= 0.0))
        throw std::invalid_argument("simulate: noise/bias parameters must be >= 0");
}

}  // namespace

SimResult simulate(const SimSetup& setup) {
    const StackedLayout lay = make_layout(setup);
    validate_setup(setup, lay);

    const Scenario& scn = setup.scn;
    const StateSpaceModel& plant = setup.plant;
    const StateSpaceModel& obs = setup.observer;
    const int np = lay.plant_dim, no = lay.obs_dim, K = lay.n_modes;

    SimResult res;
    res.n_modes = K;
    res.layout = lay;

    // Exchange rate between the eliminated innermost negative shell and its
    // neighbour; integrating c1 alongside the reduced state turns total
    // lithium into a checkable constant of the motion.
    const SphereShells& shn = plant.shells_neg;
    const double mu11 = plant.params.diffusion_neg_m2s / shn.volumes[0] * shn.surfaces[0] /
                        (shn.radii[2] - shn.radii[1]);

    Eigen::VectorXd gain_norm2(K);
    for (int k = 0; k < K; ++k) gain_norm2[k] = setup.gains.col(k).squaredNorm();

    // --- initial stacked state ---------------------------------------------
    Eigen::VectorXd s(lay.total);
    s.head(np) = state_at_soc(plant, scn.plant_soc0);
    s[lay.c1_index] = reconstruct_c1_neg(plant, s.head(np));
    if (scn.electrolyte) s.segment(lay.rho_offset, 3).setZero();
    for (int k = 0; k < K; ++k)
        s.segment(lay.mode_offset(k), no) =
            uniform_state(obs, scn.init_c_neg[k], scn.init_c_pos[k]);
    s.segment(lay.eta_offset, K) = scn.eta0;
    int sigma = scn.sigma0;
    s.segment(lay.filter_offset, no) = s.segment(lay.mode_offset(sigma), no);

    long jump_count = 0;
    long domain_violations = 0;
    double last_jump_t = -std::numeric_limits<double>::infinity();

    // --- flow field ---------------------------------------------------------
    // Pure function of (t, state, sigma): the measured current is biased by a
    // running-max staircase that is itself a pure function of t, so RK4 sees
    // a plain time-dependent ODE between profile breakpoints.
    auto flow = [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
        const double u = setup.profile.eval(t);
        double ub = u;
        if (scn.bias_precision > 0.0 && u != 0.0) {
            const double mx = scn.bias_precision * setup.profile.running_abs_max(t);
            ub = u > 0.0 ? u + mx : u - mx;
        }

        dx.head(np).noalias() = plant.A * x.head(np);
        dx.head(np) += plant.B * u + plant.K;
        dx[lay.c1_index] = mu11 * (x[0] - x[lay.c1_index]);

        double rho_sum = 0.0;
        if (scn.electrolyte) {
            const Eigen::Vector3d rho = x.segment(lay.rho_offset, 3);
            dx.segment(lay.rho_offset, 3) = electrolyte_derivative(plant.params, rho, u);
            rho_sum = rho.sum();
        }

        const double noise =
            scn.noise_amp_v > 0.0 ? scn.noise_amp_v * std::sin(scn.noise_omega * t) : 0.0;
        const double y_meas =
            eval_output(plant, setup.curve_neg, setup.curve_pos, x.head(np), ub,
                        &domain_violations) -
            rho_sum + noise;

        for (int k = 0; k < K; ++k) {
            const auto xk = x.segment(lay.mode_offset(k), no);
            auto dk = dx.segment(lay.mode_offset(k), no);
            const double yk = eval_output(obs, setup.curve_neg, setup.curve_pos, xk, ub,
                                          &domain_violations);
            const double ey = y_meas - yk;
            dk.noalias() = obs.A * xk;
            dk += obs.B * ub + obs.K + setup.gains.col(k) * ey;
            dx[lay.eta_offset + k] =
                monitoring_rate(setup.monitor, x[lay.eta_offset + k], ey, gain_norm2[k]);
        }

        dx.segment(lay.filter_offset, no) =
            setup.sw.zeta *
            (x.segment(lay.mode_offset(sigma), no) - x.segment(lay.filter_offset, no));
    };

    // --- storage ------------------------------------------------------------
    const double dt = scn.dt_s;
    const long n_steps = static_cast<long>(std::llround(scn.horizon_s / dt));
    const long steps_per_store =
        std::max(1L, static_cast<long>(std::llround(scn.store_dt_s / dt)));
    const size_t reserve =
        static_cast<size_t>(n_steps / steps_per_store + 16);
    res.t.reserve(reserve);

    double q0 = 0.0;  // initial total lithium, set at the first stored row

    auto push_row = [&](double t, bool event) {
        res.t.push_back(t);
        res.j.push_back(jump_count);
        res.sigma.push_back(sigma);
        res.event_row.push_back(event ? 1 : 0);
        res.soc_true.push_back(soc_percent(plant, s.head(np)));
        res.soc_nominal.push_back(soc_percent(obs, s.segment(lay.mode_offset(0), no)));
        res.soc_sigma.push_back(soc_percent(obs, s.segment(lay.mode_offset(sigma), no)));
        res.soc_filtered.push_back(soc_percent(obs, s.segment(lay.filter_offset, no)));
        res.c_surf_neg_true.push_back(s[plant.idx_surf_neg]);
        res.c_surf_pos_true.push_back(s[plant.idx_surf_pos]);
        res.c_surf_neg_est.push_back(s[lay.mode_offset(sigma) + obs.idx_surf_neg]);
        res.c_surf_pos_est.push_back(s[lay.mode_offset(sigma) + obs.idx_surf_pos]);
        res.eta.push_back(s.segment(lay.eta_offset, K));

        const double q = total_lithium_ah(plant, s.head(np), s[lay.c1_index]);
        if (res.t.size() == 1) q0 = q;
        const double q_scale = std::max(std::abs(q0), 1e-300);
        res.conservation_max_rel =
            std::max(res.conservation_max_rel, std::abs(q - q0) / q_scale);
        res.c1_consistency_max =
            std::max(res.c1_consistency_max,
                     std::abs(s[lay.c1_index] - reconstruct_c1_neg(plant, s.head(np))));
        if (!event && scn.store_full_state) res.full_state.push_back(s);
    };

    push_row(0.0, false);

    // --- main loop ----------------------------------------------------------
    Eigen::VectorXd k1(lay.total), k2(lay.total), k3(lay.total), k4(lay.total),
        stmp(lay.total);
    Eigen::Map<Eigen::MatrixXd> estimates(s.data() + lay.modes_offset, no, K);
    Eigen::Map<Eigen::VectorXd> eta_view(s.data() + lay.eta_offset, K);

    for (long step = 0; step < n_steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        flow(t, s, k1);
        stmp = s + (0.5 * dt) * k1;
        flow(t + 0.5 * dt, stmp, k2);
        stmp = s + (0.5 * dt) * k2;
        flow(t + 0.5 * dt, stmp, k3);
        stmp = s + dt * k3;
        flow(t + dt, stmp, k4);
        s += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double t_new = static_cast<double>(step + 1) * dt;

        // Switching executor: jump until the flow set is re-entered. The
        // all-equal reset lands inside the closed flow set for any
        // epsilon <= 1, so one reset per trigger; the cap is defensive only.
        if (t_new - last_jump_t >= setup.sw.min_dwell_s) {
            int cascade = 0;
            while (!in_flow_set(eta_view, sigma, setup.sw.epsilon)) {
                push_row(t_new, true);
                JumpRecord jr;
                jr.t = t_new;
                jr.j_before = jump_count;
                jr.sigma_before = sigma;
                jr.eta_before = eta_view;
                sigma = apply_jump(estimates, eta_view, sigma, jump_count);
                jr.sigma_after = sigma;
                res.jumps.push_back(std::move(jr));
                push_row(t_new, true);
                last_jump_t = t_new;
                if (++cascade > 10 * K) {
                    res.aborted = true;
                    res.abort_t = t_new;
                    break;
                }
            }
        }

        const bool grid = (step + 1) % steps_per_store == 0 || step + 1 == n_steps;
        if (grid || res.aborted) {
            if (!s.allFinite()) {
                res.aborted = true;
                res.abort_t = t_new;
            }
            if (!res.aborted) push_row(t_new, false);
        }
        if (res.aborted) break;
    }

    res.domain_violations = domain_violations;
    return res;
}

MetricsReport compute_metrics(const SimResult& r, double t_tran, double t_end) {
    if (r.t.empty()) throw std::invalid_argument("compute_metrics: empty result");
    if (!(t_tran >= 0.0) || !(t_end >= t_tran))
        throw std::invalid_argument("compute_metrics: need 0 <= t_tran <= t_end");

    MetricsReport m;
    const double lo[3] = {0.0, 0.0, t_tran};
    const double hi[3] = {t_end, t_tran, t_end};
    const double slop = 1e-9;

    for (int w = 0; w < 3; ++w) {
        m.window_lo[w] = lo[w];
        m.window_hi[w] = hi[w];
        double abs_sum[3] = {}, sq_sum[3] = {};
        long n = 0;
        for (size_t i = 0; i < r.t.size(); ++i) {
            if (r.event_row[i]) continue;  // grid samples only
            const double t = r.t[i];
            if (t < lo[w] - slop || t > hi[w] + slop) continue;
            const double e[3] = {r.soc_nominal[i] - r.soc_true[i],
                                 r.soc_sigma[i] - r.soc_true[i],
                                 r.soc_filtered[i] - r.soc_true[i]};
            for (int est = 0; est < 3; ++est) {
                abs_sum[est] += std::abs(e[est]);
                sq_sum[est] += e[est] * e[est];
            }
            ++n;
        }
        if (n == 0)
            throw std::invalid_argument("compute_metrics: window [" + std::to_string(lo[w]) +
                                        ", " + std::to_string(hi[w]) + "] has no samples");
        m.window_samples[w] = n;
        for (int est = 0; est < 3; ++est) {
            m.mae[w][est] = abs_sum[est] / static_cast<double>(n);
            m.rmse[w][est] = std::sqrt(sq_sum[est] / static_cast<double>(n));
        }
    }

    m.jump_count = static_cast<long>(r.jumps.size());
    m.conservation_max_rel = r.conservation_max_rel;
    m.domain_violations = r.domain_violations;
    m.aborted = r.aborted;
    return m;
}

MonteCarloResult monte_carlo(const SimSetup& base, int n_runs, std::uint64_t seed, int jobs) {
    if (n_runs < 1) throw std::invalid_argument("monte_carlo: need at least one run");
    const auto t0 = std::chrono::steady_clock::now();

    const int K = static_cast<int>(base.gains.cols());
    const BatteryParams& bp = base.observer.params;

    MonteCarloResult mc;
    mc.run_seeds.resize(n_runs);
    mc.runs.resize(n_runs);

    // Scenario draws happen sequentially up front; the worker count can then
    // never change what any run integrates.
    std::vector<SimSetup> setups(n_runs, base);
    for (int r = 0; r < n_runs; ++r) {
        mc.run_seeds[r] = Rng::derive(seed, r);
        Rng rng(mc.run_seeds[r]);
        SimSetup& su = setups[r];
        su.scn.seed = mc.run_seeds[r];
        su.scn.init_c_neg.assign(K, 0.0);
        su.scn.init_c_pos.assign(K, 0.0);
        for (int k = 0; k < K; ++k) {
            const double soc = rng.uniform(0.0, 100.0);
            su.scn.init_c_neg[k] = bp.c0_neg_moll + soc / 100.0 * (bp.c100_neg_moll - bp.c0_neg_moll);
            su.scn.init_c_pos[k] = bp.c0_pos_moll + soc / 100.0 * (bp.c100_pos_moll - bp.c0_pos_moll);
        }
    }

    std::atomic<int> next{0};
    std::vector<std::string> errors(n_runs);
    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= n_runs) return;
            try {
                const SimResult sr = simulate(setups[r]);
                mc.runs[r] = compute_metrics(sr, base.scn.window_tran_s, base.scn.horizon_s);
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        }
    };

    const int n_workers = std::max(1, std::min(jobs, n_runs));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (int r = 0; r < n_runs; ++r)
        if (!errors[r].empty())
            throw std::runtime_error("monte_carlo: run " + std::to_string(r) + ": " + errors[r]);

    // Sequential aggregation over the run index: identical for any jobs count.
    MetricsReport& agg = mc.aggregate;
    for (int w = 0; w < 3; ++w) {
        agg.window_lo[w] = mc.runs[0].window_lo[w];
        agg.window_hi[w] = mc.runs[0].window_hi[w];
    }
    for (int r = 0; r < n_runs; ++r) {
        const MetricsReport& m = mc.runs[r];
        for (int w = 0; w < 3; ++w) {
            for (int est = 0; est < 3; ++est) {
                agg.mae[w][est] += m.mae[w][est];
                agg.rmse[w][est] += m.rmse[w][est];
            }
            agg.window_samples[w] += m.window_samples[w];
        }
        agg.jump_count += m.jump_count;
        agg.domain_violations += m.domain_violations;
        agg.conservation_max_rel = std::max(agg.conservation_max_rel, m.conservation_max_rel);
        agg.aborted = agg.aborted || m.aborted;
    }
    for (int w = 0; w < 3; ++w)
        for (int est = 0; est < 3; ++est) {
            agg.mae[w][est] /= n_runs;
            agg.rmse[w][est] /= n_runs;
        }

    mc.ordering_mae_ok = agg.mae[2][1] <= agg.mae[2][0];
    mc.ordering_rmse_ok = agg.rmse[2][1] <= agg.rmse[2][0];
    mc.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return mc;
}

void write_timeseries_csv(const std::string& path, const SimResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out << "t_s,jumps,sigma,event,soc_true_pct,soc_nominal_pct,soc_sigma_pct,soc_filtered_pct,"
           "c_surf_neg_true,c_surf_pos_true,c_surf_neg_est,c_surf_pos_est";
    for (int k = 0; k < r.n_modes; ++k) out << ",eta_" << (k + 1);
    out << "\n";
    for (size_t i = 0; i < r.t.size(); ++i) {
        // Modes are reported 1-based in files; in-memory indices stay 0-based.
        out << fd(r.t[i]) << ',' << r.j[i] << ',' << (r.sigma[i] + 1) << ','
            << static_cast<int>(r.event_row[i]) << ',' << fd(r.soc_true[i]) << ','
            << fd(r.soc_nominal[i]) << ',' << fd(r.soc_sigma[i]) << ',' << fd(r.soc_filtered[i])
            << ',' << fd(r.c_surf_neg_true[i]) << ',' << fd(r.c_surf_pos_true[i]) << ','
            << fd(r.c_surf_neg_est[i]) << ',' << fd(r.c_surf_pos_est[i]);
        for (int k = 0; k < r.n_modes; ++k) out << ',' << fd(r.eta[i][k]);
        out << "\n";
    }
    if (!out) throw ConfigError(path + ": write failed");
}

void write_jumps_csv(const std::string& path, const SimResult& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out << "t_s,jump_index,sigma_before,sigma_after";
    for (int k = 0; k < r.n_modes; ++k) out << ",eta_before_" << (k + 1);
    out << "\n";
    for (const JumpRecord& jr : r.jumps) {
        out << fd(jr.t) << ',' << jr.j_before << ',' << (jr.sigma_before + 1) << ','
            << (jr.sigma_after + 1);
        for (int k = 0; k < r.n_modes; ++k) out << ',' << fd(jr.eta_before[k]);
        out << "\n";
    }
    if (!out) throw ConfigError(path + ": write failed");
}

namespace {

void append_windows_json(std::ostringstream& os, const MetricsReport& m, const char* indent) {
    static const char* wname[3] = {"tot", "tran", "end"};
    static const char* ename[3] = {"nominal", "sigma", "filtered"};
    os << indent << "\"windows\": {\n";
    for (int w = 0; w < 3; ++w) {
        os << indent << "  \"" << wname[w] << "\": {\n";
        os << indent << "    \"lo_s\": " << fd(m.window_lo[w]) << ",\n";
        os << indent << "    \"hi_s\": " << fd(m.window_hi[w]) << ",\n";
        os << indent << "    \"samples\": " << m.window_samples[w] << ",\n";
        os << indent << "    \"mae_pct\": {";
        for (int e = 0; e < 3; ++e)
            os << (e ? ", " : "") << "\"" << ename[e] << "\": " << fd(m.mae[w][e]);
        os << "},\n";
        os << indent << "    \"rmse_pct\": {";
        for (int e = 0; e < 3; ++e)
            os << (e ? ", " : "") << "\"" << ename[e] << "\": " << fd(m.rmse[w][e]);
        os << "}\n";
        os << indent << "  }" << (w < 2 ? "," : "") << "\n";
    }
    os << indent << "},\n";
    os << indent << "\"jump_count\": " << m.jump_count << ",\n";
    os << indent << "\"conservation_max_rel\": " << fd(m.conservation_max_rel) << ",\n";
    os << indent << "\"domain_violations\": " << m.domain_violations << ",\n";
    os << indent << "\"aborted\": " << (m.aborted ? "true" : "false") << "\n";
}

}  // namespace

std::string metrics_to_json(const MetricsReport& m) {
    std::ostringstream os;
    os << "{\n";
    append_windows_json(os, m, "  ");
    os << "}\n";
    return os.str();
}

void write_metrics_json(const std::string& path, const MetricsReport& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out << metrics_to_json(m);
    if (!out) throw ConfigError(path + ": write failed");
}

std::string mc_aggregate_json(const MonteCarloResult& mc) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"runs\": " << mc.runs.size() << ",\n";
    os << "  \"ordering_mae_ok\": " << (mc.ordering_mae_ok ? "true" : "false") << ",\n";
    os << "  \"ordering_rmse_ok\": " << (mc.ordering_rmse_ok ? "true" : "false") << ",\n";
    os << "  \"aggregate\": {\n";
    append_windows_json(os, mc.aggregate, "    ");
    os << "  }\n";
    os << "}\n";
    return os.str();
}

std::string mc_table(const MonteCarloResult& mc) {
    static const char* wname[3] = {"tot", "tran", "end"};
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %12s %12s %12s\n", "SOC error %", "nominal",
                  "switched", "filtered");
    os << line;
    for (int w = 0; w < 3; ++w) {
        std::snprintf(line, sizeof line, "MAE  %-7s %12.6g %12.6g %12.6g\n", wname[w],
                      mc.aggregate.mae[w][0], mc.aggregate.mae[w][1], mc.aggregate.mae[w][2]);
        os << line;
    }
    for (int w = 0; w < 3; ++w) {
        std::snprintf(line, sizeof line, "RMSE %-7s %12.6g %12.6g %12.6g\n", wname[w],
                      mc.aggregate.rmse[w][0], mc.aggregate.rmse[w][1], mc.aggregate.rmse[w][2]);
        os << line;
    }
    return os.str();
}

void write_mc_runs_csv(const std::string& path, const MonteCarloResult& mc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    static const char* wname[3] = {"tot", "tran", "end"};
    static const char* ename[3] = {"nominal", "sigma", "filtered"};
    out << "run,seed";
    for (int w = 0; w < 3; ++w)
        for (int e = 0; e < 3; ++e) out << ",mae_" << wname[w] << '_' << ename[e];
    for (int w = 0; w < 3; ++w)
        for (int e = 0; e < 3; ++e) out << ",rmse_" << wname[w] << '_' << ename[e];
    out << ",jumps,conservation_max_rel,domain_violations,aborted\n";
    for (size_t r = 0; r < mc.runs.size(); ++r) {
        const MetricsReport& m = mc.runs[r];
        out << r << ',' << mc.run_seeds[r];
        for (int w = 0; w < 3; ++w)
            for (int e = 0; e < 3; ++e) out << ',' << fd(m.mae[w][e]);
        for (int w = 0; w < 3; ++w)
            for (int e = 0; e < 3; ++e) out << ',' << fd(m.rmse[w][e]);
        out << ',' << m.jump_count << ',' << fd(m.conservation_max_rel) << ','
            << m.domain_violations << ',' << (m.aborted ? 1 : 0) << "\n";
    }
    if (!out) throw ConfigError(path + ": write failed");
}

}  // namespace cellobs

#include "cellobs/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cellobs {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
        throw ConfigError("config key '" + key + "': expected a finite number, got '" + raw +
                          "'");
    return d;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string Config::get_string(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("config key '" + key + "' is required but missing");
    return it->second;
}

std::string Config::get_string_or(const std::string& key, const std::string& dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
}

double Config::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double Config::get_double_or(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : parse_double(key, it->second);
}

long Config::get_long_or(const std::string& key, long dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    const std::string v = trim(it->second);
    char* end = nullptr;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError("config key '" + key + "': expected an integer, got '" + it->second +
                          "'");
    return n;
}

bool Config::get_bool_or(const std::string& key, bool dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    std::string v = trim(it->second);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + it->second + "'");
}

std::vector<double> Config::get_list_or(const std::string& key,
                                        const std::vector<double>& dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    std::vector<double> out;
    std::string item;
    std::istringstream ss(it->second);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("config key '" + key + "': empty list element in '" + it->second +
                              "'");
        out.push_back(parse_double(key, item));
    }
    if (out.empty())
        throw ConfigError("config key '" + key + "': expected a comma-separated list, got '" +
                          it->second + "'");
    return out;
}

std::string Config::resolve_path(const std::string& value) const {
    if (value.empty() || value.front() == '/' || dir.empty()) return value;
    return dir + "/" + value;
}

Config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string raw = buf.str();

    Config cfg;
    cfg.path = path;
    const size_t slash = path.find_last_of('/');
    cfg.dir = slash == std::string::npos ? std::string(".") : path.substr(0, slash);
    cfg.hash = fnv1a64(raw);

    std::istringstream lines(raw);
    std::string line;
    long lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        const size_t hashpos = line.find('#');
        if (hashpos != std::string::npos) line.erase(hashpos);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ": line " + std::to_string(lineno) +
                             ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(path + ": line " + std::to_string(lineno) + ": empty key");
        if (cfg.kv.count(key))
            throw ParseError(path + ": line " + std::to_string(lineno) + ": duplicate key '" +
                             key + "'");
        cfg.kv[key] = value;
    }
    return cfg;
}

void apply_override(Config& cfg, const std::string& key_equals_value) {
    const size_t eq = key_equals_value.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + key_equals_value + "' is not of the form key=value");
    const std::string key = trim(key_equals_value.substr(0, eq));
    const std::string value = trim(key_equals_value.substr(eq + 1));
    if (key.empty()) throw ConfigError("override '" + key_equals_value + "' has an empty key");
    cfg.kv[key] = value;
    // Fold the override into the reproducibility hash in application order.
    cfg.hash = fnv1a64(key_equals_value, cfg.hash);
}

void reject_unknown_keys(const Config& cfg) {
    static const std::array<const char*, 64> known = {
        "cell.q_li_ah",
        "cell.capacity_ah",
        "cell.faraday_c_mol",
        "cell.gas_constant",
        "cell.temperature_k",
        "cell.area_m2",
        "cell.thickness_neg_m",
        "cell.thickness_pos_m",
        "cell.diffusion_neg_m2_s",
        "cell.diffusion_pos_m2_s",
        "cell.radius_neg_m",
        "cell.radius_pos_m",
        "cell.volfrac_neg",
        "cell.volfrac_pos",
        "cell.cmax_neg_mol_l",
        "cell.cmax_pos_mol_l",
        "cell.c0_neg_mol_l",
        "cell.c0_pos_mol_l",
        "cell.c100_neg_mol_l",
        "cell.c100_pos_mol_l",
        "cell.conductivity_neg_s_m",
        "cell.conductivity_pos_s_m",
        "cell.exch_current_neg_a_m2",
        "cell.exch_current_pos_a_m2",
        "cell.film_resistance_ohm",
        "cell.electrolyte_tau_s",
        "cell.electrolyte_res_uohm",
        "model.plant_shells_neg",
        "model.plant_shells_pos",
        "model.obs_shells_neg",
        "model.obs_shells_pos",
        "ocv.neg_csv",
        "ocv.pos_csv",
        "design.alpha",
        "design.rho",
        "design.p_floor",
        "design.mu_min",
        "design.mu_max",
        "design.max_iters",
        "design.time_budget_s",
        "design.seed_rate",
        "design.allow_free_gain",
        "monitor.nu",
        "monitor.lambda1",
        "monitor.lambda2",
        "switch.epsilon",
        "switch.zeta",
        "switch.min_dwell_s",
        "switch.gain_scales",
        "switch.eta0",
        "sim.dt_s",
        "sim.horizon_s",
        "sim.store_dt_s",
        "sim.window_tran_s",
        "sim.plant_soc0_pct",
        "sim.observer_soc0_pct",
        "sim.observer_init_c_neg_mol_l",
        "sim.observer_init_c_pos_mol_l",
        "sim.noise_amp_v",
        "sim.noise_omega_rad_s",
        "sim.bias_precision",
        "sim.electrolyte",
        "sim.seed",
        "profile.kind",
    };
    static const std::array<const char*, 8> known_profile = {
        "profile.csv",          "profile.hold",       "profile.horizon_s",
        "profile.pulse_min_s",  "profile.pulse_max_s", "profile.amp_a",
        "profile.bias_a",       "profile.seed",
    };
    for (const auto& [key, value] : cfg.kv) {
        (void)value;
        bool ok = std::find(known.begin(), known.end(), key) != known.end() ||
                  std::find(known_profile.begin(), known_profile.end(), key) !=
                      known_profile.end();
        if (!ok) throw ConfigError("unknown config key '" + key + "'");
    }
}

}  // namespace cellobs

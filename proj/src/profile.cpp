#include "cellobs/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cellobs/errors.hpp"
#include "cellobs/rng.hpp"

namespace cellobs {

namespace {

void validate_samples(const std::vector<double>& t, const std::vector<double>& i,
                      const std::string& where) {
    if (t.empty()) throw ParseError(where + ": profile needs at least one sample");
    if (t.size() != i.size()) throw ParseError(where + ": time/current length mismatch");
    for (size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k]) || !std::isfinite(i[k]))
            throw ParseError(where + ": non-finite value at data row " + std::to_string(k + 1));
        if (k == 0 && t[k] < 0.0)
            throw ParseError(where + ": first sample time must be >= 0");
        if (k > 0 && !(t[k] > t[k - 1]))
            throw ParseError(where + ": time not strictly increasing at data row " +
                             std::to_string(k + 1));
    }
}

// Index of the last sample with t[k] <= time, or -1 when time precedes all
// samples.
ptrdiff_t floor_index(const std::vector<double>& t, double time) {
    auto it = std::upper_bound(t.begin(), t.end(), time);
    return it - t.begin() - 1;
}

}  // namespace

double CurrentProfile::eval(double time) const {
    const ptrdiff_t k = floor_index(t, time);
    if (k < 0) return i.front();
    const size_t n = t.size();
    if (static_cast<size_t>(k) + 1 >= n) return i.back();
    if (hold == Hold::ZeroOrder) return i[k];
    const double w = (time - t[k]) / (t[k + 1] - t[k]);
    return i[k] + w * (i[k + 1] - i[k]);
}

double CurrentProfile::running_abs_max(double time) const {
    const ptrdiff_t k = floor_index(t, time);
    if (k < 0) return std::abs(i.front());  // constant hold before the trace
    double m = cummax_[k];
    // Partial segment beyond sample k: |i| on it is maximized at an endpoint,
    // and eval(time) is that endpoint value (ZOH) or the linear interpolant
    // whose extremum over [t_k, time] is at one of the two ends.
    if (static_cast<size_t>(k) + 1 < t.size()) m = std::max(m, std::abs(eval(time)));
    return m;
}

void CurrentProfile::finalize() {
    validate_samples(t, i, "<profile>");
    cummax_.resize(t.size());
    double m = 0.0;
    for (size_t k = 0; k < t.size(); ++k) {
        m = std::max(m, std::abs(i[k]));
        cummax_[k] = m;
    }
}

CurrentProfile load_profile(const std::string& path, CurrentProfile::Hold hold) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open profile file");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty profile file");
    if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time_s,current_A")
        throw ParseError(path + ": row 1: expected header 'time_s,current_A', got '" + line +
                         "'");

    CurrentProfile p;
    p.hold = hold;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        double a, b;
        char comma;
        if (!(ss >> a >> comma >> b) || comma != ',')
            throw ParseError(path + ": row " + std::to_string(row) + ": malformed line '" +
                             line + "'");
        p.t.push_back(a);
        p.i.push_back(b);
    }
    try {
        p.finalize();
    } catch (const ParseError& e) {
        // Re-anchor in-memory messages to the file path.
        std::string msg = e.what();
        const std::string anon = "<profile>";
        if (msg.compare(0, anon.size(), anon) == 0) msg = path + msg.substr(anon.size());
        throw ParseError(msg);
    }
    return p;
}

CurrentProfile make_profile(const std::vector<double>& t, const std::vector<double>& i,
                            CurrentProfile::Hold hold) {
    CurrentProfile p;
    p.t = t;
    p.i = i;
    p.hold = hold;
    p.finalize();
    return p;
}

CurrentProfile synthetic_pulse_profile(double horizon_s, double pulse_min_s, double pulse_max_s,
                                       double amp_a, double bias_a, std::uint64_t seed) {
    if (!(horizon_s > 0.0)) throw std::invalid_argument("synthetic profile: horizon must be > 0");
    if (!(pulse_min_s > 0.0) || !(pulse_max_s >= pulse_min_s))
        throw std::invalid_argument("synthetic profile: need 0 < pulse_min <= pulse_max");
    Rng rng(seed);
    CurrentProfile p;
    p.hold = CurrentProfile::Hold::ZeroOrder;
    double t = 0.0;
    while (t < horizon_s) {
        p.t.push_back(t);
        p.i.push_back(bias_a + rng.uniform(-amp_a, amp_a));
        t += rng.uniform(pulse_min_s, pulse_max_s);
    }
    p.finalize();
    return p;
}

}  // namespace cellobs

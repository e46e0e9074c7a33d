#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "run_config.hpp"

// Flat INI configuration: five sections, every key optional with the defaults
// baked into RunConfig, unknown keys rejected with their line number.

namespace cqmsim {

struct ConfigError : std::runtime_error {
    int line;
    ConfigError(int line_, const std::string& msg)
        : std::runtime_error(line_ > 0 ? "config line " + std::to_string(line_) + ": " + msg
                                       : "config: " + msg),
          line(line_) {}
};

// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(line, "expected a number, got '" + s + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& s, int line) {
    try {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("");
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(line, "expected a non-negative integer, got '" + s + "'");
    }
}

inline int parse_int(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(line, "expected an integer, got '" + s + "'");
    }
}

inline bool parse_bool(const std::string& s, int line) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(line, "expected a boolean, got '" + s + "'");
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw, section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto cut = raw.find_first_of("#;");
        std::string line = detail::trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(lineno, "malformed section header '" + line + "'");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "source" && section != "cqm" && section != "delays" &&
                section != "detectors" && section != "run")
                throw ConfigError(lineno, "unknown section [" + section + "]");
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(lineno, "expected 'key = value', got '" + line + "'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError(lineno, "expected 'key = value', got '" + line + "'");
        if (section.empty())
            throw ConfigError(lineno, "key '" + key + "' appears before any section");

        auto d = [&] { return detail::parse_double(val, lineno); };
        auto u = [&] { return detail::parse_u64(val, lineno); };
        auto b = [&] { return detail::parse_bool(val, lineno); };

        if (section == "source") {
            if (key == "pulse_period_ns") cfg.source.pulse_period_ns = d();
            else if (key == "p_pair_per_pulse") cfg.source.p_pair_per_pulse = d();
            else if (key == "sa_success_prob") cfg.source.sa_success_prob = d();
            else if (key == "psi_phase_rad") cfg.source.psi_phase_rad = d();
            else if (key == "depolarization") cfg.source.depolarization = d();
            else throw ConfigError(lineno, "unknown key '" + key + "' in [source]");
        } else if (section == "cqm") {
            if (key == "cycle_time_ns") cfg.cqm.cycle_time_ns = d();
            else if (key == "eta_cycle") cfg.cqm.eta_cycle = d();
            else if (key == "flip_fidelity") cfg.cqm.flip_fidelity = d();
            else if (key == "delta_per_cycle_rad") cfg.cqm.delta_per_cycle_rad = d();
            else if (key == "pc_rise_ns") cfg.cqm.pc_rise_ns = d();
            else if (key == "pc_fall_ns") cfg.cqm.pc_fall_ns = d();
            else if (key == "tap_reflectivity") cfg.cqm.tap_reflectivity = d();
            else if (key == "injection_flip") cfg.cqm.injection_flip = b();
            else throw ConfigError(lineno, "unknown key '" + key + "' in [cqm]");
        } else if (section == "delays") {
            if (key == "herald_compensation_ns") cfg.delays.herald_compensation.delay_ns = d();
            else if (key == "herald_compensation_transmission")
                cfg.delays.herald_compensation.transmission = d();
            else if (key == "herald_compensation_phase_rad")
                cfg.delays.herald_compensation.birefringent_phase_rad = d();
            else if (key == "passive_memory_ns") cfg.delays.passive_memory.delay_ns = d();
            else if (key == "passive_memory_transmission")
                cfg.delays.passive_memory.transmission = d();
            else if (key == "passive_memory_phase_rad")
                cfg.delays.passive_memory.birefringent_phase_rad = d();
            else throw ConfigError(lineno, "unknown key '" + key + "' in [delays]");
        } else if (section == "detectors") {
            if (key == "efficiency_d1") cfg.detectors.d1.efficiency = d();
            else if (key == "efficiency_d2") cfg.detectors.d2.efficiency = d();
            else if (key == "efficiency_daux") cfg.detectors.daux.efficiency = d();
            else if (key == "dark_count_prob_per_window") {
                double v = d();
                cfg.detectors.d1.dark_count_prob_per_window = v;
                cfg.detectors.d2.dark_count_prob_per_window = v;
                cfg.detectors.daux.dark_count_prob_per_window = v;
            } else throw ConfigError(lineno, "unknown key '" + key + "' in [detectors]");
        } else {  // run
            if (key == "mode") {
                if (val == "heralded") cfg.mode = RunMode::Heralded;
                else if (val == "periodic") cfg.mode = RunMode::Periodic;
                else throw ConfigError(lineno, "mode must be 'heralded' or 'periodic'");
            } else if (key == "n_cycles") cfg.n_cycles = detail::parse_int(val, lineno);
            else if (key == "num_pulses") cfg.num_pulses = u();
            else if (key == "seed") cfg.seed = u();
            else if (key == "theta1_deg") cfg.theta1 = PolarizerSetting(d());
            else if (key == "theta2_deg") cfg.theta2 = PolarizerSetting(d());
            else if (key == "herald_latency_ns") cfg.herald_latency_ns = d();
            else if (key == "divider_k") cfg.divider_k = u();
            else if (key == "acceptance_window_ns") cfg.acceptance_window_ns = d();
            else if (key == "coincidence_window_ns") cfg.coincidence_window_ns = d();
            else throw ConfigError(lineno, "unknown key '" + key + "' in [run]");
        }
    }
    return cfg;
}

inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    auto f = format_double;
    out << "[source]\n"
        << "pulse_period_ns = " << f(cfg.source.pulse_period_ns) << "\n"
        << "p_pair_per_pulse = " << f(cfg.source.p_pair_per_pulse) << "\n"
        << "sa_success_prob = " << f(cfg.source.sa_success_prob) << "\n"
        << "psi_phase_rad = " << f(cfg.source.psi_phase_rad) << "\n"
        << "depolarization = " << f(cfg.source.depolarization) << "\n\n"
        << "[cqm]\n"
        << "cycle_time_ns = " << f(cfg.cqm.cycle_time_ns) << "\n"
        << "eta_cycle = " << f(cfg.cqm.eta_cycle) << "\n"
        << "flip_fidelity = " << f(cfg.cqm.flip_fidelity) << "\n"
        << "delta_per_cycle_rad = " << f(cfg.cqm.delta_per_cycle_rad) << "\n"
        << "pc_rise_ns = " << f(cfg.cqm.pc_rise_ns) << "\n"
        << "pc_fall_ns = " << f(cfg.cqm.pc_fall_ns) << "\n"
        << "tap_reflectivity = " << f(cfg.cqm.tap_reflectivity) << "\n"
        << "injection_flip = " << (cfg.cqm.injection_flip ? "true" : "false") << "\n\n"
        << "[delays]\n"
        << "herald_compensation_ns = " << f(cfg.delays.herald_compensation.delay_ns) << "\n"
        << "herald_compensation_transmission = "
        << f(cfg.delays.herald_compensation.transmission) << "\n"
        << "herald_compensation_phase_rad = "
        << f(cfg.delays.herald_compensation.birefringent_phase_rad) << "\n"
        << "passive_memory_ns = " << f(cfg.delays.passive_memory.delay_ns) << "\n"
        << "passive_memory_transmission = " << f(cfg.delays.passive_memory.transmission) << "\n"
        << "passive_memory_phase_rad = "
        << f(cfg.delays.passive_memory.birefringent_phase_rad) << "\n\n"
        << "[detectors]\n"
        << "efficiency_d1 = " << f(cfg.detectors.d1.efficiency) << "\n"
        << "efficiency_d2 = " << f(cfg.detectors.d2.efficiency) << "\n"
        << "efficiency_daux = " << f(cfg.detectors.daux.efficiency) << "\n"
        << "dark_count_prob_per_window = "
        << f(cfg.detectors.d1.dark_count_prob_per_window) << "\n\n"
        << "[run]\n"
        << "mode = " << (cfg.mode == RunMode::Heralded ? "heralded" : "periodic") << "\n"
        << "n_cycles = " << cfg.n_cycles << "\n"
        << "num_pulses = " << cfg.num_pulses << "\n"
        << "seed = " << cfg.seed << "\n"
        << "theta1_deg = " << f(cfg.theta1.angle_deg) << "\n"
        << "theta2_deg = " << f(cfg.theta2.angle_deg) << "\n"
        << "herald_latency_ns = " << f(cfg.herald_latency_ns) << "\n"
        << "divider_k = " << cfg.divider_k << "\n"
        << "acceptance_window_ns = " << f(cfg.acceptance_window_ns) << "\n"
        << "coincidence_window_ns = " << f(cfg.coincidence_window_ns) << "\n";
    return out.str();
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config(buf.str());
    auto bad = validate_config(cfg);
    if (!bad.empty()) {
        std::string msg = "invalid values:";
        for (const auto& m : bad) msg += " " + m + ";";
        throw ConfigError(0, msg);
    }
    return cfg;
}

}  // namespace cqmsim

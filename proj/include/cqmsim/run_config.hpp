#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "components.hpp"

namespace cqmsim {

enum class RunMode { Heralded, Periodic };

// Which coincidence channel a curve belongs to: D1 x Daux sees the pair
// before the memory, D1 x D2 sees it after release.
enum class CoincidenceChannel { BeforeStorage, AfterStorage };

struct DelaysConfig {
    // Heralded triggering: photon 2 idles in fiber while the D1 click is processed.
    DelayParams herald_compensation{320.0, 1.0, 0.0};
    // Periodic triggering: photon 1 idles instead, so both measurements stay paired.
    DelayParams passive_memory{165.0, 1.0, 0.0};
    friend bool operator==(const DelaysConfig&, const DelaysConfig&) = default;
};

struct DetectorsConfig {
    DetectorParams d1;
    DetectorParams d2;
    DetectorParams daux;
    friend bool operator==(const DetectorsConfig&, const DetectorsConfig&) = default;
};

struct RunConfig {
    RunMode mode = RunMode::Heralded;
    int n_cycles = 4;
    std::uint64_t num_pulses = 1'000'000;
    std::uint64_t seed = 1;
    PolarizerSetting theta1{0.0};
    PolarizerSetting theta2{0.0};
    double herald_latency_ns = 320.0;      // trigger electronics delay after a D1 click
    std::uint64_t divider_k = 64;          // periodic trigger = pump clock / divider_k
    double acceptance_window_ns = 5.0;     // half-width for storage-window alignment
    double coincidence_window_ns = 1.0;    // half-width for offline pairing
    SourceParams source;
    CqmParams cqm;
    DelaysConfig delays;
    DetectorsConfig detectors;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// The trigger period the run implies: periodic mode divides the pump clock,
// heralded mode triggers on D1 clicks whose mean spacing is period / p_pair.
inline double implied_trigger_period_ns(const RunConfig& config) {
    if (config.mode == RunMode::Periodic)
        return static_cast<double>(config.divider_k) * config.source.pulse_period_ns;
    if (config.source.p_pair_per_pulse <= 0.0)
        return std::numeric_limits<double>::infinity();
    return config.source.pulse_period_ns / config.source.p_pair_per_pulse;
}

// Field-by-field validation; returns human-readable violations, empty when fine.
inline std::vector<std::string> validate_config(const RunConfig& config) {
    std::vector<std::string> bad;
    auto need = [&](bool ok, const std::string& msg) { if (!ok) bad.push_back(msg); };
    need(config.n_cycles >= 1, "run.n_cycles must be >= 1");
    need(config.num_pulses >= 1, "run.num_pulses must be >= 1");
    need(config.divider_k >= 1, "run.divider_k must be >= 1");
    need(config.acceptance_window_ns > 0.0, "run.acceptance_window_ns must be > 0");
    need(config.coincidence_window_ns > 0.0, "run.coincidence_window_ns must be > 0");
    need(config.herald_latency_ns >= 0.0, "run.herald_latency_ns must be >= 0");
    need(config.source.pulse_period_ns > 0.0, "source.pulse_period_ns must be > 0");
    need(config.source.p_pair_per_pulse >= 0.0 && config.source.p_pair_per_pulse <= 1.0,
         "source.p_pair_per_pulse must be in [0, 1]");
    need(config.source.sa_success_prob >= 0.0 && config.source.sa_success_prob <= 1.0,
         "source.sa_success_prob must be in [0, 1]");
    need(config.source.depolarization >= 0.0 && config.source.depolarization <= 1.0,
         "source.depolarization must be in [0, 1]");
    need(config.cqm.cycle_time_ns > 0.0, "cqm.cycle_time_ns must be > 0");
    need(config.cqm.eta_cycle > 0.0 && config.cqm.eta_cycle <= 1.0,
         "cqm.eta_cycle must be in (0, 1]");
    need(config.cqm.flip_fidelity >= 0.0 && config.cqm.flip_fidelity <= 1.0,
         "cqm.flip_fidelity must be in [0, 1]");
    need(config.cqm.pc_rise_ns >= 0.0, "cqm.pc_rise_ns must be >= 0");
    need(config.cqm.pc_fall_ns >= 0.0, "cqm.pc_fall_ns must be >= 0");
    need(config.cqm.tap_reflectivity >= 0.0 && config.cqm.tap_reflectivity <= 1.0,
         "cqm.tap_reflectivity must be in [0, 1]");
    need(config.delays.herald_compensation.delay_ns >= 0.0,
         "delays.herald_compensation_ns must be >= 0");
    need(config.delays.herald_compensation.transmission >= 0.0 &&
             config.delays.herald_compensation.transmission <= 1.0,
         "delays.herald_compensation_transmission must be in [0, 1]");
    need(config.delays.passive_memory.delay_ns >= 0.0,
         "delays.passive_memory_ns must be >= 0");
    need(config.delays.passive_memory.transmission >= 0.0 &&
             config.delays.passive_memory.transmission <= 1.0,
         "delays.passive_memory_transmission must be in [0, 1]");
    for (auto [d, name] : {std::pair{&config.detectors.d1, "d1"},
                           std::pair{&config.detectors.d2, "d2"},
                           std::pair{&config.detectors.daux, "daux"}}) {
        need(d->efficiency >= 0.0 && d->efficiency <= 1.0,
             std::string("detectors.efficiency_") + name + " must be in [0, 1]");
        need(d->dark_count_prob_per_window >= 0.0 && d->dark_count_prob_per_window <= 1.0,
             std::string("detectors.dark_count_prob_per_window (") + name + ") must be in [0, 1]");
    }
    return bad;
}

}  // namespace cqmsim

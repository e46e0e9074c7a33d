#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "run_config.hpp"

// Closed-form expectations for every observable the engine estimates.  Built
// by composing classical throughput factors with exact Jones-calculus traces;
// deliberately shares no sampling code with the engine, so agreement between
// the two is evidence, not tautology.

namespace cqmsim {

// The pair state offered to the polarizers: prepared singlet, isotropic
// noise, and any fixed birefringent phase picked up in the fiber spools.
inline TwoQubitState oracle_prepared_state(const RunConfig& config) {
    TwoQubitState state =
        depolarize(psi_minus(config.source.psi_phase_rad), config.source.depolarization);
    if (config.mode == RunMode::Heralded) {
        double ph = config.delays.herald_compensation.birefringent_phase_rad;
        if (ph != 0.0) state = apply_one_photon(state, 2, phase_op(ph));
    } else {
        double ph = config.delays.passive_memory.birefringent_phase_rad;
        if (ph != 0.0) state = apply_one_photon(state, 1, phase_op(ph));
    }
    return state;
}

// Polarization-independent survival of the pair up to the named coincidence,
// per emitted pair and (for the after channel) per granted storage trigger.
inline double oracle_chain_throughput(const RunConfig& config, CoincidenceChannel channel) {
    double t = config.source.sa_success_prob;
    if (config.mode == RunMode::Heralded)
        t *= config.delays.herald_compensation.transmission;
    else
        t *= config.delays.passive_memory.transmission;
    t *= config.detectors.d1.efficiency;
    double r = config.cqm.tap_reflectivity;
    if (channel == CoincidenceChannel::BeforeStorage)
        return t * r * config.detectors.daux.efficiency;
    double survival =
        std::pow(config.cqm.eta_cycle * config.cqm.flip_fidelity, config.n_cycles);
    return t * (1.0 - r) * survival * r * config.detectors.d2.efficiency;
}

// Probability per emitted pair (per granted trigger for the after channel)
// that both of the channel's detectors record the pair.
inline double expected_coincidence(const RunConfig& config, const PolarizerSetting& theta1,
                                   const PolarizerSetting& theta2,
                                   CoincidenceChannel channel = CoincidenceChannel::AfterStorage) {
    TwoQubitState state = oracle_prepared_state(config);
    if (channel == CoincidenceChannel::AfterStorage) {
        CqmTransform net = cqm_net_transform(config.n_cycles, config.cqm);
        state = apply_one_photon(state, 2, net.jones);
    }
    return oracle_chain_throughput(config, channel) *
           coincidence_probability(state, theta1, theta2);
}

// Fraction of pump pulses whose pair arrives inside an open storage window.
// Mirrors the engine's alignment rule (strict |dt| < acceptance window):
// heralded triggers are aligned iff the compensation fiber matches the trigger
// latency; periodic triggers accept the pulse residues nearest the divided clock.
inline double storage_alignment_fraction(const RunConfig& config) {
    if (config.mode == RunMode::Heralded) {
        double mismatch = std::abs(config.delays.herald_compensation.delay_ns -
                                   config.herald_latency_ns);
        return mismatch < config.acceptance_window_ns ? 1.0 : 0.0;
    }
    std::uint64_t k = config.divider_k;
    std::uint64_t aligned = 0;
    for (std::uint64_t j = 0; j < k; ++j) {
        double off = static_cast<double>(std::min(j, k - j)) * config.source.pulse_period_ns;
        if (off < config.acceptance_window_ns) ++aligned;
    }
    return static_cast<double>(aligned) / static_cast<double>(k);
}

inline double expected_coincidence_per_pulse(
    const RunConfig& config, const PolarizerSetting& theta1, const PolarizerSetting& theta2,
    CoincidenceChannel channel = CoincidenceChannel::AfterStorage) {
    double align = channel == CoincidenceChannel::AfterStorage
                       ? storage_alignment_fraction(config)
                       : 1.0;
    return config.source.p_pair_per_pulse * align *
           expected_coincidence(config, theta1, theta2, channel);
}

struct ExpectedCurve {
    double theta2_deg = 0.0;
    CoincidenceChannel channel = CoincidenceChannel::AfterStorage;
    // per-pulse probability = offset + amplitude * sin^2(theta1 - phase)
    double amplitude = 0.0;
    double offset = 0.0;
    double phase_deg = 0.0;
    std::vector<std::pair<double, double>> points;  // (theta1_deg, per-pulse probability)
};

namespace detail {
// Any polarizer fringe here is c0 + c1 cos(2 t1) + c2 sin(2 t1); three exact
// evaluations pin the coefficients without fitting.
struct FringeCoeffs {
    double c0, c1, c2;
};
inline FringeCoeffs fringe_coeffs(const RunConfig& config, const PolarizerSetting& theta2,
                                  CoincidenceChannel channel) {
    double y0 = expected_coincidence_per_pulse(config, PolarizerSetting(0.0), theta2, channel);
    double y45 = expected_coincidence_per_pulse(config, PolarizerSetting(45.0), theta2, channel);
    double y90 = expected_coincidence_per_pulse(config, PolarizerSetting(90.0), theta2, channel);
    double c0 = 0.5 * (y0 + y90);
    return {c0, 0.5 * (y0 - y90), y45 - c0};
}
}  // namespace detail

inline ExpectedCurve expected_curve(const RunConfig& config, const PolarizerSetting& theta2,
                                    CoincidenceChannel channel,
                                    const std::vector<double>& theta1_grid_deg) {
    auto [c0, c1, c2] = detail::fringe_coeffs(config, theta2, channel);
    double r = std::hypot(c1, c2);
    ExpectedCurve curve;
    curve.theta2_deg = theta2.angle_deg;
    curve.channel = channel;
    curve.amplitude = 2.0 * r;
    curve.offset = c0 - r;
    curve.phase_deg = r > 0.0 ? normalize_axis_deg(rad2deg(0.5 * std::atan2(-c2, -c1))) : 0.0;
    curve.points.reserve(theta1_grid_deg.size());
    for (double t1 : theta1_grid_deg)
        curve.points.emplace_back(
            normalize_axis_deg(t1),
            expected_coincidence_per_pulse(config, PolarizerSetting(t1), theta2, channel));
    return curve;
}

// (max - min) / (max + min) of the expected fringe over theta1, at fixed theta2.
inline double expected_fringe_visibility(const RunConfig& config, const PolarizerSetting& theta2,
                                         CoincidenceChannel channel) {
    auto [c0, c1, c2] = detail::fringe_coeffs(config, theta2, channel);
    if (c0 <= 0.0) return 0.0;
    return std::hypot(c1, c2) / c0;
}

// The two calibration visibilities: H/V basis (theta2 = 0) and diagonal
// basis (theta2 = 45), for the after-storage channel unless asked otherwise.
inline std::pair<double, double> expected_visibility(
    const RunConfig& config, CoincidenceChannel channel = CoincidenceChannel::AfterStorage) {
    return {expected_fringe_visibility(config, PolarizerSetting(0.0), channel),
            expected_fringe_visibility(config, PolarizerSetting(45.0), channel)};
}

// Ratio of released-pair rates for two dwell lengths: (eta * fidelity)^(n1 - n2).
inline double expected_rate_ratio(int n1, int n2, const CqmParams& params) {
    if (n1 < 1 || n2 < 1)
        throw std::invalid_argument("expected_rate_ratio: cycle counts must be >= 1");
    return std::pow(params.eta_cycle * params.flip_fidelity, n1 - n2);
}

}  // namespace cqmsim

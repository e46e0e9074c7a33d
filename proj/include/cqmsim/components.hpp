#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "polarization.hpp"
#include "rng.hpp"

// Device models for the loop-based memory bench: pulsed SPDC source,
// interferometric pair combiner, fiber delays, the storage loop itself
// (in/out tap + intra-loop Pockels cell + per-cycle loss), and detectors.
// Each model is a stateless transformer of (event, params, rng).

namespace cqmsim {

enum class Channel {
    SourceToSa,
    SaOut1,
    SaOut2,
    Delay,
    CqmInput,
    CqmLoop,
    CqmOutput,
    Aux,
    Detector1,
    Detector2,
};

struct PhotonEvent {
    std::uint64_t pair_id = 0;
    int photon_index = 1;  // 1 or 2
    double time_ns = 0.0;
    Channel channel = Channel::SourceToSa;
    bool alive = true;
};

struct SourceParams {
    double pulse_period_ns = 10.0;   // 100 MHz pump
    double p_pair_per_pulse = 1e-4;
    double sa_success_prob = 0.5;    // post-selected combiner output fraction
    double psi_phase_rad = 0.0;      // residual phase of the prepared singlet
    double depolarization = 0.0;     // isotropic noise admixture, 0 = pure state
    friend bool operator==(const SourceParams&, const SourceParams&) = default;
};

struct CqmParams {
    double cycle_time_ns = 27.0;
    double eta_cycle = 0.78;            // per-cycle transmission
    double flip_fidelity = 1.0;         // fraction of passes with a clean flip; the rest eject
    double delta_per_cycle_rad = 0.0;   // residual birefringent phase per cycle
    double pc_rise_ns = 15.0;
    double pc_fall_ns = 15.0;
    double tap_reflectivity = 0.5;      // coupler reflectivity at entry (to aux) and exit (to D2)
    bool injection_flip = true;         // whether entry itself contributes one flip
    friend bool operator==(const CqmParams&, const CqmParams&) = default;
};

struct DelayParams {
    double delay_ns = 0.0;
    double transmission = 1.0;
    double birefringent_phase_rad = 0.0;
    friend bool operator==(const DelayParams&, const DelayParams&) = default;
};

struct DetectorParams {
    double efficiency = 1.0;
    double dark_count_prob_per_window = 0.0;
    friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

enum class DetectorId { D1, D2, Daux };

struct DetectionRecord {
    DetectorId detector = DetectorId::D1;
    double time_ns = 0.0;
    std::optional<std::uint64_t> pair_id;  // empty for dark counts
};

struct PhotonPair {
    PhotonEvent photon1;
    PhotonEvent photon2;
};

// One pump pulse: emits a (not yet polarization-defined) pair with
// probability p_pair_per_pulse.  Both photons start at the pulse time.
inline std::optional<PhotonPair> spdc_emit(std::uint64_t pulse_index,
                                           const SourceParams& params, Rng& rng) {
    if (!bernoulli(rng, params.p_pair_per_pulse)) return std::nullopt;
    double t = static_cast<double>(pulse_index) * params.pulse_period_ns;
    PhotonPair pair;
    pair.photon1 = PhotonEvent{pulse_index, 1, t, Channel::SourceToSa, true};
    pair.photon2 = PhotonEvent{pulse_index, 2, t, Channel::SourceToSa, true};
    return pair;
}

struct EntangledPair {
    PhotonEvent photon1;
    PhotonEvent photon2;
    TwoQubitState state;
};

// Interferometric combiner: with probability sa_success_prob the photons exit
// separate ports carrying the singlet (post-selected); otherwise the attempt
// is discarded and both photons count as lost.
inline std::optional<EntangledPair> shih_alley_combine(const PhotonPair& pair,
                                                       const SourceParams& params,
                                                       Rng& rng) {
    if (pair.photon1.pair_id != pair.photon2.pair_id)
        throw std::logic_error("shih_alley_combine: photons from different pairs");
    if (!pair.photon1.alive || !pair.photon2.alive) return std::nullopt;
    if (!bernoulli(rng, params.sa_success_prob)) return std::nullopt;
    EntangledPair out;
    out.photon1 = pair.photon1;
    out.photon1.channel = Channel::SaOut1;
    out.photon2 = pair.photon2;
    out.photon2.channel = Channel::SaOut2;
    out.state = depolarize(psi_minus(params.psi_phase_rad), params.depolarization);
    return out;
}

// Fiber spool on one photon's path: time shift, survival draw, and a
// birefringent phase applied to that photon's side of the shared state.
inline PhotonEvent delay_line(PhotonEvent event, TwoQubitState& state,
                              const DelayParams& params, Rng& rng) {
    if (!event.alive) return event;
    event.time_ns += params.delay_ns;
    event.channel = Channel::Delay;
    if (!bernoulli(rng, params.transmission)) {
        event.alive = false;
        return event;
    }
    if (params.birefringent_phase_rad != 0.0)
        state = apply_one_photon(state, event.photon_index,
                                 phase_op(params.birefringent_phase_rad));
    return event;
}

struct CqmTransform {
    JonesOp jones;    // net polarization transform over the stay
    double survival;  // (eta_cycle * flip_fidelity)^n
};

// Net effect of an n-cycle stay in the loop.  Each circulation applies the
// residual phase and then a 90-degree rotation; entry contributes one more
// rotation when injection_flip is set.  Even cycle counts collapse to a pure
// phase times the entry flip, which is what makes long storage transparent.
inline CqmTransform cqm_net_transform(int n_cycles, const CqmParams& params) {
    if (n_cycles < 1) throw std::invalid_argument("cqm_net_transform: n_cycles must be >= 1");
    const JonesOp flip = rotation_op(kPi / 2.0);
    const JonesOp per_cycle = flip * phase_op(params.delta_per_cycle_rad);
    JonesOp net = JonesOp::Identity();
    for (int i = 0; i < n_cycles; ++i) net = per_cycle * net;
    if (params.injection_flip) net = flip * net;
    double survival = std::pow(params.eta_cycle * params.flip_fidelity, n_cycles);
    return CqmTransform{net, survival};
}

enum class CqmPath { ToAux, Stored, Lost };

// Draw order is part of the reproducibility contract: entry tap, loop
// survival, exit tap.
inline CqmPath sample_cqm_path_core(bool storage_triggered, double survival,
                                    double tap_reflectivity, Rng& rng) {
    if (bernoulli(rng, tap_reflectivity)) return CqmPath::ToAux;
    if (!storage_triggered) return CqmPath::Lost;
    if (!bernoulli(rng, survival)) return CqmPath::Lost;
    if (!bernoulli(rng, tap_reflectivity)) return CqmPath::Lost;
    return CqmPath::Stored;
}

// Classical routing at the memory: the entry tap reflects to the auxiliary
// detector or transmits into the loop; untriggered storage and per-cycle loss
// discard the photon; the exit tap releases toward D2.  Polarization is not
// touched here -- pair it with cqm_net_transform.
inline CqmPath sample_cqm_path(int n_cycles, bool storage_triggered,
                               const CqmParams& params, Rng& rng) {
    if (n_cycles < 1) throw std::invalid_argument("sample_cqm_path: n_cycles must be >= 1");
    double survival = std::pow(params.eta_cycle * params.flip_fidelity, n_cycles);
    return sample_cqm_path_core(storage_triggered, survival, params.tap_reflectivity, rng);
}

// Full storage attempt for one photon with the trigger already granted:
// routes through the taps and loop, and on release applies the net transform
// to the shared state and advances the clock by n cycle times.  Returns the
// released event, or nullopt if the photon went to aux or was lost.
inline std::optional<std::pair<PhotonEvent, TwoQubitState>>
cqm_store(PhotonEvent event, TwoQubitState state, int n_cycles,
          const CqmParams& params, Rng& rng) {
    if (!event.alive) return std::nullopt;
    event.channel = Channel::CqmInput;
    CqmPath path = sample_cqm_path(n_cycles, true, params, rng);
    if (path != CqmPath::Stored) return std::nullopt;
    CqmTransform net = cqm_net_transform(n_cycles, params);
    state = apply_one_photon(state, event.photon_index, net.jones);
    event.time_ns += static_cast<double>(n_cycles) * params.cycle_time_ns;
    event.channel = Channel::CqmOutput;
    return std::make_pair(event, std::move(state));
}

// Detection draw for a photon that reached this detector's port.
inline std::optional<DetectionRecord> detect(const PhotonEvent& event, DetectorId id,
                                             const DetectorParams& params, Rng& rng) {
    if (!event.alive) return std::nullopt;
    if (!bernoulli(rng, params.efficiency)) return std::nullopt;
    return DetectionRecord{id, event.time_ns, event.pair_id};
}

// One dark-count draw for a gating window [start, start + span).
inline std::optional<DetectionRecord> dark_count(DetectorId id, double window_start_ns,
                                                 double window_span_ns,
                                                 const DetectorParams& params, Rng& rng) {
    if (!bernoulli(rng, params.dark_count_prob_per_window)) return std::nullopt;
    double t = window_start_ns + uniform01(rng) * window_span_ns;
    return DetectionRecord{id, t, std::nullopt};
}

struct ScheduleCheck {
    bool ok = true;
    std::string violation;  // which window overlaps, empty when ok
};

// A storage schedule is feasible iff the Pockels cell can switch inside one
// circulation (rise and fall each shorter than the cycle time) and consecutive
// triggers leave room for the full stay plus both switching edges.
inline ScheduleCheck validate_pc_schedule(int n_cycles, const CqmParams& params,
                                          double trigger_period_ns) {
    if (n_cycles < 1) return {false, "n_cycles must be >= 1"};
    if (trigger_period_ns <= 0.0) return {false, "trigger period must be positive"};
    if (params.pc_rise_ns >= params.cycle_time_ns)
        return {false, "pc rise (" + std::to_string(params.pc_rise_ns) +
                           " ns) does not fit inside one cycle (" +
                           std::to_string(params.cycle_time_ns) + " ns)"};
    if (params.pc_fall_ns >= params.cycle_time_ns)
        return {false, "pc fall (" + std::to_string(params.pc_fall_ns) +
                           " ns) does not fit inside one cycle (" +
                           std::to_string(params.cycle_time_ns) + " ns)"};
    double busy = static_cast<double>(n_cycles) * params.cycle_time_ns +
                  params.pc_rise_ns + params.pc_fall_ns;
    if (trigger_period_ns <= busy)
        return {false, "trigger period " + std::to_string(trigger_period_ns) +
                           " ns overlaps the " + std::to_string(busy) +
                           " ns storage window of the previous trigger"};
    return {true, {}};
}

}  // namespace cqmsim

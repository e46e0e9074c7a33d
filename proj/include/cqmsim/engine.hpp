#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "run_config.hpp"

// Discrete-event Monte Carlo over pump pulses.  Each pulse walks one pair
// through source -> combiner -> delays -> polarizer 1 -> memory tap/loop ->
// polarizer 2 -> detectors, drawing Bernoulli outcomes in a documented order.
// Photon 2's quantum measurement is sampled from the state conditioned on
// photon 1's polarizer outcome, so the joint statistics reproduce
// tr[(P1 x P2) rho] without ever sampling the pair jointly.

namespace cqmsim {

struct ChannelCounts {
    std::uint64_t coincidences_12 = 0;    // D1 x D2, after storage
    std::uint64_t coincidences_1aux = 0;  // D1 x Daux, before storage
    std::uint64_t singles_1 = 0;
    std::uint64_t singles_2 = 0;
    std::uint64_t singles_aux = 0;

    ChannelCounts& operator+=(const ChannelCounts& o) {
        coincidences_12 += o.coincidences_12;
        coincidences_1aux += o.coincidences_1aux;
        singles_1 += o.singles_1;
        singles_2 += o.singles_2;
        singles_aux += o.singles_aux;
        return *this;
    }
};

struct RunRecord {
    RunConfig config;
    // (theta1_deg, theta2_deg) -> counts; a single run has exactly one entry
    std::map<std::pair<double, double>, ChannelCounts> counts;
    std::uint64_t attempted_storages = 0;
    double elapsed_ns = 0.0;

    const ChannelCounts& primary_counts() const {
        if (counts.size() != 1)
            throw std::logic_error("RunRecord::primary_counts: record holds several settings");
        return counts.begin()->second;
    }
};

struct CurvePoint {
    double theta1_deg = 0.0;
    std::uint64_t coincidences = 0;
    std::uint64_t exposure_pulses = 0;
};

struct CoincidenceCurve {
    double theta2_deg = 0.0;
    CoincidenceChannel channel = CoincidenceChannel::AfterStorage;
    std::vector<CurvePoint> points;
};

// Expected detection-time offsets relative to D1, fixed by the configured
// delays and the storage dwell; used to line the channels up before pairing.
struct ChannelOffsets {
    double d2_minus_d1_ns = 0.0;
    double aux_minus_d1_ns = 0.0;
};

inline ChannelOffsets expected_offsets(const RunConfig& config) {
    double dwell = static_cast<double>(config.n_cycles) * config.cqm.cycle_time_ns;
    if (config.mode == RunMode::Heralded) {
        double d2 = config.delays.herald_compensation.delay_ns;
        return {d2 + dwell, d2};
    }
    double d1 = config.delays.passive_memory.delay_ns;
    return {dwell - d1, -d1};
}

// Greedy earliest-first pairing: records sorted by time, |tb - offset - ta| <=
// window matches, and every record participates in at most one pair.
inline std::vector<std::pair<std::size_t, std::size_t>>
match_coincidences(std::span<const DetectionRecord> a, std::span<const DetectionRecord> b,
                   double offset_ns, double window_ns) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double d = (b[j].time_ns - offset_ns) - a[i].time_ns;
        if (std::abs(d) <= window_ns) {
            out.emplace_back(i, j);
            ++i;
            ++j;
        } else if (d < 0.0) {
            ++j;
        } else {
            ++i;
        }
    }
    return out;
}

struct CoincidenceTally {
    std::uint64_t d1_d2 = 0;
    std::uint64_t d1_aux = 0;
};

inline CoincidenceTally coincidence_count(std::span<const DetectionRecord> d1,
                                          std::span<const DetectionRecord> d2,
                                          std::span<const DetectionRecord> aux,
                                          const ChannelOffsets& offsets, double window_ns) {
    CoincidenceTally t;
    t.d1_d2 = match_coincidences(d1, d2, offsets.d2_minus_d1_ns, window_ns).size();
    t.d1_aux = match_coincidences(d1, aux, offsets.aux_minus_d1_ns, window_ns).size();
    return t;
}

// Per-run constants hoisted out of the pulse loop.  obs_d2 folds the net
// storage transform into photon 2's polarizer (Heisenberg picture), so a
// released photon costs one trace instead of a state conjugation.
struct TrialCache {
    Eigen::Matrix4cd obs1;        // P(theta1) x I
    Eigen::Matrix4cd proj1_fail;  // (I - P(theta1)) x I
    Eigen::Matrix4cd obs_aux;     // I x P(theta2)
    Eigen::Matrix4cd obs_d2;      // I x Jnet^dag P(theta2) Jnet
    double loop_survival = 1.0;
    double window_period_ns = 0.0;  // periodic trigger spacing
    double dwell_ns = 0.0;
    bool has_darks = false;
};

inline TrialCache build_trial_cache(const RunConfig& config) {
    TrialCache c;
    JonesOp p1 = polarizer_projector(config.theta1);
    JonesOp p2 = polarizer_projector(config.theta2);
    c.obs1 = expand_on_photon(1, p1);
    c.proj1_fail = expand_on_photon(1, (JonesOp::Identity() - p1).eval());
    c.obs_aux = expand_on_photon(2, p2);
    CqmTransform net = cqm_net_transform(config.n_cycles, config.cqm);
    c.obs_d2 = expand_on_photon(2, (net.jones.adjoint() * p2 * net.jones).eval());
    c.loop_survival = net.survival;
    c.window_period_ns = static_cast<double>(config.divider_k) * config.source.pulse_period_ns;
    c.dwell_ns = static_cast<double>(config.n_cycles) * config.cqm.cycle_time_ns;
    c.has_darks = config.detectors.d1.dark_count_prob_per_window > 0.0 ||
                  config.detectors.d2.dark_count_prob_per_window > 0.0 ||
                  config.detectors.daux.dark_count_prob_per_window > 0.0;
    return c;
}

struct BlockRecords {
    std::vector<DetectionRecord> d1, d2, aux;
    std::uint64_t attempted_storages = 0;
};

// One contiguous block of pulses on its own RNG stream.  Draw order per pulse:
// emit, combiner, photon-1 delay (periodic), polarizer 1, detector 1, photon-2
// delay (heralded), tap in, loop survival, tap out, polarizer 2, detector 2 or
// aux, dark counts.  Storage-window alignment uses strict |dt| < acceptance.
inline BlockRecords simulate_block_records(const RunConfig& config, const TrialCache& cache,
                                           std::uint64_t first_pulse, std::uint64_t n_pulses,
                                           Rng& rng) {
    BlockRecords out;
    const bool heralded = config.mode == RunMode::Heralded;

    for (std::uint64_t p = first_pulse; p < first_pulse + n_pulses; ++p) {
        const bool periodic_window = !heralded && (p % config.divider_k == 0);
        if (periodic_window) ++out.attempted_storages;

        bool window_opened = periodic_window;
        double window_start = static_cast<double>(p) * config.source.pulse_period_ns;

        auto emitted = spdc_emit(p, config.source, rng);
        if (emitted) {
            auto sa = shih_alley_combine(*emitted, config.source, rng);
            if (sa) {
                TwoQubitState state = sa->state;
                PhotonEvent p1 = sa->photon1;
                PhotonEvent p2 = sa->photon2;

                bool p1_measured = false, p1_passed = false, collapsed = false;
                double p1_prob = 0.0;
                bool d1_clicked = false;
                double d1_time = 0.0;

                if (!heralded)
                    p1 = delay_line(p1, state, config.delays.passive_memory, rng);
                if (p1.alive) {
                    p1_prob = trace_product_real(cache.obs1, state.rho);
                    p1_passed = bernoulli(rng, p1_prob);
                    p1_measured = true;
                    if (p1_passed) {
                        p1.channel = Channel::Detector1;
                        if (auto rec = detect(p1, DetectorId::D1, config.detectors.d1, rng)) {
                            out.d1.push_back(*rec);
                            d1_clicked = true;
                            d1_time = p1.time_ns;
                        }
                    }
                }
                if (heralded && d1_clicked) {
                    ++out.attempted_storages;
                    window_opened = true;
                    window_start = d1_time + config.herald_latency_ns;
                }

                // collapse photon 1's polarizer outcome into the shared state,
                // deferred until photon 2 actually needs a conditional draw
                auto collapse = [&] {
                    if (!p1_measured || collapsed) return;
                    collapsed = true;
                    double norm = p1_passed ? p1_prob : 1.0 - p1_prob;
                    if (norm <= 0.0) return;
                    const Eigen::Matrix4cd& proj = p1_passed ? cache.obs1 : cache.proj1_fail;
                    state.rho = (proj * state.rho * proj) / norm;
                };

                if (heralded)
                    p2 = delay_line(p2, state, config.delays.herald_compensation, rng);
                if (p2.alive) {
                    const double arrival = p2.time_ns;
                    bool aligned;
                    if (heralded) {
                        aligned = d1_clicked &&
                                  std::abs(arrival - window_start) < config.acceptance_window_ns;
                    } else {
                        double nearest =
                            std::round(arrival / cache.window_period_ns) * cache.window_period_ns;
                        aligned = std::abs(arrival - nearest) < config.acceptance_window_ns;
                    }

                    p2.channel = Channel::CqmInput;
                    CqmPath path = sample_cqm_path_core(aligned, cache.loop_survival,
                                                        config.cqm.tap_reflectivity, rng);
                    if (path == CqmPath::ToAux) {
                        collapse();
                        if (bernoulli(rng, trace_product_real(cache.obs_aux, state.rho))) {
                            p2.channel = Channel::Aux;
                            if (auto rec = detect(p2, DetectorId::Daux, config.detectors.daux, rng))
                                out.aux.push_back(*rec);
                        }
                    } else if (path == CqmPath::Stored) {
                        collapse();
                        if (bernoulli(rng, trace_product_real(cache.obs_d2, state.rho))) {
                            p2.time_ns = arrival + cache.dwell_ns;
                            p2.channel = Channel::Detector2;
                            if (auto rec = detect(p2, DetectorId::D2, config.detectors.d2, rng))
                                out.d2.push_back(*rec);
                        }
                    }
                }
            }
        }

        if (window_opened && cache.has_darks) {
            double span = cache.dwell_ns;
            if (auto rec = dark_count(DetectorId::D1, window_start, span, config.detectors.d1, rng))
                out.d1.push_back(*rec);
            if (auto rec = dark_count(DetectorId::D2, window_start, span, config.detectors.d2, rng))
                out.d2.push_back(*rec);
            if (auto rec =
                    dark_count(DetectorId::Daux, window_start, span, config.detectors.daux, rng))
                out.aux.push_back(*rec);
        }
    }

    auto by_time = [](const DetectionRecord& a, const DetectionRecord& b) {
        return a.time_ns < b.time_ns;
    };
    std::stable_sort(out.d1.begin(), out.d1.end(), by_time);
    std::stable_sort(out.d2.begin(), out.d2.end(), by_time);
    std::stable_sort(out.aux.begin(), out.aux.end(), by_time);
    return out;
}

// RNG stream key for one run: folds in every config field that changes the
// physics of a sweep point, so sweeps get independent streams per setting and
// the assignment survives reordering or subsetting of the angle list.
inline std::uint64_t stream_key(const RunConfig& config) {
    std::uint64_t k = splitmix64(std::bit_cast<std::uint64_t>(config.theta1.angle_deg));
    k = splitmix64(k ^ std::bit_cast<std::uint64_t>(config.theta2.angle_deg));
    k = splitmix64(k ^ static_cast<std::uint64_t>(config.n_cycles));
    k = splitmix64(k ^ (config.mode == RunMode::Periodic ? 0x70ULL : 0x48ULL));
    k = splitmix64(k ^ config.divider_k);
    return k;
}

inline constexpr std::uint64_t kBlockPulses = 1ull << 16;

struct BlockCounts {
    ChannelCounts counts;
    std::uint64_t attempted_storages = 0;
};

inline BlockCounts simulate_block_counts(const RunConfig& config, const TrialCache& cache,
                                         std::uint64_t block_index) {
    std::uint64_t first = block_index * kBlockPulses;
    std::uint64_t n = std::min(kBlockPulses, config.num_pulses - first);
    Rng rng = make_rng(derive_stream_seed(config.seed, stream_key(config), block_index));
    BlockRecords rec = simulate_block_records(config, cache, first, n, rng);
    BlockCounts out;
    out.attempted_storages = rec.attempted_storages;
    out.counts.singles_1 = rec.d1.size();
    out.counts.singles_2 = rec.d2.size();
    out.counts.singles_aux = rec.aux.size();
    CoincidenceTally tally = coincidence_count(rec.d1, rec.d2, rec.aux,
                                               expected_offsets(config),
                                               config.coincidence_window_ns);
    out.counts.coincidences_12 = tally.d1_d2;
    out.counts.coincidences_1aux = tally.d1_aux;
    return out;
}

inline void require_runnable(const RunConfig& config) {
    auto bad = validate_config(config);
    if (!bad.empty()) {
        std::ostringstream os;
        os << "invalid run config:";
        for (const auto& m : bad) os << " " << m << ";";
        throw std::invalid_argument(os.str());
    }
    ScheduleCheck sched =
        validate_pc_schedule(config.n_cycles, config.cqm, implied_trigger_period_ns(config));
    if (!sched.ok)
        throw std::invalid_argument("infeasible storage schedule: " + sched.violation);
}

// Fixed-size blocks on independent derived streams make the result a sum of
// per-block counts: identical for any thread count or block visit order.
inline RunRecord run(const RunConfig& config, unsigned threads = 1) {
    require_runnable(config);
    TrialCache cache = build_trial_cache(config);
    std::uint64_t n_blocks = (config.num_pulses + kBlockPulses - 1) / kBlockPulses;
    std::vector<BlockCounts> blocks(n_blocks);

    if (threads <= 1 || n_blocks <= 1) {
        for (std::uint64_t b = 0; b < n_blocks; ++b)
            blocks[b] = simulate_block_counts(config, cache, b);
    } else {
        std::atomic<std::uint64_t> next{0};
        unsigned n_workers = std::min<std::uint64_t>(threads, n_blocks);
        std::vector<std::thread> workers;
        workers.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                for (std::uint64_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1))
                    blocks[b] = simulate_block_counts(config, cache, b);
            });
        for (auto& t : workers) t.join();
    }

    RunRecord out;
    out.config = config;
    ChannelCounts total;
    for (const auto& b : blocks) {
        total += b.counts;
        out.attempted_storages += b.attempted_storages;
    }
    out.counts[{config.theta1.angle_deg, config.theta2.angle_deg}] = total;
    out.elapsed_ns = static_cast<double>(config.num_pulses) * config.source.pulse_period_ns;
    return out;
}

inline RunRecord run_heralded(const RunConfig& config, unsigned threads = 1) {
    if (config.mode != RunMode::Heralded)
        throw std::invalid_argument("run_heralded: config.mode is not heralded");
    return run(config, threads);
}

inline RunRecord run_periodic(const RunConfig& config, unsigned threads = 1) {
    if (config.mode != RunMode::Periodic)
        throw std::invalid_argument("run_periodic: config.mode is not periodic");
    return run(config, threads);
}

struct SweepResult {
    CoincidenceCurve before;
    CoincidenceCurve after;
    std::vector<RunRecord> records;
};

// One polarizer-1 sweep at fixed theta2: a full run per grid angle, plus the
// two fringe curves read off the coincidence counters.
inline SweepResult sweep_theta1(const RunConfig& config, const std::vector<double>& theta1_deg,
                                unsigned threads = 1) {
    SweepResult out;
    out.before.theta2_deg = config.theta2.angle_deg;
    out.before.channel = CoincidenceChannel::BeforeStorage;
    out.after.theta2_deg = config.theta2.angle_deg;
    out.after.channel = CoincidenceChannel::AfterStorage;
    for (double t1 : theta1_deg) {
        RunConfig point = config;
        point.theta1 = PolarizerSetting(t1);
        RunRecord rec = run(point, threads);
        const ChannelCounts& c = rec.primary_counts();
        out.before.points.push_back({point.theta1.angle_deg, c.coincidences_1aux, point.num_pulses});
        out.after.points.push_back({point.theta1.angle_deg, c.coincidences_12, point.num_pulses});
        out.records.push_back(std::move(rec));
    }
    return out;
}

}  // namespace cqmsim

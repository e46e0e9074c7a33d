#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include <cqmsim/engine.hpp>
#include <cqmsim/oracle.hpp>

using namespace cqmsim;

namespace {

RunConfig heralded_config(int n_cycles = 4) {
    RunConfig c;
    c.mode = RunMode::Heralded;
    c.n_cycles = n_cycles;
    c.num_pulses = 1'000'000;
    c.source.p_pair_per_pulse = 0.05;  // implied trigger period 200 ns
    c.seed = 7001;
    return c;
}

RunConfig periodic_config(int n_cycles = 4) {
    RunConfig c;
    c.mode = RunMode::Periodic;
    c.n_cycles = n_cycles;
    c.num_pulses = 6'400'000;
    c.source.p_pair_per_pulse = 0.2;
    c.divider_k = 64;
    c.seed = 7002;
    return c;
}

// 4-sigma binomial acceptance around an expected per-pulse probability
void check_count(std::uint64_t got, std::uint64_t pulses, double p, const std::string& label) {
    INFO(label << ": got " << got << ", expected " << p * static_cast<double>(pulses));
    double n = static_cast<double>(pulses);
    double sigma = std::sqrt(std::max(n * p * (1.0 - p), 1.0));
    REQUIRE(std::abs(static_cast<double>(got) - n * p) <= 4.0 * sigma);
}

DetectionRecord at(double t) { return {DetectorId::D1, t, std::nullopt}; }

}  // namespace

TEST_CASE("expected channel offsets from the configured delays") {
    RunConfig c = heralded_config(4);  // dwell 108, compensation 320
    ChannelOffsets off = expected_offsets(c);
    REQUIRE(off.d2_minus_d1_ns == Catch::Approx(428.0));
    REQUIRE(off.aux_minus_d1_ns == Catch::Approx(320.0));

    RunConfig p = periodic_config(4);  // passive spool 165 on photon 1
    off = expected_offsets(p);
    REQUIRE(off.d2_minus_d1_ns == Catch::Approx(-57.0));
    REQUIRE(off.aux_minus_d1_ns == Catch::Approx(-165.0));
}

TEST_CASE("greedy coincidence matching") {
    std::vector<DetectionRecord> a{at(0.0), at(10.0), at(20.0), at(30.0)};
    std::vector<DetectionRecord> b{at(100.4), at(119.3), at(160.0), at(130.2)};
    std::sort(b.begin(), b.end(),
              [](const DetectionRecord& x, const DetectionRecord& y) { return x.time_ns < y.time_ns; });

    auto m = match_coincidences(a, b, 100.0, 1.0);
    REQUIRE(m.size() == 3);  // a = 10 and b = 160 find no partner inside 1 ns
    REQUIRE(m[0] == std::pair<std::size_t, std::size_t>{0, 0});
    REQUIRE(m[1] == std::pair<std::size_t, std::size_t>{2, 1});
    REQUIRE(m[2] == std::pair<std::size_t, std::size_t>{3, 2});

    SECTION("window edge is inclusive") {
        std::vector<DetectionRecord> one{at(0.0)}, other{at(101.0)};
        REQUIRE(match_coincidences(one, other, 100.0, 1.0).size() == 1);
        other[0].time_ns = 101.0000001;
        REQUIRE(match_coincidences(one, other, 100.0, 1.0).empty());
    }

    SECTION("each record pairs at most once") {
        std::vector<DetectionRecord> many{at(0.0), at(0.1), at(0.2)};
        std::vector<DetectionRecord> lone{at(100.0)};
        REQUIRE(match_coincidences(many, lone, 100.0, 2.0).size() == 1);
        REQUIRE(match_coincidences(lone, many, -100.0, 2.0).size() == 1);
    }

    SECTION("empty inputs") {
        std::vector<DetectionRecord> none;
        REQUIRE(match_coincidences(none, a, 0.0, 1.0).empty());
        REQUIRE(match_coincidences(a, none, 0.0, 1.0).empty());
    }
}

TEST_CASE("heralded monte carlo matches the closed-form chain") {
    struct Setting {
        std::string label;
        RunConfig config;
    };
    std::vector<Setting> settings;

    auto add = [&](std::string label, int n, double t1, double t2, auto mutate) {
        RunConfig c = heralded_config(n);
        c.theta1 = PolarizerSetting(t1);
        c.theta2 = PolarizerSetting(t2);
        mutate(c);
        settings.push_back({std::move(label), c});
    };
    auto nop = [](RunConfig&) {};

    add("even dwell, parallel", 4, 0.0, 0.0, nop);
    add("even dwell, crossed", 4, 45.0, 0.0, nop);
    add("odd dwell", 3, 30.0, 60.0, nop);
    add("six cycles, diagonal pair", 6, 22.5, 67.5, nop);
    add("no injection flip", 2, 10.0, 40.0,
        [](RunConfig& c) { c.cqm.injection_flip = false; });
    add("isotropic noise", 4, 0.0, 45.0,
        [](RunConfig& c) { c.source.depolarization = 0.3; });
    add("per-cycle phase error", 5, 45.0, 45.0,
        [](RunConfig& c) { c.cqm.delta_per_cycle_rad = 0.6; });
    add("messy hardware", 4, 15.0, 75.0, [](RunConfig& c) {
        c.source.psi_phase_rad = 0.4;
        c.delays.herald_compensation.birefringent_phase_rad = 0.9;
        c.delays.herald_compensation.transmission = 0.9;
        c.detectors.d1.efficiency = 0.85;
        c.detectors.d2.efficiency = 0.9;
        c.detectors.daux.efficiency = 0.8;
        c.cqm.flip_fidelity = 0.96;
    });

    for (const auto& [label, c] : settings) {
        INFO(label);
        RunRecord rec = run(c);
        const ChannelCounts& counts = rec.primary_counts();

        double after = expected_coincidence_per_pulse(c, c.theta1, c.theta2,
                                                      CoincidenceChannel::AfterStorage);
        double before = expected_coincidence_per_pulse(c, c.theta1, c.theta2,
                                                       CoincidenceChannel::BeforeStorage);
        check_count(counts.coincidences_12, c.num_pulses, after, label + " / after");
        check_count(counts.coincidences_1aux, c.num_pulses, before, label + " / before");

        // polarizer-1 singles only see the maximally mixed marginal
        double p1 = c.source.p_pair_per_pulse * c.source.sa_success_prob * 0.5 *
                    c.detectors.d1.efficiency;
        check_count(counts.singles_1, c.num_pulses, p1, label + " / singles 1");
        double paux = c.source.p_pair_per_pulse * c.source.sa_success_prob *
                      c.delays.herald_compensation.transmission * c.cqm.tap_reflectivity * 0.5 *
                      c.detectors.daux.efficiency;
        check_count(counts.singles_aux, c.num_pulses, paux, label + " / singles aux");

        // a released photon always files against its own herald
        REQUIRE(counts.coincidences_12 == counts.singles_2);
        REQUIRE(rec.attempted_storages == counts.singles_1);
        REQUIRE(rec.elapsed_ns
                == Catch::Approx(static_cast<double>(c.num_pulses) * c.source.pulse_period_ns));
    }
}

TEST_CASE("statistical error shrinks with exposure") {
    RunConfig c = heralded_config(4);
    c.theta1 = PolarizerSetting(20.0);
    c.theta2 = PolarizerSetting(50.0);
    double p = expected_coincidence_per_pulse(c, c.theta1, c.theta2);
    for (std::uint64_t n : {10'000ull, 100'000ull, 1'000'000ull}) {
        c.num_pulses = n;
        RunRecord rec = run(c);
        check_count(rec.primary_counts().coincidences_12, n, p,
                    "after @ " + std::to_string(n));
    }
}

TEST_CASE("a mismatched compensation fiber closes the storage channel") {
    RunConfig c = heralded_config(4);
    c.num_pulses = 200'000;
    c.delays.herald_compensation.delay_ns = 400.0;  // trigger fires 80 ns early
    RunRecord rec = run(c);
    REQUIRE(rec.primary_counts().singles_2 == 0);
    REQUIRE(rec.primary_counts().coincidences_12 == 0);
    double before = c.source.p_pair_per_pulse *
                    expected_coincidence(c, c.theta1, c.theta2, CoincidenceChannel::BeforeStorage);
    check_count(rec.primary_counts().coincidences_1aux, c.num_pulses, before, "before");
}

TEST_CASE("periodic monte carlo matches the divided-clock expectation") {
    RunConfig c = periodic_config(4);
    c.theta1 = PolarizerSetting(45.0);
    c.theta2 = PolarizerSetting(45.0);
    RunRecord rec = run(c, 4);
    const ChannelCounts& counts = rec.primary_counts();

    REQUIRE(rec.attempted_storages == c.num_pulses / c.divider_k);

    double after = expected_coincidence_per_pulse(c, c.theta1, c.theta2);
    REQUIRE(after > 0.0);  // even dwell: coincident at parallel settings
    check_count(counts.coincidences_12, c.num_pulses, after, "periodic after");

    // pure singlet at identical settings: the before channel is dark
    REQUIRE(counts.coincidences_1aux <= 1);

    SECTION("a finer divider opens proportionally more windows") {
        RunConfig c2 = c;
        c2.divider_k = 32;
        RunRecord rec2 = run(c2, 4);
        REQUIRE(rec2.attempted_storages == c2.num_pulses / 32);
        double after2 = expected_coincidence_per_pulse(c2, c2.theta1, c2.theta2);
        REQUIRE(after2 == Catch::Approx(2.0 * after).epsilon(1e-12));
        check_count(rec2.primary_counts().coincidences_12, c2.num_pulses, after2,
                    "periodic after, k = 32");
    }
}

TEST_CASE("detection times are locked to the pump clock and the delays") {
    RunConfig c = heralded_config(4);
    c.num_pulses = 50'000;
    TrialCache cache = build_trial_cache(c);
    Rng rng = make_rng(derive_stream_seed(c.seed, stream_key(c), 0));
    BlockRecords rec = simulate_block_records(c, cache, 0, c.num_pulses, rng);

    REQUIRE(!rec.d1.empty());
    REQUIRE(!rec.d2.empty());
    REQUIRE(!rec.aux.empty());
    auto on_grid = [&](double t, double shift) {
        double k = (t - shift) / c.source.pulse_period_ns;
        return std::abs(k - std::round(k)) < 1e-9;
    };
    for (const auto& r : rec.d1) REQUIRE(on_grid(r.time_ns, 0.0));
    for (const auto& r : rec.aux) REQUIRE(on_grid(r.time_ns, 320.0));
    for (const auto& r : rec.d2) REQUIRE(on_grid(r.time_ns, 428.0));  // 320 + 4 * 27

    // the pairing offsets recover exactly the released pairs
    auto pairs = match_coincidences(rec.d1, rec.d2, 428.0, c.coincidence_window_ns);
    REQUIRE(pairs.size() == rec.d2.size());
    for (auto [i, j] : pairs) {
        REQUIRE(rec.d1[i].pair_id.has_value());
        REQUIRE(rec.d1[i].pair_id == rec.d2[j].pair_id);
    }
}

TEST_CASE("runs are reproducible and thread-invariant") {
    RunConfig c = heralded_config(4);
    c.num_pulses = 300'000;  // spans several blocks plus a partial tail
    c.theta1 = PolarizerSetting(30.0);

    RunRecord a = run(c, 1);
    RunRecord b = run(c, 1);
    RunRecord c4 = run(c, 4);
    RunRecord c13 = run(c, 13);

    auto same = [](const ChannelCounts& x, const ChannelCounts& y) {
        return x.coincidences_12 == y.coincidences_12 &&
               x.coincidences_1aux == y.coincidences_1aux && x.singles_1 == y.singles_1 &&
               x.singles_2 == y.singles_2 && x.singles_aux == y.singles_aux;
    };
    REQUIRE(same(a.primary_counts(), b.primary_counts()));
    REQUIRE(same(a.primary_counts(), c4.primary_counts()));
    REQUIRE(same(a.primary_counts(), c13.primary_counts()));
    REQUIRE(a.attempted_storages == c13.attempted_storages);

    RunConfig other = c;
    other.seed = c.seed + 1;
    REQUIRE_FALSE(same(a.primary_counts(), run(other).primary_counts()));
}

TEST_CASE("sweep points draw stable independent streams") {
    RunConfig c = heralded_config(4);
    c.num_pulses = 131'073;  // two blocks and one extra pulse

    SweepResult full = sweep_theta1(c, {0.0, 30.0, 60.0});
    SweepResult sub = sweep_theta1(c, {60.0, 30.0});

    REQUIRE(full.after.points[1].theta1_deg == 30.0);
    REQUIRE(sub.after.points[1].theta1_deg == 30.0);
    REQUIRE(full.after.points[1].coincidences == sub.after.points[1].coincidences);
    REQUIRE(full.before.points[2].coincidences == sub.before.points[0].coincidences);

    RunConfig point = c;
    point.theta1 = PolarizerSetting(30.0);
    RunRecord direct = run(point);
    REQUIRE(direct.primary_counts().coincidences_12 == full.after.points[1].coincidences);
    REQUIRE(direct.primary_counts().coincidences_1aux == full.before.points[1].coincidences);

    REQUIRE(full.after.points[0].exposure_pulses == c.num_pulses);
    REQUIRE(full.before.channel == CoincidenceChannel::BeforeStorage);
    REQUIRE(full.after.channel == CoincidenceChannel::AfterStorage);
}

TEST_CASE("dark counts ride the storage windows") {
    RunConfig c = periodic_config(4);
    c.num_pulses = 640'000;
    c.source.p_pair_per_pulse = 0.0;  // darks only
    for (auto* d : {&c.detectors.d1, &c.detectors.d2, &c.detectors.daux})
        d->dark_count_prob_per_window = 0.5;

    RunRecord rec = run(c);
    std::uint64_t windows = c.num_pulses / c.divider_k;
    REQUIRE(rec.attempted_storages == windows);
    const ChannelCounts& counts = rec.primary_counts();
    check_count(counts.singles_1, windows, 0.5, "dark singles 1");
    check_count(counts.singles_2, windows, 0.5, "dark singles 2");
    check_count(counts.singles_aux, windows, 0.5, "dark singles aux");
}

TEST_CASE("unrunnable configurations are rejected up front") {
    SECTION("invalid fields") {
        RunConfig c = heralded_config();
        c.cqm.eta_cycle = 1.5;
        REQUIRE_THROWS_WITH(run(c), Catch::Matchers::ContainsSubstring("eta_cycle"));
        c = heralded_config();
        c.num_pulses = 0;
        REQUIRE_THROWS_AS(run(c), std::invalid_argument);
    }
    SECTION("infeasible storage schedule") {
        RunConfig c = heralded_config(10);
        c.source.p_pair_per_pulse = 0.2;  // 50 ns trigger period vs a 300 ns stay
        REQUIRE_THROWS_WITH(run(c), Catch::Matchers::ContainsSubstring("infeasible"));
    }
    SECTION("mode-checked wrappers") {
        RunConfig h = heralded_config();
        h.num_pulses = 1'000;
        REQUIRE_THROWS_AS(run_periodic(h), std::invalid_argument);
        REQUIRE_NOTHROW(run_heralded(h));
        RunConfig p = periodic_config();
        p.num_pulses = 1'000;
        REQUIRE_THROWS_AS(run_heralded(p), std::invalid_argument);
        REQUIRE_NOTHROW(run_periodic(p));
    }
}

TEST_CASE("records holding several settings refuse to pick one") {
    RunRecord rec;
    rec.counts[{0.0, 0.0}] = {};
    rec.counts[{45.0, 0.0}] = {};
    REQUIRE_THROWS_AS(rec.primary_counts(), std::logic_error);
    rec.counts.clear();
    REQUIRE_THROWS_AS(rec.primary_counts(), std::logic_error);
}

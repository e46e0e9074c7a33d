#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include <cqmsim/analysis.hpp>

using namespace cqmsim;

namespace {

std::vector<FringePoint> exact_fringe(double offset, double amplitude, double phase_deg,
                                      int n_points = 18) {
    std::vector<FringePoint> pts;
    for (int k = 0; k < n_points; ++k) {
        double t = 180.0 * k / n_points;
        double s = std::sin(deg2rad(t - phase_deg));
        pts.push_back({t, offset + amplitude * s * s});
    }
    return pts;
}

std::vector<FringePoint> poisson_fringe(double offset, double amplitude, double phase_deg,
                                        std::uint64_t seed, int n_points = 18) {
    std::mt19937_64 rng(seed);
    auto pts = exact_fringe(offset, amplitude, phase_deg, n_points);
    for (auto& p : pts) p.value = static_cast<double>(std::poisson_distribution<long long>(p.value)(rng));
    return pts;
}

// ideal singlet coincidence table at the canonical analyzer axes
std::array<std::array<double, 4>, 4> singlet_counts(double n_per_setting,
                                                    double depolarization = 0.0,
                                                    bool flipped = false) {
    ChshSettings s;
    std::array<std::array<double, 4>, 4> counts{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double d = deg2rad(s.a_deg[i] - s.b_deg[j]);
            double pure = flipped ? 0.5 * std::cos(d) * std::cos(d) : 0.5 * std::sin(d) * std::sin(d);
            counts[i][j] = n_per_setting * ((1.0 - depolarization) * pure + depolarization / 4.0);
        }
    return counts;
}

}  // namespace

TEST_CASE("fringe fit recovers exact curves") {
    FringeFit fit = fit_fringe(exact_fringe(10.0, 80.0, 35.0));
    REQUIRE(fit.offset == Catch::Approx(10.0).margin(1e-9));
    REQUIRE(fit.amplitude == Catch::Approx(80.0).margin(1e-9));
    REQUIRE(fit.phase_deg == Catch::Approx(35.0).margin(1e-9));
    REQUIRE(fit.weighted_rss <= 1e-12);
    REQUIRE_FALSE(fit.degenerate_phase);
    REQUIRE(fit.n_points == 18);

    VisibilityResult v = visibility(fit);
    REQUIRE(v.v == Catch::Approx(0.8).margin(1e-9));

    SECTION("phase wraps into [0, 180)") {
        FringeFit wrapped = fit_fringe(exact_fringe(5.0, 50.0, 200.0));
        REQUIRE(wrapped.phase_deg == Catch::Approx(20.0).margin(1e-9));
    }
    SECTION("zero offset yields unit visibility") {
        FringeFit pure = fit_fringe(exact_fringe(0.0, 120.0, 90.0));
        REQUIRE(visibility(pure).v == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(pure.phase_deg == Catch::Approx(90.0).margin(1e-9));
    }
}

TEST_CASE("fringe fit under poisson noise stays inside its own error bars") {
    const double offset = 50.0, amplitude = 400.0, phase = 75.0;
    FringeFit fit = fit_fringe(poisson_fringe(offset, amplitude, phase, 1234));
    REQUIRE(std::abs(fit.offset - offset) <= 4.0 * std::sqrt(fit.covariance(0, 0)));
    REQUIRE(std::abs(fit.amplitude - amplitude) <= 4.0 * std::sqrt(fit.covariance(1, 1)));
    REQUIRE(std::abs(fit.phase_deg - phase) <= 4.0 * std::sqrt(fit.covariance(2, 2)));
    REQUIRE_FALSE(fit.degenerate_phase);

    SECTION("reported phase sigma has honest coverage") {
        int hits = 0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            FringeFit f = fit_fringe(poisson_fringe(offset, amplitude, phase, 9000 + r));
            double sigma = std::sqrt(f.covariance(2, 2));
            double miss = std::abs(normalize_axis_deg(f.phase_deg - phase));
            miss = std::min(miss, 180.0 - miss);
            if (miss <= sigma) ++hits;
        }
        // one-sigma coverage of a well-calibrated estimator is ~68%
        REQUIRE(hits >= 110);
        REQUIRE(hits <= 164);
    }
}

TEST_CASE("fringe fit rejects unusable inputs") {
    REQUIRE_THROWS_AS(fit_fringe(std::vector<FringePoint>{{0, 1}, {45, 2}, {90, 1}}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(fit_fringe(std::vector<FringePoint>{{0, 1}, {0, 2}, {90, 1}, {90, 3}}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(fit_fringe(std::vector<FringePoint>{{0, 1}, {45, -2}, {90, 1}, {135, 3}}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(fit_fringe(std::vector<FringePoint>{{0, 0}, {45, 0}, {90, 0}, {135, 0}}),
                      std::invalid_argument);

    SECTION("angles 180 degrees apart are the same analyzer axis") {
        std::vector<FringePoint> pts{{0, 1}, {180, 2}, {45, 1}, {225, 3}};
        REQUIRE_THROWS_AS(fit_fringe(pts), std::invalid_argument);
    }
}

TEST_CASE("flat curves have no resolvable phase") {
    std::vector<FringePoint> flat;
    for (int k = 0; k < 12; ++k) flat.push_back({15.0 * k, 200.0});
    FringeFit fit = fit_fringe(flat);
    REQUIRE(fit.degenerate_phase);
    REQUIRE(fit.amplitude <= 1e-6);
    REQUIRE(visibility(fit).v == Catch::Approx(0.0).margin(1e-9));
    REQUIRE_THROWS_AS(fringe_shift(fit, fit), std::domain_error);
}

TEST_CASE("curve overloads guard their exposure bookkeeping") {
    CoincidenceCurve curve;
    curve.points = {{0.0, 100, 1000}, {45.0, 300, 1000}, {90.0, 500, 1000}, {135.0, 300, 1000}};
    REQUIRE_NOTHROW(fit_fringe(curve));
    curve.points[2].exposure_pulses = 2000;
    REQUIRE_THROWS_AS(fit_fringe(curve), std::invalid_argument);
    curve.points.clear();
    REQUIRE_THROWS_AS(fit_fringe(curve), std::invalid_argument);
}

TEST_CASE("visibility needs a positive fringe mean") {
    FringeFit bogus;
    bogus.offset = -5.0;
    bogus.amplitude = 2.0;
    REQUIRE_THROWS_AS(visibility(bogus), std::domain_error);
}

TEST_CASE("loss fit recovers an exact exponential") {
    std::vector<RatePoint> pts;
    for (int n : {2, 4, 6, 8, 10})
        pts.push_back({static_cast<double>(n), 5000.0 * std::pow(0.78, n), 0.0});
    LossFit fit = fit_loss(pts);
    REQUIRE(fit.loss_per_cycle == Catch::Approx(0.22).margin(1e-12));
    REQUIRE(fit.log_intercept == Catch::Approx(std::log(5000.0)).margin(1e-9));

    SECTION("weights leave an exact fit unchanged") {
        for (auto& p : pts) p.sigma_rate = std::sqrt(p.rate);
        REQUIRE(fit_loss(pts).loss_per_cycle == Catch::Approx(0.22).margin(1e-12));
    }

    SECTION("noisy rates stay inside the reported sigma") {
        std::mt19937_64 rng(777);
        std::normal_distribution<double> jitter(0.0, 0.02);
        for (auto& p : pts) {
            p.rate *= std::exp(jitter(rng));
            p.sigma_rate = 0.02 * p.rate;
        }
        LossFit noisy = fit_loss(pts);
        REQUIRE(std::abs(noisy.loss_per_cycle - 0.22) <= 4.0 * noisy.sigma);
    }
}

TEST_CASE("loss fit rejects unusable inputs") {
    REQUIRE_THROWS_AS(fit_loss({{2, 10, 0}, {4, 5, 0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_loss({{2, 10, 0}, {2, 11, 0}, {2, 9, 0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_loss({{2, 10, 0}, {4, 0, 0}, {6, 1, 0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_loss({{2, 10, 0}, {4, -3, 0}, {6, 1, 0}}), std::invalid_argument);
}

TEST_CASE("bell statistic from a pair of visibilities") {
    auto bell = [](double v1, double v2) {
        return chsh_from_visibilities({v1, 0.0}, {v2, 0.0});
    };
    REQUIRE(bell(0.95, 0.92).s == Catch::Approx(2.644579).margin(1e-5));
    REQUIRE(bell(0.97, 0.91).s == Catch::Approx(2.658721).margin(1e-5));
    REQUIRE(bell(0.98, 0.93).s == Catch::Approx(2.701148).margin(1e-5));
    REQUIRE(bell(0.93, 0.85).s == Catch::Approx(2.517300).margin(1e-5));
    REQUIRE(bell(1.0, 1.0).s == Catch::Approx(2.0 * std::numbers::sqrt2).margin(1e-12));

    REQUIRE(bell(0.95, 0.92).violated);
    REQUIRE_FALSE(bell(0.6, 0.6).violated);  // sqrt(2) * 1.2 < 2

    BellResult with_errors = chsh_from_visibilities({0.95, 0.01}, {0.92, 0.02});
    REQUIRE(with_errors.sigma_s
            == Catch::Approx(std::numbers::sqrt2 * std::hypot(0.01, 0.02)).margin(1e-12));
}

TEST_CASE("direct 16-setting bell estimator") {
    SECTION("ideal singlet saturates the quantum bound") {
        BellResult b = chsh_direct(singlet_counts(1e6));
        REQUIRE(b.s == Catch::Approx(2.0 * std::numbers::sqrt2).margin(1e-9));
        REQUIRE(b.violated);
    }
    SECTION("the flipped fringe gives the same magnitude") {
        BellResult b = chsh_direct(singlet_counts(1e6, 0.0, true));
        REQUIRE(b.s == Catch::Approx(2.0 * std::numbers::sqrt2).margin(1e-9));
    }
    SECTION("isotropic noise scales S linearly") {
        BellResult b = chsh_direct(singlet_counts(1e6, 0.2));
        REQUIRE(b.s == Catch::Approx(0.8 * 2.0 * std::numbers::sqrt2).margin(1e-9));
        BellResult classical = chsh_direct(singlet_counts(1e6, 0.5));
        REQUIRE(classical.s == Catch::Approx(std::numbers::sqrt2).margin(1e-9));
        REQUIRE_FALSE(classical.violated);
    }
    SECTION("sigma follows the per-correlation binomial variance") {
        auto counts = singlet_counts(1e4);
        BellResult b = chsh_direct(counts);
        double var = 0.0;
        for (int q : {0, 2})
            for (int r : {0, 2}) {
                double tot = counts[q][r] + counts[q][r + 1] + counts[q + 1][r] +
                             counts[q + 1][r + 1];
                double e = (counts[q][r] - counts[q][r + 1] - counts[q + 1][r] +
                            counts[q + 1][r + 1]) /
                           tot;
                var += (1.0 - e * e) / tot;
            }
        REQUIRE(b.sigma_s == Catch::Approx(std::sqrt(var)).margin(1e-12));
    }
    SECTION("an empty quadrant is an error") {
        auto counts = singlet_counts(1000.0);
        counts[0][0] = counts[0][1] = counts[1][0] = counts[1][1] = 0.0;
        REQUIRE_THROWS_AS(chsh_direct(counts), std::invalid_argument);
    }
}

TEST_CASE("fringe shift between calibration and readout") {
    FringeFit before = fit_fringe(exact_fringe(2.0, 300.0, 10.0));
    FringeFit after = fit_fringe(exact_fringe(1.0, 150.0, 100.0));
    FringeShift shift = fringe_shift(before, after);
    REQUIRE(shift.shift_deg == Catch::Approx(90.0).margin(1e-6));

    SECTION("the difference wraps on the axis circle") {
        FringeFit late = fit_fringe(exact_fringe(2.0, 300.0, 170.0));
        FringeFit early = fit_fringe(exact_fringe(1.0, 150.0, 80.0));
        REQUIRE(fringe_shift(late, early).shift_deg == Catch::Approx(90.0).margin(1e-6));
    }
    SECTION("uncertainties add in quadrature") {
        FringeFit a = fit_fringe(poisson_fringe(20.0, 500.0, 10.0, 42));
        FringeFit b = fit_fringe(poisson_fringe(20.0, 500.0, 100.0, 43));
        FringeShift s = fringe_shift(a, b);
        double want = std::hypot(std::sqrt(a.covariance(2, 2)), std::sqrt(b.covariance(2, 2)));
        REQUIRE(s.sigma_deg == Catch::Approx(want).margin(1e-12));
        REQUIRE(std::abs(s.shift_deg - 90.0) <= 5.0 * s.sigma_deg);
    }
}

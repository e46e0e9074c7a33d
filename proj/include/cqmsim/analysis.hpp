#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "engine.hpp"

// Estimators applied to measured curves: sinusoidal fringe fits (weighted
// least squares on the linearized model), visibilities, exponential loss-per-
// cycle fits, and CHSH statistics from either fitted visibilities or raw
// 16-setting coincidence counts.

namespace cqmsim {

struct FringePoint {
    double theta1_deg = 0.0;
    double value = 0.0;  // counts (or any Poisson-ish measure)
};

struct FringeFit {
    double offset = 0.0;     // A in A + B sin^2(theta - theta0)
    double amplitude = 0.0;  // B >= 0
    double phase_deg = 0.0;  // theta0 in [0, 180)
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // order (A, B, theta0_deg)
    double weighted_rss = 0.0;
    bool degenerate_phase = false;
    std::size_t n_points = 0;
};

// Weighted least squares for y = A + B sin^2(theta - theta0), linearized as
// y = a0 + a1 cos 2theta + a2 sin 2theta.  Weights are 1/max(y, 1), the
// Poisson variance estimate.  Needs >= 4 distinct angles and a nonzero curve.
inline FringeFit fit_fringe(const std::vector<FringePoint>& points) {
    if (points.size() < 4)
        throw std::invalid_argument("fit_fringe: need at least 4 points");
    std::set<long long> distinct;
    bool any_nonzero = false;
    for (const auto& p : points) {
        distinct.insert(std::llround(normalize_axis_deg(p.theta1_deg) * 1e6));
        if (p.value != 0.0) any_nonzero = true;
        if (p.value < 0.0) throw std::invalid_argument("fit_fringe: negative count");
    }
    if (distinct.size() < 4)
        throw std::invalid_argument("fit_fringe: need at least 4 distinct angles");
    if (!any_nonzero)
        throw std::invalid_argument("fit_fringe: all counts are zero");

    Eigen::Matrix3d xtwx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xtwy = Eigen::Vector3d::Zero();
    for (const auto& p : points) {
        double t2 = 2.0 * deg2rad(p.theta1_deg);
        Eigen::Vector3d row(1.0, std::cos(t2), std::sin(t2));
        double w = 1.0 / std::max(p.value, 1.0);
        xtwx += w * row * row.transpose();
        xtwy += w * row * p.value;
    }
    Eigen::LDLT<Eigen::Matrix3d> solver(xtwx);
    if (solver.info() != Eigen::Success || !xtwx.fullPivLu().isInvertible())
        throw std::invalid_argument("fit_fringe: degenerate angle set");
    Eigen::Vector3d a = solver.solve(xtwy);
    Eigen::Matrix3d cov_a = xtwx.inverse();

    double rss = 0.0;
    for (const auto& p : points) {
        double t2 = 2.0 * deg2rad(p.theta1_deg);
        double fitted = a(0) + a(1) * std::cos(t2) + a(2) * std::sin(t2);
        double w = 1.0 / std::max(p.value, 1.0);
        rss += w * (p.value - fitted) * (p.value - fitted);
    }

    double r = std::hypot(a(1), a(2));
    FringeFit fit;
    fit.n_points = points.size();
    fit.weighted_rss = rss;
    fit.amplitude = 2.0 * r;
    fit.offset = a(0) - r;
    fit.phase_deg = r > 0.0 ? normalize_axis_deg(rad2deg(0.5 * std::atan2(-a(2), -a(1)))) : 0.0;

    // sigma of r by the same first-order propagation used for the Jacobian
    double var_r = r > 0.0 ? (a(1) * a(1) * cov_a(1, 1) + a(2) * a(2) * cov_a(2, 2) +
                              2.0 * a(1) * a(2) * cov_a(1, 2)) /
                                 (r * r)
                           : std::max(cov_a(1, 1), cov_a(2, 2));
    fit.degenerate_phase =
        r <= 1e-9 * std::max(std::abs(a(0)), 1.0) || r * r < 4.0 * var_r;

    // delta method to (A, B, theta0_deg)
    Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
    jac(0, 0) = 1.0;
    if (r > 0.0) {
        jac(0, 1) = -a(1) / r;
        jac(0, 2) = -a(2) / r;
        jac(1, 1) = 2.0 * a(1) / r;
        jac(1, 2) = 2.0 * a(2) / r;
        double r2 = r * r;
        jac(2, 1) = rad2deg(-a(2) / (2.0 * r2));
        jac(2, 2) = rad2deg(a(1) / (2.0 * r2));
    }
    fit.covariance = jac * cov_a * jac.transpose();
    return fit;
}

// Curves from the engine carry equal exposures by construction; anything else
// would make raw counts incomparable across points.
inline FringeFit fit_fringe(const CoincidenceCurve& curve) {
    std::vector<FringePoint> pts;
    pts.reserve(curve.points.size());
    for (const auto& p : curve.points) {
        if (!curve.points.empty() && p.exposure_pulses != curve.points.front().exposure_pulses)
            throw std::invalid_argument(
                "fit_fringe: mixed exposures in one curve; normalize before fitting");
        pts.push_back({p.theta1_deg, static_cast<double>(p.coincidences)});
    }
    return fit_fringe(pts);
}

struct VisibilityResult {
    double v = 0.0;
    double sigma = 0.0;
};

// V = B / (B + 2A) = (max - min) / (max + min); noise can push it past 1,
// which is left alone rather than clamped.
inline VisibilityResult visibility(const FringeFit& fit) {
    double denom = fit.amplitude + 2.0 * fit.offset;
    if (denom <= 0.0)
        throw std::domain_error("visibility: fringe has no positive mean");
    double v = fit.amplitude / denom;
    double dv_da = -2.0 * fit.amplitude / (denom * denom);
    double dv_db = 2.0 * fit.offset / (denom * denom);
    double var = dv_da * dv_da * fit.covariance(0, 0) + dv_db * dv_db * fit.covariance(1, 1) +
                 2.0 * dv_da * dv_db * fit.covariance(0, 1);
    return {v, std::sqrt(std::max(var, 0.0))};
}

struct RatePoint {
    double n_cycles = 0.0;
    double rate = 0.0;        // released-coincidence rate at this dwell
    double sigma_rate = 0.0;  // optional; 0 means unweighted
};

struct LossFit {
    double loss_per_cycle = 0.0;  // 1 - e^slope of ln(rate) vs n
    double sigma = 0.0;
    double log_intercept = 0.0;
};

// ln(rate) = b0 + b1 n, weighted by (rate/sigma)^2 when sigmas are given.
inline LossFit fit_loss(const std::vector<RatePoint>& points) {
    std::set<long long> distinct;
    for (const auto& p : points) {
        if (p.rate <= 0.0)
            throw std::invalid_argument("fit_loss: rates must be positive");
        distinct.insert(std::llround(p.n_cycles * 1e6));
    }
    if (distinct.size() < 3)
        throw std::invalid_argument("fit_loss: need at least 3 distinct cycle counts");

    Eigen::Matrix2d xtwx = Eigen::Matrix2d::Zero();
    Eigen::Vector2d xtwy = Eigen::Vector2d::Zero();
    for (const auto& p : points) {
        double w = p.sigma_rate > 0.0 ? (p.rate / p.sigma_rate) * (p.rate / p.sigma_rate) : 1.0;
        Eigen::Vector2d row(1.0, p.n_cycles);
        xtwx += w * row * row.transpose();
        xtwy += w * row * std::log(p.rate);
    }
    Eigen::Vector2d b = xtwx.ldlt().solve(xtwy);
    Eigen::Matrix2d cov = xtwx.inverse();
    double slope = b(1);
    return {1.0 - std::exp(slope), std::exp(slope) * std::sqrt(std::max(cov(1, 1), 0.0)), b(0)};
}

struct BellResult {
    double s = 0.0;
    double sigma_s = 0.0;
    bool violated = false;  // strictly above the local-realism bound of 2
};

// S = sqrt(2) (V_hv + V_diag): the CHSH value a state with these two fringe
// visibilities produces at the canonical settings.
inline BellResult chsh_from_visibilities(const VisibilityResult& v_hv,
                                         const VisibilityResult& v_diag) {
    double s = std::numbers::sqrt2 * (v_hv.v + v_diag.v);
    double sigma = std::numbers::sqrt2 * std::hypot(v_hv.sigma, v_diag.sigma);
    return {s, sigma, s > 2.0};
}

// Canonical CHSH analyzer axes: photon 1 rows {a, a_perp, a', a'_perp},
// photon 2 columns {b, b_perp, b', b'_perp}.
struct ChshSettings {
    std::array<double, 4> a_deg{0.0, 90.0, 45.0, 135.0};
    std::array<double, 4> b_deg{22.5, 112.5, 67.5, 157.5};
};

// Direct estimator from the 16 coincidence totals: each correlation
// E = (N00 - N01 - N10 + N11) / sum over one 2x2 quadrant, and
// S = E(a,b) - E(a,b') + E(a',b) + E(a',b').  Reported as |S|.
inline BellResult chsh_direct(const std::array<std::array<double, 4>, 4>& counts) {
    auto corr = [&](int ai, int bi, double& var) {
        double n00 = counts[ai][bi], n01 = counts[ai][bi + 1];
        double n10 = counts[ai + 1][bi], n11 = counts[ai + 1][bi + 1];
        double total = n00 + n01 + n10 + n11;
        if (total <= 0.0)
            throw std::invalid_argument("chsh_direct: a setting quadrant has no counts");
        double e = (n00 - n01 - n10 + n11) / total;
        var = (1.0 - e * e) / total;
        return e;
    };
    double v1, v2, v3, v4;
    double e_ab = corr(0, 0, v1);
    double e_abp = corr(0, 2, v2);
    double e_apb = corr(2, 0, v3);
    double e_apbp = corr(2, 2, v4);
    double s = e_ab - e_abp + e_apb + e_apbp;
    double sigma = std::sqrt(v1 + v2 + v3 + v4);
    return {std::abs(s), sigma, std::abs(s) > 2.0};
}

struct FringeShift {
    double shift_deg = 0.0;  // (after - before) mod 180, in [0, 180)
    double sigma_deg = 0.0;
};

inline FringeShift fringe_shift(const FringeFit& before, const FringeFit& after) {
    if (before.degenerate_phase || after.degenerate_phase)
        throw std::domain_error("fringe_shift: a curve has no resolvable phase");
    double d = normalize_axis_deg(after.phase_deg - before.phase_deg);
    return {d, std::hypot(std::sqrt(std::max(before.covariance(2, 2), 0.0)),
                          std::sqrt(std::max(after.covariance(2, 2), 0.0)))};
}

}  // namespace cqmsim

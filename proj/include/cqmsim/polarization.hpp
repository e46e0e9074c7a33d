#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

// Jones calculus for a polarization-entangled photon pair.  Single-photon
// operators act on the (H, V) basis; two-photon states are 4x4 density
// matrices over (HH, HV, VH, VV).  Angles cross module boundaries in degrees
// (H = 0, V = 90); radians stay internal to the trig.

namespace cqmsim {

using complexd = std::complex<double>;
using JonesOp = Eigen::Matrix2cd;

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Normalize an angle to [0, 180): a polarizer axis is a line, not a direction.
inline double normalize_axis_deg(double deg) {
    double a = std::fmod(deg, 180.0);
    if (a < 0.0) a += 180.0;
    return a;
}

struct PolarizerSetting {
    double angle_deg = 0.0;

    PolarizerSetting() = default;
    explicit PolarizerSetting(double deg) : angle_deg(normalize_axis_deg(deg)) {}
    double radians() const { return deg2rad(angle_deg); }
    friend bool operator==(const PolarizerSetting&, const PolarizerSetting&) = default;
};

struct TwoQubitState {
    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
};

// |psi-> with a residual relative phase:  (|HV> - e^{i phi} |VH>) / sqrt(2).
inline TwoQubitState psi_minus(double phase_rad = 0.0) {
    Eigen::Vector4cd ket = Eigen::Vector4cd::Zero();
    ket(1) = complexd(1.0 / std::numbers::sqrt2, 0.0);
    ket(2) = -std::exp(complexd(0.0, phase_rad)) / std::numbers::sqrt2;
    return TwoQubitState{ket * ket.adjoint()};
}

// Pauli-X bit flip, H <-> V.
inline JonesOp flip_op() {
    JonesOp x;
    x << 0, 1,
         1, 0;
    return x;
}

// Physical rotation of the polarization plane by `angle_rad`.
inline JonesOp rotation_op(double angle_rad) {
    double c = std::cos(angle_rad), s = std::sin(angle_rad);
    JonesOp r;
    r << c, -s,
         s,  c;
    return r;
}

// Birefringent phase between the H and V components: diag(e^{i delta}, 1).
inline JonesOp phase_op(double delta_rad) {
    JonesOp p;
    p << std::exp(complexd(0.0, delta_rad)), 0,
         0, 1;
    return p;
}

// Projector onto the axis cos(t)|H> + sin(t)|V>.
inline JonesOp polarizer_projector(const PolarizerSetting& setting) {
    double t = setting.radians();
    double c = std::cos(t), s = std::sin(t);
    JonesOp p;
    p << c * c, c * s,
         c * s, s * s;
    return p;
}

// Lift a single-photon operator to the pair space: op (x) I or I (x) op.
inline Eigen::Matrix4cd expand_on_photon(int photon, const JonesOp& op) {
    if (photon != 1 && photon != 2)
        throw std::invalid_argument("photon index must be 1 or 2");
    const JonesOp id = JonesOp::Identity();
    return photon == 1 ? Eigen::kroneckerProduct(op, id).eval()
                       : Eigen::kroneckerProduct(id, op).eval();
}

inline TwoQubitState apply_one_photon(const TwoQubitState& state, int photon, const JonesOp& op) {
    Eigen::Matrix4cd big = expand_on_photon(photon, op);
    return TwoQubitState{big * state.rho * big.adjoint()};
}

// Re(tr(A B)) without forming the product matrix.
inline double trace_product_real(const Eigen::Matrix4cd& a, const Eigen::Matrix4cd& b) {
    return a.cwiseProduct(b.transpose()).sum().real();
}

// P(theta1) (x) P(theta2) expectation: the joint transmission probability of
// the pair through both polarizers.  For the bare singlet this is sin^2(t1-t2)/2.
inline double coincidence_probability(const TwoQubitState& state,
                                      const PolarizerSetting& theta1,
                                      const PolarizerSetting& theta2) {
    Eigen::Matrix4cd joint = Eigen::kroneckerProduct(polarizer_projector(theta1),
                                                     polarizer_projector(theta2));
    return trace_product_real(joint, state.rho);
}

// Isotropic (Werner) admixture: (1-p) rho + p I/4.  Scales every two-photon
// fringe visibility by exactly 1-p.
inline TwoQubitState depolarize(const TwoQubitState& state, double p) {
    if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("depolarization must be in [0, 1]");
    return TwoQubitState{(1.0 - p) * state.rho +
                         (p / 4.0) * Eigen::Matrix4cd::Identity()};
}

inline bool is_unitary(const JonesOp& op, double tol = 1e-10) {
    return (op.adjoint() * op - JonesOp::Identity()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_projector(const JonesOp& op, double tol = 1e-10) {
    return (op * op - op).cwiseAbs().maxCoeff() <= tol &&
           (op - op.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

// Unit trace, Hermitian, positive semidefinite (within tol).
inline bool is_valid_state(const TwoQubitState& state, double tol = 1e-9) {
    if (std::abs(state.rho.trace() - complexd(1.0, 0.0)) > tol) return false;
    if ((state.rho - state.rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(state.rho);
    return es.eigenvalues().minCoeff() >= -tol;
}

inline double state_purity(const TwoQubitState& state) {
    return (state.rho * state.rho).trace().real();
}

}  // namespace cqmsim

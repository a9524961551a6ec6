#pragma once

// Synchronous machine in the alpha-beta frame: 7 states (theta, omega, i) with
// the 5-current block ordered (i_alpha, i_beta, i_f, i_d, i_q).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"

namespace gridstate {

/// Electrical and mechanical constants of one generator, SI units.
struct MachineParams {
    double m = 0.0;     // inertia, kg m^2
    double d = 0.0;     // damping, N m s
    double r_s = 0.0;   // stator resistance, Ohm
    double r_f = 0.0;   // excitation winding resistance
    double r_d = 0.0;   // damper resistances
    double r_q = 0.0;
    double l_s = 0.0;   // stator inductance, H
    double l_sa = 0.0;  // saliency, zero for a round rotor
    double l_f = 0.0;
    double l_d = 0.0;
    double l_q = 0.0;
    double l_fd = 0.0;  // excitation/d-damper mutual
    double l_sf = 0.0;  // stator/rotor mutuals
    double l_sd = 0.0;
    double l_sq = 0.0;
};

using Vec7 = Eigen::Matrix<double, 7, 1>;

struct MachineState {
    double theta = 0.0;
    double omega = 0.0;
    Vec5 i = Vec5::Zero();  // (i_alpha, i_beta, i_f, i_d, i_q)

    Vec2 i_s() const { return i.head<2>(); }
};

/// L_s(theta) = l_s I + R(2 theta) diag(l_sa, -l_sa).
inline Mat2 stator_inductance(const MachineParams& p, double theta) {
    Mat2 sal;
    sal << p.l_sa, 0.0, 0.0, -p.l_sa;
    return p.l_s * Mat2::Identity() + rot(2.0 * theta) * sal;
}

/// L_m(theta) = R(theta) [[l_sf, l_sd, 0], [0, 0, -l_sq]].
inline Eigen::Matrix<double, 2, 3> mutual_inductance(const MachineParams& p, double theta) {
    Eigen::Matrix<double, 2, 3> base;
    base << p.l_sf, p.l_sd, 0.0, 0.0, 0.0, -p.l_sq;
    return rot(theta) * base;
}

inline Eigen::Matrix3d rotor_inductance(const MachineParams& p) {
    Eigen::Matrix3d lr;
    lr << p.l_f, p.l_fd, 0.0, p.l_fd, p.l_d, 0.0, 0.0, 0.0, p.l_q;
    return lr;
}

/// Full 5x5 winding inductance matrix L(theta).
inline Mat5 inductance_matrix(const MachineParams& p, double theta) {
    Mat5 l;
    const auto lm = mutual_inductance(p, theta);
    l.topLeftCorner<2, 2>() = stator_inductance(p, theta);
    l.topRightCorner<2, 3>() = lm;
    l.bottomLeftCorner<3, 2>() = lm.transpose();
    l.bottomRightCorner<3, 3>() = rotor_inductance(p);
    return l;
}

inline Mat5 resistance_matrix(const MachineParams& p) {
    Vec5 diag;
    diag << p.r_s, p.r_s, p.r_f, p.r_d, p.r_q;
    return diag.asDiagonal();
}

/// tau_e = 1/2 i^T (L(theta) jj + jj^T L(theta)) i.
inline double electrical_torque(const MachineParams& p, double theta, const Vec5& i) {
    const Mat5 l = inductance_matrix(p, theta);
    const Mat5 jj = machine_j();
    return 0.5 * i.dot((l * jj + jj.transpose() * l) * i);
}

/// v_ind = omega (L(theta) jj^T + jj L(theta)) i.
inline Vec5 induced_voltage(const MachineParams& p, double theta, double omega, const Vec5& i) {
    const Mat5 l = inductance_matrix(p, theta);
    const Mat5 jj = machine_j();
    return omega * ((l * jj.transpose() + jj * l) * i);
}

/// (dtheta/dt, domega/dt, di/dt) of one machine driven by its terminal voltage.
inline Vec7 machine_rhs(const MachineParams& p, const MachineState& s, const Vec2& v_term, double tau_m,
                        double v_f) {
    const Mat5 l = inductance_matrix(p, s.theta);
    const double tau_e = electrical_torque(p, s.theta, s.i);

    Vec5 drive = -resistance_matrix(p) * s.i - induced_voltage(p, s.theta, s.omega, s.i);
    drive.head<2>() += v_term;
    drive(2) += v_f;

    const Eigen::LDLT<Mat5> ldlt(l);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff()) {
        std::ostringstream msg;
        msg << "machine_rhs: inductance matrix is singular at theta = " << s.theta;
        throw Error(ErrorKind::singular, msg.str());
    }

    Vec7 out;
    out(0) = s.omega;
    out(1) = (-p.d * s.omega - tau_e + tau_m) / p.m;
    out.tail<5>() = ldlt.solve(drive);
    return out;
}

/// First problem found by validate_params.
struct ParamViolation {
    std::string field;
    std::string message;
    std::optional<double> theta;       // set for positive-definiteness failures
    std::optional<double> eigenvalue;  // smallest eigenvalue of L(theta) there
};

inline constexpr std::size_t kInductanceCheckPoints = 64;

/// Sign domains, then positive definiteness of L(theta) on a uniform theta grid.
inline std::optional<ParamViolation> validate_params(const MachineParams& p) {
    struct Field {
        const char* name;
        double value;
        bool allow_zero;
    };
    const std::array<Field, 15> fields{{
        {"inertia", p.m, false},
        {"damping", p.d, false},
        {"r_s", p.r_s, false},
        {"r_f", p.r_f, false},
        {"r_d", p.r_d, false},
        {"r_q", p.r_q, false},
        {"l_s", p.l_s, false},
        {"l_sa", p.l_sa, true},
        {"l_f", p.l_f, false},
        {"l_d", p.l_d, false},
        {"l_q", p.l_q, false},
        {"l_fd", p.l_fd, false},
        {"l_sf", p.l_sf, false},
        {"l_sd", p.l_sd, false},
        {"l_sq", p.l_sq, false},
    }};
    for (const auto& f : fields) {
        if (!std::isfinite(f.value)) {
            return ParamViolation{f.name, std::string(f.name) + " is not finite", {}, {}};
        }
        const bool ok = f.allow_zero ? f.value >= 0.0 : f.value > 0.0;
        if (!ok) {
            std::ostringstream msg;
            msg << f.name << " = " << f.value << " violates " << (f.allow_zero ? ">= 0" : "> 0");
            return ParamViolation{f.name, msg.str(), {}, {}};
        }
    }

    for (std::size_t k = 0; k < kInductanceCheckPoints; ++k) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / kInductanceCheckPoints;
        const Mat5 l = inductance_matrix(p, theta);
        const Eigen::LLT<Mat5> llt(l);
        const double lambda_min =
            Eigen::SelfAdjointEigenSolver<Mat5>(l, Eigen::EigenvaluesOnly).eigenvalues()(0);
        // LLT can succeed on a matrix whose smallest eigenvalue is rounding noise.
        const bool pd = llt.info() == Eigen::Success && lambda_min > 1e-12 * l.diagonal().maxCoeff();
        if (!pd) {
            std::ostringstream msg;
            msg << "inductance matrix not positive definite at theta = " << theta
                << " (smallest eigenvalue " << lambda_min << ")";
            return ParamViolation{"inductance", msg.str(), theta, lambda_min};
        }
    }
    return std::nullopt;
}

}  // namespace gridstate

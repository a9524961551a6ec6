#pragma once

// Constructive synchronous steady states.
//
// 1. Fix the generator-bus voltage phasors and Newton-solve the load-bus rows
//    of the nodal balance Y_N(v) v = (-i_s, 0); read off i_s and i_T.
// 2. For every machine, find the rotor angle and field current that make the
//    stator voltage balance hold with zero damper currents, then the inputs
//    v_f = r_f i_f and tau_m = d w0 + tau_e.
// 3. Stack everything into (x, u) and check rho(x, u, w0) = 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/loads.hpp"
#include "gridstate/machine.hpp"
#include "gridstate/network.hpp"
#include "gridstate/system.hpp"

namespace gridstate {

/// Relative threshold for |rho|_inf / scale on constructed steady states.
inline constexpr double kSteadyStateTol = 1e-9;

struct NewtonOptions {
    double tol = 1e-10;     // |F|_inf <= tol * max(1, |v|_inf)
    int max_iter = 50;
    double fd_step = 1e-6;  // Jacobian column step is fd_step * max(1, |v|_inf)
};

struct OperatingSpec {
    double omega0 = 0.0;
    std::vector<Vec2> generator_voltages;  // one phasor per machine, machine order
    std::vector<int> polarization;         // one sigma in {-1, +1} per machine
    NewtonOptions newton;
};

/// Phasor (magnitude, angle in radians) as an alpha-beta pair.
inline Vec2 phasor(double magnitude, double angle) { return magnitude * rvec(angle); }

struct NetworkSolution {
    double omega0 = 0.0;
    Vector i_s;                 // 2 n_g
    Vector v;                   // 2 n_v, internal bus order
    Vector i_t;                 // 2 n_t
    double residual_norm = 0.0; // |Y_N v + (i_s, 0)|_inf / max(1, |v|_inf)
    int iterations = 0;
    std::vector<double> history;  // Newton residual norm per iterate
};

/// Newton solve of the load-bus nodal equations with generator voltages fixed.
inline NetworkSolution solve_network(const PowerSystem& sys, const OperatingSpec& spec) {
    const std::size_t n_g = sys.n_g();
    const std::size_t n_v = sys.n_v();
    if (spec.generator_voltages.size() != n_g) {
        throw Error(ErrorKind::invalid_argument, "solve_network: one generator voltage per machine required");
    }
    const auto& opt = spec.newton;
    if (!(opt.tol > 0.0) || opt.max_iter < 1 || !(opt.fd_step > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "solve_network: invalid Newton options");
    }

    const auto g2 = static_cast<Eigen::Index>(2 * n_g);
    const auto l2 = static_cast<Eigen::Index>(2 * (n_v - n_g));
    Vector v = Vector::Zero(static_cast<Eigen::Index>(2 * n_v));
    double nominal = 0.0;
    for (std::size_t k = 0; k < n_g; ++k) {
        v.segment<2>(static_cast<Eigen::Index>(2 * k)) = spec.generator_voltages[k];
        nominal += spec.generator_voltages[k].norm();
    }
    nominal /= static_cast<double>(n_g);
    for (Eigen::Index b = g2; b < v.size(); b += 2) v(b) = nominal;

    auto balance = [&](const Vector& vv, int iter) -> Vector {
        try {
            return admittance(sys.network, sys.topology, sys.loads, vv, spec.omega0) * vv;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::domain) throw;
            std::ostringstream msg;
            msg << "solve_network: " << e.what() << " (Newton iterate " << iter << ")";
            throw Error(ErrorKind::domain, msg.str());
        }
    };

    NetworkSolution sol;
    sol.omega0 = spec.omega0;
    bool converged = (l2 == 0);
    for (int iter = 0; iter <= opt.max_iter && !converged; ++iter) {
        const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
        const Vector f = balance(v, iter).tail(l2);
        const double fnorm = f.cwiseAbs().maxCoeff();
        sol.history.push_back(fnorm / scale);
        sol.iterations = iter;
        if (fnorm <= opt.tol * scale) {
            converged = true;
            break;
        }
        if (iter == opt.max_iter) break;

        const double h = opt.fd_step * scale;
        Matrix jac(l2, l2);
        for (Eigen::Index c = 0; c < l2; ++c) {
            Vector vp = v;
            vp(g2 + c) += h;
            jac.col(c) = (balance(vp, iter).tail(l2) - f) / h;
        }
        const Eigen::FullPivLU<Matrix> lu(jac);
        if (!lu.isInvertible()) {
            std::ostringstream msg;
            msg << "solve_network: singular Jacobian at Newton iterate " << iter;
            throw Error(ErrorKind::singular, msg.str());
        }
        v.tail(l2) -= lu.solve(f);
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "solve_network: Newton did not converge in " << opt.max_iter << " iterations (relative residual "
            << (sol.history.empty() ? 0.0 : sol.history.back()) << ")";
        throw Error(ErrorKind::no_convergence, msg.str());
    }

    const Vector yv = balance(v, sol.iterations);
    sol.v = v;
    sol.i_s = -yv.head(g2);
    sol.i_t = line_currents_from_voltages(sys.network, sys.topology, v, spec.omega0);
    sol.residual_norm =
        nodal_balance_residual(sys.network, sys.topology, sys.loads, sol.i_s, v, spec.omega0).cwiseAbs().maxCoeff() /
        std::max(1.0, v.cwiseAbs().maxCoeff());
    return sol;
}

enum class RecoveryCase { regular, nu_zero, omega_zero, alpha_equal };

inline const char* to_string(RecoveryCase c) {
    switch (c) {
        case RecoveryCase::regular: return "regular";
        case RecoveryCase::nu_zero: return "nu_zero";
        case RecoveryCase::omega_zero: return "omega_zero";
        case RecoveryCase::alpha_equal: return "alpha_equal";
    }
    return "unknown";
}

/// Steady state of one machine given its terminal voltage and stator current.
struct MachineRecovery {
    double theta = 0.0;
    double i_f = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
    double tau_m = 0.0;
    double v_f = 0.0;
    Vec2 nu = Vec2::Zero();  // v - Z_s(theta) i_s
    RecoveryCase kase = RecoveryCase::regular;
    int sigma = 1;
    Vec2 eta_c = Vec2::Zero();
    Vec2 eta_sa = Vec2::Zero();
    double alpha_c = 0.0;
    double alpha_sa = 0.0;
    double delta_c = 0.0;
    double delta_sa = 0.0;
    std::string warning;  // set for the trivial cases

    Vec5 currents(const Vec2& i_s) const {
        Vec5 i;
        i << i_s, i_f, i_d, i_q;
        return i;
    }
};

/// Z_s(theta) = R_s + w0 j L_s(theta).
inline Mat2 stator_impedance(const MachineParams& p, double theta, double omega0) {
    return p.r_s * Mat2::Identity() + omega0 * jmat() * stator_inductance(p, theta);
}

/// eta_c and eta_sa such that R(theta)^T j^T nu(theta) = R(theta)^T eta_c + R(theta) eta_sa.
inline std::pair<Vec2, Vec2> recovery_vectors(const MachineParams& p, const Vec2& v_k, const Vec2& i_sk, double omega0) {
    const Vec2 eta_c = jmat().transpose() * (v_k - (p.r_s * i_sk + omega0 * p.l_s * jmul(i_sk)));
    const Vec2 eta_sa = omega0 * p.l_sa * Vec2(-i_sk.x(), i_sk.y());
    return {eta_c, eta_sa};
}

/// epsilon(theta) = R(theta)^T eta_c + R(theta) eta_sa. Its norm equals |nu(theta)|.
inline Vec2 ellipse_point(const Vec2& eta_c, const Vec2& eta_sa, double theta) {
    const Mat2 r = rot(theta);
    return r.transpose() * eta_c + r * eta_sa;
}

/// Solves w0 l_sf i_f j r(theta) = nu(theta) for (theta, i_f) on the branch
/// selected by sigma, then recovers v_f and tau_m.
inline MachineRecovery recover_machine(const MachineParams& p, const Vec2& v_k, const Vec2& i_sk, double omega0,
                                       int sigma) {
    if (sigma != 1 && sigma != -1) throw Error(ErrorKind::invalid_argument, "recover_machine: sigma must be +1 or -1");
    MachineRecovery rec;
    rec.sigma = sigma;

    auto finish = [&](double theta, double i_f) {
        rec.theta = theta;
        rec.i_f = i_f;
        rec.v_f = p.r_f * i_f;
        rec.tau_m = p.d * omega0 + electrical_torque(p, theta, rec.currents(i_sk));
        rec.nu = v_k - stator_impedance(p, theta, omega0) * i_sk;
    };

    if (omega0 == 0.0) {
        const Vec2 nu = v_k - p.r_s * i_sk;
        const double ref = std::max(v_k.norm(), p.r_s * i_sk.norm());
        if (nu.norm() > kSteadyStateTol * ref) {
            std::ostringstream msg;
            msg << "recover_machine: omega_zero infeasible, |v - R_s i_s| = " << nu.norm()
                << " must vanish when w0 = 0";
            throw Error(ErrorKind::infeasible, msg.str());
        }
        rec.kase = RecoveryCase::omega_zero;
        rec.warning = "w0 = 0: rotor angle and field current are arbitrary; returning theta = 0, i_f = 0";
        finish(0.0, 0.0);
        return rec;
    }

    const auto [eta_c, eta_sa] = recovery_vectors(p, v_k, i_sk, omega0);
    rec.eta_c = eta_c;
    rec.eta_sa = eta_sa;
    rec.alpha_c = eta_c.norm();
    rec.alpha_sa = eta_sa.norm();
    rec.delta_c = std::atan2(eta_c.y(), eta_c.x());
    rec.delta_sa = std::atan2(eta_sa.y(), eta_sa.x());

    const double alpha_sum = rec.alpha_c + rec.alpha_sa;
    double theta0 = 0.0;
    if (alpha_sum == 0.0) {
        rec.kase = RecoveryCase::nu_zero;
    } else if (std::abs(rec.alpha_c - rec.alpha_sa) <= 1e-9 * alpha_sum) {
        // Degenerate ellipse; the only roots of the second component are theta* and theta* + pi.
        rec.kase = RecoveryCase::alpha_equal;
        theta0 = 0.5 * (rec.delta_c - rec.delta_sa + std::numbers::pi);
    } else {
        // Second component of epsilon: a cos(theta) + b sin(theta) = 0.
        const double a = eta_c.y() + eta_sa.y();
        const double b = eta_sa.x() - eta_c.x();
        theta0 = std::atan2(-a, b);
    }

    double eps1 = ellipse_point(eta_c, eta_sa, theta0).x();
    if (sigma * eps1 < 0.0) {
        theta0 += std::numbers::pi;
        eps1 = -eps1;
    }
    theta0 = wrap_angle(theta0);
    eps1 = ellipse_point(eta_c, eta_sa, theta0).x();

    if (std::abs(eps1) <= 1e-9 * v_k.norm()) {
        if (rec.kase == RecoveryCase::regular) rec.kase = RecoveryCase::nu_zero;
        rec.warning = "nu(theta) = 0: field current is zero and the operating point is trivial";
        finish(theta0, 0.0);
    } else {
        finish(theta0, eps1 / (omega0 * p.l_sf));
    }
    if (rec.kase == RecoveryCase::alpha_equal && rec.warning.empty()) {
        rec.warning = "alpha_c = alpha_sa: degenerate recovery ellipse";
    }

    // w0 l_sf i_f = sigma |nu| and j r(theta) |nu| = sigma nu.
    const double nu_norm = rec.nu.norm();
    const double ref = std::max(v_k.norm() + (stator_impedance(p, rec.theta, omega0) * i_sk).norm(), 1e-300);
    const double e10a = std::abs(omega0 * p.l_sf * rec.i_f - sigma * nu_norm);
    const double e10b = (jmul(rvec(rec.theta)) * nu_norm - sigma * rec.nu).norm();
    if (e10a > kSteadyStateTol * ref || e10b > kSteadyStateTol * ref) {
        std::ostringstream msg;
        msg << "recover_machine: recovery equations not satisfied (" << e10a / ref << ", " << e10b / ref << ")";
        throw Error(ErrorKind::certification, msg.str());
    }
    return rec;
}

struct FullSteadyState {
    Vector x;
    Vector u;
    double omega0 = 0.0;
    std::vector<MachineRecovery> machines;
    ResidualBlocks diagnostics;
    double scale = 1.0;
};

inline FullSteadyState assemble_steady_state(const PowerSystem& sys, const NetworkSolution& net,
                                             const std::vector<MachineRecovery>& recoveries) {
    const std::size_t n_g = sys.n_g();
    if (recoveries.size() != n_g) throw Error(ErrorKind::invalid_argument, "assemble_steady_state: one recovery per machine required");
    const auto layout = sys.layout();

    FullSteadyState ss;
    ss.omega0 = net.omega0;
    ss.machines = recoveries;
    ss.x = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
    ss.u = Vector::Zero(static_cast<Eigen::Index>(layout.input_size()));
    for (std::size_t k = 0; k < n_g; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const auto& r = recoveries[k];
        ss.x(layout.theta() + ki) = r.theta;
        ss.x(layout.omega() + ki) = net.omega0;
        ss.x.segment<5>(layout.current(k)) = r.currents(net.i_s.segment<2>(2 * ki));
        ss.u(ki) = r.tau_m;
        ss.u(static_cast<Eigen::Index>(n_g) + ki) = r.v_f;
    }
    ss.x.segment(layout.voltage(), net.v.size()) = net.v;
    ss.x.segment(layout.line(), net.i_t.size()) = net.i_t;

    const Vector rho = residual(sys, ss.x, ss.u, ss.omega0);
    ss.diagnostics = residual_blocks(layout, rho);
    ss.scale = residual_scale(ss.x, ss.u);
    if (ss.diagnostics.max() > kSteadyStateTol * ss.scale) {
        const auto& d = ss.diagnostics;
        std::ostringstream msg;
        msg << "assemble_steady_state: residual above tolerance (scale " << ss.scale << "): frequency " << d.frequency
            << ", torque " << d.torque << ", machine " << d.machine << ", bus " << d.bus << ", line " << d.line;
        throw Error(ErrorKind::certification, msg.str());
    }
    return ss;
}

/// solve_network, recover_machine per machine, assemble_steady_state.
inline FullSteadyState compute_steady_state(const PowerSystem& sys, const OperatingSpec& spec) {
    if (spec.polarization.size() != sys.n_g()) {
        throw Error(ErrorKind::invalid_argument, "compute_steady_state: one polarization per machine required");
    }
    const auto net = solve_network(sys, spec);
    std::vector<MachineRecovery> recs;
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        const auto ki = static_cast<Eigen::Index>(2 * k);
        recs.push_back(recover_machine(sys.machines[k], net.v.segment<2>(ki), net.i_s.segment<2>(ki), spec.omega0,
                                       spec.polarization[k]));
    }
    return assemble_steady_state(sys, net, recs);
}

/// Step for the invariance probe, in seconds. The report uses the central
/// scheme: at w0 = 100 pi the forward scheme's O(h) truncation alone is of
/// order 1e-3 relative for volt-scale states.
inline constexpr double kInvarianceStep = 1e-7;
/// Threshold on invariance_defect / scale.
inline constexpr double kInvarianceTol = 1e-5;
/// Threshold on equivariance_defect / max(1, |i_l(v)|).
inline constexpr double kLoadEquivarianceTol = 1e-10;
inline constexpr std::size_t kLoadEquivarianceSamples = 64;

struct VerificationReport {
    ResidualBlocks residual;
    double scale = 1.0;
    double residual_norm = 0.0;       // |rho|_inf / scale
    double frequency_offset = 0.0;    // entry of 1 w0 - omega with largest magnitude
    double invariance_defect = 0.0;   // absolute; compare against kInvarianceTol * scale
    std::vector<double> load_defects; // per bus, relative
    bool machine_conditions = false;  // machine/network state and inputs satisfy rho = 0
    bool inputs_constant = false;     // residual is stationary along the steady-state flow with u held fixed
    bool loads_conforming = false;    // every load current rotates with its bus voltage
    bool certificate = false;
    std::vector<std::string> failures;
};

/// Checks the three conditions for steady-state operation on (x, u, w0).
inline VerificationReport verify_steady_state(const PowerSystem& sys, const Vector& x, const Vector& u, double omega0) {
    VerificationReport rep;
    const auto layout = sys.layout();
    const Vector rho = residual(sys, x, u, omega0);
    rep.residual = residual_blocks(layout, rho);
    rep.scale = residual_scale(x, u);
    rep.residual_norm = rep.residual.max() / rep.scale;
    for (std::size_t k = 0; k < layout.n_g; ++k) {
        const double off = rho(layout.theta() + static_cast<Eigen::Index>(k));
        if (std::abs(off) > std::abs(rep.frequency_offset)) rep.frequency_offset = off;
    }

    rep.machine_conditions = rep.residual_norm <= kSteadyStateTol;
    if (!rep.machine_conditions) {
        std::ostringstream msg;
        msg << "residual " << rep.residual_norm << " exceeds " << kSteadyStateTol << " (relative)";
        if (rep.residual.frequency > kSteadyStateTol * rep.scale) {
            msg << "; frequency block 1 w0 - omega = " << rep.frequency_offset;
        }
        rep.failures.push_back(msg.str());
    }

    rep.loads_conforming = true;
    for (std::size_t b = 0; b < sys.n_v(); ++b) {
        const Vec2 vb = x.segment<2>(layout.voltage(b));
        double rel = 0.0;
        try {
            const double ref = std::max(1.0, load_current(sys.loads[b], vb).norm());
            rel = equivariance_defect(sys.loads[b], vb, kLoadEquivarianceSamples) / ref;
        } catch (const Error& e) {
            rel = std::numeric_limits<double>::infinity();
            rep.failures.push_back(std::string("load at bus ") + std::to_string(b + 1) + ": " + e.what());
        }
        rep.load_defects.push_back(rel);
        if (!(rel <= kLoadEquivarianceTol)) {
            rep.loads_conforming = false;
            std::ostringstream msg;
            msg << "load at bus " << b + 1 << " is not rotation-equivariant (defect " << rel << ")";
            rep.failures.push_back(msg.str());
        }
    }

    try {
        rep.invariance_defect = invariance_defect(sys, x, u, omega0, kInvarianceStep, DifferenceScheme::central);
    } catch (const Error& e) {
        rep.invariance_defect = std::numeric_limits<double>::infinity();
        rep.failures.push_back(std::string("invariance probe: ") + e.what());
    }
    rep.inputs_constant = rep.invariance_defect <= kInvarianceTol * rep.scale;
    if (!rep.inputs_constant) {
        std::ostringstream msg;
        msg << "invariance defect " << rep.invariance_defect / rep.scale << " exceeds " << kInvarianceTol << " (relative)";
        rep.failures.push_back(msg.str());
    }

    rep.certificate = rep.machine_conditions && rep.inputs_constant && rep.loads_conforming;
    return rep;
}

inline VerificationReport verify_steady_state(const PowerSystem& sys, const FullSteadyState& ss) {
    return verify_steady_state(sys, ss.x, ss.u, ss.omega0);
}

}  // namespace gridstate

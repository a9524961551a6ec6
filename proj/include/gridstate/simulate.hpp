#pragma once

// Fixed-step RK4 integration of f(x, u), the closed-form flow of f_d, and the
// drift metrics comparing the two.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/system.hpp"

namespace gridstate {

struct SimConfig {
    double dt = 1e-5;
    double t_end = 0.2;
    std::size_t record_every = 1;

    std::size_t steps() const {
        if (!(dt > 0.0) || !(t_end >= dt) || record_every == 0) {
            throw Error(ErrorKind::invalid_argument, "SimConfig: need dt > 0, t_end >= dt, record_every >= 1");
        }
        return static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    Vector inputs;
};

/// One classical RK4 step of dx/dt = field(t, x).
template <class Field>
Vector rk4_step(Field&& field, double t, const Vector& x, double dt) {
    int stage = 0;
    try {
        const Vector k1 = field(t, x);
        ++stage;
        const Vector k2 = field(t + 0.5 * dt, x + 0.5 * dt * k1);
        ++stage;
        const Vector k3 = field(t + 0.5 * dt, x + 0.5 * dt * k2);
        ++stage;
        const Vector k4 = field(t + dt, x + dt * k3);
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } catch (const Error& e) {
        std::ostringstream msg;
        msg << e.what() << " (RK4 stage " << stage + 1 << ")";
        throw Error(e.kind(), msg.str());
    }
}

inline Vector rk4_step(const PowerSystem& sys, const Vector& x, const Vector& u, double dt) {
    return rk4_step([&](double, const Vector& xs) { return vector_field(sys, xs, u); }, 0.0, x, dt);
}

/// Integrates dx/dt = field(t, x) from x0, recording every cfg.record_every steps.
template <class Field>
Trajectory integrate(Field&& field, const Vector& x0, const SimConfig& cfg) {
    const std::size_t n = cfg.steps();
    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    Vector x = x0;
    for (std::size_t s = 1; s <= n; ++s) {
        const double t = static_cast<double>(s - 1) * cfg.dt;
        try {
            x = rk4_step(field, t, x, cfg.dt);
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << e.what() << " at t = " << t;
            throw Error(e.kind(), msg.str());
        }
        if (s % cfg.record_every == 0) {
            traj.times.push_back(static_cast<double>(s) * cfg.dt);
            traj.states.push_back(x);
        }
    }
    return traj;
}

/// Constant-input simulation of the power system.
inline Trajectory simulate(const PowerSystem& sys, const Vector& x0, const Vector& u, const SimConfig& cfg) {
    detail::require_state(sys, x0, u);
    auto traj = integrate([&](double, const Vector& xs) { return vector_field(sys, xs, u); }, x0, cfg);
    traj.inputs = u;
    return traj;
}

/// Exact flow of f_d: angles advance by w0 t, every planar pair except the
/// rotor currents rotates by R(w0 t).
inline Vector reference_trajectory(const StateLayout& layout, const Vector& x0, double omega0, double t) {
    Vector x = x0;
    const double phi = omega0 * t;
    const Mat2 r = rot(phi);
    for (std::size_t k = 0; k < layout.n_g; ++k) {
        x(layout.theta() + static_cast<Eigen::Index>(k)) += phi;
        x.segment<2>(layout.current(k)) = r * x0.segment<2>(layout.current(k));
    }
    for (Eigen::Index p = layout.voltage(); p + 1 < x.size(); p += 2) {
        x.segment<2>(p) = r * x0.segment<2>(p);
    }
    return x;
}

struct DriftMetrics {
    double state_deviation = 0.0;        // max |x(t) - x_ref(t)|_inf / scale
    double voltage_magnitude = 0.0;      // max | |v_k(t)| - |v_k(0)| | / |v_k(0)|
    double frequency_deviation = 0.0;    // max |omega_k(t) - w0|
    double residual = 0.0;               // max |rho(x(t), u, w0)|_inf / scale
    std::size_t worst_state_sample = 0;  // sample index attaining state_deviation
    std::size_t worst_residual_sample = 0;
};

/// Drift of a trajectory from the rotating reference started at x0. Times are
/// taken relative to traj.times.front().
inline DriftMetrics drift_metrics(const PowerSystem& sys, const Trajectory& traj, const Vector& x0, double omega0) {
    if (traj.states.empty()) throw Error(ErrorKind::invalid_argument, "drift_metrics: empty trajectory");
    const auto layout = sys.layout();
    const double scale = residual_scale(x0, traj.inputs);
    const double t0 = traj.times.front();
    DriftMetrics m;
    for (std::size_t s = 0; s < traj.states.size(); ++s) {
        const Vector& x = traj.states[s];
        const Vector ref = reference_trajectory(layout, x0, omega0, traj.times[s] - t0);
        const double dev = (x - ref).cwiseAbs().maxCoeff() / scale;
        if (dev > m.state_deviation) {
            m.state_deviation = dev;
            m.worst_state_sample = s;
        }
        for (std::size_t b = 0; b < layout.n_v; ++b) {
            const double n0 = x0.segment<2>(layout.voltage(b)).norm();
            if (n0 > 0.0) {
                const double nb = x.segment<2>(layout.voltage(b)).norm();
                m.voltage_magnitude = std::max(m.voltage_magnitude, std::abs(nb - n0) / n0);
            }
        }
        for (std::size_t k = 0; k < layout.n_g; ++k) {
            m.frequency_deviation =
                std::max(m.frequency_deviation, std::abs(x(layout.omega() + static_cast<Eigen::Index>(k)) - omega0));
        }
        const double res = residual(sys, x, traj.inputs, omega0).cwiseAbs().maxCoeff() / scale;
        if (res > m.residual) {
            m.residual = res;
            m.worst_residual_sample = s;
        }
    }
    return m;
}

/// Stored energy: magnetic + kinetic per machine, capacitive + line inductive.
inline double stored_energy(const PowerSystem& sys, const Vector& x) {
    const auto layout = sys.layout();
    double e = 0.0;
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const Vec5 i = x.segment<5>(layout.current(k));
        const double omega = x(layout.omega() + ki);
        e += 0.5 * i.dot(inductance_matrix(sys.machines[k], x(layout.theta() + ki)) * i);
        e += 0.5 * sys.machines[k].m * omega * omega;
    }
    for (std::size_t b = 0; b < sys.n_v(); ++b) {
        e += 0.5 * sys.network.c(static_cast<Eigen::Index>(b)) * x.segment<2>(layout.voltage(b)).squaredNorm();
    }
    for (std::size_t k = 0; k < sys.n_t(); ++k) {
        e += 0.5 * sys.network.l_t(static_cast<Eigen::Index>(k)) * x.segment<2>(layout.line(k)).squaredNorm();
    }
    return e;
}

}  // namespace gridstate

#pragma once

// Whole-system model: state layout, the vector field f(x, u), the rotating
// steady-state field f_d(x, w0), and the residual rho = M(x) (f_d - f).
//
// State layout x = (theta[n_g], omega[n_g], i[5 n_g], v[2 n_v], i_T[2 n_t]);
// input layout u = (tau_m[n_g], v_f[n_g]).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/loads.hpp"
#include "gridstate/machine.hpp"
#include "gridstate/network.hpp"

namespace gridstate {

struct StateLayout {
    std::size_t n_g = 0;
    std::size_t n_v = 0;
    std::size_t n_t = 0;

    std::size_t size() const { return 7 * n_g + 2 * n_v + 2 * n_t; }
    std::size_t input_size() const { return 2 * n_g; }

    Eigen::Index theta() const { return 0; }
    Eigen::Index omega() const { return static_cast<Eigen::Index>(n_g); }
    Eigen::Index current() const { return static_cast<Eigen::Index>(2 * n_g); }
    Eigen::Index current(std::size_t k) const { return current() + static_cast<Eigen::Index>(5 * k); }
    Eigen::Index voltage() const { return static_cast<Eigen::Index>(7 * n_g); }
    Eigen::Index voltage(std::size_t b) const { return voltage() + static_cast<Eigen::Index>(2 * b); }
    Eigen::Index line() const { return static_cast<Eigen::Index>(7 * n_g + 2 * n_v); }
    Eigen::Index line(std::size_t k) const { return line() + static_cast<Eigen::Index>(2 * k); }
};

/// The state split into its five blocks.
struct StateBlocks {
    Vector theta;
    Vector omega;
    Vector i;
    Vector v;
    Vector i_t;
};

inline Vector pack(const StateLayout& layout, const StateBlocks& blocks) {
    Vector x(static_cast<Eigen::Index>(layout.size()));
    x << blocks.theta, blocks.omega, blocks.i, blocks.v, blocks.i_t;
    return x;
}

inline StateBlocks unpack(const StateLayout& layout, const Vector& x) {
    const auto g = static_cast<Eigen::Index>(layout.n_g);
    return {x.segment(layout.theta(), g), x.segment(layout.omega(), g), x.segment(layout.current(), 5 * g),
            x.segment(layout.voltage(), static_cast<Eigen::Index>(2 * layout.n_v)),
            x.segment(layout.line(), static_cast<Eigen::Index>(2 * layout.n_t))};
}

/// A machine and the (file-order) bus it is attached to.
struct MachineAttachment {
    MachineParams params;
    std::size_t bus = 0;
};

/// Validated system with buses reordered so generator buses come first.
struct PowerSystem {
    std::vector<MachineParams> machines;
    Topology topology;
    NetworkParams network;
    std::vector<LoadModel> loads;
    /// bus_order[internal index] = index in the caller's bus ordering.
    std::vector<std::size_t> bus_order;

    std::size_t n_g() const { return machines.size(); }
    std::size_t n_v() const { return topology.n_v(); }
    std::size_t n_t() const { return topology.n_t(); }
    std::size_t n_l() const { return n_v() - n_g(); }
    StateLayout layout() const { return {n_g(), n_v(), n_t()}; }

    /// internal_index[caller index].
    std::vector<std::size_t> internal_index() const {
        std::vector<std::size_t> inv(bus_order.size());
        for (std::size_t k = 0; k < bus_order.size(); ++k) inv[bus_order[k]] = k;
        return inv;
    }
};

/// Validates every component and reorders buses (machines' buses first, in
/// machine order; the rest keep their relative order). Throws a validation
/// Error listing every problem found.
inline PowerSystem assemble(const std::vector<MachineAttachment>& machines, const Topology& topology,
                            const NetworkParams& network, const std::vector<LoadModel>& loads) {
    std::vector<std::string> problems;
    const std::size_t n_v = topology.n_v();

    if (machines.empty()) problems.emplace_back("at least one machine is required");
    std::vector<int> owner(n_v, -1);
    for (std::size_t k = 0; k < machines.size(); ++k) {
        const auto& m = machines[k];
        if (m.bus >= n_v) {
            std::ostringstream msg;
            msg << "machine " << k + 1 << " is attached to nonexistent bus " << m.bus + 1;
            problems.push_back(msg.str());
            continue;
        }
        if (owner[m.bus] >= 0) {
            std::ostringstream msg;
            msg << "machines " << owner[m.bus] + 1 << " and " << k + 1 << " share bus " << m.bus + 1;
            problems.push_back(msg.str());
        } else {
            owner[m.bus] = static_cast<int>(k);
        }
        if (auto v = validate_params(m.params)) {
            std::ostringstream msg;
            msg << "machine " << k + 1 << ": " << v->message;
            problems.push_back(msg.str());
        }
    }
    if (auto p = validate_topology(topology)) problems.push_back(*p);
    if (auto p = validate_network(network, topology)) problems.push_back(*p);
    if (loads.size() != n_v) {
        problems.emplace_back("one load entry per bus is required");
    } else {
        for (std::size_t b = 0; b < n_v; ++b) {
            if (auto p = validate_load(loads[b])) {
                std::ostringstream msg;
                msg << "bus " << b + 1 << ": " << *p;
                problems.push_back(msg.str());
            }
        }
    }
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "system validation failed:";
        for (const auto& p : problems) msg << "\n  - " << p;
        throw Error(ErrorKind::validation, msg.str());
    }

    PowerSystem sys;
    for (const auto& m : machines) {
        sys.machines.push_back(m.params);
        sys.bus_order.push_back(m.bus);
    }
    for (std::size_t b = 0; b < n_v; ++b) {
        if (owner[b] < 0) sys.bus_order.push_back(b);
    }

    sys.topology.incidence.resize(topology.incidence.rows(), topology.incidence.cols());
    sys.network.c.resize(network.c.size());
    sys.network.l_t = network.l_t;
    sys.network.r_t = network.r_t;
    for (std::size_t k = 0; k < n_v; ++k) {
        const auto src = static_cast<Eigen::Index>(sys.bus_order[k]);
        sys.topology.incidence.row(static_cast<Eigen::Index>(k)) = topology.incidence.row(src);
        sys.network.c(static_cast<Eigen::Index>(k)) = network.c(src);
        sys.loads.push_back(loads[sys.bus_order[k]]);
    }
    return sys;
}

/// max(1, |x|_inf, |u|_inf), the gauge for every relative residual threshold.
inline double residual_scale(const Vector& x, const Vector& u) {
    double s = 1.0;
    if (x.size() > 0) s = std::max(s, x.cwiseAbs().maxCoeff());
    if (u.size() > 0) s = std::max(s, u.cwiseAbs().maxCoeff());
    return s;
}

namespace detail {

inline void require_state(const PowerSystem& sys, const Vector& x, const Vector& u) {
    const auto layout = sys.layout();
    require_size(x, layout.size(), "state vector");
    require_size(u, layout.input_size(), "input vector");
}

inline MachineState machine_state(const StateLayout& layout, const Vector& x, std::size_t k) {
    MachineState s;
    s.theta = x(layout.theta() + static_cast<Eigen::Index>(k));
    s.omega = x(layout.omega() + static_cast<Eigen::Index>(k));
    s.i = x.segment<5>(layout.current(k));
    return s;
}

inline Vector stator_currents(const StateLayout& layout, const Vector& x) {
    Vector i_s(static_cast<Eigen::Index>(2 * layout.n_g));
    for (std::size_t k = 0; k < layout.n_g; ++k) {
        i_s.segment<2>(static_cast<Eigen::Index>(2 * k)) = x.segment<2>(layout.current(k));
    }
    return i_s;
}

}  // namespace detail

/// f(x, u): per-machine electromechanical dynamics coupled to the network.
inline Vector vector_field(const PowerSystem& sys, const Vector& x, const Vector& u) {
    detail::require_state(sys, x, u);
    const auto layout = sys.layout();
    const std::size_t n_g = sys.n_g();
    Vector dx(x.size());

    for (std::size_t k = 0; k < n_g; ++k) {
        const auto ms = detail::machine_state(layout, x, k);
        const Vec2 v_term = x.segment<2>(layout.voltage(k));
        const Vec7 d = machine_rhs(sys.machines[k], ms, v_term, u(static_cast<Eigen::Index>(k)),
                                   u(static_cast<Eigen::Index>(n_g + k)));
        dx(layout.theta() + static_cast<Eigen::Index>(k)) = d(0);
        dx(layout.omega() + static_cast<Eigen::Index>(k)) = d(1);
        dx.segment<5>(layout.current(k)) = d.tail<5>();
    }

    NetworkState ns{x.segment(layout.voltage(), static_cast<Eigen::Index>(2 * sys.n_v())),
                    x.segment(layout.line(), static_cast<Eigen::Index>(2 * sys.n_t()))};
    const Vector i_in = detail::pad_injection(detail::stator_currents(layout, x), sys.n_v()) +
                        detail::load_currents(sys.loads, ns.v);
    const auto nd = network_rhs(sys.network, sys.topology, ns, i_in);
    dx.segment(layout.voltage(), nd.dv.size()) = nd.dv;
    dx.segment(layout.line(), nd.di_t.size()) = nd.di_t;
    return dx;
}

/// f_d(x, w0) = (1 w0, 0, w0 Jg i, w0 Jv v, w0 JT i_T).
inline Vector steady_field(const PowerSystem& sys, const Vector& x, double omega0) {
    const auto layout = sys.layout();
    detail::require_size(x, layout.size(), "state vector");
    const auto g = static_cast<Eigen::Index>(sys.n_g());
    Vector out = Vector::Zero(x.size());
    out.segment(layout.theta(), g).setConstant(omega0);
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        out.segment<2>(layout.current(k)) = omega0 * jmul(x.segment<2>(layout.current(k)));
    }
    const auto tail = x.size() - layout.voltage();
    out.tail(tail) = omega0 * j_pairs(x.tail(tail));
    return out;
}

/// rho(x, u, w0) in expanded block form; zero exactly on the steady-state set.
inline Vector residual(const PowerSystem& sys, const Vector& x, const Vector& u, double omega0) {
    detail::require_state(sys, x, u);
    const auto layout = sys.layout();
    const std::size_t n_g = sys.n_g();
    Vector rho(x.size());

    for (std::size_t k = 0; k < n_g; ++k) {
        const auto& p = sys.machines[k];
        const auto ms = detail::machine_state(layout, x, k);
        const auto ki = static_cast<Eigen::Index>(k);
        rho(layout.theta() + ki) = omega0 - ms.omega;
        rho(layout.omega() + ki) = p.d * ms.omega + electrical_torque(p, ms.theta, ms.i) - u(ki);

        const Mat5 l = inductance_matrix(p, ms.theta);
        Vec5 block = resistance_matrix(p) * ms.i + omega0 * (l * (machine_j() * ms.i)) +
                     induced_voltage(p, ms.theta, ms.omega, ms.i);
        block.head<2>() -= x.segment<2>(layout.voltage(k));
        block(2) -= u(static_cast<Eigen::Index>(n_g) + ki);
        rho.segment<5>(layout.current(k)) = block;
    }

    const Vector i_s = detail::stator_currents(layout, x);
    const Vector v = x.segment(layout.voltage(), static_cast<Eigen::Index>(2 * sys.n_v()));
    const Vector i_t = x.segment(layout.line(), static_cast<Eigen::Index>(2 * sys.n_t()));
    rho.tail(x.size() - layout.voltage()) =
        network_residual(sys.network, sys.topology, sys.loads, i_s, v, i_t, omega0);
    return rho;
}

/// |rho| per block, used for diagnostics and reports.
struct ResidualBlocks {
    double frequency = 0.0;  // 1 w0 - omega
    double torque = 0.0;     // D omega + tau_e - tau_m
    double machine = 0.0;    // winding voltage balance
    double bus = 0.0;        // current balance at buses
    double line = 0.0;       // voltage balance over lines

    double max() const { return std::max({frequency, torque, machine, bus, line}); }
};

inline ResidualBlocks residual_blocks(const StateLayout& layout, const Vector& rho) {
    auto norm_inf = [](const auto& seg) { return seg.size() == 0 ? 0.0 : seg.cwiseAbs().maxCoeff(); };
    const auto g = static_cast<Eigen::Index>(layout.n_g);
    return {norm_inf(rho.segment(layout.theta(), g)), norm_inf(rho.segment(layout.omega(), g)),
            norm_inf(rho.segment(layout.current(), 5 * g)),
            norm_inf(rho.segment(layout.voltage(), static_cast<Eigen::Index>(2 * layout.n_v))),
            norm_inf(rho.segment(layout.line(), static_cast<Eigen::Index>(2 * layout.n_t)))};
}

enum class DifferenceScheme { forward, central };

/// |d rho / dt| along f_d with u held constant, by finite differences of step h.
/// The forward form carries an O(h) truncation error of size ~ h w0^2 |rho terms|;
/// the central form is O(h^2).
inline double invariance_defect(const PowerSystem& sys, const Vector& x, const Vector& u, double omega0, double h,
                                DifferenceScheme scheme = DifferenceScheme::forward) {
    if (!(h > 0.0)) throw Error(ErrorKind::invalid_argument, "invariance_defect: step must be > 0");
    const Vector fd = steady_field(sys, x, omega0);
    const Vector r1 = residual(sys, x + h * fd, u, omega0);
    if (scheme == DifferenceScheme::central) {
        const Vector rm = residual(sys, x - h * fd, u, omega0);
        return ((r1 - rm) / (2.0 * h)).cwiseAbs().maxCoeff();
    }
    const Vector r0 = residual(sys, x, u, omega0);
    return ((r1 - r0) / h).cwiseAbs().maxCoeff();
}

/// M(x) = diag(I, M, L(theta), C, L_T) as a dense matrix.
inline Matrix mass_matrix(const PowerSystem& sys, const Vector& x) {
    const auto layout = sys.layout();
    Matrix m = Matrix::Zero(x.size(), x.size());
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        m(layout.theta() + ki, layout.theta() + ki) = 1.0;
        m(layout.omega() + ki, layout.omega() + ki) = sys.machines[k].m;
        m.block<5, 5>(layout.current(k), layout.current(k)) =
            inductance_matrix(sys.machines[k], x(layout.theta() + ki));
    }
    for (std::size_t b = 0; b < sys.n_v(); ++b) {
        m.block<2, 2>(layout.voltage(b), layout.voltage(b)) = sys.network.c(static_cast<Eigen::Index>(b)) * Mat2::Identity();
    }
    for (std::size_t k = 0; k < sys.n_t(); ++k) {
        m.block<2, 2>(layout.line(k), layout.line(k)) = sys.network.l_t(static_cast<Eigen::Index>(k)) * Mat2::Identity();
    }
    return m;
}

/// I_f = I_{n_g} (x) (0, 0, 1, 0, 0): 5 n_g x n_g.
inline Matrix field_indicator(std::size_t n_g) {
    Matrix m = Matrix::Zero(5 * n_g, n_g);
    for (std::size_t k = 0; k < n_g; ++k) m(static_cast<Eigen::Index>(5 * k + 2), static_cast<Eigen::Index>(k)) = 1.0;
    return m;
}

/// I_s = I_{n_g} (x) (I_2; 0_3x2): 5 n_g x 2 n_g.
inline Matrix stator_indicator(std::size_t n_g) {
    Matrix m = Matrix::Zero(5 * n_g, 2 * n_g);
    for (std::size_t k = 0; k < n_g; ++k) {
        m.block<2, 2>(static_cast<Eigen::Index>(5 * k), static_cast<Eigen::Index>(2 * k)) = Mat2::Identity();
    }
    return m;
}

/// I_v with I_v^T = [I_s 0_{5 n_g x 2 n_l}]: 2 n_v x 5 n_g.
inline Matrix voltage_indicator(std::size_t n_g, std::size_t n_v) {
    Matrix t = Matrix::Zero(5 * n_g, 2 * n_v);
    t.leftCols(static_cast<Eigen::Index>(2 * n_g)) = stator_indicator(n_g);
    return t.transpose();
}

}  // namespace gridstate

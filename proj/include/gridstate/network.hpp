#pragma once

// Transmission network: Pi-model line/bus dynamics, branch impedances and the
// nodal admittance matrix Y_N = Y_l(v) + w0 J_v C + E Z_T^{-1} E^T.
//
// Buses are indexed so that generator buses come first; injected stator
// currents i_s (length 2 n_g) are padded with zeros for the remaining buses.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/loads.hpp"

namespace gridstate {

/// Oriented incidence matrix E (n_v x n_t): column k has +1 at the line's
/// sending bus and -1 at its receiving bus.
struct Topology {
    Eigen::MatrixXd incidence;

    std::size_t n_v() const { return static_cast<std::size_t>(incidence.rows()); }
    std::size_t n_t() const { return static_cast<std::size_t>(incidence.cols()); }

    /// Builds E from (from, to) bus pairs, zero-based.
    static Topology from_lines(std::size_t n_v, const std::vector<std::pair<std::size_t, std::size_t>>& lines) {
        Topology t;
        t.incidence = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_v), static_cast<Eigen::Index>(lines.size()));
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const auto [from, to] = lines[k];
            if (from >= n_v || to >= n_v) {
                throw Error(ErrorKind::invalid_argument, "Topology::from_lines: bus index out of range");
            }
            t.incidence(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(k)) += 1.0;
            t.incidence(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(k)) -= 1.0;
        }
        return t;
    }
};

/// Per-bus capacitance and per-line series inductance/resistance.
struct NetworkParams {
    Vector c;
    Vector l_t;
    Vector r_t;
};

struct NetworkState {
    Vector v;    // 2 n_v
    Vector i_t;  // 2 n_t
};

struct NetworkDerivative {
    Vector dv;
    Vector di_t;
};

/// Structural problems with E: entries, column pattern, connectivity.
inline std::optional<std::string> validate_topology(const Topology& t) {
    const auto& e = t.incidence;
    if (e.rows() == 0) return "network has no buses";
    for (Eigen::Index k = 0; k < e.cols(); ++k) {
        int plus = 0;
        int minus = 0;
        for (Eigen::Index b = 0; b < e.rows(); ++b) {
            const double x = e(b, k);
            if (x == 1.0) {
                ++plus;
            } else if (x == -1.0) {
                ++minus;
            } else if (x != 0.0) {
                std::ostringstream msg;
                msg << "incidence entry (" << b + 1 << ", " << k + 1 << ") = " << x << " is not in {-1, 0, 1}";
                return msg.str();
            }
        }
        if (plus != 1 || minus != 1) {
            std::ostringstream msg;
            msg << "line " << k + 1 << " must connect exactly two distinct buses";
            return msg.str();
        }
    }

    // Union-find over lines.
    std::vector<std::size_t> parent(static_cast<std::size_t>(e.rows()));
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (Eigen::Index k = 0; k < e.cols(); ++k) {
        std::size_t ends[2] = {0, 0};
        for (Eigen::Index b = 0; b < e.rows(); ++b) {
            if (e(b, k) == 1.0) ends[0] = static_cast<std::size_t>(b);
            if (e(b, k) == -1.0) ends[1] = static_cast<std::size_t>(b);
        }
        parent[find(ends[0])] = find(ends[1]);
    }
    for (std::size_t b = 1; b < parent.size(); ++b) {
        if (find(b) != find(0)) {
            std::ostringstream msg;
            msg << "network is not connected: bus " << b + 1 << " is unreachable from bus 1";
            return msg.str();
        }
    }
    return std::nullopt;
}

inline std::optional<std::string> validate_network(const NetworkParams& p, const Topology& t) {
    if (static_cast<std::size_t>(p.c.size()) != t.n_v()) return "capacitance count does not match bus count";
    if (static_cast<std::size_t>(p.l_t.size()) != t.n_t() || static_cast<std::size_t>(p.r_t.size()) != t.n_t()) {
        return "line parameter count does not match line count";
    }
    auto positive = [](const Vector& x) { return (x.array() > 0.0).all() && x.allFinite(); };
    if (!positive(p.c)) return "bus capacitances must be > 0";
    if (!positive(p.l_t)) return "line inductances must be > 0";
    if (!positive(p.r_t)) return "line resistances must be > 0";
    return std::nullopt;
}

/// E (x) I_2.
inline Matrix incidence_expand(const Topology& t) {
    if (auto problem = validate_topology(t)) {
        throw Error(ErrorKind::validation, "incidence_expand: " + *problem);
    }
    const auto& e = t.incidence;
    Matrix out = Matrix::Zero(2 * e.rows(), 2 * e.cols());
    for (Eigen::Index b = 0; b < e.rows(); ++b) {
        for (Eigen::Index k = 0; k < e.cols(); ++k) {
            out.block<2, 2>(2 * b, 2 * k) = e(b, k) * Mat2::Identity();
        }
    }
    return out;
}

namespace detail {

/// E (x) I_2 times a stacked line vector, without forming the Kronecker product.
inline Vector incidence_times(const Topology& t, const Vector& line_vec) {
    Vector out = Vector::Zero(2 * t.incidence.rows());
    for (Eigen::Index k = 0; k < t.incidence.cols(); ++k) {
        for (Eigen::Index b = 0; b < t.incidence.rows(); ++b) {
            const double e = t.incidence(b, k);
            if (e != 0.0) out.segment<2>(2 * b) += e * line_vec.segment<2>(2 * k);
        }
    }
    return out;
}

/// (E (x) I_2)^T times a stacked bus vector.
inline Vector incidence_transpose_times(const Topology& t, const Vector& bus_vec) {
    Vector out = Vector::Zero(2 * t.incidence.cols());
    for (Eigen::Index k = 0; k < t.incidence.cols(); ++k) {
        for (Eigen::Index b = 0; b < t.incidence.rows(); ++b) {
            const double e = t.incidence(b, k);
            if (e != 0.0) out.segment<2>(2 * k) += e * bus_vec.segment<2>(2 * b);
        }
    }
    return out;
}

inline void require_size(const Vector& x, std::size_t expected, const char* what) {
    if (static_cast<std::size_t>(x.size()) != expected) {
        std::ostringstream msg;
        msg << what << " has length " << x.size() << ", expected " << expected;
        throw Error(ErrorKind::invalid_argument, msg.str());
    }
}

inline Vector pad_injection(const Vector& i_s, std::size_t n_v) {
    if (i_s.size() % 2 != 0 || static_cast<std::size_t>(i_s.size()) > 2 * n_v) {
        throw Error(ErrorKind::invalid_argument, "stator current vector must have even length <= 2 n_v");
    }
    Vector out = Vector::Zero(2 * static_cast<Eigen::Index>(n_v));
    out.head(i_s.size()) = i_s;
    return out;
}

/// Stacked load currents i_l(v).
inline Vector load_currents(const std::vector<LoadModel>& loads, const Vector& v) {
    Vector out(v.size());
    for (std::size_t b = 0; b < loads.size(); ++b) {
        const auto k = static_cast<Eigen::Index>(2 * b);
        out.segment<2>(k) = load_current(loads[b], v.segment<2>(k), b);
    }
    return out;
}

}  // namespace detail

/// C dv/dt = -E i_T - i_in,  L_T di_T/dt = -R_T i_T + E^T v.
inline NetworkDerivative network_rhs(const NetworkParams& p, const Topology& t, const NetworkState& s,
                                     const Vector& i_in) {
    detail::require_size(s.v, 2 * t.n_v(), "bus voltage vector");
    detail::require_size(s.i_t, 2 * t.n_t(), "line current vector");
    detail::require_size(i_in, 2 * t.n_v(), "bus injection vector");
    detail::require_size(p.c, t.n_v(), "capacitance vector");
    detail::require_size(p.l_t, t.n_t(), "line inductance vector");
    detail::require_size(p.r_t, t.n_t(), "line resistance vector");

    NetworkDerivative out;
    out.dv = -detail::incidence_times(t, s.i_t) - i_in;
    for (std::size_t b = 0; b < t.n_v(); ++b) out.dv.segment<2>(2 * b) /= p.c(b);
    out.di_t = detail::incidence_transpose_times(t, s.v);
    for (std::size_t k = 0; k < t.n_t(); ++k) {
        auto seg = out.di_t.segment<2>(2 * k);
        seg = (seg - p.r_t(k) * s.i_t.segment<2>(2 * k)) / p.l_t(k);
    }
    return out;
}

/// Z_T = R_T + w0 J_T L_T; block k is r_k I + w0 l_k j.
inline Matrix branch_impedance(const NetworkParams& p, double omega0) {
    const auto n_t = p.r_t.size();
    Matrix z = Matrix::Zero(2 * n_t, 2 * n_t);
    for (Eigen::Index k = 0; k < n_t; ++k) {
        z.block<2, 2>(2 * k, 2 * k) = p.r_t(k) * Mat2::Identity() + omega0 * p.l_t(k) * jmat();
    }
    return z;
}

/// Inverse of one branch block: (r I + x j)^{-1} = (r I - x j) / (r^2 + x^2).
inline Mat2 branch_admittance_block(double r, double l, double omega0) {
    const double x = omega0 * l;
    return (r * Mat2::Identity() - x * jmat()) / (r * r + x * x);
}

/// Y_N(v) = Y_l(v) + w0 J_v C + E Z_T^{-1} E^T.
inline Matrix admittance(const NetworkParams& p, const Topology& t, const std::vector<LoadModel>& loads,
                         const Vector& v, double omega0) {
    detail::require_size(v, 2 * t.n_v(), "bus voltage vector");
    if (loads.size() != t.n_v()) throw Error(ErrorKind::invalid_argument, "admittance: one load entry per bus required");
    const auto n_v = static_cast<Eigen::Index>(t.n_v());
    Matrix y = Matrix::Zero(2 * n_v, 2 * n_v);
    for (Eigen::Index b = 0; b < n_v; ++b) {
        y.block<2, 2>(2 * b, 2 * b) = load_admittance(loads[static_cast<std::size_t>(b)], v.segment<2>(2 * b),
                                                      static_cast<std::size_t>(b)) +
                                      omega0 * p.c(b) * jmat();
    }
    for (Eigen::Index k = 0; k < t.incidence.cols(); ++k) {
        const Mat2 yk = branch_admittance_block(p.r_t(k), p.l_t(k), omega0);
        for (Eigen::Index a = 0; a < n_v; ++a) {
            const double ea = t.incidence(a, k);
            if (ea == 0.0) continue;
            for (Eigen::Index b = 0; b < n_v; ++b) {
                const double eb = t.incidence(b, k);
                if (eb != 0.0) y.block<2, 2>(2 * a, 2 * b) += ea * eb * yk;
            }
        }
    }
    return y;
}

/// rho_N: Kirchhoff current law at every bus and voltage law over every line.
inline Vector network_residual(const NetworkParams& p, const Topology& t, const std::vector<LoadModel>& loads,
                               const Vector& i_s, const Vector& v, const Vector& i_t, double omega0) {
    detail::require_size(v, 2 * t.n_v(), "bus voltage vector");
    detail::require_size(i_t, 2 * t.n_t(), "line current vector");
    if (loads.size() != t.n_v()) throw Error(ErrorKind::invalid_argument, "network_residual: one load entry per bus required");

    const auto n_v2 = static_cast<Eigen::Index>(2 * t.n_v());
    Vector out(n_v2 + static_cast<Eigen::Index>(2 * t.n_t()));
    Vector bus = detail::load_currents(loads, v) + detail::pad_injection(i_s, t.n_v()) + detail::incidence_times(t, i_t);
    for (std::size_t b = 0; b < t.n_v(); ++b) {
        bus.segment<2>(2 * b) += omega0 * p.c(b) * jmul(v.segment<2>(2 * b));
    }
    out.head(n_v2) = bus;

    Vector line = -detail::incidence_transpose_times(t, v);
    for (std::size_t k = 0; k < t.n_t(); ++k) {
        const Vec2 ik = i_t.segment<2>(2 * k);
        line.segment<2>(2 * k) += p.r_t(k) * ik + omega0 * p.l_t(k) * jmul(ik);
    }
    out.tail(line.size()) = line;
    return out;
}

/// Y_N(v) v + (i_s, 0); zero exactly on the nodal balance set.
inline Vector nodal_balance_residual(const NetworkParams& p, const Topology& t, const std::vector<LoadModel>& loads,
                                     const Vector& i_s, const Vector& v, double omega0) {
    return admittance(p, t, loads, v, omega0) * v + detail::pad_injection(i_s, t.n_v());
}

/// i_T = Z_T^{-1} E^T v, block by block.
inline Vector line_currents_from_voltages(const NetworkParams& p, const Topology& t, const Vector& v, double omega0) {
    Vector out = detail::incidence_transpose_times(t, v);
    for (std::size_t k = 0; k < t.n_t(); ++k) {
        out.segment<2>(2 * k) = branch_admittance_block(p.r_t(k), p.l_t(k), omega0) * out.segment<2>(2 * k);
    }
    return out;
}

}  // namespace gridstate

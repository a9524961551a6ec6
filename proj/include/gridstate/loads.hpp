#pragma once

// Static loads of the form i_l = (g(|v|) I + b(|v|) j) v.
//
// These are exactly the loads whose current rotates with the bus voltage, which
// is what a synchronous steady state needs. MatrixLoad is the odd one out: an
// arbitrary constant 2x2 admittance used to probe models outside that class.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"

namespace gridstate {

inline constexpr double kDefaultLoadVoltageFloor = 1e-3;

struct NoLoad {};

/// Constant admittance g + j b (S).
struct ImpedanceLoad {
    double g = 0.0;
    double b = 0.0;
};

/// Constant current magnitude: g = c_g/|v|, b = c_b/|v|.
struct CurrentLoad {
    double c_g = 0.0;
    double c_b = 0.0;
    double v_min = kDefaultLoadVoltageFloor;
};

/// Constant power: g = P/|v|^2, b = -Q/|v|^2.
struct PowerLoad {
    double p = 0.0;
    double q = 0.0;
    double v_min = kDefaultLoadVoltageFloor;
};

/// i_l = y v for a fixed y. Rotation-equivariant only when y = g I + b j.
struct MatrixLoad {
    Mat2 y = Mat2::Zero();
};

using LoadModel = std::variant<NoLoad, ImpedanceLoad, CurrentLoad, PowerLoad, MatrixLoad>;

inline constexpr std::size_t kNoBus = std::numeric_limits<std::size_t>::max();

namespace detail {
inline void check_floor(double norm, double v_min, std::size_t bus) {
    if (!(norm >= v_min)) {
        std::ostringstream msg;
        msg << "load voltage |v| = " << norm << " below floor " << v_min;
        if (bus != kNoBus) msg << " at bus " << bus + 1;
        throw Error(ErrorKind::domain, msg.str());
    }
}
}  // namespace detail

/// Y_l(|v|), the 2x2 admittance block of the load at voltage v.
inline Mat2 load_admittance(const LoadModel& model, const Vec2& v, std::size_t bus = kNoBus) {
    const double norm = v.norm();
    return std::visit(
        [&](const auto& m) -> Mat2 {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, NoLoad>) {
                return Mat2::Zero();
            } else if constexpr (std::is_same_v<T, ImpedanceLoad>) {
                return m.g * Mat2::Identity() + m.b * jmat();
            } else if constexpr (std::is_same_v<T, CurrentLoad>) {
                detail::check_floor(norm, m.v_min, bus);
                return (m.c_g / norm) * Mat2::Identity() + (m.c_b / norm) * jmat();
            } else if constexpr (std::is_same_v<T, PowerLoad>) {
                detail::check_floor(norm, m.v_min, bus);
                const double n2 = norm * norm;
                return (m.p / n2) * Mat2::Identity() - (m.q / n2) * jmat();
            } else {
                return m.y;
            }
        },
        model);
}

inline Vec2 load_current(const LoadModel& model, const Vec2& v, std::size_t bus = kNoBus) {
    return load_admittance(model, v, bus) * v;
}

struct LoadPower {
    double p = 0.0;  // W
    double q = 0.0;  // var
};

/// Active/reactive power drawn: P = i_l^T v, Q = -i_l^T (j v).
inline LoadPower load_power(const LoadModel& model, const Vec2& v, std::size_t bus = kNoBus) {
    const Vec2 i = load_current(model, v, bus);
    return {i.dot(v), -i.dot(jmul(v))};
}

/// max over a uniform phi grid of |i_l(R(phi) v) - R(phi) i_l(v)|.
inline double equivariance_defect(const LoadModel& model, const Vec2& v, std::size_t n_samples) {
    if (n_samples == 0) {
        throw Error(ErrorKind::invalid_argument, "equivariance_defect: n_samples must be >= 1");
    }
    const Vec2 base = load_current(model, v);
    double worst = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_samples);
        const Mat2 r = rot(phi);
        worst = std::max(worst, (load_current(model, r * v) - r * base).norm());
    }
    return worst;
}

/// Parameter-level checks: g >= 0 everywhere and a positive voltage floor.
inline std::optional<std::string> validate_load(const LoadModel& model) {
    return std::visit(
        [](const auto& m) -> std::optional<std::string> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ImpedanceLoad>) {
                if (!std::isfinite(m.g) || !std::isfinite(m.b)) return "impedance load parameters must be finite";
                if (m.g < 0.0) return "impedance load conductance g must be >= 0";
            } else if constexpr (std::is_same_v<T, CurrentLoad>) {
                if (!std::isfinite(m.c_g) || !std::isfinite(m.c_b)) return "current load parameters must be finite";
                if (m.c_g < 0.0) return "current load c_g must be >= 0";
                if (!(m.v_min > 0.0)) return "current load v_min must be > 0";
            } else if constexpr (std::is_same_v<T, PowerLoad>) {
                if (!std::isfinite(m.p) || !std::isfinite(m.q)) return "power load parameters must be finite";
                if (m.p < 0.0) return "power load P must be >= 0";
                if (!(m.v_min > 0.0)) return "power load v_min must be > 0";
            }
            return std::nullopt;
        },
        model);
}

}  // namespace gridstate

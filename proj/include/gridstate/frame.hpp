#pragma once

// Planar rotation primitives in the stationary alpha-beta frame.
//
// The 2x2 matrix j = R(pi/2) plays the role of the imaginary unit; the block
// operators I_n (x) j and I_n (x) diag(j, 0_3) act on stacked bus/line vectors
// and stacked machine current vectors respectively.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "gridstate/error.hpp"

namespace gridstate {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// alpha-beta component pair (volts or amperes depending on context).
using PlanarVec = Vec2;

namespace detail {
inline void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::invalid_argument, std::string(what) + " must be finite");
    }
}
}  // namespace detail

/// R(theta) = [[cos, -sin], [sin, cos]].
inline Mat2 rot(double theta) {
    detail::require_finite(theta, "rotation angle");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

/// r(theta) = (cos, sin).
inline Vec2 rvec(double theta) {
    detail::require_finite(theta, "rotation angle");
    return Vec2(std::cos(theta), std::sin(theta));
}

/// The 90 degree rotation j.
inline Mat2 jmat() {
    Mat2 j;
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

/// j applied to a planar vector without forming the matrix.
inline Vec2 jmul(const Vec2& a) { return Vec2(-a.y(), a.x()); }

/// diag(j, 0_3x3), the rotation generator of one machine's current vector.
inline Mat5 machine_j() {
    Mat5 m = Mat5::Zero();
    m.topLeftCorner<2, 2>() = jmat();
    return m;
}

/// I_n (x) j.
inline Matrix block_rotation_generator(std::size_t n) {
    if (n == 0) {
        throw Error(ErrorKind::invalid_argument, "block_rotation_generator: n must be >= 1");
    }
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        out.block<2, 2>(2 * k, 2 * k) = jmat();
    }
    return out;
}

/// I_{n_g} (x) diag(j, 0_3x3).
inline Matrix machine_rotation_generator(std::size_t n_g) {
    if (n_g == 0) {
        throw Error(ErrorKind::invalid_argument, "machine_rotation_generator: n_g must be >= 1");
    }
    Matrix out = Matrix::Zero(5 * n_g, 5 * n_g);
    for (std::size_t k = 0; k < n_g; ++k) {
        out.block<5, 5>(5 * k, 5 * k) = machine_j();
    }
    return out;
}

/// Applies (I_n (x) R(phi)) to a stacked vector of planar pairs.
inline Vector rotate_pairs(const Vector& stacked, double phi) {
    const Mat2 r = rot(phi);
    Vector out(stacked.size());
    for (Eigen::Index k = 0; k + 1 < stacked.size(); k += 2) {
        out.segment<2>(k) = r * stacked.segment<2>(k);
    }
    return out;
}

/// Applies (I_n (x) j) to a stacked vector of planar pairs.
inline Vector j_pairs(const Vector& stacked) {
    Vector out(stacked.size());
    for (Eigen::Index k = 0; k + 1 < stacked.size(); k += 2) {
        out(k) = -stacked(k + 1);
        out(k + 1) = stacked(k);
    }
    return out;
}

/// Wraps to (-pi, pi]. Angles are kept unwrapped internally; this is for reporting.
inline double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::remainder(theta, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    return w;
}

}  // namespace gridstate

#pragma once

// Seeded numeric checks of the structural identities the model relies on.
// Every check returns a relative error; the suite records the worst one over
// all instances against a fixed tolerance.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/loads.hpp"
#include "gridstate/machine.hpp"
#include "gridstate/network.hpp"
#include "gridstate/steady_state.hpp"
#include "gridstate/system.hpp"

namespace gridstate {

inline constexpr double kIdentityStep = 1e-6;

/// Random but valid machine parameters. Inductances are O(1) in arbitrary units.
inline MachineParams random_machine_params(std::mt19937_64& rng, bool salient) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    for (int attempt = 0; attempt < 1000; ++attempt) {
        MachineParams p;
        p.m = in(0.5, 2.0);
        p.d = in(0.01, 0.1);
        p.r_s = in(0.01, 0.1);
        p.r_f = in(0.05, 0.5);
        p.r_d = in(0.05, 0.5);
        p.r_q = in(0.05, 0.5);
        p.l_s = in(0.5, 2.0);
        p.l_sa = salient ? in(0.05, 0.3) * p.l_s : 0.0;
        p.l_f = in(1.0, 3.0);
        p.l_d = in(0.5, 2.0);
        p.l_q = in(0.5, 2.0);
        p.l_fd = in(0.05, 0.4) * std::sqrt(p.l_f * p.l_d);
        p.l_sf = in(0.1, 0.6) * std::sqrt(p.l_s * p.l_f);
        p.l_sd = in(0.05, 0.3) * std::sqrt(p.l_s * p.l_d);
        p.l_sq = in(0.05, 0.3) * std::sqrt(p.l_s * p.l_q);
        if (!validate_params(p)) return p;
    }
    throw Error(ErrorKind::invalid_argument, "random_machine_params: no valid sample found");
}

/// Relative error of  w0 dtau/dtheta + (dtau/di) (w0 J i) = 0.
inline double torque_identity_error(const MachineParams& p, double theta, const Vec5& i, double omega0,
                                    double h = kIdentityStep) {
    const Mat5 jm = machine_j();
    const double ds = h * std::max(1.0, i.norm());
    const Vec5 dir = jm * i;
    const double d_theta =
        (electrical_torque(p, theta + h, i) - electrical_torque(p, theta - h, i)) / (2.0 * h);
    const double d_i =
        (electrical_torque(p, theta, i + ds * dir) - electrical_torque(p, theta, i - ds * dir)) / (2.0 * ds);
    const double ref = std::abs(omega0) * inductance_matrix(p, theta).cwiseAbs().maxCoeff() * i.squaredNorm();
    if (ref == 0.0) return 0.0;
    return std::abs(omega0 * d_theta + omega0 * d_i) / ref;
}

/// Relative error of  w0 dv/dtheta + (dv/di) (w0 J i) = w0 J v_ind.
inline double induced_voltage_identity_error(const MachineParams& p, double theta, double omega, const Vec5& i,
                                             double omega0, double h = kIdentityStep) {
    const Mat5 jm = machine_j();
    const double ds = h * std::max(1.0, i.norm());
    const Vec5 dir = jm * i;
    const Vec5 d_theta =
        (induced_voltage(p, theta + h, omega, i) - induced_voltage(p, theta - h, omega, i)) / (2.0 * h);
    const Vec5 d_i =
        (induced_voltage(p, theta, omega, i + ds * dir) - induced_voltage(p, theta, omega, i - ds * dir)) / (2.0 * ds);
    const Vec5 rhs = omega0 * (jm * induced_voltage(p, theta, omega, i));
    const double ref = std::abs(omega0 * omega) * inductance_matrix(p, theta).cwiseAbs().maxCoeff() * i.norm();
    if (ref == 0.0) return 0.0;
    return (omega0 * d_theta + omega0 * d_i - rhs).cwiseAbs().maxCoeff() / ref;
}

/// |I_v^T J_v - J_g I_v^T|_inf for the given sizes.
inline double voltage_indicator_commutation_error(std::size_t n_g, std::size_t n_v) {
    const Matrix iv = voltage_indicator(n_g, n_v);
    const Matrix lhs = iv.transpose() * block_rotation_generator(n_v);
    const Matrix rhs = machine_rotation_generator(n_g) * iv.transpose();
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

/// |E J_T - J_v E|_inf.
inline double incidence_commutation_error(const Topology& t) {
    const Matrix e = incidence_expand(t);
    return (e * block_rotation_generator(t.n_t()) - block_rotation_generator(t.n_v()) * e).cwiseAbs().maxCoeff();
}

/// |J_g I_f|_inf.
inline double field_indicator_error(std::size_t n_g) {
    return (machine_rotation_generator(n_g) * field_indicator(n_g)).cwiseAbs().maxCoeff();
}

/// Worst violation of eps(theta)^T eps(theta) >= (alpha_c - alpha_sa)^2 on a
/// theta grid, relative to (alpha_c + alpha_sa)^2. Zero when the bound holds.
inline double ellipse_bound_violation(const Vec2& eta_c, const Vec2& eta_sa, std::size_t n_theta = 64) {
    const double ac = eta_c.norm();
    const double as = eta_sa.norm();
    const double ref = (ac + as) * (ac + as);
    if (ref == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t k = 0; k < n_theta; ++k) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_theta);
        const double gap = ellipse_point(eta_c, eta_sa, th).squaredNorm() - (ac - as) * (ac - as);
        worst = std::max(worst, -gap / ref);
    }
    return worst;
}

/// | |eps(theta)| - |nu(theta)| | relative to |v| + |Z_s i_s|.
inline double ellipse_norm_error(const MachineParams& p, const Vec2& v, const Vec2& i_s, double omega0, double theta) {
    const auto [eta_c, eta_sa] = recovery_vectors(p, v, i_s, omega0);
    const Vec2 nu = v - stator_impedance(p, theta, omega0) * i_s;
    const double ref = v.norm() + (stator_impedance(p, theta, omega0) * i_s).norm();
    if (ref == 0.0) return 0.0;
    return std::abs(ellipse_point(eta_c, eta_sa, theta).norm() - nu.norm()) / ref;
}

/// |rho - M(x)(f_d - f)|_inf / scale.
inline double residual_consistency_error(const PowerSystem& sys, const Vector& x, const Vector& u, double omega0) {
    const Vector rho = residual(sys, x, u, omega0);
    const Vector alt = mass_matrix(sys, x) * (steady_field(sys, x, omega0) - vector_field(sys, x, u));
    return (rho - alt).cwiseAbs().maxCoeff() / residual_scale(x, u);
}

/// max(asymmetry, -min eigenvalue) of L(theta), relative to its largest entry.
/// Negative values mean L is symmetric positive definite with margin.
inline double inductance_spd_error(const MachineParams& p, double theta) {
    const Mat5 l = inductance_matrix(p, theta);
    const double ref = l.cwiseAbs().maxCoeff();
    const double asym = (l - l.transpose()).cwiseAbs().maxCoeff() / ref;
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat5>(l, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() / ref;
    return std::max(asym, -lmin);
}

/// Random connected topology on n_v buses: a random spanning tree plus extra edges.
inline Topology random_topology(std::mt19937_64& rng, std::size_t n_v, std::size_t extra) {
    std::vector<std::pair<std::size_t, std::size_t>> lines;
    for (std::size_t b = 1; b < n_v; ++b) {
        std::uniform_int_distribution<std::size_t> pick(0, b - 1);
        lines.emplace_back(pick(rng), b);
    }
    if (n_v > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, n_v - 1);
        for (std::size_t e = 0; e < extra; ++e) {
            const std::size_t a = pick(rng);
            std::size_t b = pick(rng);
            if (a == b) b = (a + 1) % n_v;
            lines.emplace_back(a, b);
        }
    }
    return Topology::from_lines(n_v, lines);
}

struct IdentityResult {
    std::string name;
    std::size_t instances = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct IdentityReport {
    std::uint64_t seed = 0;
    std::vector<IdentityResult> results;

    bool all_pass() const {
        return std::all_of(results.begin(), results.end(), [](const IdentityResult& r) { return r.pass; });
    }
};

namespace detail {
class IdentityTally {
public:
    IdentityTally(std::string name, double tol) { r_.name = std::move(name), r_.tolerance = tol; }
    void add(double err) {
        ++r_.instances;
        if (!std::isfinite(err)) {
            r_.max_error = err;
            r_.pass = false;
            return;
        }
        r_.max_error = std::max(r_.max_error, err);
        if (!(err <= r_.tolerance)) r_.pass = false;
    }
    IdentityResult result() const { return r_; }

private:
    IdentityResult r_;
};
}  // namespace detail

struct IdentityOptions {
    std::uint64_t seed = 1;
    std::size_t instances = 100;
    double v_nominal = 1.0;  // magnitude for random bus voltages
    double i_nominal = 1.0;  // magnitude for random currents
};

/// Runs every identity over opt.instances seeded random instances built around sys.
inline IdentityReport run_identities(const PowerSystem& sys, double omega0, const IdentityOptions& opt = {}) {
    if (opt.instances == 0) throw Error(ErrorKind::invalid_argument, "run_identities: need at least one instance");
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    auto rand_vec = [&](Eigen::Index n, double mag) {
        Vector x(n);
        for (Eigen::Index k = 0; k < n; ++k) x(k) = mag * unit(rng);
        return x;
    };
    auto rand_phasor = [&](double mag) { return phasor(mag * (1.0 + 0.5 * unit(rng)), angle(rng)); };

    detail::IdentityTally torque("torque directional derivative", 1e-6);
    detail::IdentityTally vind("induced-voltage directional derivative", 1e-6);
    detail::IdentityTally iv("I_v^T J_v = J_g I_v^T", 1e-14);
    detail::IdentityTally inc("E J_T = J_v E", 1e-14);
    detail::IdentityTally jf("J_g I_f = 0", 0.0);
    detail::IdentityTally ell("ellipse lower bound", 1e-12);
    detail::IdentityTally elln("|eps(theta)| = |nu(theta)|", 1e-12);
    detail::IdentityTally load("load rotation equivariance", kLoadEquivarianceTol);
    detail::IdentityTally cons("rho = M(x)(f_d - f)", 1e-10);
    detail::IdentityTally spd("L(theta) symmetric positive definite", 0.0);

    const auto layout = sys.layout();
    const double w0 = omega0 != 0.0 ? omega0 : 1.0;

    // The system's own structure first, then random sizes.
    iv.add(voltage_indicator_commutation_error(sys.n_g(), sys.n_v()));
    inc.add(incidence_commutation_error(sys.topology));
    jf.add(field_indicator_error(sys.n_g()));

    for (std::size_t s = 0; s < opt.instances; ++s) {
        const std::size_t k = s % sys.n_g();
        const auto& p = sys.machines[k];
        const double theta = angle(rng);
        const Vec5 i = rand_vec(5, opt.i_nominal);
        const double omega = w0 * (1.0 + 0.1 * unit(rng));

        torque.add(torque_identity_error(p, theta, i, w0));
        vind.add(induced_voltage_identity_error(p, theta, omega, i, w0));
        spd.add(inductance_spd_error(p, theta));

        const Vec2 v = rand_phasor(opt.v_nominal);
        const Vec2 i_s = rand_phasor(opt.i_nominal);
        const auto [eta_c, eta_sa] = recovery_vectors(p, v, i_s, w0);
        ell.add(ellipse_bound_violation(eta_c, eta_sa));
        elln.add(ellipse_norm_error(p, v, i_s, w0, theta));

        std::uniform_int_distribution<std::size_t> size(1, 4);
        const std::size_t n_g = size(rng);
        const std::size_t n_v = std::max<std::size_t>(2, n_g + size(rng) - 1);
        iv.add(voltage_indicator_commutation_error(n_g, n_v));
        inc.add(incidence_commutation_error(random_topology(rng, n_v, size(rng) - 1)));
        jf.add(field_indicator_error(n_g));

        for (std::size_t b = 0; b < sys.n_v(); ++b) {
            const Vec2 vb = rand_phasor(opt.v_nominal);
            const double ref = std::max(1.0, load_current(sys.loads[b], vb).norm());
            load.add(equivariance_defect(sys.loads[b], vb, 16) / ref);
        }

        Vector x = rand_vec(static_cast<Eigen::Index>(layout.size()), opt.i_nominal);
        for (std::size_t g = 0; g < layout.n_g; ++g) {
            const auto gi = static_cast<Eigen::Index>(g);
            x(layout.theta() + gi) = angle(rng);
            x(layout.omega() + gi) = w0 * (1.0 + 0.1 * unit(rng));
        }
        for (std::size_t b = 0; b < layout.n_v; ++b) x.segment<2>(layout.voltage(b)) = rand_phasor(opt.v_nominal);
        const Vector u = rand_vec(static_cast<Eigen::Index>(layout.input_size()), opt.i_nominal);
        cons.add(residual_consistency_error(sys, x, u, w0));
    }

    IdentityReport rep;
    rep.seed = opt.seed;
    for (const auto* t : {&torque, &vind, &iv, &inc, &jf, &ell, &elln, &load, &cons, &spd}) {
        rep.results.push_back(t->result());
    }
    return rep;
}

}  // namespace gridstate

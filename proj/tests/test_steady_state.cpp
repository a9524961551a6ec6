#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace gridstate;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

// nu(theta) = v - r_s i - w0 j L_s(theta) i with L_s written out in cos/sin of 2 theta.
Vec2 nu_oracle(const MachineParams& p, const Vec2& v, const Vec2& i, double w0, double th) {
    const double c = std::cos(2 * th), s = std::sin(2 * th);
    const double lx = (p.l_s + p.l_sa * c) * i.x() + p.l_sa * s * i.y();
    const double ly = p.l_sa * s * i.x() + (p.l_s - p.l_sa * c) * i.y();
    return v - p.r_s * i - w0 * Vec2(-ly, lx);
}

// Component of nu(theta) along r(theta); it vanishes exactly where nu is parallel to j r(theta).
double radial(const MachineParams& p, const Vec2& v, const Vec2& i, double w0, double th) {
    return nu_oracle(p, v, i, w0, th).dot(Vec2(std::cos(th), std::sin(th)));
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, 2 * kPi)); }

}  // namespace

TEST_CASE("round rotor recovery, worked example") {
    auto p = support::test_machine(0.0);
    p.l_sf = 1.0;
    const auto plus = recover_machine(p, Vec2(1, 0), Vec2::Zero(), 1.0, 1);
    CHECK_THAT(plus.theta, WithinAbs(-kPi / 2, 1e-14));
    CHECK_THAT(plus.i_f, WithinAbs(1.0, 1e-14));
    CHECK(plus.kase == RecoveryCase::regular);
    const auto minus = recover_machine(p, Vec2(1, 0), Vec2::Zero(), 1.0, -1);
    CHECK_THAT(minus.theta, WithinAbs(kPi / 2, 1e-14));
    CHECK_THAT(minus.i_f, WithinAbs(-1.0, 1e-14));
    CHECK(plus.v_f == p.r_f * plus.i_f);
    CHECK_THAT(plus.tau_m, WithinAbs(p.d, 1e-15));  // no stator current, no electrical torque
    CHECK_THROWS_AS(recover_machine(p, Vec2(1, 0), Vec2::Zero(), 1.0, 0), Error);
}

TEST_CASE("recovery on random salient and round instances brackets the grid roots") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> w(10.0, 400.0);
    for (int k = 0; k < 100; ++k) {
        const bool salient = k % 2 == 0;
        const auto p = random_machine_params(rng, salient);
        const double w0 = w(rng);
        const Vec2 v = support::random_vector(rng, 2, 1.0);
        const Vec2 i = support::random_vector(rng, 2, 1.0) / (w0 * p.l_s);
        // Grid roots of the radial component over one turn.
        std::vector<double> roots;
        const int n = 3600;
        double prev = radial(p, v, i, w0, 0.0);
        for (int g = 1; g <= n; ++g) {
            const double th = 2 * kPi * g / n;
            const double cur = radial(p, v, i, w0, th);
            if ((prev < 0) != (cur < 0)) roots.push_back(th - kPi / n);
            prev = cur;
        }
        REQUIRE(roots.size() == 2);
        for (int sigma : {1, -1}) {
            const auto rec = recover_machine(p, v, i, w0, sigma);
            const Vec2 nu = nu_oracle(p, v, i, w0, rec.theta);
            const double ref = v.norm() + (nu - v).norm();
            const Vec2 jr(-std::sin(rec.theta), std::cos(rec.theta));
            CHECK(std::abs(w0 * p.l_sf * rec.i_f - sigma * nu.norm()) <= 1e-9 * ref);
            CHECK((jr * nu.norm() - sigma * nu).norm() <= 1e-9 * ref);
            CHECK((w0 * p.l_sf * rec.i_f * jr - nu).norm() <= 1e-9 * ref);
            CHECK(sigma * rec.i_f > 0);
            CHECK(std::min(angle_gap(rec.theta, roots[0]), angle_gap(rec.theta, roots[1])) <= 2 * kPi / n);
            CHECK(rec.i_d == 0.0);
            CHECK(rec.i_q == 0.0);
        }
    }
}

TEST_CASE("ellipse vectors reproduce |nu|") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 50; ++k) {
        const auto p = random_machine_params(rng, true);
        const Vec2 v = support::random_vector(rng, 2), i = support::random_vector(rng, 2);
        const auto [eta_c, eta_sa] = recovery_vectors(p, v, i, 50.0);
        for (double th : {0.0, 0.7, 2.0, -2.5}) {
            CHECK_THAT(ellipse_point(eta_c, eta_sa, th).norm(), WithinRel(nu_oracle(p, v, i, 50.0, th).norm(), 1e-12));
        }
    }
}

TEST_CASE("degenerate recovery cases") {
    const auto p = support::test_machine(0.002);
    SECTION("w0 = 0 with nonzero nu is infeasible") {
        try {
            recover_machine(p, Vec2(1, 0), Vec2::Zero(), 0.0, 1);
            FAIL("expected infeasible");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::infeasible);
            CHECK(std::string(e.what()).find("omega_zero") != std::string::npos);
        }
    }
    SECTION("w0 = 0 with v = R_s i_s") {
        const Vec2 i(0.3, -0.2);
        const auto rec = recover_machine(p, p.r_s * i, i, 0.0, 1);
        CHECK(rec.kase == RecoveryCase::omega_zero);
        CHECK_FALSE(rec.warning.empty());
    }
    SECTION("nu = 0") {
        const auto rec = recover_machine(p, Vec2::Zero(), Vec2::Zero(), 100.0, 1);
        CHECK(rec.kase == RecoveryCase::nu_zero);
        CHECK(rec.i_f == 0.0);
        CHECK_FALSE(rec.warning.empty());
    }
    SECTION("alpha_c = alpha_sa") {
        // i = (1, 0), w0 = 1: eta_sa = (-l_sa, 0). Pick v so that eta_c = (0, l_sa).
        const Vec2 i(1, 0);
        const Vec2 v = Vec2(-p.l_sa, 0.0) + p.r_s * i + p.l_s * Vec2(0, 1);
        const auto rec = recover_machine(p, v, i, 1.0, 1);
        CHECK(rec.kase == RecoveryCase::alpha_equal);
        CHECK_THAT(rec.alpha_c, WithinRel(rec.alpha_sa, 1e-12));
        CHECK_FALSE(rec.warning.empty());
        const Vec2 nu = nu_oracle(p, v, i, 1.0, rec.theta);
        CHECK((p.l_sf * rec.i_f * Vec2(-std::sin(rec.theta), std::cos(rec.theta)) - nu).norm() <= 1e-9 * v.norm());
    }
}

TEST_CASE("network solve on two buses, resistive") {
    auto sys = support::two_bus(ImpedanceLoad{1.0, 0.0}, 1.0, 1e-3, 1e-5);
    OperatingSpec spec{0.0, {Vec2(2.0, 1.0)}, {1}, {}};
    spec.newton.tol = 1e-14;
    const auto net = solve_network(sys, spec);
    CHECK_THAT(net.v(2), WithinAbs(1.0, 1e-12));
    CHECK_THAT(net.v(3), WithinAbs(0.5, 1e-12));
    // i_s leaves the generator bus: -(v1 - v2)/r.
    CHECK_THAT(net.i_s(0), WithinAbs(-1.0, 1e-12));
    CHECK_THAT(net.i_t(0), WithinAbs(1.0, 1e-12));
    CHECK(net.residual_norm <= 1e-12);
}

TEST_CASE("network solve matches complex phasor oracle on the canonical system") {
    const auto f = support::canonical();
    const auto& sys = f.system;
    const double w0 = f.spec.omega0;
    const auto net = solve_network(sys, f.spec);

    std::vector<std::pair<std::size_t, std::size_t>> lines;
    std::vector<double> r, l, c;
    for (Eigen::Index k = 0; k < sys.topology.incidence.cols(); ++k) {
        std::size_t a = 0, b = 0;
        for (Eigen::Index q = 0; q < sys.topology.incidence.rows(); ++q) {
            if (sys.topology.incidence(q, k) > 0) a = static_cast<std::size_t>(q);
            if (sys.topology.incidence(q, k) < 0) b = static_cast<std::size_t>(q);
        }
        lines.emplace_back(a, b);
        r.push_back(sys.network.r_t(k));
        l.push_back(sys.network.l_t(k));
    }
    std::vector<std::complex<double>> shunt;
    for (std::size_t b = 0; b < sys.n_v(); ++b) {
        c.push_back(sys.network.c(static_cast<Eigen::Index>(b)));
        if (const auto* z = std::get_if<ImpedanceLoad>(&sys.loads[b])) {
            shunt.emplace_back(z->g, z->b);
        } else {
            shunt.emplace_back(0.0, 0.0);
        }
    }
    std::vector<std::size_t> gen_bus;
    std::vector<std::complex<double>> gen_v;
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        gen_bus.push_back(k);
        gen_v.emplace_back(f.spec.generator_voltages[k].x(), f.spec.generator_voltages[k].y());
    }
    const auto ref = support::phasor_solve(sys.n_v(), lines, r, l, c, shunt, gen_bus, gen_v, w0);
    double vmax = 0.0, imax = 0.0;
    for (const auto& z : ref.v) vmax = std::max(vmax, std::abs(z));
    for (const auto& z : ref.i_s) imax = std::max(imax, std::abs(z));
    for (std::size_t b = 0; b < sys.n_v(); ++b) {
        const auto bi = static_cast<Eigen::Index>(2 * b);
        CHECK(std::abs(std::complex<double>(net.v(bi), net.v(bi + 1)) - ref.v[b]) <= 1e-9 * vmax);
    }
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        const auto ki = static_cast<Eigen::Index>(2 * k);
        CHECK(std::abs(std::complex<double>(net.i_s(ki), net.i_s(ki + 1)) - ref.i_s[k]) <= 1e-9 * imax);
    }
}

TEST_CASE("canonical steady state is certified for both polarizations") {
    const auto f = support::canonical();
    auto spec = f.spec;
    const auto plus = compute_steady_state(f.system, spec);
    spec.polarization = {-1, -1};
    const auto minus = compute_steady_state(f.system, spec);
    for (const auto* ss : {&plus, &minus}) {
        const auto rep = verify_steady_state(f.system, *ss);
        CHECK(rep.certificate);
        CHECK(rep.failures.empty());
        CHECK(rep.residual_norm <= kSteadyStateTol);
        CHECK(ss->diagnostics.max() <= 1e-9 * ss->scale);
    }
    const auto layout = f.system.layout();
    for (std::size_t k = 0; k < f.system.n_g(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        CHECK_THAT(angle_gap(plus.x(ki) - minus.x(ki), kPi), WithinAbs(0.0, 1e-9));
        CHECK_THAT(plus.machines[k].i_f, WithinRel(-minus.machines[k].i_f, 1e-9));
        CHECK(plus.x(layout.omega() + ki) == f.spec.omega0);
    }
    // The network part does not depend on the polarization.
    CHECK(plus.x.segment(layout.voltage(), 6) == minus.x.segment(layout.voltage(), 6));
}

TEST_CASE("verification flags broken conditions") {
    const auto f = support::canonical();
    const auto ss = compute_steady_state(f.system, f.spec);
    const auto layout = f.system.layout();

    SECTION("mechanical torque off by one percent") {
        Vector u = ss.u;
        u(0) *= 1.01;
        const Vector rho = residual(f.system, ss.x, u, ss.omega0);
        CHECK_THAT(std::abs(rho(layout.omega())), WithinRel(0.01 * std::abs(ss.u(0)), 1e-6));
        const auto rep = verify_steady_state(f.system, ss.x, u, ss.omega0);
        CHECK_FALSE(rep.machine_conditions);
        CHECK_FALSE(rep.certificate);
    }
    SECTION("rotor speed differs from w0") {
        Vector x = ss.x;
        x(layout.omega() + 1) += 0.5;
        const auto rep = verify_steady_state(f.system, x, ss.u, ss.omega0);
        CHECK_FALSE(rep.certificate);
        CHECK(rep.frequency_offset == -0.5);
        REQUIRE_FALSE(rep.failures.empty());
        CHECK(rep.failures.front().find("frequency") != std::string::npos);
    }
    SECTION("non-conforming load") {
        auto sys = f.system;
        Mat2 y;
        y << 0.1, 0.0, 0.0, 0.2;
        sys.loads[2] = MatrixLoad{y};
        const auto rep = verify_steady_state(sys, ss.x, ss.u, ss.omega0);
        CHECK_FALSE(rep.loads_conforming);
        CHECK_FALSE(rep.inputs_constant);
        CHECK_FALSE(rep.certificate);
        CHECK(rep.load_defects[2] > 1e-3);
        CHECK(rep.load_defects[0] == 0.0);
    }
    SECTION("damper inductance does not enter the steady state") {
        auto sys = f.system;
        sys.machines[0].l_d *= 1.5;
        sys.machines[1].l_q *= 0.7;
        const Vector a = residual(f.system, ss.x, ss.u, ss.omega0);
        const Vector b = residual(sys, ss.x, ss.u, ss.omega0);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-15 * ss.scale);
    }
}

TEST_CASE("Newton failures are reported") {
    SECTION("iteration budget exhausted") {
        auto sys = support::two_bus(PowerLoad{0.5, 0.2, 0.1});
        OperatingSpec spec{314.0, {Vec2(1.0, 0.0)}, {1}, {}};
        spec.newton.max_iter = 1;
        spec.newton.tol = 1e-14;
        try {
            solve_network(sys, spec);
            FAIL("expected no_convergence");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::no_convergence);
        }
        spec.newton.max_iter = 50;
        spec.newton.tol = 1e-10;
        const auto net = solve_network(sys, spec);
        CHECK(net.iterations > 1);
        CHECK(net.residual_norm <= 1e-10);
    }
    SECTION("load voltage below its floor") {
        auto sys = support::two_bus(PowerLoad{0.5, 0.2, 10.0});
        OperatingSpec spec{314.0, {Vec2(1.0, 0.0)}, {1}, {}};
        try {
            solve_network(sys, spec);
            FAIL("expected domain error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::domain);
            CHECK(std::string(e.what()).find("bus 2") != std::string::npos);
        }
    }
    SECTION("bad options") {
        auto sys = support::two_bus(NoLoad{});
        OperatingSpec spec{314.0, {Vec2(1.0, 0.0)}, {1}, {}};
        spec.newton.max_iter = 0;
        CHECK_THROWS_AS(solve_network(sys, spec), Error);
        spec.newton.max_iter = 5;
        spec.generator_voltages.clear();
        CHECK_THROWS_AS(solve_network(sys, spec), Error);
    }
}

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "gridstate/identities.hpp"
#include "gridstate/machine.hpp"
#include "support.hpp"

using namespace gridstate;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Textbook construction of L(theta) from cos/sin, independent of rot().
Mat5 oracle_inductance(const MachineParams& p, double th) {
    const double c = std::cos(th), s = std::sin(th), c2 = std::cos(2 * th), s2 = std::sin(2 * th);
    Mat5 l;
    l << p.l_s + p.l_sa * c2, p.l_sa * s2, p.l_sf * c, p.l_sd * c, p.l_sq * s,  //
        p.l_sa * s2, p.l_s - p.l_sa * c2, p.l_sf * s, p.l_sd * s, -p.l_sq * c,   //
        p.l_sf * c, p.l_sf * s, p.l_f, p.l_fd, 0,                                 //
        p.l_sd * c, p.l_sd * s, p.l_fd, p.l_d, 0,                                 //
        p.l_sq * s, -p.l_sq * c, 0, 0, p.l_q;
    return l;
}

Mat5 oracle_jj() {
    Mat5 j = Mat5::Zero();
    j(0, 1) = -1;
    j(1, 0) = 1;
    return j;
}

}  // namespace

TEST_CASE("inductance matrix blocks") {
    auto p = support::test_machine(0.0);
    for (double th : {0.0, 0.3, 2.0, -1.1}) {
        CHECK((stator_inductance(p, th) - p.l_s * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-15);
    }
    p.l_sf = 1.0;
    p.l_sd = 0.5;
    p.l_sq = 0.4;
    Eigen::Matrix<double, 2, 3> lm;
    lm << 1, 0.5, 0, 0, 0, -0.4;
    CHECK(mutual_inductance(p, 0.0) == lm);
}

TEST_CASE("inductance matrix matches the trigonometric construction") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
        const auto p = random_machine_params(rng, k % 2 == 0);
        const double th = std::uniform_real_distribution<double>(-7, 7)(rng);
        const Mat5 l = inductance_matrix(p, th);
        CHECK((l - oracle_inductance(p, th)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((l - l.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("L(theta) eigenvalues stay positive on a theta grid") {
    const auto p = support::test_machine(0.002);
    for (int k = 0; k < 360; ++k) {
        const Mat5 l = inductance_matrix(p, 2 * std::numbers::pi * k / 360.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Mat5>(l).eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("electrical torque examples") {
    auto p = support::test_machine(0.0);
    CHECK(electrical_torque(p, 0.4, Vec5::Zero()) == 0.0);

    p.l_s = 1.0;
    p.l_sf = 1.0;
    Vec5 i;
    i << 0, 1, 1, 0, 0;
    // Oracle: 1/2 i^T (L jj + jj^T L) i with explicit matrices.
    const Mat5 l = oracle_inductance(p, 0.0);
    const double oracle = 0.5 * i.dot((l * oracle_jj() + oracle_jj().transpose() * l) * i);
    CHECK_THAT(oracle, WithinAbs(-1.0, 1e-15));
    CHECK_THAT(electrical_torque(p, 0.0, i), WithinAbs(-1.0, 1e-15));
}

TEST_CASE("torque is 2 pi periodic and equals -i^T jj L i") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto p = random_machine_params(rng, true);
        const double th = std::uniform_real_distribution<double>(-3, 3)(rng);
        const Vec5 i = support::random_vector(rng, 5);
        const double t = electrical_torque(p, th, i);
        CHECK_THAT(electrical_torque(p, th + 2 * std::numbers::pi, i), WithinAbs(t, 1e-12));
        CHECK_THAT(-i.dot(oracle_jj() * oracle_inductance(p, th) * i), WithinAbs(t, 1e-12));
    }
}

TEST_CASE("induced voltage") {
    std::mt19937_64 rng(7);
    const auto p = random_machine_params(rng, true);
    const Vec5 i = support::random_vector(rng, 5);
    CHECK(induced_voltage(p, 0.3, 0.0, i).cwiseAbs().maxCoeff() == 0.0);
    CHECK((induced_voltage(p, 0.3, 2.0, i) - 2.0 * induced_voltage(p, 0.3, 1.0, i)).cwiseAbs().maxCoeff() < 1e-13);
    for (int k = 0; k < 20; ++k) {
        const auto q = random_machine_params(rng, k % 2 == 1);
        const double th = std::uniform_real_distribution<double>(-3, 3)(rng);
        const Vec5 ii = support::random_vector(rng, 5);
        const Mat5 l = oracle_inductance(q, th);
        const Vec5 oracle = 1.7 * (l * oracle_jj().transpose() + oracle_jj() * l) * ii;
        CHECK((induced_voltage(q, th, 1.7, ii) - oracle).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("dL/dtheta = jj L - L jj") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) {
        const auto p = random_machine_params(rng, true);
        const double th = std::uniform_real_distribution<double>(-3, 3)(rng);
        const double h = 1e-6;
        const Mat5 fd = (inductance_matrix(p, th + h) - inductance_matrix(p, th - h)) / (2 * h);
        const Mat5 l = inductance_matrix(p, th);
        CHECK((fd - (oracle_jj() * l - l * oracle_jj())).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("directional derivative identities over random instances") {
    std::mt19937_64 rng(13);
    for (int k = 0; k < 120; ++k) {
        const auto p = random_machine_params(rng, k % 2 == 0);
        const double th = std::uniform_real_distribution<double>(-4, 4)(rng);
        const Vec5 i = support::random_vector(rng, 5, 10.0);
        const double w0 = 100 * std::numbers::pi;
        CHECK(torque_identity_error(p, th, i, w0) <= 1e-6);
        CHECK(induced_voltage_identity_error(p, th, w0 * 1.01, i, w0) <= 1e-6);
    }
}

TEST_CASE("machine_rhs") {
    const auto p = support::test_machine(0.002);
    MachineState rest;
    rest.theta = 0.8;
    CHECK(machine_rhs(p, rest, Vec2::Zero(), 0.0, 0.0).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(17);
    for (int k = 0; k < 20; ++k) {
        MachineState s;
        s.theta = std::uniform_real_distribution<double>(-3, 3)(rng);
        s.omega = 300 + 20 * std::uniform_real_distribution<double>(0, 1)(rng);
        s.i = support::random_vector(rng, 5, 5.0);
        const Vec2 v = support::random_vector(rng, 2, 100.0);
        const double tau_m = 3.0, v_f = 7.0;
        const Vec7 d = machine_rhs(p, s, v, tau_m, v_f);
        CHECK(d(0) == s.omega);
        CHECK_THAT(d(1), WithinRel((tau_m - p.d * s.omega - electrical_torque(p, s.theta, s.i)) / p.m, 1e-12));
        // L di/dt must reproduce the winding equation right-hand side.
        Vec5 rhs = -resistance_matrix(p) * s.i - induced_voltage(p, s.theta, s.omega, s.i);
        rhs.head<2>() += v;
        rhs(2) += v_f;
        const Vec5 lhs = inductance_matrix(p, s.theta) * d.tail<5>();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * rhs.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("validate_params") {
    auto p = support::test_machine(0.0);
    CHECK_FALSE(validate_params(p).has_value());

    auto bad = p;
    bad.m = 0.0;
    auto v = validate_params(bad);
    REQUIRE(v.has_value());
    CHECK(v->field == "inertia");
    CHECK_FALSE(v->theta.has_value());

    bad = p;
    bad.l_sa = bad.l_s;
    v = validate_params(bad);
    REQUIRE(v.has_value());
    CHECK(v->theta.has_value());
    REQUIRE(v->eigenvalue.has_value());
    CHECK(*v->eigenvalue <= 1e-12 * p.l_f);

    bad = p;
    bad.l_sf = 0.3;  // l_s l_f < l_sf^2
    v = validate_params(bad);
    REQUIRE(v.has_value());
    CHECK(v->theta.has_value());

    bad = p;
    bad.l_sa = -1e-3;
    v = validate_params(bad);
    REQUIRE(v.has_value());
    CHECK(v->field == "l_sa");
}

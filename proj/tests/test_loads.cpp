#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "gridstate/loads.hpp"
#include "support.hpp"

using namespace gridstate;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("load current examples") {
    CHECK(load_current(NoLoad{}, Vec2(3, 4)) == Vec2::Zero());
    const Vec2 i = load_current(ImpedanceLoad{1.0, 0.0}, Vec2(2, 0));
    CHECK(i == Vec2(2, 0));
    CHECK(i.dot(Vec2(2, 0)) == 4.0);
    const Vec2 ip = load_current(PowerLoad{1.0, 0.0}, Vec2(2, 0));
    CHECK((ip - Vec2(0.5, 0)).norm() < 1e-15);
    CHECK_THAT(ip.dot(Vec2(2, 0)), WithinAbs(1.0, 1e-15));
    CHECK(load_current(ImpedanceLoad{0.3, -0.2}, Vec2::Zero()) == Vec2::Zero());
}

TEST_CASE("current load magnitude depends on |v| only") {
    const CurrentLoad m{2.0, 1.0};
    for (double r : {0.5, 1.0, 7.0}) {
        for (double a : {0.0, 1.0, -2.5}) {
            CHECK_THAT(load_current(m, r * rvec(a)).norm(), WithinRel(std::sqrt(5.0), 1e-14));
        }
    }
}

TEST_CASE("voltage floor raises a domain error naming the bus") {
    try {
        load_current(PowerLoad{1.0, 0.0, 0.01}, Vec2(1e-3, 0), 4);
        FAIL("expected a domain error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::domain);
        CHECK(std::string(e.what()).find("bus 5") != std::string::npos);
    }
    CHECK_THROWS_AS(load_current(CurrentLoad{1.0, 0.0}, Vec2::Zero()), Error);
}

TEST_CASE("load power") {
    auto pq = load_power(ImpedanceLoad{1.0, 0.0}, Vec2(1, 0));
    CHECK_THAT(pq.p, WithinAbs(1.0, 1e-15));
    CHECK_THAT(pq.q, WithinAbs(0.0, 1e-15));
    for (double r : {0.1, 1.0, 230.0}) {
        pq = load_power(PowerLoad{3.0, -1.0}, r * rvec(0.7));
        CHECK_THAT(pq.p, WithinRel(3.0, 1e-13));
        CHECK_THAT(pq.q, WithinRel(-1.0, 1e-13));
    }
    // Q = -b |v|^2 for the impedance variant.
    pq = load_power(ImpedanceLoad{0.0, 0.5}, Vec2(0, 2));
    CHECK_THAT(pq.q, WithinAbs(-2.0, 1e-15));
}

TEST_CASE("P equals i_l^T v over random cases") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int k = 0; k < 100; ++k) {
        const Vec2 v = u(rng) * rvec(6.0 * u(rng));
        const LoadModel models[] = {ImpedanceLoad{u(rng), u(rng) - 1.5}, CurrentLoad{u(rng), u(rng) - 1.5},
                                    PowerLoad{u(rng), u(rng) - 1.5}};
        for (const auto& m : models) {
            CHECK_THAT(load_power(m, v).p, WithinAbs(load_current(m, v).dot(v), 1e-12));
            CHECK(load_current(m, v).dot(v) >= 0.0);
        }
    }
}

TEST_CASE("shipped variants are rotation equivariant") {
    CHECK(equivariance_defect(ImpedanceLoad{0.4, -0.3}, Vec2(1.3, -0.2), 64) <= 1e-12);
    CHECK(equivariance_defect(PowerLoad{2.0, 1.0}, Vec2(1, 0), 64) <= 1e-12);
    CHECK(equivariance_defect(CurrentLoad{2.0, -1.0}, Vec2(0.3, 0.4), 64) <= 1e-12);
    CHECK(equivariance_defect(NoLoad{}, Vec2(0.3, 0.4), 64) == 0.0);
}

TEST_CASE("non-equivariant diag(1,2) probe is detected") {
    Mat2 y;
    y << 1, 0, 0, 2;
    const double d = equivariance_defect(MatrixLoad{y}, Vec2(1, 0), 64);
    // Oracle: direct grid evaluation of |(y R - R y) v|.
    double oracle = 0.0;
    for (int k = 0; k < 64; ++k) {
        const double phi = 2 * std::numbers::pi * k / 64.0;
        const double c = std::cos(phi), s = std::sin(phi);
        Mat2 r;
        r << c, -s, s, c;
        oracle = std::max(oracle, ((y * r - r * y) * Vec2(1, 0)).norm());
    }
    CHECK_THAT(d, WithinAbs(oracle, 1e-14));
    CHECK(d > 0.4);
    CHECK_THROWS_AS(equivariance_defect(NoLoad{}, Vec2(1, 0), 0), Error);
}

TEST_CASE("validate_load") {
    CHECK_FALSE(validate_load(ImpedanceLoad{0.1, -5.0}).has_value());
    CHECK(validate_load(ImpedanceLoad{-0.1, 0.0}).has_value());
    CHECK(validate_load(CurrentLoad{1.0, 0.0, 0.0}).has_value());
    CHECK(validate_load(PowerLoad{-1.0, 0.0}).has_value());
    CHECK_FALSE(validate_load(PowerLoad{1.0, -3.0}).has_value());
}

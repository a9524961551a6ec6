#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "gridstate/gridstate.hpp"

namespace support {

inline std::string data_path(const std::string& name) { return std::string(GRIDSTATE_DATA_DIR) + "/" + name; }

inline gridstate::SystemFile canonical() { return gridstate::load_system_file(data_path("canonical_3bus.json")); }

/// Modest machine used by hand-built systems.
inline gridstate::MachineParams test_machine(double l_sa = 0.0) {
    gridstate::MachineParams p;
    p.m = 0.01;
    p.d = 0.001;
    p.r_s = 0.1;
    p.r_f = 1.0;
    p.r_d = 0.5;
    p.r_q = 0.5;
    p.l_s = 0.01;
    p.l_sa = l_sa;
    p.l_f = 0.2;
    p.l_d = 0.01;
    p.l_q = 0.01;
    p.l_fd = 0.005;
    p.l_sf = 0.03;
    p.l_sd = 0.006;
    p.l_sq = 0.006;
    return p;
}

/// One machine at bus 0, a line to bus 1 carrying `load`.
inline gridstate::PowerSystem two_bus(const gridstate::LoadModel& load, double r = 0.2, double l = 1e-3,
                                      double c = 1e-5) {
    using namespace gridstate;
    const auto topo = Topology::from_lines(2, {{0, 1}});
    NetworkParams np{Vector::Constant(2, c), Vector::Constant(1, l), Vector::Constant(1, r)};
    return assemble({{test_machine(0.002), 0}}, topo, np, {NoLoad{}, load});
}

/// Independent complex-phasor nodal solve for impedance-only loads: a planar
/// pair (a, b) is the complex number a + ib and the 90-degree rotation is i.
struct PhasorSolution {
    std::vector<std::complex<double>> v;    // per bus, caller order
    std::vector<std::complex<double>> i_s;  // per generator bus
};

inline PhasorSolution phasor_solve(std::size_t n_v, const std::vector<std::pair<std::size_t, std::size_t>>& lines,
                                   const std::vector<double>& r, const std::vector<double>& l,
                                   const std::vector<double>& c, const std::vector<std::complex<double>>& shunt,
                                   const std::vector<std::size_t>& gen_bus,
                                   const std::vector<std::complex<double>>& gen_v, double w0) {
    using cd = std::complex<double>;
    const cd I(0.0, 1.0);
    std::vector<std::vector<cd>> y(n_v, std::vector<cd>(n_v, 0.0));
    for (std::size_t b = 0; b < n_v; ++b) y[b][b] += shunt[b] + I * w0 * c[b];
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const cd yk = 1.0 / (r[k] + I * w0 * l[k]);
        const auto [a, b] = lines[k];
        y[a][a] += yk;
        y[b][b] += yk;
        y[a][b] -= yk;
        y[b][a] -= yk;
    }
    std::vector<int> gen_of(n_v, -1);
    for (std::size_t g = 0; g < gen_bus.size(); ++g) gen_of[gen_bus[g]] = static_cast<int>(g);
    std::vector<std::size_t> free;
    for (std::size_t b = 0; b < n_v; ++b) {
        if (gen_of[b] < 0) free.push_back(b);
    }
    // Gaussian elimination with partial pivoting on Y_ff v_f = -Y_fg v_g.
    const std::size_t n = free.size();
    std::vector<std::vector<cd>> a(n, std::vector<cd>(n + 1, 0.0));
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) a[p][q] = y[free[p]][free[q]];
        for (std::size_t g = 0; g < gen_bus.size(); ++g) a[p][n] -= y[free[p]][gen_bus[g]] * gen_v[g];
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t p = col + 1; p < n; ++p) {
            if (std::abs(a[p][col]) > std::abs(a[piv][col])) piv = p;
        }
        std::swap(a[col], a[piv]);
        for (std::size_t p = 0; p < n; ++p) {
            if (p == col) continue;
            const cd f = a[p][col] / a[col][col];
            for (std::size_t q = col; q <= n; ++q) a[p][q] -= f * a[col][q];
        }
    }
    PhasorSolution sol;
    sol.v.assign(n_v, 0.0);
    for (std::size_t g = 0; g < gen_bus.size(); ++g) sol.v[gen_bus[g]] = gen_v[g];
    for (std::size_t p = 0; p < n; ++p) sol.v[free[p]] = a[p][n] / a[p][p];
    for (std::size_t g = 0; g < gen_bus.size(); ++g) {
        cd inj = 0.0;
        for (std::size_t b = 0; b < n_v; ++b) inj += y[gen_bus[g]][b] * sol.v[b];
        sol.i_s.push_back(-inj);
    }
    return sol;
}

inline gridstate::Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double mag = 1.0) {
    std::uniform_real_distribution<double> u(-mag, mag);
    gridstate::Vector x(n);
    for (Eigen::Index k = 0; k < n; ++k) x(k) = u(rng);
    return x;
}

}  // namespace support

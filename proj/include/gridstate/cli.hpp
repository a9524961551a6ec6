#pragma once

// The four gridstate commands. Each returns a process exit code:
//   0 ok / certified, 1 usage, 2 parse or schema, 3 physics validation,
//   4 solver failure, 5 certification failure.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/identities.hpp"
#include "gridstate/io.hpp"
#include "gridstate/simulate.hpp"
#include "gridstate/steady_state.hpp"
#include "gridstate/system.hpp"

namespace gridstate {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitParse = 2,
    kExitValidation = 3,
    kExitSolver = 4,
    kExitCertification = 5,
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return kExitUsage;
        case ErrorKind::parse:
        case ErrorKind::schema: return kExitParse;
        case ErrorKind::validation: return kExitValidation;
        case ErrorKind::domain:
        case ErrorKind::singular:
        case ErrorKind::no_convergence:
        case ErrorKind::infeasible: return kExitSolver;
        case ErrorKind::certification: return kExitCertification;
    }
    return kExitSolver;
}

enum class LogLevel { error, warn, info, debug };

/// Where commands send their primary output and their diagnostics.
struct CommandIo {
    std::ostream& out;
    std::function<void(LogLevel, const std::string&)> log = [](LogLevel, const std::string&) {};
};

namespace detail {

/// Writes to `path`, or to io.out when path is empty.
template <class Writer>
void emit(const std::string& path, CommandIo& io, Writer&& write) {
    if (path.empty()) {
        write(io.out);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::invalid_argument, "cannot write " + path);
    write(f);
    if (!f) throw Error(ErrorKind::invalid_argument, "write failed for " + path);
}

template <class Body>
int guarded(CommandIo& io, Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        io.log(LogLevel::error, std::string(to_string(e.kind())) + ": " + e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        io.log(LogLevel::error, e.what());
        return kExitSolver;
    }
}

inline std::string sci(double v) {
    std::ostringstream s;
    s << std::setprecision(3) << std::scientific << v;
    return s.str();
}

}  // namespace detail

/// Parses "k=+1" / "k=-1" (k is a 1-based machine index).
inline std::pair<std::size_t, int> parse_sigma_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::invalid_argument, "--sigma expects k=+1 or k=-1, got " + text);
    std::size_t k = 0;
    int s = 0;
    try {
        std::size_t used = 0;
        k = std::stoul(text.substr(0, eq), &used);
        if (used != eq) throw std::invalid_argument("k");
        const std::string rhs = text.substr(eq + 1);
        if (rhs == "1" || rhs == "+1") s = 1;
        else if (rhs == "-1") s = -1;
        else throw std::invalid_argument("sigma");
    } catch (const std::exception&) {
        throw Error(ErrorKind::invalid_argument, "--sigma expects k=+1 or k=-1, got " + text);
    }
    if (k == 0) throw Error(ErrorKind::invalid_argument, "--sigma machine index is 1-based");
    return {k, s};
}

struct SteadyStateArgs {
    std::string file;
    std::string out;
    std::vector<std::string> sigma;
};

inline int cmd_steady_state(const SteadyStateArgs& args, CommandIo& io) {
    return detail::guarded(io, [&] {
        auto f = load_system_file(args.file);
        for (const auto& s : args.sigma) {
            const auto [k, sign] = parse_sigma_override(s);
            if (k > f.system.n_g()) {
                throw Error(ErrorKind::invalid_argument, "--sigma: no machine " + std::to_string(k));
            }
            f.spec.polarization[k - 1] = sign;
        }
        io.log(LogLevel::info, "system: " + std::to_string(f.system.n_g()) + " machines, " +
                                   std::to_string(f.system.n_v()) + " buses, " + std::to_string(f.system.n_t()) +
                                   " lines");
        const auto net = solve_network(f.system, f.spec);
        io.log(LogLevel::info, "network solve: " + std::to_string(net.iterations) + " Newton iterations, residual " +
                                   detail::sci(net.residual_norm));
        std::vector<MachineRecovery> recs;
        for (std::size_t k = 0; k < f.system.n_g(); ++k) {
            const auto ki = static_cast<Eigen::Index>(2 * k);
            recs.push_back(recover_machine(f.system.machines[k], net.v.segment<2>(ki), net.i_s.segment<2>(ki),
                                           f.spec.omega0, f.spec.polarization[k]));
            if (!recs.back().warning.empty()) {
                io.log(LogLevel::warn, "machine " + std::to_string(k + 1) + ": " + recs.back().warning);
            }
        }
        const auto ss = assemble_steady_state(f.system, net, recs);
        const auto rep = verify_steady_state(f.system, ss);
        io.log(LogLevel::info, "residual " + detail::sci(rep.residual_norm) + " (relative), invariance defect " +
                                   detail::sci(rep.invariance_defect / rep.scale));
        const json doc = steady_state_document(f, ss, rep);
        detail::emit(args.out, io, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
        if (!rep.certificate) {
            for (const auto& msg : rep.failures) io.log(LogLevel::error, msg);
            return static_cast<int>(kExitCertification);
        }
        return static_cast<int>(kExitOk);
    });
}

struct SimulateArgs {
    std::string file;
    std::string from;
    double dt = 1e-5;
    double t_end = 0.2;
    std::size_t record_every = 1;
    double perturb_v = 0.0;  // relative scaling of every bus voltage at t = 0
    std::string out;
    std::string metrics_out;
};

inline json metrics_document(const DriftMetrics& m) {
    json j;
    j["state_deviation"] = m.state_deviation;
    j["voltage_magnitude"] = m.voltage_magnitude;
    j["frequency_deviation"] = m.frequency_deviation;
    j["residual"] = m.residual;
    j["worst_state_sample"] = m.worst_state_sample;
    j["worst_residual_sample"] = m.worst_residual_sample;
    return j;
}

inline int cmd_simulate(const SimulateArgs& args, CommandIo& io) {
    return detail::guarded(io, [&] {
        if (args.from.empty()) throw Error(ErrorKind::invalid_argument, "simulate: --from is required");
        const auto f = load_system_file(args.file);
        const auto op = load_result_file(f, args.from);
        const SimConfig cfg{args.dt, args.t_end, args.record_every};
        cfg.steps();

        Vector x0 = op.x;
        if (args.perturb_v != 0.0) {
            const auto layout = f.system.layout();
            x0.segment(layout.voltage(), static_cast<Eigen::Index>(2 * layout.n_v)) *= 1.0 + args.perturb_v;
            io.log(LogLevel::info, "bus voltages scaled by " + std::to_string(1.0 + args.perturb_v));
        }
        const auto traj = simulate(f.system, x0, op.u, cfg);
        const auto m = drift_metrics(f.system, traj, x0, op.omega0);
        detail::emit(args.out, io, [&](std::ostream& o) { write_trajectory_csv(o, f, traj); });

        std::ostringstream summary;
        summary << "samples " << traj.states.size() << "\n"
                << "state_deviation " << detail::sci(m.state_deviation) << "\n"
                << "voltage_magnitude " << detail::sci(m.voltage_magnitude) << "\n"
                << "frequency_deviation " << detail::sci(m.frequency_deviation) << "\n"
                << "residual " << detail::sci(m.residual) << "\n";
        if (args.out.empty()) {
            io.log(LogLevel::info, summary.str());
        } else {
            io.out << summary.str();
        }
        if (!args.metrics_out.empty()) {
            const json doc = metrics_document(m);
            detail::emit(args.metrics_out, io, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
        }
        return static_cast<int>(kExitOk);
    });
}

struct VerifyArgs {
    std::string file;
    std::string traj;
    std::string from;  // optional result document supplying u and w0
    double tol = 1e-6;
};

/// Constant inputs that zero the torque and field rows of rho at x.
inline Vector infer_inputs(const PowerSystem& sys, const Vector& x, double omega0) {
    const auto layout = sys.layout();
    const Vector u0 = Vector::Zero(static_cast<Eigen::Index>(layout.input_size()));
    const Vector rho = residual(sys, x, u0, omega0);
    Vector u(u0.size());
    for (std::size_t k = 0; k < layout.n_g; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        u(ki) = rho(layout.omega() + ki);
        u(static_cast<Eigen::Index>(layout.n_g) + ki) = rho(layout.current(k) + 2);
    }
    return u;
}

inline int cmd_verify(const VerifyArgs& args, CommandIo& io) {
    return detail::guarded(io, [&] {
        if (!(args.tol > 0.0)) throw Error(ErrorKind::invalid_argument, "verify: --tol must be > 0");
        const auto f = load_system_file(args.file);
        std::ifstream in(args.traj, std::ios::binary);
        if (!in) throw Error(ErrorKind::parse, "cannot open " + args.traj);
        Trajectory traj = read_trajectory_csv(in, f);
        double omega0 = f.spec.omega0;
        if (!args.from.empty()) {
            const auto op = load_result_file(f, args.from);
            omega0 = op.omega0;
            traj.inputs = op.u;
        } else {
            traj.inputs = infer_inputs(f.system, traj.states.front(), omega0);
            io.log(LogLevel::debug, "inputs inferred from the first sample");
        }
        const auto m = drift_metrics(f.system, traj, traj.states.front(), omega0);

        struct Check {
            const char* name;
            double value;
            double limit;
            std::optional<std::size_t> sample;
        };
        const std::vector<Check> checks{
            {"state_deviation", m.state_deviation, args.tol, m.worst_state_sample},
            {"voltage_magnitude", m.voltage_magnitude, args.tol, std::nullopt},
            {"frequency_deviation", m.frequency_deviation, args.tol * omega0, std::nullopt},
            {"residual", m.residual, args.tol, m.worst_residual_sample},
        };
        bool ok = true;
        io.out << "samples " << traj.states.size() << "\n";
        for (const auto& c : checks) {
            const bool pass = c.value <= c.limit;
            ok = ok && pass;
            io.out << (pass ? "PASS " : "FAIL ") << c.name << " " << detail::sci(c.value) << " (limit "
                   << detail::sci(c.limit) << ")";
            if (!pass && c.sample) io.out << " at sample " << *c.sample;
            io.out << "\n";
        }
        return static_cast<int>(ok ? kExitOk : kExitCertification);
    });
}

struct IdentitiesArgs {
    std::string file;
    std::uint64_t seed = 1;
    std::size_t instances = 100;
};

inline int cmd_identities(const IdentitiesArgs& args, CommandIo& io) {
    return detail::guarded(io, [&] {
        const auto f = load_system_file(args.file);
        IdentityOptions opt;
        opt.seed = args.seed;
        opt.instances = args.instances;
        double vn = 0.0;
        for (const auto& v : f.spec.generator_voltages) vn += v.norm();
        opt.v_nominal = vn > 0.0 ? vn / static_cast<double>(f.spec.generator_voltages.size()) : 1.0;
        const auto rep = run_identities(f.system, f.spec.omega0, opt);

        io.out << "seed " << rep.seed << "\n";
        for (const auto& r : rep.results) {
            io.out << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(42) << r.name << " n=" << std::setw(4)
                   << r.instances << " max_err " << detail::sci(r.max_error) << "  tol " << detail::sci(r.tolerance)
                   << "\n";
        }
        return static_cast<int>(rep.all_pass() ? kExitOk : kExitCertification);
    });
}

}  // namespace gridstate

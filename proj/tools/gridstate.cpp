// gridstate command-line front end.
//
// GRIDSTATE_LOG=error|warn|info|debug sets stderr verbosity (default warn).

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>

#include "gridstate/cli.hpp"

namespace {

spdlog::level::level_enum level_from_env() {
    const char* env = std::getenv("GRIDSTATE_LOG");
    if (!env || !*env) return spdlog::level::warn;
    const auto lvl = spdlog::level::from_str(env);
    // from_str maps unknown names to off; fall back to the default instead.
    return lvl == spdlog::level::off && std::string(env) != "off" ? spdlog::level::warn : lvl;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("gridstate");
    logger->set_pattern("%^[%l]%$ %v");
    logger->set_level(level_from_env());

    gridstate::CommandIo io{std::cout, [&](gridstate::LogLevel lvl, const std::string& msg) {
                                switch (lvl) {
                                    case gridstate::LogLevel::error: logger->error(msg); break;
                                    case gridstate::LogLevel::warn: logger->warn(msg); break;
                                    case gridstate::LogLevel::info: logger->info(msg); break;
                                    case gridstate::LogLevel::debug: logger->debug(msg); break;
                                }
                            }};

    CLI::App app{"Synchronous steady states of multi-machine power systems"};
    app.require_subcommand(1);

    gridstate::SteadyStateArgs ss;
    auto* c_ss = app.add_subcommand("steady-state", "Compute and certify the operating point in a system file");
    c_ss->add_option("file", ss.file, "System file (JSON)")->required();
    c_ss->add_option("-o,--out", ss.out, "Result document (default stdout)");
    c_ss->add_option("--sigma", ss.sigma, "Rotor polarization override, k=+1 or k=-1 (machine k, 1-based)");

    gridstate::SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "RK4 simulation from a result document");
    c_sim->add_option("file", sim.file, "System file (JSON)")->required();
    c_sim->add_option("--from", sim.from, "Result document with the initial state and inputs")->required();
    c_sim->add_option("--dt", sim.dt, "Step (s)")->required();
    c_sim->add_option("--t-end", sim.t_end, "End time (s)")->required();
    c_sim->add_option("--record-every", sim.record_every, "Record every N steps")->check(CLI::PositiveNumber);
    c_sim->add_option("--perturb-v", sim.perturb_v, "Scale initial bus voltages by 1 + p");
    c_sim->add_option("-o,--out", sim.out, "Trajectory CSV (default stdout)");
    c_sim->add_option("--metrics", sim.metrics_out, "Write drift metrics as JSON");

    gridstate::VerifyArgs ver;
    auto* c_ver = app.add_subcommand("verify", "Check a trajectory CSV against the steady-state conditions");
    c_ver->add_option("file", ver.file, "System file (JSON)")->required();
    c_ver->add_option("--traj", ver.traj, "Trajectory CSV")->required();
    c_ver->add_option("--tol", ver.tol, "Tolerance for every drift metric");
    c_ver->add_option("--from", ver.from, "Result document supplying the inputs (default: inferred)");

    gridstate::IdentitiesArgs ids;
    auto* c_ids = app.add_subcommand("identities", "Run the seeded numeric identity suite");
    c_ids->add_option("file", ids.file, "System file (JSON)")->required();
    c_ids->add_option("--seed", ids.seed, "RNG seed");
    c_ids->add_option("--instances", ids.instances, "Random instances per identity")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return gridstate::kExitUsage;
    }

    if (c_ss->parsed()) return gridstate::cmd_steady_state(ss, io);
    if (c_sim->parsed()) return gridstate::cmd_simulate(sim, io);
    if (c_ver->parsed()) return gridstate::cmd_verify(ver, io);
    return gridstate::cmd_identities(ids, io);
}

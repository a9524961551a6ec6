#pragma once

// System files (JSON), result documents (JSON) and trajectory CSVs.
//
// System file layout, angles in degrees:
//   { "omega0": 314.159,
//     "buses":    [ {"id": 1, "capacitance": 1e-5,
//                    "load": {"type": "impedance", "params": {"g": 0.1, "b": 0.0}}} ],
//     "lines":    [ {"from": 1, "to": 2, "resistance": 0.2, "inductance": 1e-3} ],
//     "machines": [ {"bus": 1, "inertia": .., "damping": .., "r_s": .., "r_f": .., "r_d": .., "r_q": ..,
//                    "l_s": .., "l_sa": .., "l_f": .., "l_d": .., "l_q": .., "l_fd": ..,
//                    "l_sf": .., "l_sd": .., "l_sq": ..} ],
//     "operating_point": {
//        "generator_voltages": [ {"bus": 1, "magnitude": 100, "angle_deg": 0} ],
//        "polarization": [1, -1],
//        "newton": {"tol": 1e-10, "max_iter": 50, "fd_step": 1e-6} } }
// Load types: impedance {g, b}, current {c_g, c_b, v_min}, power {p, q, v_min},
// matrix {y: [[y11, y12], [y21, y22]]} (a fixed real 2x2 admittance).
// Bus ids may be integers or strings.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridstate/error.hpp"
#include "gridstate/frame.hpp"
#include "gridstate/loads.hpp"
#include "gridstate/machine.hpp"
#include "gridstate/network.hpp"
#include "gridstate/simulate.hpp"
#include "gridstate/steady_state.hpp"
#include "gridstate/system.hpp"

namespace gridstate {

using json = nlohmann::ordered_json;

struct SystemFile {
    PowerSystem system;
    OperatingSpec spec;
    std::vector<std::string> bus_ids;  // file order
    std::vector<std::pair<std::string, std::string>> line_ends;
};

namespace detail {

inline std::string id_string(const json& id, const std::string& path) {
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
    throw Error(ErrorKind::schema, path + ": bus id must be an integer or a string");
}

inline const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw Error(ErrorKind::schema, path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorKind::schema, path + ": missing field '" + key + "'");
    return *it;
}

inline double number(const json& obj, const char* key, const std::string& path) {
    const json& v = field(obj, key, path);
    if (!v.is_number()) throw Error(ErrorKind::schema, path + "/" + key + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorKind::schema, path + "/" + key + ": must be finite");
    return d;
}

inline double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
    return obj.contains(key) ? number(obj, key, path) : fallback;
}

inline const json& array(const json& obj, const char* key, const std::string& path) {
    const json& v = field(obj, key, path);
    if (!v.is_array()) throw Error(ErrorKind::schema, path + "/" + key + ": expected an array");
    return v;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    const auto end = text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size()));
    return 1 + static_cast<std::size_t>(std::count(text.begin(), end, '\n'));
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::parse, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::ostringstream msg;
        msg << origin << ":" << line_of(text, e.byte) << ": JSON syntax error: " << e.what();
        throw Error(ErrorKind::parse, msg.str());
    }
}

inline LoadModel parse_load(const json& j, const std::string& path) {
    const json& type = field(j, "type", path);
    if (!type.is_string()) throw Error(ErrorKind::schema, path + "/type: expected a string");
    const std::string t = type.get<std::string>();
    const json& params = field(j, "params", path);
    const std::string pp = path + "/params";
    if (t == "impedance") return ImpedanceLoad{number(params, "g", pp), number_or(params, "b", 0.0, pp)};
    if (t == "current") {
        return CurrentLoad{number(params, "c_g", pp), number_or(params, "c_b", 0.0, pp),
                           number_or(params, "v_min", kDefaultLoadVoltageFloor, pp)};
    }
    if (t == "power") {
        return PowerLoad{number(params, "p", pp), number_or(params, "q", 0.0, pp),
                         number_or(params, "v_min", kDefaultLoadVoltageFloor, pp)};
    }
    if (t == "matrix") {
        const json& y = field(params, "y", pp);
        Mat2 m;
        bool ok = y.is_array() && y.size() == 2;
        for (std::size_t r = 0; ok && r < 2; ++r) {
            ok = y[r].is_array() && y[r].size() == 2 && y[r][0].is_number() && y[r][1].is_number();
            if (ok) m.row(static_cast<Eigen::Index>(r)) << y[r][0].get<double>(), y[r][1].get<double>();
        }
        if (!ok) throw Error(ErrorKind::schema, pp + "/y: expected a 2x2 array of numbers");
        return MatrixLoad{m};
    }
    throw Error(ErrorKind::schema, path + "/type: unknown load type '" + t + "' (impedance, current, power, matrix)");
}

inline MachineParams parse_machine(const json& j, const std::string& path) {
    MachineParams p;
    p.m = number(j, "inertia", path);
    p.d = number(j, "damping", path);
    p.r_s = number(j, "r_s", path);
    p.r_f = number(j, "r_f", path);
    p.r_d = number(j, "r_d", path);
    p.r_q = number(j, "r_q", path);
    p.l_s = number(j, "l_s", path);
    p.l_sa = number(j, "l_sa", path);
    p.l_f = number(j, "l_f", path);
    p.l_d = number(j, "l_d", path);
    p.l_q = number(j, "l_q", path);
    p.l_fd = number(j, "l_fd", path);
    p.l_sf = number(j, "l_sf", path);
    p.l_sd = number(j, "l_sd", path);
    p.l_sq = number(j, "l_sq", path);
    return p;
}

}  // namespace detail

/// Parses and validates a system document. Syntax errors throw ErrorKind::parse,
/// structural problems ErrorKind::schema, physics problems ErrorKind::validation.
inline SystemFile parse_system(const std::string& text, const std::string& origin = "<input>") {
    using namespace detail;
    const json doc = parse_json(text, origin);
    if (!doc.is_object()) throw Error(ErrorKind::schema, origin + ": top level must be an object");

    SystemFile out;
    out.spec.omega0 = number(doc, "omega0", "");

    std::map<std::string, std::size_t> bus_index;
    const json& buses = array(doc, "buses", "");
    Vector cap(static_cast<Eigen::Index>(buses.size()));
    std::vector<LoadModel> loads;
    for (std::size_t b = 0; b < buses.size(); ++b) {
        const std::string path = "/buses/" + std::to_string(b);
        const std::string id = id_string(field(buses[b], "id", path), path + "/id");
        if (!bus_index.emplace(id, b).second) throw Error(ErrorKind::schema, path + ": duplicate bus id " + id);
        out.bus_ids.push_back(id);
        cap(static_cast<Eigen::Index>(b)) = number(buses[b], "capacitance", path);
        loads.push_back(buses[b].contains("load") ? parse_load(buses[b]["load"], path + "/load") : LoadModel{NoLoad{}});
    }
    auto lookup = [&](const json& id, const std::string& path) {
        const std::string key = id_string(id, path);
        auto it = bus_index.find(key);
        if (it == bus_index.end()) throw Error(ErrorKind::schema, path + ": unknown bus id " + key);
        return it->second;
    };

    const json& lines = array(doc, "lines", "");
    std::vector<std::pair<std::size_t, std::size_t>> ends;
    Vector r_t(static_cast<Eigen::Index>(lines.size()));
    Vector l_t(static_cast<Eigen::Index>(lines.size()));
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string path = "/lines/" + std::to_string(k);
        const std::size_t from = lookup(field(lines[k], "from", path), path + "/from");
        const std::size_t to = lookup(field(lines[k], "to", path), path + "/to");
        ends.emplace_back(from, to);
        out.line_ends.emplace_back(out.bus_ids[from], out.bus_ids[to]);
        r_t(static_cast<Eigen::Index>(k)) = number(lines[k], "resistance", path);
        l_t(static_cast<Eigen::Index>(k)) = number(lines[k], "inductance", path);
    }

    const json& machines = array(doc, "machines", "");
    std::vector<MachineAttachment> attached;
    std::map<std::size_t, std::size_t> machine_at_bus;
    for (std::size_t k = 0; k < machines.size(); ++k) {
        const std::string path = "/machines/" + std::to_string(k);
        const std::size_t bus = lookup(field(machines[k], "bus", path), path + "/bus");
        machine_at_bus.emplace(bus, k);
        attached.push_back({parse_machine(machines[k], path), bus});
    }

    const json& op = field(doc, "operating_point", "");
    const json& gv = array(op, "generator_voltages", "/operating_point");
    out.spec.generator_voltages.assign(machines.size(), Vec2::Zero());
    std::vector<bool> seen(machines.size(), false);
    for (std::size_t k = 0; k < gv.size(); ++k) {
        const std::string path = "/operating_point/generator_voltages/" + std::to_string(k);
        const std::size_t bus = lookup(field(gv[k], "bus", path), path + "/bus");
        auto it = machine_at_bus.find(bus);
        if (it == machine_at_bus.end()) {
            throw Error(ErrorKind::schema, path + ": bus " + out.bus_ids[bus] + " has no machine");
        }
        if (seen[it->second]) throw Error(ErrorKind::schema, path + ": duplicate voltage for bus " + out.bus_ids[bus]);
        seen[it->second] = true;
        const double mag = number(gv[k], "magnitude", path);
        const double ang = number(gv[k], "angle_deg", path) * std::numbers::pi / 180.0;
        out.spec.generator_voltages[it->second] = phasor(mag, ang);
    }
    for (std::size_t k = 0; k < machines.size(); ++k) {
        if (!seen[k]) throw Error(ErrorKind::schema, "/operating_point/generator_voltages: missing machine " + std::to_string(k + 1));
    }
    if (op.contains("polarization")) {
        const json& pol = array(op, "polarization", "/operating_point");
        if (pol.size() != machines.size()) {
            throw Error(ErrorKind::schema, "/operating_point/polarization: one entry per machine required");
        }
        for (std::size_t k = 0; k < pol.size(); ++k) {
            if (!pol[k].is_number_integer() || (pol[k].get<int>() != 1 && pol[k].get<int>() != -1)) {
                throw Error(ErrorKind::schema, "/operating_point/polarization/" + std::to_string(k) + ": must be 1 or -1");
            }
            out.spec.polarization.push_back(pol[k].get<int>());
        }
    } else {
        out.spec.polarization.assign(machines.size(), 1);
    }
    if (op.contains("newton")) {
        const json& nw = op["newton"];
        const std::string path = "/operating_point/newton";
        out.spec.newton.tol = number_or(nw, "tol", out.spec.newton.tol, path);
        out.spec.newton.fd_step = number_or(nw, "fd_step", out.spec.newton.fd_step, path);
        if (nw.contains("max_iter")) {
            if (!nw["max_iter"].is_number_integer()) throw Error(ErrorKind::schema, path + "/max_iter: expected an integer");
            out.spec.newton.max_iter = nw["max_iter"].get<int>();
        }
    }

    Topology topo;
    try {
        topo = Topology::from_lines(buses.size(), ends);
    } catch (const Error& e) {
        throw Error(ErrorKind::validation, e.what());
    }
    out.system = assemble(attached, topo, NetworkParams{cap, l_t, r_t}, loads);
    return out;
}

inline SystemFile load_system_file(const std::string& path) { return parse_system(detail::read_text(path), path); }

/// Number of state entries in a parsed system.
inline std::size_t state_size(const SystemFile& f) { return f.system.layout().size(); }

// ---------------------------------------------------------------------------
// Result documents

namespace detail {
inline json pair_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

inline Vec2 pair_from(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw Error(ErrorKind::schema, path + ": expected [alpha, beta]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}
}  // namespace detail

inline json steady_state_document(const SystemFile& f, const FullSteadyState& ss, const VerificationReport& rep) {
    const auto& sys = f.system;
    const auto layout = sys.layout();
    const auto internal = sys.internal_index();
    json doc;
    doc["omega0"] = ss.omega0;

    json machines = json::array();
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        const auto& r = ss.machines[k];
        const auto ki = static_cast<Eigen::Index>(k);
        json m;
        m["bus"] = f.bus_ids[sys.bus_order[k]];
        m["theta"] = ss.x(layout.theta() + ki);
        m["omega"] = ss.x(layout.omega() + ki);
        m["i_s"] = detail::pair_json(ss.x.segment<2>(layout.current(k)));
        m["i_f"] = r.i_f;
        m["i_d"] = r.i_d;
        m["i_q"] = r.i_q;
        m["tau_m"] = ss.u(ki);
        m["v_f"] = ss.u(static_cast<Eigen::Index>(sys.n_g()) + ki);
        m["sigma"] = r.sigma;
        m["case"] = to_string(r.kase);
        if (!r.warning.empty()) m["warning"] = r.warning;
        machines.push_back(m);
    }
    doc["machines"] = machines;

    json buses;
    for (std::size_t b = 0; b < f.bus_ids.size(); ++b) {
        buses[f.bus_ids[b]] = detail::pair_json(ss.x.segment<2>(layout.voltage(internal[b])));
    }
    doc["buses"] = buses;

    json lines = json::array();
    for (std::size_t k = 0; k < sys.n_t(); ++k) {
        json l;
        l["from"] = f.line_ends[k].first;
        l["to"] = f.line_ends[k].second;
        l["i_T"] = detail::pair_json(ss.x.segment<2>(layout.line(k)));
        lines.push_back(l);
    }
    doc["lines"] = lines;

    json diag;
    diag["residual_blocks"] = {{"frequency", rep.residual.frequency}, {"torque", rep.residual.torque},
                               {"machine", rep.residual.machine},     {"bus", rep.residual.bus},
                               {"line", rep.residual.line}};
    diag["scale"] = rep.scale;
    diag["residual_norm"] = rep.residual_norm;
    diag["invariance_defect"] = rep.invariance_defect;
    json defects;
    for (std::size_t b = 0; b < f.bus_ids.size(); ++b) defects[f.bus_ids[b]] = rep.load_defects[internal[b]];
    diag["load_defects"] = defects;
    diag["certificate"] = rep.certificate;
    diag["failures"] = rep.failures;
    doc["diagnostics"] = diag;
    return doc;
}

/// State, inputs and frequency read back from a result document.
struct OperatingPoint {
    Vector x;
    Vector u;
    double omega0 = 0.0;
};

inline OperatingPoint parse_result(const SystemFile& f, const std::string& text, const std::string& origin = "<result>") {
    using namespace detail;
    const json doc = parse_json(text, origin);
    const auto& sys = f.system;
    const auto layout = sys.layout();
    const auto internal = sys.internal_index();
    OperatingPoint op;
    op.omega0 = number(doc, "omega0", "");
    op.x = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
    op.u = Vector::Zero(static_cast<Eigen::Index>(layout.input_size()));

    const json& machines = array(doc, "machines", "");
    if (machines.size() != sys.n_g()) throw Error(ErrorKind::schema, "/machines: machine count does not match the system");
    for (std::size_t k = 0; k < sys.n_g(); ++k) {
        const std::string path = "/machines/" + std::to_string(k);
        const auto ki = static_cast<Eigen::Index>(k);
        const std::string bus = id_string(field(machines[k], "bus", path), path + "/bus");
        if (bus != f.bus_ids[sys.bus_order[k]]) throw Error(ErrorKind::schema, path + "/bus: does not match the system");
        op.x(layout.theta() + ki) = number(machines[k], "theta", path);
        op.x(layout.omega() + ki) = number_or(machines[k], "omega", op.omega0, path);
        Vec5 i;
        i << pair_from(field(machines[k], "i_s", path), path + "/i_s"), number(machines[k], "i_f", path),
            number_or(machines[k], "i_d", 0.0, path), number_or(machines[k], "i_q", 0.0, path);
        op.x.segment<5>(layout.current(k)) = i;
        op.u(ki) = number(machines[k], "tau_m", path);
        op.u(static_cast<Eigen::Index>(sys.n_g()) + ki) = number(machines[k], "v_f", path);
    }
    const json& buses = field(doc, "buses", "");
    for (std::size_t b = 0; b < f.bus_ids.size(); ++b) {
        const std::string path = "/buses/" + f.bus_ids[b];
        op.x.segment<2>(layout.voltage(internal[b])) = pair_from(field(buses, f.bus_ids[b].c_str(), "/buses"), path);
    }
    const json& lines = array(doc, "lines", "");
    if (lines.size() != sys.n_t()) throw Error(ErrorKind::schema, "/lines: line count does not match the system");
    for (std::size_t k = 0; k < sys.n_t(); ++k) {
        const std::string path = "/lines/" + std::to_string(k);
        op.x.segment<2>(layout.line(k)) = pair_from(field(lines[k], "i_T", path), path + "/i_T");
    }
    return op;
}

inline OperatingPoint load_result_file(const SystemFile& f, const std::string& path) {
    return parse_result(f, detail::read_text(path), path);
}

// ---------------------------------------------------------------------------
// Trajectory CSV. Buses appear in file order, machines in machine order.

inline std::vector<std::string> trajectory_columns(const SystemFile& f) {
    const auto& sys = f.system;
    std::vector<std::string> cols{"t"};
    const std::size_t n_g = sys.n_g();
    for (std::size_t k = 1; k <= n_g; ++k) cols.push_back("theta_" + std::to_string(k));
    for (std::size_t k = 1; k <= n_g; ++k) cols.push_back("omega_" + std::to_string(k));
    for (std::size_t k = 1; k <= n_g; ++k) {
        for (const char* n : {"i_alpha_", "i_beta_", "i_f_", "i_d_", "i_q_"}) cols.push_back(n + std::to_string(k));
    }
    for (std::size_t b = 1; b <= sys.n_v(); ++b) {
        cols.push_back("v_alpha_" + std::to_string(b));
        cols.push_back("v_beta_" + std::to_string(b));
    }
    for (std::size_t k = 1; k <= sys.n_t(); ++k) {
        cols.push_back("iT_alpha_" + std::to_string(k));
        cols.push_back("iT_beta_" + std::to_string(k));
    }
    return cols;
}

inline std::string trajectory_header(const SystemFile& f) {
    std::string h;
    for (const auto& c : trajectory_columns(f)) {
        if (!h.empty()) h += ',';
        h += c;
    }
    return h;
}

namespace detail {
/// Internal state -> CSV column order (file bus order for voltages).
inline Vector to_file_order(const SystemFile& f, const Vector& x) {
    const auto layout = f.system.layout();
    const auto internal = f.system.internal_index();
    Vector y = x;
    for (std::size_t b = 0; b < layout.n_v; ++b) {
        y.segment<2>(layout.voltage(b)) = x.segment<2>(layout.voltage(internal[b]));
    }
    return y;
}

inline Vector from_file_order(const SystemFile& f, const Vector& y) {
    const auto layout = f.system.layout();
    const auto internal = f.system.internal_index();
    Vector x = y;
    for (std::size_t b = 0; b < layout.n_v; ++b) {
        x.segment<2>(layout.voltage(internal[b])) = y.segment<2>(layout.voltage(b));
    }
    return x;
}

inline void append_number(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += buf;
}
}  // namespace detail

inline void write_trajectory_csv(std::ostream& out, const SystemFile& f, const Trajectory& traj) {
    out << trajectory_header(f) << '\n';
    std::string line;
    for (std::size_t s = 0; s < traj.states.size(); ++s) {
        line.clear();
        detail::append_number(line, traj.times[s]);
        const Vector y = detail::to_file_order(f, traj.states[s]);
        for (Eigen::Index k = 0; k < y.size(); ++k) {
            line += ',';
            detail::append_number(line, y(k));
        }
        out << line << '\n';
    }
}

/// Parses a trajectory CSV; the header must match the system exactly.
inline Trajectory read_trajectory_csv(std::istream& in, const SystemFile& f) {
    std::string header;
    if (!std::getline(in, header)) throw Error(ErrorKind::schema, "trajectory: empty file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto cols = trajectory_columns(f);
    if (header != trajectory_header(f)) {
        std::vector<std::string> got;
        std::stringstream hs(header);
        for (std::string c; std::getline(hs, c, ',');) got.push_back(c);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (k >= got.size()) throw Error(ErrorKind::schema, "trajectory: missing column " + cols[k]);
            if (got[k] != cols[k]) {
                throw Error(ErrorKind::schema, "trajectory: column " + std::to_string(k + 1) + " is '" + got[k] +
                                                   "', expected '" + cols[k] + "'");
            }
        }
        throw Error(ErrorKind::schema, "trajectory: unexpected extra columns");
    }
    Trajectory traj;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Vector y(static_cast<Eigen::Index>(cols.size()));
        std::size_t n = 0;
        const char* p = line.c_str();
        while (true) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p || n >= cols.size()) {
                throw Error(ErrorKind::schema, "trajectory: malformed sample " + std::to_string(row));
            }
            y(static_cast<Eigen::Index>(n++)) = v;
            if (*end == ',') {
                p = end + 1;
            } else if (*end == '\0') {
                break;
            } else {
                throw Error(ErrorKind::schema, "trajectory: malformed sample " + std::to_string(row));
            }
        }
        if (n != cols.size()) {
            throw Error(ErrorKind::schema, "trajectory: sample " + std::to_string(row) + " has " + std::to_string(n) +
                                               " fields, expected " + std::to_string(cols.size()));
        }
        traj.times.push_back(y(0));
        traj.states.push_back(detail::from_file_order(f, y.tail(y.size() - 1)));
        ++row;
    }
    if (traj.states.empty()) throw Error(ErrorKind::schema, "trajectory: no samples");
    return traj;
}

}  // namespace gridstate

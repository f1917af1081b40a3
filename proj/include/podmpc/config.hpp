// SPDX-License-Identifier: MIT
//
// JSON run configuration. A file may name a compiled-in preset and override
// any of its fields; everything not given keeps the preset (or built-in)
// default. Unknown keys are rejected. Errors report the line and column of
// the offending token where one can be located.
//
// {
//   "preset": "run1",
//   "params": {"theta": 1, "rho": 11, "lambda": 0.01, "u_a": null, "u_b": null, "dt": 0.01},
//   "nx": 99, "T": 0.5,
//   "y0": {"kind": "sin", "amplitude": 0.2, "center": 0.5},
//   "horizon": 10,
//   "rom": {"pod_rank": 3, "deim_rank": 2, "tau_pod": 0.0, "space": "H",
//           "energy_scale": "relative", "adjoint_snapshots": true,
//           "derivative_snapshots": false},
//   "noise": 0.0, "seed": 0,
//   "solver": {"tol_opt": 1e-6, "max_outer": 500, "armijo_c": 1e-4,
//              "max_backtracks": 40, "initial_step": 0}
// }
//
// Control bounds accept a number, null or the strings "inf" / "-inf"; null
// means unbounded on that side.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/mpc.hpp"
#include "podmpc/presets.hpp"
#include "podmpc/stability.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace podmpc {

class ConfigError : public InvalidArgument {
public:
    ConfigError(const std::string& what, std::string path, int line, int column)
        : InvalidArgument(format(what, path, line, column)),
          path_(std::move(path)),
          line_(line),
          column_(column) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[nodiscard]] int line() const noexcept { return line_; }      // 0 when unknown
    [[nodiscard]] int column() const noexcept { return column_; }  // 0 when unknown

private:
    static std::string format(const std::string& what, const std::string& path, int line,
                              int column) {
        std::string s = "config";
        if (line > 0) s += " line " + std::to_string(line) + ", column " + std::to_string(column);
        if (!path.empty()) s += " (" + path + ")";
        return s + ": " + what;
    }

    std::string path_;
    int line_ = 0;
    int column_ = 0;
};

/// Preset plus overrides, before the horizon is resolved.
struct RunSpec {
    RunPreset preset;
    bool from_preset = false;
    bool overrides_model = false;  // physics, grid, y0 or T differ from the preset
    std::optional<int> horizon;
    std::optional<RomSettings> rom;
    double noise = 0.0;
    std::uint64_t seed = 0;
    OpenLoopOptions solver;
};

namespace detail {

struct TextPosition {
    int line = 0;
    int column = 0;
};

inline TextPosition position_of(const std::string& text, std::size_t offset) {
    TextPosition p{1, 1};
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++p.line;
            p.column = 1;
        } else {
            ++p.column;
        }
    }
    return p;
}

/// Best-effort location of a member: each key of the path is searched as a
/// quoted name followed by ':' after the previous one.
inline TextPosition locate(const std::string& text, const std::vector<std::string>& keys) {
    std::size_t from = 0;
    std::size_t hit = std::string::npos;
    for (const std::string& k : keys) {
        const std::string quoted = "\"" + k + "\"";
        std::size_t pos = text.find(quoted, from);
        while (pos != std::string::npos) {
            std::size_t after = pos + quoted.size();
            while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) {
                ++after;
            }
            if (after < text.size() && text[after] == ':') break;
            pos = text.find(quoted, pos + 1);
        }
        if (pos == std::string::npos) return {};
        hit = pos;
        from = pos + quoted.size();
    }
    return hit == std::string::npos ? TextPosition{} : position_of(text, hit);
}

class ConfigReader {
public:
    explicit ConfigReader(std::string text) : text_(std::move(text)) {}

    [[noreturn]] void fail(const std::vector<std::string>& keys, const std::string& what) const {
        std::string path;
        for (const auto& k : keys) path += "/" + k;
        const TextPosition p = locate(text_, keys);
        throw ConfigError(what, path, p.line, p.column);
    }

    void only(const nlohmann::json& obj, const std::vector<std::string>& keys,
              std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) fail(keys, "expected an object");
        for (const auto& item : obj.items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || item.key() == a;
            if (!ok) {
                auto k = keys;
                k.push_back(item.key());
                fail(k, "unknown key '" + item.key() + "'");
            }
        }
    }

    double number(const nlohmann::json& v, const std::vector<std::string>& keys) const {
        if (!v.is_number()) fail(keys, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(keys, "expected a finite number");
        return x;
    }

    long integer(const nlohmann::json& v, const std::vector<std::string>& keys) const {
        if (v.is_number_integer()) return v.get<long>();
        if (v.is_number_float()) {
            const double x = v.get<double>();
            if (std::floor(x) == x && std::abs(x) < 1e15) return static_cast<long>(x);
        }
        fail(keys, "expected an integer");
    }

    bool boolean(const nlohmann::json& v, const std::vector<std::string>& keys) const {
        if (!v.is_boolean()) fail(keys, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const nlohmann::json& v, const std::vector<std::string>& keys) const {
        if (!v.is_string()) fail(keys, "expected a string");
        return v.get<std::string>();
    }

    double bound(const nlohmann::json& v, const std::vector<std::string>& keys, double open) const {
        if (v.is_null()) return open;
        if (v.is_string()) {
            const std::string s = v.get<std::string>();
            if (s == "inf" || s == "+inf") return kInf;
            if (s == "-inf") return -kInf;
            fail(keys, "expected a number, null, \"inf\" or \"-inf\"");
        }
        if (!v.is_number()) fail(keys, "expected a number, null, \"inf\" or \"-inf\"");
        return v.get<double>();
    }

    [[nodiscard]] const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

}  // namespace detail

inline RunSpec parse_run_spec(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto p = detail::position_of(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(std::string("malformed JSON: ") + e.what(), "", p.line, p.column);
    }
    const detail::ConfigReader r(text);
    r.only(doc, {},
           {"preset", "params", "nx", "T", "y0", "horizon", "rom", "noise", "seed", "solver"});

    RunSpec spec;
    if (doc.contains("preset")) {
        const std::string name = r.string(doc["preset"], {"preset"});
        auto p = find_preset(name);
        if (!p) r.fail({"preset"}, "unknown preset '" + name + "'");
        spec.preset = *p;
        spec.from_preset = true;
    } else {
        spec.preset.name = "custom";
    }
    RunPreset& pr = spec.preset;

    if (doc.contains("params")) {
        const auto& j = doc["params"];
        r.only(j, {"params"}, {"theta", "rho", "lambda", "u_a", "u_b", "dt"});
        ModelParams& m = pr.params;
        if (j.contains("theta")) m.theta = r.number(j["theta"], {"params", "theta"});
        if (j.contains("rho")) m.rho = r.number(j["rho"], {"params", "rho"});
        if (j.contains("lambda")) m.lambda = r.number(j["lambda"], {"params", "lambda"});
        if (j.contains("u_a")) m.u_a = r.bound(j["u_a"], {"params", "u_a"}, -kInf);
        if (j.contains("u_b")) m.u_b = r.bound(j["u_b"], {"params", "u_b"}, kInf);
        if (j.contains("dt")) m.dt = r.number(j["dt"], {"params", "dt"});
        spec.overrides_model = spec.overrides_model || !j.empty();
        if (m.u_a > 0.0) r.fail({"params", "u_a"}, "lower control bound must satisfy u_a <= 0");
        if (m.u_b < 0.0) r.fail({"params", "u_b"}, "upper control bound must satisfy u_b >= 0");
        try {
            m.validate();
        } catch (const InvalidArgument& e) {
            r.fail({"params"}, e.what());
        }
    }
    if (doc.contains("nx")) {
        const long n = r.integer(doc["nx"], {"nx"});
        if (n < 2) r.fail({"nx"}, "need at least 2 interior nodes");
        pr.n_interior = static_cast<int>(n);
        spec.overrides_model = true;
    }
    if (doc.contains("T")) {
        pr.T = r.number(doc["T"], {"T"});
        if (!(pr.T > 0.0)) r.fail({"T"}, "final time must be positive");
        spec.overrides_model = true;
    }
    if (doc.contains("y0")) {
        const auto& j = doc["y0"];
        r.only(j, {"y0"}, {"kind", "amplitude", "center"});
        if (j.contains("kind")) {
            const std::string k = r.string(j["kind"], {"y0", "kind"});
            if (k == "sin") {
                pr.y0.kind = InitialShape::Kind::Sin;
            } else if (k == "sgn") {
                pr.y0.kind = InitialShape::Kind::Sgn;
            } else {
                r.fail({"y0", "kind"}, "initial state kind must be \"sin\" or \"sgn\"");
            }
        }
        if (j.contains("amplitude")) pr.y0.amplitude = r.number(j["amplitude"], {"y0", "amplitude"});
        if (j.contains("center")) pr.y0.center = r.number(j["center"], {"y0", "center"});
        spec.overrides_model = true;
    }
    if (doc.contains("horizon")) {
        const long n = r.integer(doc["horizon"], {"horizon"});
        if (n < 2) r.fail({"horizon"}, "horizon must be at least 2");
        spec.horizon = static_cast<int>(n);
    }
    if (doc.contains("rom")) {
        const auto& j = doc["rom"];
        r.only(j, {"rom"},
               {"pod_rank", "deim_rank", "tau_pod", "space", "energy_scale", "adjoint_snapshots",
                "derivative_snapshots"});
        RomSettings rs;
        rs.pod_rank = pr.rom_low.pod;
        rs.deim_rank = pr.rom_low.deim;
        if (j.contains("pod_rank")) rs.pod_rank = static_cast<int>(r.integer(j["pod_rank"], {"rom", "pod_rank"}));
        if (j.contains("deim_rank")) rs.deim_rank = static_cast<int>(r.integer(j["deim_rank"], {"rom", "deim_rank"}));
        if (j.contains("tau_pod")) {
            rs.tau_pod = r.number(j["tau_pod"], {"rom", "tau_pod"});
            if (!j.contains("pod_rank")) rs.pod_rank = 0;
        }
        if (rs.pod_rank < 0) r.fail({"rom", "pod_rank"}, "rank must be nonnegative");
        if (rs.deim_rank < 0) r.fail({"rom", "deim_rank"}, "rank must be nonnegative");
        if (rs.tau_pod < 0.0) r.fail({"rom", "tau_pod"}, "tolerance must be nonnegative");
        if (j.contains("space")) {
            const std::string s = r.string(j["space"], {"rom", "space"});
            if (s == "H") {
                rs.space = SpaceChoice::H;
            } else if (s == "V") {
                rs.space = SpaceChoice::V;
            } else {
                r.fail({"rom", "space"}, "space must be \"H\" or \"V\"");
            }
        }
        if (j.contains("energy_scale")) {
            const std::string s = r.string(j["energy_scale"], {"rom", "energy_scale"});
            if (s == "relative") {
                rs.energy_scale = EnergyScale::Relative;
            } else if (s == "absolute") {
                rs.energy_scale = EnergyScale::Absolute;
            } else {
                r.fail({"rom", "energy_scale"}, "energy scale must be \"relative\" or \"absolute\"");
            }
        }
        if (j.contains("adjoint_snapshots")) {
            rs.snapshots.include_adjoint = r.boolean(j["adjoint_snapshots"], {"rom", "adjoint_snapshots"});
        }
        if (j.contains("derivative_snapshots")) {
            rs.snapshots.include_derivatives =
                r.boolean(j["derivative_snapshots"], {"rom", "derivative_snapshots"});
        }
        spec.rom = rs;
    }
    if (doc.contains("noise")) {
        spec.noise = r.number(doc["noise"], {"noise"});
        if (!(spec.noise >= 0.0 && spec.noise < 1.0)) r.fail({"noise"}, "noise level must lie in [0, 1)");
    }
    if (doc.contains("seed")) {
        const long s = r.integer(doc["seed"], {"seed"});
        if (s < 0) r.fail({"seed"}, "seed must be nonnegative");
        spec.seed = static_cast<std::uint64_t>(s);
    }
    if (doc.contains("solver")) {
        const auto& j = doc["solver"];
        r.only(j, {"solver"}, {"tol_opt", "max_outer", "armijo_c", "max_backtracks", "initial_step"});
        OpenLoopOptions& o = spec.solver;
        if (j.contains("tol_opt")) o.tol_opt = r.number(j["tol_opt"], {"solver", "tol_opt"});
        if (j.contains("max_outer")) o.max_outer = static_cast<int>(r.integer(j["max_outer"], {"solver", "max_outer"}));
        if (j.contains("armijo_c")) o.armijo_c = r.number(j["armijo_c"], {"solver", "armijo_c"});
        if (j.contains("max_backtracks")) {
            o.max_backtracks = static_cast<int>(r.integer(j["max_backtracks"], {"solver", "max_backtracks"}));
        }
        if (j.contains("initial_step")) o.initial_step = r.number(j["initial_step"], {"solver", "initial_step"});
        if (!(o.tol_opt > 0.0)) r.fail({"solver", "tol_opt"}, "tolerance must be positive");
        if (o.max_outer < 0) r.fail({"solver", "max_outer"}, "iteration limit must be nonnegative");
    }
    return spec;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file '" + path + "'", "", 0, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline RunSpec load_run_spec(const std::string& path) { return parse_run_spec(read_text_file(path)); }

/// Turns a run specification into a closed-loop configuration. Without an
/// explicit horizon the minimal stabilizing horizon is used.
inline MpcConfig resolve_config(const RunSpec& spec) {
    MpcConfig c;
    c.params = spec.preset.params;
    c.grid = spec.preset.grid();
    c.y0 = spec.preset.initial_state();
    c.T = spec.preset.T;
    c.N = spec.horizon ? *spec.horizon : minimal_horizon(c.params, c.y0).N_min;
    c.rom = spec.rom;
    c.noise_level = spec.noise;
    c.rng_seed = spec.seed;
    c.solver = spec.solver;
    c.validate();
    return c;
}

inline MpcConfig load_config(const std::string& path) { return resolve_config(load_run_spec(path)); }

}  // namespace podmpc

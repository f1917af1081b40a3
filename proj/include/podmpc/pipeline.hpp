// SPDX-License-Identifier: MIT
//
// Batch execution of a run: horizon search, -Ky reference loop, full NMPC,
// POD-NMPC variants, metrics, artifacts and reference-value gates. Also the
// error-to-horizon sweep.

#pragma once

#include "podmpc/config.hpp"
#include "podmpc/export.hpp"
#include "podmpc/mpc.hpp"
#include "podmpc/presets.hpp"
#include "podmpc/stability.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace podmpc {

enum class Mode { Horizon, Nmpc, PodNmpc, Feedback, All };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::Horizon: return "horizon";
        case Mode::Nmpc: return "nmpc";
        case Mode::PodNmpc: return "pod-nmpc";
        case Mode::Feedback: return "feedback";
        case Mode::All: return "all";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s) {
    if (s == "horizon") return Mode::Horizon;
    if (s == "nmpc") return Mode::Nmpc;
    if (s == "pod-nmpc") return Mode::PodNmpc;
    if (s == "feedback") return Mode::Feedback;
    if (s == "all") return Mode::All;
    throw InvalidArgument("unknown mode '" + std::string(s) +
                          "' (expected horizon, nmpc, pod-nmpc, feedback or all)");
}

/// Command-line adjustments applied on top of a preset or config file.
struct Overrides {
    std::optional<int> pod_rank;
    std::optional<int> deim_rank;
    std::optional<double> tau_pod;
    std::optional<double> noise;
    std::optional<std::uint64_t> seed;
    std::optional<int> nx;
    std::optional<int> horizon;
};

inline void apply_overrides(RunSpec& spec, const Overrides& o) {
    if (o.pod_rank || o.deim_rank || o.tau_pod) {
        RomSettings rs = spec.rom.value_or(RomSettings{});
        if (!spec.rom) {
            rs.pod_rank = spec.preset.rom_low.pod;
            rs.deim_rank = spec.preset.rom_low.deim;
        }
        if (o.tau_pod) {
            if (*o.tau_pod < 0.0) throw InvalidArgument("--tau-pod must be nonnegative");
            rs.tau_pod = *o.tau_pod;
            rs.pod_rank = 0;
        }
        if (o.pod_rank) {
            if (*o.pod_rank < 0) throw InvalidArgument("--pod-rank must be nonnegative");
            rs.pod_rank = *o.pod_rank;
        }
        if (o.deim_rank) {
            if (*o.deim_rank < 0) throw InvalidArgument("--deim-rank must be nonnegative");
            rs.deim_rank = *o.deim_rank;
        }
        spec.rom = rs;
    }
    if (o.noise) {
        if (!(*o.noise >= 0.0 && *o.noise < 1.0)) throw InvalidArgument("--noise must lie in [0, 1)");
        spec.noise = *o.noise;
    }
    if (o.seed) spec.seed = *o.seed;
    if (o.nx) {
        if (*o.nx < 2) throw InvalidArgument("--nx must be at least 2");
        spec.preset.n_interior = *o.nx;
        spec.overrides_model = true;
    }
    if (o.horizon) {
        if (*o.horizon < 2) throw InvalidArgument("--horizon must be at least 2");
        spec.horizon = *o.horizon;
    }
}

struct Gate {
    std::string name;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;
};

struct VariantReport {
    std::string name;
    RunSummary summary;
    std::optional<int> pod_rank;
    std::optional<int> deim_rank;
};

struct RunReport {
    std::string preset;
    Mode mode = Mode::All;
    HorizonResult horizon;
    std::vector<VariantReport> variants;
    std::vector<Gate> gates;

    [[nodiscard]] bool passed() const {
        for (const Gate& g : gates) {
            if (!g.pass) return false;
        }
        return true;
    }
};

namespace detail {

inline void add_gate(std::vector<Gate>& gates, std::string name, double value,
                     const ReferenceValue& ref) {
    gates.push_back({std::move(name), value, ref.lo, ref.hi, ref.contains(value)});
}

inline void write_gates_csv(const std::filesystem::path& path, const std::vector<Gate>& gates) {
    std::ofstream out = open_output(path);
    out << "gate,value,lo,hi,pass\n";
    for (const Gate& g : gates) {
        out << g.name << ',' << format_number(g.value) << ',' << format_number(g.lo) << ','
            << format_number(g.hi) << ',' << (g.pass ? "true" : "false") << '\n';
    }
    finish_output(out, path);
}

inline void write_loop(const std::filesystem::path& dir, const MpcResult& r, Eigen::Index n,
                       const RunSummary& s) {
    write_trajectory_csv(dir / "state.csv", r.state, n);
    write_trajectory_csv(dir / "control.csv", r.control, n);
    write_summary_json(dir / "summary.json", s);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Executes `mode` for one run specification and writes its artifacts below
/// `out_dir/<name>`. Published reference gates apply only when the model,
/// horizon and noise are those of the preset; the POD-vs-NMPC cost gate
/// applies whenever both loops ran.
inline RunReport run_preset(const RunSpec& spec, Mode mode, const std::filesystem::path& out_dir) {
    const RunPreset& pr = spec.preset;
    const std::filesystem::path dir = out_dir / pr.name;
    const bool published = spec.from_preset && !spec.overrides_model && !spec.horizon &&
                           spec.noise == 0.0;
    const bool published_rom = published && !spec.rom;
    const RunReference& ref = pr.reference;

    RunReport rep;
    rep.preset = pr.name;
    rep.mode = mode;

    MpcConfig cfg;
    cfg.params = pr.params;
    cfg.grid = pr.grid();
    cfg.y0 = pr.initial_state();
    cfg.T = pr.T;
    cfg.noise_level = spec.noise;
    cfg.rng_seed = spec.seed;
    cfg.solver = spec.solver;
    const Eigen::Index n = cfg.grid.size();

    // Horizon and certifying gain.
    auto t0 = std::chrono::steady_clock::now();
    if (spec.horizon) {
        const GainOptimum g = optimize_feedback_gain(cfg.params, cfg.y0, *spec.horizon);
        rep.horizon.N_min = *spec.horizon;
        rep.horizon.K_star = g.K_star;
        rep.horizon.alpha = g.alpha;
        rep.horizon.constraint_active = g.bound_active;
    } else {
        rep.horizon = minimal_horizon(cfg.params, cfg.y0);
    }
    cfg.N = rep.horizon.N_min;
    cfg.validate();
    const double K = rep.horizon.K_star;
    {
        RunSummary s;
        s.N = cfg.N;
        s.K = K;
        s.alpha = rep.horizon.alpha;
        s.wall_time_s = detail::seconds_since(t0);
        write_summary_json(dir / "horizon" / "summary.json", s);
        rep.variants.push_back({"horizon", s, {}, {}});
    }
    if (published) {
        rep.gates.push_back({"N_min", static_cast<double>(cfg.N), static_cast<double>(ref.horizon),
                             static_cast<double>(ref.horizon), cfg.N == ref.horizon});
        detail::add_gate(rep.gates, "K_star", K, ref.gain);
    }
    if (mode == Mode::Horizon) {
        detail::write_gates_csv(dir / "gates.csv", rep.gates);
        return rep;
    }

    const bool want_feedback = mode == Mode::Feedback || mode == Mode::All;
    const bool want_nmpc = mode == Mode::Nmpc || mode == Mode::PodNmpc || mode == Mode::All;
    const bool want_pod = mode == Mode::PodNmpc || mode == Mode::All;

    std::optional<MpcResult> nmpc;
    if (want_nmpc) {
        nmpc = run_nmpc(cfg);
        RunSummary s;
        s.N = cfg.N;
        s.K = K;
        s.alpha = rep.horizon.alpha;
        s.J = nmpc->closed_loop_cost;
        s.wall_time_s = nmpc->wall_time_total;
        detail::write_loop(dir / "nmpc", *nmpc, n, s);
        rep.variants.push_back({"nmpc", s, {}, {}});
        if (published) detail::add_gate(rep.gates, "J_nmpc", s.J.value(), ref.cost_nmpc);
    }

    if (want_feedback) {
        t0 = std::chrono::steady_clock::now();
        const MpcResult fb = run_feedback(cfg, K);
        RunSummary s;
        s.N = cfg.N;
        s.K = K;
        s.alpha = rep.horizon.alpha;
        s.J = fb.closed_loop_cost;
        s.wall_time_s = detail::seconds_since(t0);
        if (nmpc) s.err_L2 = l2_time_h_distance(cfg.grid, fb.state, nmpc->state);
        detail::write_loop(dir / "feedback", fb, n, s);
        rep.variants.push_back({"feedback", s, {}, {}});
        if (published) {
            detail::add_gate(rep.gates, "J_feedback", s.J.value(), ref.cost_feedback);
            if (s.err_L2) detail::add_gate(rep.gates, "err_feedback", *s.err_L2, ref.err_feedback);
        }
    }

    if (want_pod) {
        struct Variant {
            std::string name;
            RomSettings rom;
            const ReferenceValue* cost_ref;
            const ReferenceValue* err_ref;
        };
        std::vector<Variant> variants;
        if (spec.rom) {
            variants.push_back({"pod", *spec.rom, nullptr, nullptr});
        } else {
            RomSettings hi;
            hi.pod_rank = pr.rom_high.pod;
            hi.deim_rank = pr.rom_high.deim;
            RomSettings lo;
            lo.pod_rank = pr.rom_low.pod;
            lo.deim_rank = pr.rom_low.deim;
            variants.push_back({"pod_high", hi, &ref.cost_pod_high, &ref.err_pod_high});
            variants.push_back({"pod_low", lo, &ref.cost_pod_low, &ref.err_pod_low});
        }
        for (const Variant& v : variants) {
            MpcConfig c = cfg;
            c.rom = v.rom;
            const MpcResult r = run_pod_nmpc(c);
            const MetricRecord m = evaluate_metrics(c, r, nmpc ? &*nmpc : nullptr);
            RunSummary s;
            s.N = c.N;
            s.K = K;
            s.alpha = rep.horizon.alpha;
            s.J = m.cost;
            s.err_L2 = m.err_l2;
            s.err_sup = m.err_sup;
            s.wall_time_s = m.wall_time;
            s.speedup = m.speedup;
            const std::filesystem::path vdir = dir / v.name;
            detail::write_loop(vdir, r, n, s);
            write_eigs_csv(vdir / "eigs.csv", r.offline->basis);
            write_basis_csv(vdir / "basis.csv", r.offline->basis, c.grid, r.offline->pod_rank);
            rep.variants.push_back({v.name, s, r.offline->pod_rank, r.offline->deim_rank});
            if (published_rom && v.cost_ref != nullptr) {
                detail::add_gate(rep.gates, "J_" + v.name, m.cost, *v.cost_ref);
                if (m.err_l2) detail::add_gate(rep.gates, "err_" + v.name, *m.err_l2, *v.err_ref);
            }
            if (nmpc) {
                const double jn = nmpc->closed_loop_cost;
                rep.gates.push_back({"J_" + v.name + "_vs_nmpc", m.cost, jn * (1.0 - kPodVsNmpcCost),
                                     jn * (1.0 + kPodVsNmpcCost),
                                     std::abs(m.cost - jn) <= kPodVsNmpcCost * jn});
            }
        }
    }

    detail::write_gates_csv(dir / "gates.csv", rep.gates);
    return rep;
}

inline RunReport run_preset(std::string_view name, Mode mode, const std::filesystem::path& out_dir) {
    RunSpec spec;
    spec.preset = preset(name);
    spec.from_preset = true;
    return run_preset(spec, mode, out_dir);
}

struct SweepRow {
    double err = 0.0;
    bool found = false;
    int N_min = 0;
    double K_star = 0.0;
    double alpha = 0.0;
};

/// Minimal horizon of the reduced-order certificate for each error level.
inline std::vector<SweepRow> sweep_err_horizon(const ModelParams& params, const Vector& y0,
                                               const std::vector<double>& err_grid,
                                               const StabilityOptions& opt = {}) {
    for (std::size_t i = 0; i < err_grid.size(); ++i) {
        if (!(err_grid[i] >= 0.0)) throw InvalidArgument("sweep_err_horizon: errors must be nonnegative");
        if (i > 0 && err_grid[i] < err_grid[i - 1]) {
            throw InvalidArgument("sweep_err_horizon: errors must be sorted");
        }
    }
    std::vector<SweepRow> rows;
    rows.reserve(err_grid.size());
    for (double e : err_grid) {
        SweepRow row;
        row.err = e;
        try {
            const HorizonResult h = minimal_horizon(params, y0, e, opt);
            row.found = true;
            row.N_min = h.N_min;
            row.K_star = h.K_star;
            row.alpha = h.alpha;
        } catch (const HorizonNotFound&) {
            row.found = false;
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<SweepRow> sweep_err_horizon(const RunPreset& pr, const std::vector<double>& err_grid,
                                               const StabilityOptions& opt = {}) {
    return sweep_err_horizon(pr.params, pr.initial_state(), err_grid, opt);
}

/// Columns err,N_min,K_star,alpha,found; rows without a horizon leave the
/// numeric fields empty.
inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out = open_output(path);
    out << "err,N_min,K_star,alpha,found\n";
    for (const SweepRow& r : rows) {
        out << format_number(r.err) << ',';
        if (r.found) {
            out << r.N_min << ',' << format_number(r.K_star) << ',' << format_number(r.alpha);
        } else {
            out << ",,";
        }
        out << ',' << (r.found ? "true" : "false") << '\n';
    }
    finish_output(out, path);
}

}  // namespace podmpc

// SPDX-License-Identifier: MIT
//
// podmpc run   --preset run1|...|all [--config FILE] --mode MODE --out DIR [overrides]
// podmpc sweep --preset NAME [--config FILE] [--err LIST] --out DIR
//
// Exit status: 0 all gates pass, 2 a gate is out of tolerance, 1 error.

#include "podmpc/podmpc.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using podmpc::format_number;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitBreach = 2;

unsigned thread_cap() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PODMPC_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) n = static_cast<unsigned>(v);
        } catch (const std::exception&) {
            std::cerr << "warning: ignoring PODMPC_THREADS='" << env << "'\n";
        }
    }
    return n;
}

std::string describe(const podmpc::RunReport& rep) {
    std::ostringstream os;
    os << rep.preset << " [" << podmpc::to_string(rep.mode) << "] N=" << rep.horizon.N_min
       << " K=" << format_number(rep.horizon.K_star) << " alpha=" << format_number(rep.horizon.alpha)
       << '\n';
    for (const auto& v : rep.variants) {
        if (v.name == "horizon") continue;
        os << "  " << v.name;
        if (v.pod_rank) os << " (l=" << *v.pod_rank << ", l_deim=" << *v.deim_rank << ')';
        if (v.summary.J) os << " J=" << format_number(*v.summary.J);
        if (v.summary.err_L2) os << " err_L2=" << format_number(*v.summary.err_L2);
        if (v.summary.err_sup) os << " err_sup=" << format_number(*v.summary.err_sup);
        if (v.summary.wall_time_s) os << " time=" << format_number(*v.summary.wall_time_s) << 's';
        if (v.summary.speedup) os << " speedup=" << format_number(*v.summary.speedup);
        os << '\n';
    }
    for (const auto& g : rep.gates) {
        os << "  gate " << g.name << ' ' << format_number(g.value) << " in [" << format_number(g.lo)
           << ", " << format_number(g.hi) << "] " << (g.pass ? "pass" : "FAIL") << '\n';
    }
    os << "  " << (rep.passed() ? "PASS" : "FAIL") << '\n';
    return os.str();
}

podmpc::RunSpec base_spec(const std::string& preset, const std::string& config) {
    podmpc::RunSpec spec;
    if (!config.empty()) {
        spec = podmpc::load_run_spec(config);
        if (!preset.empty() && (!spec.from_preset || spec.preset.name != preset)) {
            throw podmpc::InvalidArgument("--preset '" + preset +
                                          "' disagrees with the preset named in " + config);
        }
    } else {
        spec.preset = podmpc::preset(preset);
        spec.from_preset = true;
    }
    return spec;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw podmpc::InvalidArgument("bad number '" + item + "' in --err");
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NMPC and POD-NMPC for a 1-D semilinear advection-diffusion-reaction equation"};
    app.require_subcommand(1);

    std::string preset;
    std::string config;
    std::string mode_name = "all";
    std::string out_dir = "out";
    podmpc::Overrides ov;
    std::optional<int> pod_rank, deim_rank, nx, horizon;
    std::optional<double> tau_pod, noise;
    std::optional<std::uint64_t> seed;

    CLI::App* run = app.add_subcommand("run", "execute a preset or config file");
    run->add_option("--preset", preset, "run1, run2, run3, run4 or all");
    run->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    run->add_option("--mode", mode_name, "horizon, nmpc, pod-nmpc, feedback or all")
        ->capture_default_str();
    run->add_option("--out", out_dir, "output directory")->capture_default_str();
    run->add_option("--pod-rank", pod_rank, "POD rank l");
    run->add_option("--deim-rank", deim_rank, "DEIM rank (0 = exact nonlinearity)");
    run->add_option("--tau-pod", tau_pod, "relative energy tolerance for the POD rank");
    run->add_option("--noise", noise, "multiplicative initial-state noise level in [0, 1)");
    run->add_option("--seed", seed, "noise seed");
    run->add_option("--nx", nx, "interior grid nodes");
    run->add_option("--horizon", horizon, "prediction horizon (default: minimal stabilizing)");

    std::string preset_sweep;
    std::string config_sweep;
    std::string err_list = "0,0.001,0.01,0.1";
    std::string out_sweep = "out";
    CLI::App* sweep = app.add_subcommand("sweep", "minimal horizon against the reduced-model error");
    sweep->add_option("--preset", preset_sweep, "run1, run2, run3 or run4");
    sweep->add_option("--config", config_sweep, "JSON run configuration")->check(CLI::ExistingFile);
    sweep->add_option("--err", err_list, "comma-separated, sorted error levels")->capture_default_str();
    sweep->add_option("--out", out_sweep, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitError;
    }

    try {
        if (*sweep) {
            if (preset_sweep.empty() && config_sweep.empty()) {
                throw podmpc::InvalidArgument("sweep needs --preset or --config");
            }
            const podmpc::RunSpec spec = base_spec(preset_sweep, config_sweep);
            const auto rows = podmpc::sweep_err_horizon(spec.preset, parse_list(err_list));
            const auto path = std::filesystem::path(out_sweep) / spec.preset.name / "sweep.csv";
            podmpc::write_sweep_csv(path, rows);
            for (const auto& r : rows) {
                std::cout << "err=" << format_number(r.err) << ' '
                          << (r.found ? "N_min=" + std::to_string(r.N_min) + " K=" + format_number(r.K_star)
                                      : std::string("no horizon"))
                          << '\n';
            }
            std::cout << "wrote " << path.string() << '\n';
            return kExitOk;
        }

        ov.pod_rank = pod_rank;
        ov.deim_rank = deim_rank;
        ov.tau_pod = tau_pod;
        ov.noise = noise;
        ov.seed = seed;
        ov.nx = nx;
        ov.horizon = horizon;
        const podmpc::Mode mode = podmpc::parse_mode(mode_name);

        if (preset.empty() && config.empty()) throw podmpc::InvalidArgument("run needs --preset or --config");
        std::vector<podmpc::RunSpec> specs;
        if (preset == "all") {
            if (!config.empty()) throw podmpc::InvalidArgument("--preset all cannot be combined with --config");
            for (const auto& name : podmpc::preset_names()) specs.push_back(base_spec(name, ""));
        } else {
            specs.push_back(base_spec(preset, config));
        }
        for (auto& s : specs) podmpc::apply_overrides(s, ov);

        std::vector<std::optional<podmpc::RunReport>> reports(specs.size());
        std::vector<std::string> errors(specs.size());
        const unsigned workers = std::min<unsigned>(thread_cap(), static_cast<unsigned>(specs.size()));
        std::mutex next_lock;
        std::size_t next = 0;
        auto worker = [&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(next_lock);
                    if (next >= specs.size()) return;
                    i = next++;
                }
                try {
                    reports[i] = podmpc::run_preset(specs[i], mode, out_dir);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        int rc = kExitOk;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            if (!errors[i].empty()) {
                std::cerr << specs[i].preset.name << ": error: " << errors[i] << '\n';
                rc = kExitError;
                continue;
            }
            std::cout << describe(*reports[i]);
            if (!reports[i]->passed() && rc == kExitOk) rc = kExitBreach;
        }
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
}

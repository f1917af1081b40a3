// SPDX-License-Identifier: MIT

#include "fixtures.hpp"

#include "podmpc/podmpc.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace podmpc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const fs::path p = fs::temp_directory_path() /
                       ("podmpc_test_" + std::to_string(::getpid()) + "_" + tag + "_" +
                        std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& body) {
    const fs::path p = dir / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PODMPC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const VariantReport* variant(const RunReport& r, const std::string& name) {
    for (const auto& v : r.variants) {
        if (v.name == name) return &v;
    }
    return nullptr;
}

}  // namespace

TEST(LoadConfig, MinimalPreset) {
    const fs::path dir = scratch_dir("cfg");
    const MpcConfig c = load_config(write_file(dir, "run1.json", R"({"preset": "run1"})").string());
    EXPECT_EQ(c.params.theta, 1.0);
    EXPECT_EQ(c.params.rho, 11.0);
    EXPECT_EQ(c.params.lambda, 0.01);
    EXPECT_EQ(c.params.dt, 0.01);
    EXPECT_NEAR(c.grid.dx, 0.01, 1e-15);
    EXPECT_EQ(c.T, 0.5);
    EXPECT_TRUE(c.params.unconstrained());
    EXPECT_NEAR(c.y0(49), 0.2, 1e-15);
    EXPECT_NEAR(c.y0(9), 0.2 * std::sin(kPi * 0.1), 1e-15);
    EXPECT_EQ(c.N, 10);
    EXPECT_FALSE(c.rom.has_value());
    fs::remove_all(dir);
}

TEST(LoadConfig, SampleFilesResolve) {
    const MpcConfig a = load_config(std::string(PODMPC_SAMPLES_DIR) + "/run1.json");
    EXPECT_EQ(a.N, 10);
    const MpcConfig b = load_config(std::string(PODMPC_SAMPLES_DIR) + "/custom.json");
    EXPECT_EQ(b.grid.size(), 79);
    EXPECT_DOUBLE_EQ(b.params.u_a, -0.5);
    ASSERT_TRUE(b.rom.has_value());
    EXPECT_EQ(b.rom->pod_rank, 4);
}

TEST(LoadConfig, MalformedJsonHasPosition) {
    try {
        (void)parse_run_spec("{\n  \"preset\": \"run1\",\n  \"nx\": ,\n}\n");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_GT(e.column(), 0);
    }
    EXPECT_THROW(load_config("/nonexistent/podmpc.json"), InvalidArgument);
}

TEST(LoadConfig, PositiveLowerBoundRejected) {
    try {
        (void)parse_run_spec("{\n  \"params\": {\n    \"u_a\": 0.5\n  }\n}\n");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_NE(std::string(e.what()).find("u_a"), std::string::npos);
    }
}

TEST(LoadConfig, UnknownKeyRejectedWithLine) {
    try {
        (void)parse_run_spec("{\n  \"preset\": \"run2\",\n  \"rom\": {\"pod_rank\": 3,\n   \"podrank\": 4}\n}\n");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 4);
        EXPECT_NE(std::string(e.what()).find("podrank"), std::string::npos);
    }
    EXPECT_THROW(parse_run_spec(R"({"preset": "run9"})"), ConfigError);
    EXPECT_THROW(parse_run_spec(R"({"y0": {"kind": "cos"}})"), ConfigError);
    EXPECT_THROW(parse_run_spec(R"({"nx": 1})"), ConfigError);
    EXPECT_THROW(parse_run_spec(R"({"horizon": 2.5})"), ConfigError);
}

TEST(LoadConfig, OverridesAndBounds) {
    const RunSpec s = parse_run_spec(
        R"({"preset": "run2", "params": {"u_a": "-inf", "u_b": null}, "horizon": 12, "noise": 0.1, "seed": 5})");
    EXPECT_TRUE(s.from_preset);
    EXPECT_TRUE(s.overrides_model);
    EXPECT_TRUE(std::isinf(s.preset.params.u_a));
    EXPECT_TRUE(std::isinf(s.preset.params.u_b));
    EXPECT_EQ(s.horizon, 12);
    EXPECT_EQ(s.noise, 0.1);
    EXPECT_EQ(s.seed, 5u);
}

TEST(RunPreset, RunOneHorizon) {
    const fs::path dir = scratch_dir("h1");
    const RunReport r = run_preset("run1", Mode::Horizon, dir);
    EXPECT_EQ(r.horizon.N_min, 10);
    EXPECT_NEAR(r.horizon.K_star, 2.46, 0.05);
    EXPECT_TRUE(r.passed());
    const RunSummary s = read_summary_json(dir / "run1" / "horizon" / "summary.json");
    EXPECT_EQ(s.N, 10);
    EXPECT_EQ(*s.K, r.horizon.K_star);
    EXPECT_TRUE(fs::exists(dir / "run1" / "gates.csv"));
    fs::remove_all(dir);
}

TEST(RunPreset, RunTwoHorizon) {
    const fs::path dir = scratch_dir("h2");
    const RunReport r = run_preset("run2", Mode::Horizon, dir);
    EXPECT_EQ(r.horizon.N_min, 14);
    EXPECT_NEAR(r.horizon.K_star, 1.50, 0.01);
    EXPECT_TRUE(r.horizon.constraint_active);
    EXPECT_TRUE(r.passed());
    fs::remove_all(dir);
}

TEST(RunPreset, RunThreeAllCosts) {
    const fs::path dir = scratch_dir("a3");
    const RunReport r = run_preset("run3", Mode::All, dir);
    const std::pair<const char*, double> expected[] = {
        {"feedback", 0.0021}, {"nmpc", 0.0016}, {"pod_high", 0.0017}, {"pod_low", 0.0018}};
    for (const auto& [name, J] : expected) {
        const VariantReport* v = variant(r, name);
        ASSERT_NE(v, nullptr) << name;
        ASSERT_TRUE(v->summary.J.has_value()) << name;
        EXPECT_NEAR(*v->summary.J, J, 0.25 * J) << name;
    }
    for (const char* sub : {"horizon", "nmpc", "feedback", "pod_high", "pod_low"}) {
        EXPECT_TRUE(fs::exists(dir / "run3" / sub / "summary.json")) << sub;
    }
    EXPECT_TRUE(fs::exists(dir / "run3" / "pod_low" / "eigs.csv"));
    EXPECT_TRUE(fs::exists(dir / "run3" / "pod_low" / "basis.csv"));
    // Requested ranks above the snapshot rank are clamped.
    const auto eigs = lines_of(dir / "run3" / "pod_high" / "eigs.csv");
    EXPECT_EQ(variant(r, "pod_high")->pod_rank, std::min<int>(16, static_cast<int>(eigs.size()) - 1));
    EXPECT_EQ(variant(r, "pod_low")->pod_rank, 2);
    fs::remove_all(dir);
}

TEST(RunPreset, OverridesDisablePublishedGates) {
    RunSpec spec;
    spec.preset = preset_run1();
    spec.from_preset = true;
    Overrides o;
    o.horizon = 4;
    apply_overrides(spec, o);
    const fs::path dir = scratch_dir("ov");
    const RunReport r = run_preset(spec, Mode::Horizon, dir);
    EXPECT_EQ(r.horizon.N_min, 4);
    EXPECT_TRUE(r.gates.empty());
    fs::remove_all(dir);
    Overrides bad;
    bad.noise = 1.5;
    EXPECT_THROW(apply_overrides(spec, bad), InvalidArgument);
    EXPECT_THROW(parse_mode("fast"), InvalidArgument);
}

TEST(Export, EmptyTrajectoryWritesHeaderOnly) {
    const fs::path dir = scratch_dir("ex");
    write_trajectory_csv(dir / "state.csv", Trajectory(0.0, 0.01, 0, 3), 3);
    EXPECT_EQ(slurp(dir / "state.csv"), "t,x_1,x_2,x_3\n");
    RunSummary s;
    write_summary_json(dir / "summary.json", s);
    EXPECT_EQ(read_summary_json(dir / "summary.json"), s);
    fs::remove_all(dir);
}

TEST(Export, RunOneNmpcStateRows) {
    const fs::path dir = scratch_dir("n1");
    (void)run_preset("run1", Mode::Nmpc, dir);
    const auto state = lines_of(dir / "run1" / "nmpc" / "state.csv");
    ASSERT_EQ(state.size(), 52u);
    EXPECT_EQ(state[0].substr(0, 10), "t,x_1,x_2,");
    EXPECT_EQ(state[0].substr(state[0].size() - 5), ",x_99");
    EXPECT_EQ(lines_of(dir / "run1" / "nmpc" / "control.csv").size(), 51u);
    fs::remove_all(dir);
}

TEST(Export, SummaryRoundTrip) {
    const fs::path dir = scratch_dir("rt");
    RunSummary s;
    s.N = 43;
    s.K = 9.99;
    s.alpha = 0.1 + 0.2;  // not exactly representable in short decimal
    s.J = 4.123456789012345e-4;
    s.err_L2 = 1e-300;
    s.err_sup = 0.0;
    s.wall_time_s = 12.5;
    write_summary_json(dir / "s.json", s);
    EXPECT_EQ(read_summary_json(dir / "s.json"), s);
    EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
    EXPECT_EQ(std::stod(format_number(s.J.value())), s.J.value());
    fs::remove_all(dir);
}

TEST(Sweep, RowsAndCsv) {
    const RunPreset pr = preset_run2();
    const auto rows = sweep_err_horizon(pr, {0.0, 1e-3, 1e-2, 1e-1});
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_TRUE(rows[0].found);
    EXPECT_EQ(rows[0].N_min, minimal_horizon(pr.params, pr.initial_state()).N_min);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].found && rows[i - 1].found) EXPECT_GE(rows[i].N_min, rows[i - 1].N_min);
    }
    EXPECT_EQ(rows[1].N_min, 14);
    EXPECT_THROW(sweep_err_horizon(pr, {1e-2, 1e-3}), InvalidArgument);
    EXPECT_THROW(sweep_err_horizon(pr, {-1.0}), InvalidArgument);

    const fs::path dir = scratch_dir("sw");
    write_sweep_csv(dir / "sweep.csv", rows);
    const auto lines = lines_of(dir / "sweep.csv");
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "err,N_min,K_star,alpha,found");
    EXPECT_EQ(lines[1].substr(0, 5), "0,14,");
    fs::remove_all(dir);
}

TEST(Determinism, IdenticalArtifacts) {
    RunSpec spec;
    spec.preset = preset_run2();
    spec.from_preset = true;
    spec.noise = 0.2;
    spec.seed = 11;
    RomSettings rs;
    rs.pod_rank = 3;
    rs.deim_rank = 2;
    spec.rom = rs;
    const fs::path a = scratch_dir("da");
    const fs::path b = scratch_dir("db");
    (void)run_preset(spec, Mode::PodNmpc, a);
    (void)run_preset(spec, Mode::PodNmpc, b);
    for (const char* sub : {"nmpc", "pod"}) {
        for (const char* f : {"state.csv", "control.csv"}) {
            EXPECT_EQ(slurp(a / "run2" / sub / f), slurp(b / "run2" / sub / f)) << sub << '/' << f;
        }
        RunSummary sa = read_summary_json(a / "run2" / sub / "summary.json");
        RunSummary sb = read_summary_json(b / "run2" / sub / "summary.json");
        sa.wall_time_s.reset();
        sb.wall_time_s.reset();
        sa.speedup.reset();
        sb.speedup.reset();
        EXPECT_EQ(sa, sb) << sub;
    }
    EXPECT_EQ(slurp(a / "run2" / "pod" / "eigs.csv"), slurp(b / "run2" / "pod" / "eigs.csv"));
    EXPECT_EQ(slurp(a / "run2" / "pod" / "basis.csv"), slurp(b / "run2" / "pod" / "basis.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Binary, ExitCodes) {
    const fs::path dir = scratch_dir("bin");
    const std::string out = " --out " + dir.string();
    EXPECT_EQ(run_cli("run --preset run1 --mode horizon" + out), 0);
    EXPECT_EQ(run_cli("run --config " + std::string(PODMPC_SAMPLES_DIR) + "/run1.json --mode horizon" + out), 0);
    EXPECT_EQ(run_cli("run --preset run1 --mode horizon --horizon 3 --pod-rank 2" + out), 0);
    // A published gate outside its tolerance.
    EXPECT_EQ(run_cli("run --preset run4 --mode nmpc" + out), 2);
    // Execution errors.
    EXPECT_EQ(run_cli("run --preset run9 --mode horizon" + out), 1);
    EXPECT_EQ(run_cli("run --preset run1 --mode turbo" + out), 1);
    EXPECT_EQ(run_cli("run --preset run1 --noise 2" + out), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("sweep --preset run2 --err 0,0.01" + out), 0);
    EXPECT_TRUE(fs::exists(dir / "run2" / "sweep.csv"));
    EXPECT_EQ(run_cli("sweep --preset run2 --err 0.1,0" + out), 1);
    fs::remove_all(dir);
}

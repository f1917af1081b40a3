// SPDX-License-Identifier: MIT
//
// Result files: trajectories and spectra as CSV with shortest round-trip
// numbers, run summaries as JSON, basis modes as CSV with an eigenvalue
// header row.

#pragma once

#include "podmpc/core.hpp"
#include "podmpc/pod.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>

namespace podmpc {

class IoError : public Error {
public:
    using Error::Error;
};

/// Shortest decimal string that parses back to the same double.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Header `t,x_1,...,x_n`, one row per stored time. Control rows carry the
/// left end of their interval.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                                 Eigen::Index n_nodes) {
    if (traj.rows() > 0 && traj.dim() != n_nodes) {
        throw InvalidArgument("write_trajectory_csv: trajectory width does not match the grid");
    }
    std::ofstream out = open_output(path);
    out << 't';
    for (Eigen::Index i = 1; i <= n_nodes; ++i) out << ",x_" << i;
    out << '\n';
    for (Eigen::Index k = 0; k < traj.rows(); ++k) {
        out << format_number(traj.t0 + static_cast<double>(k) * traj.dt);
        for (Eigen::Index i = 0; i < traj.dim(); ++i) out << ',' << format_number(traj.values(k, i));
        out << '\n';
    }
    finish_output(out, path);
}

inline void write_eigs_csv(const std::filesystem::path& path, const PodBasis& basis) {
    std::ofstream out = open_output(path);
    out << "index,eigenvalue\n";
    for (int i = 0; i < basis.rank(); ++i) {
        out << (i + 1) << ',' << format_number(basis.eigenvalues(i)) << '\n';
    }
    finish_output(out, path);
}

/// First row: `x` then the eigenvalue of each mode; then one row per node
/// with the node coordinate and the mode values.
inline void write_basis_csv(const std::filesystem::path& path, const PodBasis& basis,
                            const SpatialGrid& grid, int ell) {
    const Matrix psi = basis.leading(ell);
    if (psi.rows() != grid.size()) throw InvalidArgument("write_basis_csv: grid mismatch");
    std::ofstream out = open_output(path);
    out << 'x';
    for (int j = 0; j < ell; ++j) out << ',' << format_number(basis.eigenvalues(j));
    out << '\n';
    for (Eigen::Index i = 0; i < psi.rows(); ++i) {
        out << format_number(grid.nodes(i));
        for (int j = 0; j < ell; ++j) out << ',' << format_number(psi(i, j));
        out << '\n';
    }
    finish_output(out, path);
}

struct RunSummary {
    int N = 0;
    std::optional<double> K;
    std::optional<double> alpha;
    std::optional<double> J;
    std::optional<double> err_L2;
    std::optional<double> err_sup;
    std::optional<double> wall_time_s;
    std::optional<double> speedup;

    friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

namespace detail {

inline nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

inline std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_number()) throw IoError(std::string("summary: '") + key + "' is not a number");
    return j.at(key).get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json summary_json(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["N"] = s.N;
    j["K"] = detail::optional_number(s.K);
    j["alpha"] = detail::optional_number(s.alpha);
    j["J"] = detail::optional_number(s.J);
    j["err_L2"] = detail::optional_number(s.err_L2);
    j["err_sup"] = detail::optional_number(s.err_sup);
    j["wall_time_s"] = detail::optional_number(s.wall_time_s);
    j["speedup"] = detail::optional_number(s.speedup);
    return j;
}

inline void write_summary_json(const std::filesystem::path& path, const RunSummary& s) {
    std::ofstream out = open_output(path);
    out << summary_json(s).dump(2) << '\n';
    finish_output(out, path);
}

inline RunSummary read_summary_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("summary '" + path.string() + "': " + e.what());
    }
    RunSummary s;
    if (!j.contains("N") || !j.at("N").is_number_integer()) {
        throw IoError("summary '" + path.string() + "': missing integer 'N'");
    }
    s.N = j.at("N").get<int>();
    s.K = detail::read_optional(j, "K");
    s.alpha = detail::read_optional(j, "alpha");
    s.J = detail::read_optional(j, "J");
    s.err_L2 = detail::read_optional(j, "err_L2");
    s.err_sup = detail::read_optional(j, "err_sup");
    s.wall_time_s = detail::read_optional(j, "wall_time_s");
    s.speedup = detail::read_optional(j, "speedup");
    return s;
}

}  // namespace podmpc

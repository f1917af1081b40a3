// SPDX-License-Identifier: MIT
//
// Shared setup for the unit tests.

#pragma once

#include "podmpc/podmpc.hpp"

#include <optional>

namespace fixtures {

inline podmpc::MpcConfig config_for(const podmpc::RunPreset& pr, int N,
                                    std::optional<podmpc::RomRanks> ranks = std::nullopt) {
    podmpc::MpcConfig c;
    c.params = pr.params;
    c.grid = pr.grid();
    c.y0 = pr.initial_state();
    c.T = pr.T;
    c.N = N;
    if (ranks) {
        podmpc::RomSettings rs;
        rs.pod_rank = ranks->pod;
        rs.deim_rank = ranks->deim;
        c.rom = rs;
    }
    return c;
}

inline double relative(double a, double ref) { return std::abs(a - ref) / std::abs(ref); }

}  // namespace fixtures

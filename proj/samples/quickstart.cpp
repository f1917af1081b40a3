// SPDX-License-Identifier: MIT
//
// Minimal horizon, NMPC and POD-NMPC on the first preset.

#include "podmpc/podmpc.hpp"

#include <iostream>

int main() {
    using namespace podmpc;

    const RunPreset pr = preset("run1");
    const HorizonResult h = minimal_horizon(pr.params, pr.initial_state());
    std::cout << "N_min=" << h.N_min << " K*=" << format_number(h.K_star)
              << " alpha=" << format_number(h.alpha) << '\n';

    MpcConfig cfg;
    cfg.params = pr.params;
    cfg.grid = pr.grid();
    cfg.y0 = pr.initial_state();
    cfg.T = pr.T;
    cfg.N = h.N_min;

    const MpcResult full = run_nmpc(cfg);
    std::cout << "NMPC      J=" << format_number(full.closed_loop_cost) << '\n';

    RomSettings rom;
    rom.pod_rank = pr.rom_low.pod;
    rom.deim_rank = pr.rom_low.deim;
    cfg.rom = rom;
    const MpcResult reduced = run_pod_nmpc(cfg);
    const MetricRecord m = evaluate_metrics(cfg, reduced, &full);
    std::cout << "POD-NMPC  J=" << format_number(m.cost) << " err_L2=" << format_number(m.err_l2.value_or(0.0))
              << " speedup=" << format_number(m.speedup.value_or(0.0)) << '\n';
}

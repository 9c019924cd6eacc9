#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "netident/network_model.hpp"
#include "netident/signal_record.hpp"

namespace netident {

/// Excitation applied at an r-present node.
struct ExcitationSpec {
    enum class Kind { white, filtered_white, multisine };
    Kind kind = Kind::white;
    double amplitude = 1.0;
    TransferFunction shaping = TransferFunction::unit(); // filtered_white only
    int sine_count = 8;                                  // multisine only; seeded random phases
};

/// Everything needed to reproduce one simulation run.
struct SimulationPlan {
    NetworkModel model;
    int N = 0;
    int burn_in = 1000;
    std::uint64_t seed = 0;
    std::map<int, ExcitationSpec> excitation; // node (0-based) -> spec; only r-present nodes
    bool gaussian = true;                     // uniform innovations when false

    /// White excitation with unit amplitude on every r-present node.
    static SimulationPlan basic(const NetworkModel& model, int N, std::uint64_t seed);
};

struct StabilityResult {
    bool stable = false;
    double margin = 0.0; // 1 - max spectral radius of G(e^{i omega}) over the grid
    double worst_module_pole_radius = 0.0;
    std::string detail;
};

/// Sufficient loop-stability test: every module and noise entry stable and the
/// spectral radius of G(e^{i omega}) below 1 - margin_floor on the whole grid.
StabilityResult stability_check(const NetworkModel& model, const FrequencyGrid& grid,
                                double margin_floor = 1e-3);

/// Correlated driving noise only: channels e1..eL and v1..vL, with
/// e = chol(Lambda) * (unit white) and v = H e. Reproducible from the seed.
SignalRecord generate_noise(const SimulationPlan& plan);

/// Full network response, channels w, e, v, r. The first burn_in samples are
/// discarded from every channel. Refuses unstable networks; throws
/// AlgebraicLoopError when (I - D0) is singular.
SignalRecord simulate(const SimulationPlan& plan);

} // namespace netident

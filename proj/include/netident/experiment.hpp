#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "netident/identify.hpp"
#include "netident/network_model.hpp"

namespace netident {

/// Reproducibility contract: everything needed to reconstruct a run. Written
/// next to the outputs; paths inside the outputs stay relative so reruns are
/// byte-identical.
struct ExperimentManifest {
    std::string tool_version = "1.0.0";
    std::string command;     // "montecarlo", "identify", ...
    std::string config_path; // as given on the command line
    int target_j = 0, target_i = 0; // 1-based in the manifest file
    std::string criterion = "mldet";
    int reps = 20;
    std::vector<int> sample_sizes;
    std::uint64_t seed = 1;
    int grid_size = 256;
    std::map<std::string, std::string> extra;

    void write_file(const std::string& path) const;
    static ExperimentManifest read_file(const std::string& path);
};

struct MonteCarloCell {
    int N = 0;
    std::string setup; // "mimo" or "miso"
    std::vector<double> rel_errors; // per successful realization, sup-norm relative
    std::vector<std::pair<int, std::string>> failures; // rep -> error marker
    double median = 0.0, iqr = 0.0, mean = 0.0;
};

struct MonteCarloResult {
    ExperimentManifest manifest;
    std::vector<MonteCarloCell> cells; // ordered by N, then setup (mimo, miso)
    // per (N, setup): median |Ghat - G0| per grid frequency
    std::map<std::pair<int, std::string>, std::vector<double>> bias_curves;
    std::vector<double> grid_omega;
    std::vector<double> true_abs; // |G0| on the grid
    double min_phi_kappa_eig = 0.0; // condition-3 diagnostic at N = max
    const MonteCarloCell& cell(int N, const std::string& setup) const;
};

/// Runs the consistency experiment: for each N and realization, simulate the
/// network, estimate the target with the MIMO setup from the signal-selection
/// algorithm and with the naive MISO baseline (w_{N_j} -> w_j, scalar noise
/// model), and record grid-response errors of the target module. Deterministic
/// under the manifest's master seed; realizations fan out to a worker pool.
MonteCarloResult run_montecarlo(const NetworkModel& model, const ExperimentManifest& manifest,
                                int threads = 0);

/// Writes mc_summary.tsv, mc_details.tsv and per-(N, setup) bias curve files
/// into out_dir, plus the manifest. Stable names, stable formatting.
void emit_montecarlo_report(const MonteCarloResult& result, const std::string& out_dir);

double sample_median(std::vector<double> values);
double sample_iqr(std::vector<double> values);

/// Sup-norm relative error of a module estimate on a grid.
double grid_relative_error(const std::vector<std::complex<double>>& estimate,
                           const std::vector<std::complex<double>>& truth);

} // namespace netident

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netident/graph.hpp"
#include "netident/network_model.hpp"
#include "netident/signal_record.hpp"

namespace netident {

/// Orders of one parametrized module: nb numerator coefficients starting at
/// lag nk, over a monic denominator of degree nf.
struct ModuleOrders {
    int nb = 1, nf = 1, nk = 1;
};

/// Orders of a diagonal noise entry (1 + c1 q^-1 + ...)/(1 + d1 q^-1 + ...).
struct NoiseDiagOrders {
    int nc = 1, nd = 1;
};

/// Parametrized MIMO predictor set M = {(Gbar(theta), Hbar(theta))} for the
/// estimation problem w_D -> w_Y. Rows follow (Q ascending, then o); columns
/// follow (Q, B, A ascending). Free module entries sit exactly on the known
/// topology restricted to Y x D; Hbar is monic with diagonal ARMA entries and
/// FIR off-diagonal entries that are free only where the known disturbance
/// correlation pattern is nonzero. The innovation covariance is handled in
/// concentrated form: Lambda_hat = (1/N) sum eps eps^T at the optimum, which
/// keeps it parametrized independently of Gbar and Hbar.
struct ModelStructure {
    std::vector<int> y_nodes;
    std::vector<int> d_nodes;

    struct GEntry {
        int row = 0;      // index into y_nodes
        int col_node = 0; // network node id of the predictor input
        ModuleOrders orders;
        int offset = 0;   // position in theta
    };
    struct HDiagEntry {
        int row = 0;
        NoiseDiagOrders orders;
        int offset = 0;
    };
    struct HOffEntry {
        int row = 0, col = 0; // indices into y_nodes, row != col
        int nh = 0;           // FIR taps at lags 1..nh
        int offset = 0;
    };

    std::vector<GEntry> g_entries;
    std::vector<HDiagEntry> h_diag;
    std::vector<HOffEntry> h_off;
    int theta_dim = 0;

    int ny() const { return static_cast<int>(y_nodes.size()); }
    int nd() const { return static_cast<int>(d_nodes.size()); }

    TransferFunction g_tf(const GEntry& e, const Eigen::VectorXd& theta) const;
    TransferFunction h_diag_tf(const HDiagEntry& e, const Eigen::VectorXd& theta) const;
    TransferFunction h_off_tf(const HOffEntry& e, const Eigen::VectorXd& theta) const;

    /// theta reproducing the model's true dynamics; throws Error when the true
    /// system does not lie inside this structure.
    Eigen::VectorXd pack_true(const NetworkModel& model) const;

    std::string describe() const;
};

/// Orders read off the config's true coefficients (the S-in-M experiment
/// default).
std::map<std::pair<int, int>, ModuleOrders> derive_module_orders(const NetworkModel& model,
                                                                 const NodePartition& partition);
std::map<int, NoiseDiagOrders> derive_noise_orders(const NetworkModel& model,
                                                   const NodePartition& partition);

/// FIR tap count covering the config's true off-diagonal noise couplings
/// inside Y (minimum 2).
int derive_h_off_taps(const NetworkModel& model, const NodePartition& partition);

/// Builds the structure for the partition over the model's topology and noise
/// correlation pattern. Throws Error for an order spec naming an absent
/// module, and rejects structures violating the delay condition (some module
/// not strictly proper while a zero-delay path or loop runs from Q, o or B
/// back into Q or o).
ModelStructure build_model_structure(const NetworkModel& model, const NodePartition& partition,
                                     const std::map<std::pair<int, int>, ModuleOrders>& g_orders,
                                     const std::map<int, NoiseDiagOrders>& h_orders,
                                     int h_off_taps = 2);

/// Prediction errors eps(t, theta) = Hbar^{-1}(theta) [w_Y - Gbar(theta) w_D],
/// computed by the exact monic IIR recursion under zero initial conditions.
/// Throws DomainViolationError on unstable parametrizations (detected by a
/// residual blow-up guard and per-entry pole checks).
Eigen::MatrixXd predict_errors(const ModelStructure& structure, const Eigen::VectorXd& theta,
                               const SignalRecord& data);

/// (1/N) sum eps(t)^T W eps(t); W must be symmetric positive definite.
double criterion_wls(const Eigen::MatrixXd& eps, const Eigen::MatrixXd& W);

/// det((1/N) sum eps eps^T); throws DegenerateResidualError when the sample
/// covariance is numerically singular.
double criterion_ml_det(const Eigen::MatrixXd& eps);

enum class CriterionKind { wls, ml_det };

struct EstimateOptions {
    CriterionKind criterion = CriterionKind::ml_det;
    Eigen::MatrixXd W; // wls weight; defaults to identity
    int starts = 8;
    std::uint64_t seed = 1;
    int max_iter = 200;
    double grad_tol = 1e-7;
    std::optional<Eigen::VectorXd> init; // start 0; zeros otherwise
    int threads = 0;                     // 0 = use hardware concurrency
};

struct StartDiagnostics {
    int start = 0;
    double criterion = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    bool diverged = false;
    std::vector<double> trace; // accepted criterion value per iteration
};

struct EstimationResult {
    Eigen::VectorXd theta;
    double criterion_value = 0.0;
    Eigen::MatrixXd lambda_hat; // (1/N) sum eps eps^T at the optimum
    Eigen::MatrixXd residuals;  // N x |Y|
    int best_start = 0;
    int iterations = 0;
    double gradient_norm = 0.0;
    std::vector<StartDiagnostics> starts;
};

/// Criterion value at theta; +inf outside the admissible set.
double criterion_value(const ModelStructure& structure, const Eigen::VectorXd& theta,
                       const SignalRecord& data, const EstimateOptions& options);

/// Analytic criterion gradient via sensitivity filtering (the optimizer's
/// internal gradient).
Eigen::VectorXd criterion_gradient(const ModelStructure& structure, const Eigen::VectorXd& theta,
                                   const SignalRecord& data, const EstimateOptions& options);

/// Multi-start BFGS minimization of the chosen criterion. Deterministic for a
/// fixed seed and options; starts run in parallel and are reduced by best
/// criterion value with ties to the lowest start index.
EstimationResult estimate(const ModelStructure& structure, const SignalRecord& data,
                          const EstimateOptions& options);

struct ModuleEstimate {
    TransferFunction tf;
    std::vector<std::complex<double>> response;
};

/// The identified module G_{j,i} in coefficient and grid-response form.
/// Throws Error when (j, i) is not a free entry of the structure.
ModuleEstimate extract_module(const ModelStructure& structure, const Eigen::VectorXd& theta,
                              int j, int i, const FrequencyGrid& grid);

/// Ljung-Box portmanteau statistic over lags 1..max_lag for one channel.
double ljung_box_statistic(const Eigen::VectorXd& channel, int max_lag);

} // namespace netident

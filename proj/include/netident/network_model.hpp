#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "netident/transfer_function.hpp"

namespace netident {

/// Evaluation frequencies, strictly increasing in (0, pi].
struct FrequencyGrid {
    std::vector<double> omega;

    /// Logarithmically spaced points between lo and pi (default artifact grid).
    static FrequencyGrid log_spaced(int m = 256, double lo = 1e-3);

    int size() const { return static_cast<int>(omega.size()); }
    void validate() const; // throws std::invalid_argument
};

/// Ground-truth dynamic network
///
///   w = G w + r + H e,   cov(e) = Lambda,
///
/// with L node signals, an L x L hollow module matrix G, an L x L noise
/// model H (monic diagonal by default; off-diagonal couplings and non-monic
/// entries allowed) and symmetric positive-definite Lambda. Nodes are indexed
/// 0..L-1 internally; file formats and reports use 1-based labels.
struct NetworkModel {
    int L = 0;
    std::vector<std::vector<TransferFunction>> G; // G[j][l]: edge w_l -> w_j
    std::vector<std::vector<TransferFunction>> H; // H[j][k]: noise e_k -> v_j
    Eigen::MatrixXd lambda;                       // L x L, defaults to identity
    std::vector<bool> r_present;
    std::vector<std::string> labels;

    static NetworkModel empty(int L);

    /// Indices k with G[j][k] nonzero.
    std::vector<int> in_neighbors(int j) const;

    bool all_modules_strictly_proper() const;
    bool lambda_is_diagonal(double tol = 0.0) const;

    /// G evaluated entrywise at z = e^{i omega}.
    Eigen::MatrixXcd eval_G(double omega) const;
    Eigen::MatrixXcd eval_H(double omega) const;

    /// Boolean nonzero pattern of Phi_v = H Lambda H*; v_j and v_k are treated
    /// as correlated iff entry (j,k) is set.
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> noise_correlation_pattern() const;

    /// Nonzero pattern of H * chol(Lambda): the noise-source incidence after
    /// rescaling the white sources to unit covariance. Equals the pattern of H
    /// whenever Lambda is diagonal. Requires Lambda positive definite.
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> canonical_noise_pattern() const;

    /// Lower Cholesky factor of Lambda; throws Error if not positive definite.
    Eigen::MatrixXd lambda_cholesky() const;
};

struct Violation {
    enum class Kind {
        nonzero_diagonal,
        improper_entry,
        delay_assumption,
        instability,
        non_psd_lambda,
        algebraic_loop,
        unstable_noise_model,
    };
    Kind kind;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    double stability_margin = 0.0;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Structural and numeric checks per the network assumptions: hollow G,
/// representation invariants, the delay assumption (all modules strictly
/// proper or Lambda diagonal), loop stability, well-posedness of the
/// instantaneous loop, positive-definite Lambda. Report style: callers decide
/// severity.
ValidationReport validate_network(const NetworkModel& model, const FrequencyGrid& grid);
ValidationReport validate_network(const NetworkModel& model);

/// Entrywise response of a single transfer function on a grid.
std::vector<std::complex<double>> frequency_response(const TransferFunction& tf,
                                                     const FrequencyGrid& grid);

} // namespace netident

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "netident/graph.hpp"
#include "netident/network_model.hpp"

namespace netident {

/// Dynamics among the measured nodes after eliminating w_Z, evaluated on a
/// frequency grid. Rows and columns are ordered (Q, o, B, A); the immersed
/// noise responses keep all L source columns in the order (Q, o, B, A, Z).
/// Rows Q and o carry the original dynamics (their zero blocks towards B and Z
/// are structural); rows B and A gain the Z-propagated terms
///
///   row_X <- X_orig + G_{XZ} (I - G_{ZZ})^{-1} (Z rows).
struct ImmersedSystem {
    NodePartition partition;
    FrequencyGrid grid;
    std::vector<int> row_nodes; // measured nodes, (Q, o, B, A) order
    std::vector<int> e_nodes;   // all L sources, (Q, o, B, A, Z) order
    std::vector<Eigen::MatrixXcd> G_breve; // per frequency, rows x rows
    std::vector<Eigen::MatrixXcd> H_breve; // per frequency, rows x L
    Eigen::MatrixXd lambda;                // reordered to e_nodes
    Eigen::MatrixXd lambda_factor;         // reordered chol(Lambda); unit-source rescaling

    int block_offset(char block) const; // 'Q','o','B','A' -> first row index
    int block_size(char block) const;
};

/// Throws ImmersionSingularityError naming the first frequency where
/// (I - G_ZZ) is numerically singular.
ImmersedSystem immerse(const NetworkModel& model, const NodePartition& partition,
                       const FrequencyGrid& grid);

/// Phi_vbreve(omega) = H_breve Lambda H_breve^*, blocked by (Q, o, B, A).
struct DisturbanceSpectrum {
    FrequencyGrid grid;
    std::vector<int> row_nodes;
    std::vector<Eigen::MatrixXcd> phi;
    int nQ = 0, nO = 0, nB = 0, nA = 0;
};

DisturbanceSpectrum disturbance_spectrum(const ImmersedSystem& sys);

/// Relative grid norms of the blocks that Property 1 forces to vanish.
struct BlockReport {
    double rel_QA = 0.0, rel_oA = 0.0, rel_BA = 0.0;
    double hermitian_defect = 0.0; // max over grid of ||Phi - Phi*||
    double threshold = 1e-8;
    bool pass = false;
    std::string to_string() const;
};

BlockReport check_zero_blocks(const DisturbanceSpectrum& spectrum, double threshold = 1e-8);

/// Lemma-1 product field: for source x and node groups g1, g2, the per-
/// frequency outer product of the x-columns of the immersed noise responses,
/// taken in unit-source scaling (columns of H_breve * chol(Lambda)). The field
/// vanishes identically iff no simultaneous measured-free paths exist.
std::vector<Eigen::MatrixXcd> lemma1_product(const ImmersedSystem& sys, int e_index,
                                             const NodeSet& group1, const NodeSet& group2);

/// Max Frobenius norm of a grid-valued field.
double max_grid_norm(const std::vector<Eigen::MatrixXcd>& field);

/// The graph-side predicate mirrored by lemma1_product: true (pass) iff source
/// x does NOT have simultaneous direct-or-unmeasured paths into both groups.
bool lemma1_graph_predicate(const NetworkGraph& g, int e_index, const NodeSet& group1,
                            const NodeSet& group2, const NodeSet& Z);

/// Analytic node spectrum of the immersed subsystem,
/// (I - G_breve)^{-1} Phi_vbreve (I - G_breve)^{-*} per grid point.
std::vector<Eigen::MatrixXcd> immersed_node_spectrum(const ImmersedSystem& sys);

} // namespace netident

#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "netident/network_model.hpp"

namespace netident {

/// Directed graph over the node signals w_1..w_L and white sources e_1..e_L.
/// Module edges follow the nonzero pattern of G; noise edges follow the
/// canonical noise pattern (H rescaled to unit source covariance), which is
/// the nonzero pattern of H whenever Lambda is diagonal. Dynamics are ignored.
struct NetworkGraph {
    int L = 0;
    std::vector<std::vector<int>> w_out; // w_out[l]: nodes j with an edge w_l -> w_j
    std::vector<std::vector<int>> e_out; // e_out[k]: nodes j with an edge e_k -> w_j
};

NetworkGraph build_graph(const NetworkModel& model);

using NodeSet = std::set<int>;

/// Endpoint of a path query: a node signal or a white source.
struct GraphNode {
    enum class Kind { w, e };
    Kind kind;
    int index;
    static GraphNode w(int i) { return {Kind::w, i}; }
    static GraphNode e(int i) { return {Kind::e, i}; }
};

/// True iff a directed path from `from` to w-node `to` exists whose
/// intermediate w-nodes (everything strictly between the endpoints) all
/// satisfy `allowed`. A single edge has no intermediates and always qualifies.
bool path_exists(const NetworkGraph& g, GraphNode from, int to,
                 const std::function<bool(int)>& allowed);

/// Witness path: the ordered w-nodes from the first hop to the target.
struct PathWitness {
    GraphNode source{GraphNode::Kind::w, -1};
    std::vector<int> w_nodes;
    bool direct() const { return w_nodes.size() == 1; }
    std::string to_string() const;
};

/// Shortest qualifying path, if any.
std::optional<PathWitness> find_path(const NetworkGraph& g, GraphNode from, int to,
                                     const std::function<bool(int)>& allowed);

/// All simple qualifying paths from `from` into `targets` whose intermediates
/// lie in Z, up to `cap` paths. Deterministic order (BFS by length, then index).
std::vector<PathWitness> qualifying_paths(const NetworkGraph& g, GraphNode from,
                                          const NodeSet& targets, const NodeSet& Z,
                                          std::size_t cap = 16);

/// A white source with simultaneous direct-or-unmeasured paths to the input
/// and output sets of an estimation problem.
struct ConfounderFinding {
    int e_index = -1;
    int input_witness = -1;  // reached node in the input set
    int output_witness = -1; // reached node in the output set
    enum class Kind { direct, indirect } kind = Kind::indirect;
    PathWitness input_path, output_path;
    std::vector<std::pair<PathWitness, PathWitness>> witness_pairs; // capped
    std::string to_string() const;
};

/// Definition-1 test for source e_index against the estimation problem
/// inputs -> outputs with unmeasured set Z. Witness paths are direct (a single
/// noise edge) or unmeasured (every intermediate w-node in Z). kind is direct
/// iff some witness pair is direct on both sides.
std::optional<ConfounderFinding> is_confounder(const NetworkGraph& g, int e_index,
                                               const NodeSet& inputs, const NodeSet& outputs,
                                               const NodeSet& Z, std::size_t pair_cap = 16);

/// All confounders for inputs -> outputs, deduplicated by source index.
std::vector<ConfounderFinding> enumerate_confounders(const NetworkGraph& g, const NodeSet& inputs,
                                                     const NodeSet& outputs, const NodeSet& Z,
                                                     std::size_t pair_cap = 16);

/// The identification setup around target G_{j,i}: predicted outputs Y,
/// predictor inputs D and the decomposition Q = Y cap D, o, A = D \ Q,
/// blocking inputs B, unmeasured remainder Z.
struct NodePartition {
    int L = 0;
    int target_j = -1, target_i = -1;
    NodeSet Y, D, Q, A, B, Z;
    std::optional<int> o;

    /// Checks the set algebra and the full-input property; throws Error.
    void validate(const NetworkModel& model) const;
    std::string to_string() const; // 1-based set listing
};

/// Steps 1-6 of the signal-selection algorithm: fixed-point growth of Y and D
/// from the target, with the correlation test read from the nonzero pattern of
/// H Lambda H*. Nodes are processed in ascending index order; B is left empty.
NodePartition algorithm_a(const NetworkModel& model, int target_j, int target_i);

struct ConditionResult {
    std::string id; // "1", "2a", "2b", "2c", "2d"
    bool pass = true;
    std::vector<std::string> witnesses;
};

struct Property1Report {
    std::vector<ConditionResult> conditions;
    std::vector<ConfounderFinding> confounders; // for A -> Y before blocking
    bool all_pass() const;
    std::vector<std::string> failing_ids() const;
    std::string to_string() const;
};

/// Evaluates the blocking-node conditions for the candidate B carried by the
/// partition (whose Z must be recomputed for that B):
///   1   B may be void only when A -> (Q, o) has no confounding variables;
///   2a  every direct-or-unmeasured path from a confounder to an A-node is
///       blocked by a node in B;
///   2b  no source has simultaneous direct-or-unmeasured paths to B and A;
///   2c  no direct or unmeasured path from w_i to a B-node;
///   2d  no direct or unmeasured path from w_j to a B-node.
Property1Report check_property1(const NetworkModel& model, const NodePartition& partition);

/// Candidate B subsets of {1..L} \ (Y u A) in order of increasing cardinality
/// (lexicographic within a cardinality); returns the first passing partition
/// with Z finalized. Throws NoValidBlockingSetError naming the best
/// candidate's failing conditions when the search exhausts.
NodePartition select_blocking_set(const NetworkModel& model, const NodePartition& after_algorithm_a,
                                  std::size_t candidate_cap = 1u << 20);

/// Rebuild the partition for an explicitly chosen B (Z recomputed); used to
/// evaluate forced blocking sets.
NodePartition with_blocking_set(const NodePartition& after_algorithm_a, const NodeSet& B);

std::string format_node_set(const NodeSet& s); // "{2, 4}" with 1-based ids

} // namespace netident

#pragma once

#include <cstdlib>
#include <string>

#include "netident/config.hpp"
#include "netident/graph.hpp"
#include "netident/rng.hpp"
#include "netident/simulator.hpp"

namespace testutil {

inline std::string config_dir() {
#ifdef NETIDENT_CONFIG_DIR
    return NETIDENT_CONFIG_DIR;
#else
    const char* env = std::getenv("NETIDENT_CONFIG_DIR");
    return env ? env : "configs";
#endif
}

inline std::string config_path(const std::string& name) { return config_dir() + "/" + name; }

inline netident::NetworkModel load_example1() {
    return netident::load_config_file(config_path("example1.cfg"));
}
inline netident::NetworkModel load_example2() {
    return netident::load_config_file(config_path("example2.cfg"));
}
inline netident::NetworkModel load_threenode() {
    return netident::load_config_file(config_path("threenode.cfg"));
}

/// Random small network for property suites: a sparse module DAG with gentle
/// first-order dynamics, monic diagonal noise, a few strictly proper noise
/// couplings. Always passes validate_network by construction (retry loop in
/// callers handles the rare unstable draw).
inline netident::NetworkModel random_network(netident::Rng& rng, int L) {
    using netident::TransferFunction;
    netident::NetworkModel m = netident::NetworkModel::empty(L);
    const auto first_order = [&](double lo, double hi) {
        const double b = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
        const double f = rng.uniform(-0.5, 0.5);
        return TransferFunction({0.0, b}, {1.0, f});
    };
    // edges j <- k for k > j keep the module graph acyclic; one optional
    // feedback edge with a small gain.
    for (int j = 0; j < L; ++j)
        for (int k = j + 1; k < L; ++k)
            if (rng.uniform() < 0.35)
                m.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = first_order(0.3, 0.8);
    if (rng.uniform() < 0.3) {
        const int j = static_cast<int>(rng.uniform(0.0, L));
        const int k = static_cast<int>(rng.uniform(0.0, L));
        if (j != k && j < L && k < L)
            m.G[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = first_order(0.1, 0.3);
    }
    for (int j = 0; j < L; ++j)
        if (rng.uniform() < 0.4)
            m.H[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] =
                TransferFunction({1.0}, {1.0, rng.uniform(-0.4, 0.4)});
    const int couplings = static_cast<int>(rng.uniform(0.0, 3.0));
    for (int c = 0; c < couplings; ++c) {
        const int j = static_cast<int>(rng.uniform(0.0, L));
        const int k = static_cast<int>(rng.uniform(0.0, L));
        if (j == k || j >= L || k >= L) continue;
        m.H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = first_order(0.2, 0.6);
    }
    return m;
}

/// First target (j, i) with a nonzero module, scanning deterministically.
inline std::pair<int, int> pick_target(const netident::NetworkModel& m, netident::Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int j = 0; j < m.L; ++j)
        for (int i = 0; i < m.L; ++i)
            if (!m.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].is_zero())
                edges.push_back({j, i});
    if (edges.empty()) return {-1, -1};
    return edges[static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(edges.size()))) %
                 edges.size()];
}

/// Independent reachability oracle: plain DFS over explicit adjacency with an
/// allowed-intermediates filter; used to cross-check the library's BFS.
inline bool dfs_path_oracle(const netident::NetworkGraph& g, netident::GraphNode from, int to,
                            const std::function<bool(int)>& allowed) {
    std::vector<int> stack;
    std::vector<bool> seen(static_cast<std::size_t>(g.L), false);
    const auto& first = from.kind == netident::GraphNode::Kind::w
                            ? g.w_out[static_cast<std::size_t>(from.index)]
                            : g.e_out[static_cast<std::size_t>(from.index)];
    for (int x : first) {
        if (x == to) return true;
        if (allowed(x) && !seen[static_cast<std::size_t>(x)]) {
            seen[static_cast<std::size_t>(x)] = true;
            stack.push_back(x);
        }
    }
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        for (int x : g.w_out[static_cast<std::size_t>(cur)]) {
            if (x == to) return true;
            if (allowed(x) && !seen[static_cast<std::size_t>(x)]) {
                seen[static_cast<std::size_t>(x)] = true;
                stack.push_back(x);
            }
        }
    }
    return false;
}

} // namespace testutil

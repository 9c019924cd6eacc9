#include "netident/graph.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <sstream>

#include "netident/errors.hpp"

namespace netident {

NetworkGraph build_graph(const NetworkModel& model) {
    NetworkGraph g;
    g.L = model.L;
    g.w_out.assign(static_cast<std::size_t>(model.L), {});
    g.e_out.assign(static_cast<std::size_t>(model.L), {});
    for (int j = 0; j < model.L; ++j)
        for (int l = 0; l < model.L; ++l)
            if (!model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)].is_zero())
                g.w_out[static_cast<std::size_t>(l)].push_back(j);
    const auto hp = model.canonical_noise_pattern();
    for (int j = 0; j < model.L; ++j)
        for (int k = 0; k < model.L; ++k)
            if (hp(j, k)) g.e_out[static_cast<std::size_t>(k)].push_back(j);
    for (auto& v : g.w_out) std::sort(v.begin(), v.end());
    for (auto& v : g.e_out) std::sort(v.begin(), v.end());
    return g;
}

namespace {

const std::vector<int>& out_edges(const NetworkGraph& g, GraphNode n) {
    return n.kind == GraphNode::Kind::w ? g.w_out[static_cast<std::size_t>(n.index)]
                                        : g.e_out[static_cast<std::size_t>(n.index)];
}

} // namespace

bool path_exists(const NetworkGraph& g, GraphNode from, int to,
                 const std::function<bool(int)>& allowed) {
    return find_path(g, from, to, allowed).has_value();
}

std::optional<PathWitness> find_path(const NetworkGraph& g, GraphNode from, int to,
                                     const std::function<bool(int)>& allowed) {
    // BFS; expansion is only allowed through w-nodes satisfying the predicate,
    // the target itself need not satisfy it.
    std::vector<int> parent(static_cast<std::size_t>(g.L), -2); // -2 unvisited, -1 root hop
    std::deque<int> queue;
    for (int x : out_edges(g, from)) {
        if (x == to) {
            PathWitness w;
            w.source = from;
            w.w_nodes = {to};
            return w;
        }
        if (allowed(x) && parent[static_cast<std::size_t>(x)] == -2) {
            parent[static_cast<std::size_t>(x)] = -1;
            queue.push_back(x);
        }
    }
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        for (int x : g.w_out[static_cast<std::size_t>(cur)]) {
            if (x == to) {
                PathWitness w;
                w.source = from;
                std::vector<int> rev = {to, cur};
                for (int p = parent[static_cast<std::size_t>(cur)]; p >= 0;
                     p = parent[static_cast<std::size_t>(p)])
                    rev.push_back(p);
                std::reverse(rev.begin(), rev.end());
                w.w_nodes = std::move(rev);
                return w;
            }
            if (allowed(x) && parent[static_cast<std::size_t>(x)] == -2) {
                parent[static_cast<std::size_t>(x)] = cur;
                queue.push_back(x);
            }
        }
    }
    return std::nullopt;
}

std::vector<PathWitness> qualifying_paths(const NetworkGraph& g, GraphNode from,
                                          const NodeSet& targets, const NodeSet& Z,
                                          std::size_t cap) {
    // Iterative deepening over simple paths keeps the order deterministic:
    // shorter witnesses first, ties by node index.
    std::vector<PathWitness> out;
    struct Frame {
        std::vector<int> path; // w-nodes so far (all in Z except possibly last==target)
    };
    std::deque<Frame> queue;
    for (int x : out_edges(g, from)) {
        if (targets.count(x)) {
            PathWitness w;
            w.source = from;
            w.w_nodes = {x};
            out.push_back(std::move(w));
            if (out.size() >= cap) return out;
        }
        if (Z.count(x)) queue.push_back({{x}});
    }
    while (!queue.empty() && out.size() < cap) {
        Frame f = std::move(queue.front());
        queue.pop_front();
        const int cur = f.path.back();
        for (int x : g.w_out[static_cast<std::size_t>(cur)]) {
            if (std::find(f.path.begin(), f.path.end(), x) != f.path.end()) continue;
            if (targets.count(x)) {
                PathWitness w;
                w.source = from;
                w.w_nodes = f.path;
                w.w_nodes.push_back(x);
                out.push_back(std::move(w));
                if (out.size() >= cap) return out;
            }
            if (Z.count(x)) {
                Frame nf = f;
                nf.path.push_back(x);
                queue.push_back(std::move(nf));
            }
        }
    }
    return out;
}

std::string PathWitness::to_string() const {
    std::ostringstream os;
    os << (source.kind == GraphNode::Kind::e ? "e" : "w") << (source.index + 1);
    for (int n : w_nodes) os << " -> w" << (n + 1);
    return os.str();
}

std::optional<ConfounderFinding> is_confounder(const NetworkGraph& g, int e_index,
                                               const NodeSet& inputs, const NodeSet& outputs,
                                               const NodeSet& Z, std::size_t pair_cap) {
    for (int n : inputs)
        if (Z.count(n)) throw Error("confounder query: inputs must be disjoint from Z");
    for (int n : outputs)
        if (Z.count(n)) throw Error("confounder query: outputs must be disjoint from Z");

    const auto in_paths = qualifying_paths(g, GraphNode::e(e_index), inputs, Z, pair_cap);
    if (in_paths.empty()) return std::nullopt;
    const auto out_paths = qualifying_paths(g, GraphNode::e(e_index), outputs, Z, pair_cap);
    if (out_paths.empty()) return std::nullopt;

    ConfounderFinding f;
    f.e_index = e_index;
    const auto pick = [](const std::vector<PathWitness>& paths) {
        for (std::size_t k = 0; k < paths.size(); ++k)
            if (paths[k].direct()) return k;
        return static_cast<std::size_t>(0);
    };
    const std::size_t bi = pick(in_paths), bo = pick(out_paths);
    f.input_path = in_paths[bi];
    f.output_path = out_paths[bo];
    f.input_witness = f.input_path.w_nodes.back();
    f.output_witness = f.output_path.w_nodes.back();
    f.kind = (f.input_path.direct() && f.output_path.direct()) ? ConfounderFinding::Kind::direct
                                                               : ConfounderFinding::Kind::indirect;
    for (const auto& ip : in_paths) {
        for (const auto& op : out_paths) {
            if (f.witness_pairs.size() >= pair_cap) break;
            f.witness_pairs.emplace_back(ip, op);
        }
        if (f.witness_pairs.size() >= pair_cap) break;
    }
    return f;
}

std::vector<ConfounderFinding> enumerate_confounders(const NetworkGraph& g, const NodeSet& inputs,
                                                     const NodeSet& outputs, const NodeSet& Z,
                                                     std::size_t pair_cap) {
    std::vector<ConfounderFinding> out;
    for (int k = 0; k < g.L; ++k)
        if (auto f = is_confounder(g, k, inputs, outputs, Z, pair_cap)) out.push_back(std::move(*f));
    return out;
}

std::string ConfounderFinding::to_string() const {
    std::ostringstream os;
    os << "e" << (e_index + 1) << ": "
       << (kind == Kind::direct ? "direct" : "indirect") << "; output path "
       << output_path.to_string() << "; input path " << input_path.to_string();
    return os.str();
}

std::string format_node_set(const NodeSet& s) {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (int n : s) {
        if (!first) os << ", ";
        os << (n + 1);
        first = false;
    }
    os << "}";
    return os.str();
}

void NodePartition::validate(const NetworkModel& model) const {
    const auto in = [](const NodeSet& s, int x) { return s.count(x) > 0; };
    NodeSet all;
    for (int k = 0; k < L; ++k) all.insert(k);

    NodeSet q_expected;
    std::set_intersection(Y.begin(), Y.end(), D.begin(), D.end(),
                          std::inserter(q_expected, q_expected.begin()));
    if (Q != q_expected) throw Error("partition: Q must equal Y intersect D");

    NodeSet y_minus_q;
    std::set_difference(Y.begin(), Y.end(), Q.begin(), Q.end(),
                        std::inserter(y_minus_q, y_minus_q.begin()));
    if (o) {
        if (y_minus_q != NodeSet{*o}) throw Error("partition: Y must equal Q plus {o}");
        if (*o != target_j) throw Error("partition: o must be the target output");
    } else if (!y_minus_q.empty()) {
        throw Error("partition: o void requires Y == Q");
    }

    NodeSet d_union;
    for (const NodeSet* s : {&Q, &A, &B})
        for (int x : *s) {
            if (!d_union.insert(x).second) throw Error("partition: Q, A, B must be disjoint");
        }
    if (d_union != D) throw Error("partition: Q, A, B must partition D");

    NodeSet z_expected = all;
    for (int x : D) z_expected.erase(x);
    for (int x : Y) z_expected.erase(x);
    if (Z != z_expected) throw Error("partition: Z must be the unmeasured remainder");

    if (!in(Y, target_j)) throw Error("partition: target output j must be in Y");
    if (!in(D, target_i)) throw Error("partition: target input i must be in D");

    for (int x : Y)
        for (int k : model.in_neighbors(x))
            if (!in(D, k))
                throw Error("partition: full-input violated, in-neighbor w" +
                            std::to_string(k + 1) + " of w" + std::to_string(x + 1) +
                            " is not a predictor input");
}

std::string NodePartition::to_string() const {
    std::ostringstream os;
    os << "Y = " << format_node_set(Y) << "\n";
    os << "D = " << format_node_set(D) << "\n";
    os << "Q = " << format_node_set(Q) << "\n";
    os << "A = " << format_node_set(A) << "\n";
    os << "B = " << format_node_set(B) << "\n";
    os << "Z = " << format_node_set(Z) << "\n";
    if (o)
        os << "o = " << (*o + 1) << "\n";
    else
        os << "o = void\n";
    return os.str();
}

NodePartition algorithm_a(const NetworkModel& model, int target_j, int target_i) {
    if (target_j < 0 || target_j >= model.L || target_i < 0 || target_i >= model.L)
        throw Error("target indices out of range");
    if (model.G[static_cast<std::size_t>(target_j)][static_cast<std::size_t>(target_i)].is_zero())
        throw Error("target module G[" + std::to_string(target_j + 1) + "," +
                    std::to_string(target_i + 1) + "] is absent from the topology");

    const auto corr = model.noise_correlation_pattern();
    NodeSet Y{target_j}, D;

    bool restart = true;
    while (restart) {
        restart = false;
        for (int x : std::vector<int>(Y.begin(), Y.end())) {
            bool y_changed = false;
            for (int k : model.in_neighbors(x)) {
                D.insert(k);
                if (!Y.count(k)) {
                    bool correlated = false;
                    for (int l : Y)
                        if (corr(k, l)) {
                            correlated = true;
                            break;
                        }
                    if (correlated) {
                        Y.insert(k);
                        y_changed = true;
                    }
                }
            }
            if (y_changed) {
                restart = true;
                break;
            }
        }
    }

    NodePartition p;
    p.L = model.L;
    p.target_j = target_j;
    p.target_i = target_i;
    p.Y = Y;
    p.D = D;
    std::set_intersection(Y.begin(), Y.end(), D.begin(), D.end(),
                          std::inserter(p.Q, p.Q.begin()));
    if (!p.Q.count(target_j)) p.o = target_j;
    std::set_difference(D.begin(), D.end(), p.Q.begin(), p.Q.end(),
                        std::inserter(p.A, p.A.begin()));
    for (int k = 0; k < model.L; ++k)
        if (!Y.count(k) && !D.count(k)) p.Z.insert(k);
    p.validate(model);
    return p;
}

NodePartition with_blocking_set(const NodePartition& base, const NodeSet& B) {
    NodePartition p = base;
    for (int b : B)
        if (base.Y.count(b) || base.A.count(b))
            throw Error("blocking node w" + std::to_string(b + 1) + " must not be in Y or A");
    p.B = B;
    p.D = base.D;
    for (int b : B) p.D.insert(b);
    p.Z.clear();
    for (int k = 0; k < p.L; ++k)
        if (!p.Y.count(k) && !p.D.count(k)) p.Z.insert(k);
    return p;
}

Property1Report check_property1(const NetworkModel& model, const NodePartition& partition) {
    partition.validate(model);
    const NetworkGraph g = build_graph(model);

    const NodeSet& Z = partition.Z;
    NodeSet Z0 = Z;
    for (int b : partition.B) Z0.insert(b);

    Property1Report rep;
    rep.confounders = enumerate_confounders(g, partition.A, partition.Y, Z0);

    // 1: a void B is admissible only without confounders.
    {
        ConditionResult c{"1", true, {}};
        if (partition.B.empty() && !rep.confounders.empty()) {
            c.pass = false;
            for (const auto& f : rep.confounders) c.witnesses.push_back(f.to_string());
        }
        rep.conditions.push_back(std::move(c));
    }

    // 2a: all direct-or-unmeasured paths from confounders to A-nodes blocked.
    // A path survives blocking iff it is direct or its intermediates avoid B,
    // i.e. iff it is direct-or-unmeasured for the final Z.
    {
        ConditionResult c{"2a", true, {}};
        for (const auto& f : rep.confounders) {
            const auto leftover = qualifying_paths(g, GraphNode::e(f.e_index), partition.A, Z, 4);
            for (const auto& p : leftover) {
                c.pass = false;
                c.witnesses.push_back("unblocked path " + p.to_string());
            }
        }
        rep.conditions.push_back(std::move(c));
    }

    // 2b: no source reaches both B and A on measured-free paths.
    {
        ConditionResult c{"2b", true, {}};
        for (int k = 0; k < model.L; ++k) {
            const auto to_b = qualifying_paths(g, GraphNode::e(k), partition.B, Z, 1);
            if (to_b.empty()) continue;
            const auto to_a = qualifying_paths(g, GraphNode::e(k), partition.A, Z, 1);
            if (to_a.empty()) continue;
            c.pass = false;
            c.witnesses.push_back("e" + std::to_string(k + 1) + " reaches " +
                                  to_b.front().to_string() + " and " + to_a.front().to_string() +
                                  " without measured intermediates");
        }
        rep.conditions.push_back(std::move(c));
    }

    // 2c / 2d: the target input and output must not feed B directly or
    // through unmeasured nodes.
    const auto w_to_B = [&](int from, const char* id) {
        ConditionResult c{id, true, {}};
        const auto paths = qualifying_paths(g, GraphNode::w(from), partition.B, Z, 4);
        for (const auto& p : paths) {
            c.pass = false;
            c.witnesses.push_back("path " + p.to_string());
        }
        return c;
    };
    rep.conditions.push_back(w_to_B(partition.target_i, "2c"));
    rep.conditions.push_back(w_to_B(partition.target_j, "2d"));
    return rep;
}

bool Property1Report::all_pass() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionResult& c) { return c.pass; });
}

std::vector<std::string> Property1Report::failing_ids() const {
    std::vector<std::string> out;
    for (const auto& c : conditions)
        if (!c.pass) out.push_back(c.id);
    return out;
}

std::string Property1Report::to_string() const {
    std::ostringstream os;
    for (const auto& c : conditions) {
        os << "  " << c.id << ": " << (c.pass ? "pass" : "FAIL") << "\n";
        for (const auto& w : c.witnesses) os << "      " << w << "\n";
    }
    return os.str();
}

NodePartition select_blocking_set(const NetworkModel& model, const NodePartition& base,
                                  std::size_t candidate_cap) {
    if (!base.B.empty()) throw Error("select_blocking_set expects a partition with B unset");

    std::vector<int> candidates;
    for (int k = 0; k < base.L; ++k)
        if (!base.Y.count(k) && !base.A.count(k)) candidates.push_back(k);

    std::size_t examined = 0;
    std::optional<NodePartition> best_partition;
    Property1Report best_report;
    std::size_t best_fail_count = SIZE_MAX;

    const std::size_t n = candidates.size();
    for (std::size_t card = 0; card <= n; ++card) {
        // Lexicographic combinations of the sorted candidate list.
        std::vector<std::size_t> idx(card);
        for (std::size_t k = 0; k < card; ++k) idx[k] = k;
        bool more = true;
        while (more) {
            NodeSet B;
            for (std::size_t k : idx) B.insert(candidates[k]);
            NodePartition cand = with_blocking_set(base, B);
            const Property1Report rep = check_property1(model, cand);
            if (++examined > candidate_cap)
                throw NoValidBlockingSetError("blocking-set search exceeded the candidate cap of " +
                                              std::to_string(candidate_cap));
            if (rep.all_pass()) return cand;
            const std::size_t fails = rep.failing_ids().size();
            if (fails < best_fail_count) {
                best_fail_count = fails;
                best_partition = cand;
                best_report = rep;
            }
            // advance combination
            if (card == 0) break;
            std::size_t k = card;
            while (k > 0) {
                --k;
                if (idx[k] != k + n - card) {
                    ++idx[k];
                    for (std::size_t j = k + 1; j < card; ++j) idx[j] = idx[j - 1] + 1;
                    break;
                }
                if (k == 0) more = false;
            }
            if (card == 0) more = false;
        }
        if (card == 0 && n == 0) break;
    }

    std::ostringstream os;
    os << "no blocking set satisfies Property 1 over " << examined << " candidates";
    if (best_partition) {
        os << "; best candidate B = " << format_node_set(best_partition->B)
           << " fails conditions:";
        for (const auto& id : best_report.failing_ids()) os << " " << id;
        os << "\n" << best_report.to_string();
    }
    throw NoValidBlockingSetError(os.str());
}

} // namespace netident

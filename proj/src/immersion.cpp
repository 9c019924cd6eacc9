#include "netident/immersion.hpp"

#include <Eigen/LU>

#include <cmath>
#include <sstream>

#include "netident/errors.hpp"

namespace netident {

namespace {

std::vector<int> ordered_nodes(const NodePartition& p) {
    std::vector<int> rows(p.Q.begin(), p.Q.end());
    if (p.o) rows.push_back(*p.o);
    rows.insert(rows.end(), p.B.begin(), p.B.end());
    rows.insert(rows.end(), p.A.begin(), p.A.end());
    return rows;
}

Eigen::MatrixXcd submatrix(const Eigen::MatrixXcd& m, const std::vector<int>& rows,
                           const std::vector<int>& cols) {
    Eigen::MatrixXcd out(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                m(rows[r], cols[c]);
    return out;
}

} // namespace

int ImmersedSystem::block_offset(char block) const {
    const int nQ = static_cast<int>(partition.Q.size());
    const int nO = partition.o ? 1 : 0;
    const int nB = static_cast<int>(partition.B.size());
    switch (block) {
    case 'Q': return 0;
    case 'o': return nQ;
    case 'B': return nQ + nO;
    case 'A': return nQ + nO + nB;
    default: throw Error("unknown block");
    }
}

int ImmersedSystem::block_size(char block) const {
    switch (block) {
    case 'Q': return static_cast<int>(partition.Q.size());
    case 'o': return partition.o ? 1 : 0;
    case 'B': return static_cast<int>(partition.B.size());
    case 'A': return static_cast<int>(partition.A.size());
    default: throw Error("unknown block");
    }
}

ImmersedSystem immerse(const NetworkModel& model, const NodePartition& partition,
                       const FrequencyGrid& grid) {
    partition.validate(model);
    grid.validate();

    ImmersedSystem sys;
    sys.partition = partition;
    sys.grid = grid;
    sys.row_nodes = ordered_nodes(partition);
    sys.e_nodes = sys.row_nodes;
    sys.e_nodes.insert(sys.e_nodes.end(), partition.Z.begin(), partition.Z.end());

    const int nm = static_cast<int>(sys.row_nodes.size());
    const int L = model.L;
    const std::vector<int> zs(partition.Z.begin(), partition.Z.end());
    const int nz = static_cast<int>(zs.size());

    // Prop-1 structural zeros for the non-immersed rows: Y-rows may not have
    // in-neighbors in B or Z (full input), and the o column of Y-rows is zero.
    const int nQO = static_cast<int>(partition.Q.size()) + (partition.o ? 1 : 0);
    for (int r = 0; r < nQO; ++r) {
        const int node = sys.row_nodes[static_cast<std::size_t>(r)];
        for (int k : model.in_neighbors(node)) {
            if (partition.B.count(k) || partition.Z.count(k) || (partition.o && k == *partition.o))
                throw Error("partition violates the immersion structure: w" +
                            std::to_string(node + 1) + " has in-neighbor w" + std::to_string(k + 1) +
                            " outside Q union A");
        }
    }

    sys.lambda.resize(L, L);
    for (int r = 0; r < L; ++r)
        for (int c = 0; c < L; ++c)
            sys.lambda(r, c) = model.lambda(sys.e_nodes[static_cast<std::size_t>(r)],
                                            sys.e_nodes[static_cast<std::size_t>(c)]);
    {
        Eigen::LLT<Eigen::MatrixXd> llt(sys.lambda);
        if (llt.info() != Eigen::Success)
            throw Error("noise covariance is not positive definite");
        sys.lambda_factor = llt.matrixL();
    }

    sys.G_breve.reserve(grid.omega.size());
    sys.H_breve.reserve(grid.omega.size());

    std::vector<int> all_cols(static_cast<std::size_t>(L));
    for (int k = 0; k < L; ++k) all_cols[static_cast<std::size_t>(k)] = k;

    for (double w : grid.omega) {
        const Eigen::MatrixXcd G = model.eval_G(w);
        const Eigen::MatrixXcd H = model.eval_H(w);

        Eigen::MatrixXcd Gb(nm, nm), Hb(nm, L);
        // Non-immersed rows: original dynamics restricted to measured columns.
        for (int r = 0; r < nm; ++r) {
            const int node = sys.row_nodes[static_cast<std::size_t>(r)];
            for (int c = 0; c < nm; ++c)
                Gb(r, c) = G(node, sys.row_nodes[static_cast<std::size_t>(c)]);
            for (int c = 0; c < L; ++c)
                Hb(r, c) = H(node, sys.e_nodes[static_cast<std::size_t>(c)]);
        }

        if (nz > 0) {
            Eigen::MatrixXcd izz = Eigen::MatrixXcd::Identity(nz, nz) - submatrix(G, zs, zs);
            Eigen::PartialPivLU<Eigen::MatrixXcd> lu(izz);
            const double det = std::abs(lu.determinant());
            if (det < 1e-12) {
                std::ostringstream os;
                os << "(I - G_ZZ) singular at omega = " << w << " (|det| = " << det << ")";
                throw ImmersionSingularityError(os.str());
            }
            // Z rows seen from the eliminated block.
            Eigen::MatrixXcd Gz_meas(nz, nm);
            for (int r = 0; r < nz; ++r)
                for (int c = 0; c < nm; ++c)
                    Gz_meas(r, c) = G(zs[static_cast<std::size_t>(r)],
                                      sys.row_nodes[static_cast<std::size_t>(c)]);
            Eigen::MatrixXcd Hz(nz, L);
            for (int r = 0; r < nz; ++r)
                for (int c = 0; c < L; ++c)
                    Hz(r, c) = H(zs[static_cast<std::size_t>(r)], sys.e_nodes[static_cast<std::size_t>(c)]);
            const Eigen::MatrixXcd Gsol = lu.solve(Gz_meas);
            const Eigen::MatrixXcd Hsol = lu.solve(Hz);

            const int first_immersed = nQO;
            for (int r = first_immersed; r < nm; ++r) {
                const int node = sys.row_nodes[static_cast<std::size_t>(r)];
                Eigen::RowVectorXcd gxz(nz);
                for (int c = 0; c < nz; ++c) gxz(c) = G(node, zs[static_cast<std::size_t>(c)]);
                Gb.row(r) += gxz * Gsol;
                Hb.row(r) += gxz * Hsol;
            }
        }

        if (!Gb.allFinite() || !Hb.allFinite())
            throw ImmersionSingularityError("non-finite immersed response at omega = " +
                                            std::to_string(w));
        sys.G_breve.push_back(std::move(Gb));
        sys.H_breve.push_back(std::move(Hb));
    }
    return sys;
}

DisturbanceSpectrum disturbance_spectrum(const ImmersedSystem& sys) {
    DisturbanceSpectrum out;
    out.grid = sys.grid;
    out.row_nodes = sys.row_nodes;
    out.nQ = sys.block_size('Q');
    out.nO = sys.block_size('o');
    out.nB = sys.block_size('B');
    out.nA = sys.block_size('A');
    out.phi.reserve(sys.H_breve.size());
    const Eigen::MatrixXcd lam = sys.lambda.cast<std::complex<double>>();
    for (const auto& Hb : sys.H_breve) out.phi.push_back(Hb * lam * Hb.adjoint());
    return out;
}

std::string BlockReport::to_string() const {
    std::ostringstream os;
    os << "block    max rel norm\n";
    os << "Q-A      " << rel_QA << "\n";
    os << "o-A      " << rel_oA << "\n";
    os << "B-A      " << rel_BA << "\n";
    os << "hermitian defect " << hermitian_defect << "\n";
    os << (pass ? "PASS" : "FAIL") << " at threshold " << threshold << "\n";
    return os.str();
}

BlockReport check_zero_blocks(const DisturbanceSpectrum& s, double threshold) {
    BlockReport rep;
    rep.threshold = threshold;
    const int offQ = 0, offO = s.nQ, offB = s.nQ + s.nO, offA = s.nQ + s.nO + s.nB;
    for (const auto& phi : s.phi) {
        const double total = phi.norm();
        const double scale = total > 0.0 ? total : 1.0;
        if (s.nQ > 0 && s.nA > 0)
            rep.rel_QA = std::max(rep.rel_QA, phi.block(offQ, offA, s.nQ, s.nA).norm() / scale);
        if (s.nO > 0 && s.nA > 0)
            rep.rel_oA = std::max(rep.rel_oA, phi.block(offO, offA, s.nO, s.nA).norm() / scale);
        if (s.nB > 0 && s.nA > 0)
            rep.rel_BA = std::max(rep.rel_BA, phi.block(offB, offA, s.nB, s.nA).norm() / scale);
        rep.hermitian_defect =
            std::max(rep.hermitian_defect, (phi - phi.adjoint()).norm());
    }
    rep.pass = rep.rel_QA < threshold && rep.rel_oA < threshold && rep.rel_BA < threshold;
    return rep;
}

std::vector<Eigen::MatrixXcd> lemma1_product(const ImmersedSystem& sys, int e_index,
                                             const NodeSet& group1, const NodeSet& group2) {
    const auto row_of = [&](int node) {
        for (std::size_t r = 0; r < sys.row_nodes.size(); ++r)
            if (sys.row_nodes[r] == node) return static_cast<int>(r);
        throw Error("lemma1_product: node w" + std::to_string(node + 1) +
                    " is not in the measured partition");
    };
    const auto col_of = [&](int e) {
        for (std::size_t c = 0; c < sys.e_nodes.size(); ++c)
            if (sys.e_nodes[c] == e) return static_cast<int>(c);
        throw Error("lemma1_product: bad source index");
    };

    std::vector<int> r1, r2;
    for (int n : group1) r1.push_back(row_of(n));
    for (int n : group2) r2.push_back(row_of(n));

    const Eigen::MatrixXcd factor = sys.lambda_factor.cast<std::complex<double>>();
    const int col = col_of(e_index);

    std::vector<Eigen::MatrixXcd> out;
    out.reserve(sys.H_breve.size());
    for (const auto& Hb : sys.H_breve) {
        const Eigen::MatrixXcd Hc = Hb * factor; // unit-source columns
        Eigen::VectorXcd c1(static_cast<Eigen::Index>(r1.size()));
        Eigen::VectorXcd c2(static_cast<Eigen::Index>(r2.size()));
        for (std::size_t k = 0; k < r1.size(); ++k) c1(static_cast<Eigen::Index>(k)) = Hc(r1[k], col);
        for (std::size_t k = 0; k < r2.size(); ++k) c2(static_cast<Eigen::Index>(k)) = Hc(r2[k], col);
        out.push_back(c1 * c2.adjoint());
    }
    return out;
}

double max_grid_norm(const std::vector<Eigen::MatrixXcd>& field) {
    double m = 0.0;
    for (const auto& v : field) m = std::max(m, v.norm());
    return m;
}

bool lemma1_graph_predicate(const NetworkGraph& g, int e_index, const NodeSet& group1,
                            const NodeSet& group2, const NodeSet& Z) {
    const bool to1 = !qualifying_paths(g, GraphNode::e(e_index), group1, Z, 1).empty();
    if (!to1) return true;
    const bool to2 = !qualifying_paths(g, GraphNode::e(e_index), group2, Z, 1).empty();
    return !to2;
}

std::vector<Eigen::MatrixXcd> immersed_node_spectrum(const ImmersedSystem& sys) {
    std::vector<Eigen::MatrixXcd> out;
    out.reserve(sys.G_breve.size());
    const Eigen::MatrixXcd lam = sys.lambda.cast<std::complex<double>>();
    const int nm = static_cast<int>(sys.row_nodes.size());
    for (std::size_t k = 0; k < sys.G_breve.size(); ++k) {
        const Eigen::MatrixXcd closed =
            (Eigen::MatrixXcd::Identity(nm, nm) - sys.G_breve[k]).partialPivLu().solve(
                Eigen::MatrixXcd::Identity(nm, nm));
        const Eigen::MatrixXcd phi_v = sys.H_breve[k] * lam * sys.H_breve[k].adjoint();
        out.push_back(closed * phi_v * closed.adjoint());
    }
    return out;
}

} // namespace netident

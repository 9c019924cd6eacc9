#include "netident/network_model.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "netident/errors.hpp"
#include "netident/simulator.hpp"

namespace netident {

FrequencyGrid FrequencyGrid::log_spaced(int m, double lo) {
    if (m < 2) throw std::invalid_argument("grid needs at least 2 points");
    FrequencyGrid g;
    g.omega.resize(static_cast<std::size_t>(m));
    const double llo = std::log(lo), lhi = std::log(M_PI);
    for (int k = 0; k < m; ++k)
        g.omega[static_cast<std::size_t>(k)] = std::exp(llo + (lhi - llo) * k / (m - 1));
    g.omega.back() = M_PI;
    return g;
}

void FrequencyGrid::validate() const {
    if (omega.size() < 32) throw std::invalid_argument("grid must have at least 32 points");
    double prev = 0.0;
    for (double w : omega) {
        if (!(w > prev) || w > M_PI + 1e-12)
            throw std::invalid_argument("grid frequencies must be strictly increasing in (0, pi]");
        prev = w;
    }
}

NetworkModel NetworkModel::empty(int L) {
    if (L < 1) throw std::invalid_argument("node count must be positive");
    NetworkModel m;
    m.L = L;
    const std::size_t n = static_cast<std::size_t>(L);
    m.G.assign(n, std::vector<TransferFunction>(n, TransferFunction::zero()));
    m.H.assign(n, std::vector<TransferFunction>(n, TransferFunction::zero()));
    for (std::size_t j = 0; j < n; ++j) m.H[j][j] = TransferFunction::unit();
    m.lambda = Eigen::MatrixXd::Identity(L, L);
    m.r_present.assign(n, false);
    m.labels.resize(n);
    for (std::size_t j = 0; j < n; ++j) m.labels[j] = "w" + std::to_string(j + 1);
    return m;
}

std::vector<int> NetworkModel::in_neighbors(int j) const {
    std::vector<int> out;
    for (int k = 0; k < L; ++k)
        if (!G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].is_zero()) out.push_back(k);
    return out;
}

bool NetworkModel::all_modules_strictly_proper() const {
    for (const auto& row : G)
        for (const auto& tf : row)
            if (!tf.is_zero() && !tf.is_strictly_proper()) return false;
    return true;
}

bool NetworkModel::lambda_is_diagonal(double tol) const {
    for (int j = 0; j < L; ++j)
        for (int k = 0; k < L; ++k)
            if (j != k && std::abs(lambda(j, k)) > tol) return false;
    return true;
}

namespace {
Eigen::MatrixXcd eval_matrix(const std::vector<std::vector<TransferFunction>>& M, int L,
                             double omega) {
    Eigen::MatrixXcd out(L, L);
    for (int j = 0; j < L; ++j)
        for (int k = 0; k < L; ++k) {
            const auto& tf = M[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            out(j, k) = tf.is_zero() ? std::complex<double>(0.0, 0.0) : tf.response(omega);
        }
    return out;
}
} // namespace

Eigen::MatrixXcd NetworkModel::eval_G(double omega) const { return eval_matrix(G, L, omega); }
Eigen::MatrixXcd NetworkModel::eval_H(double omega) const { return eval_matrix(H, L, omega); }

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> NetworkModel::noise_correlation_pattern()
    const {
    using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
    BoolMat hp = BoolMat::Constant(L, L, false);
    for (int j = 0; j < L; ++j)
        for (int k = 0; k < L; ++k)
            hp(j, k) = !H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].is_zero();
    BoolMat out = BoolMat::Constant(L, L, false);
    for (int j = 0; j < L; ++j)
        for (int k = 0; k < L; ++k) {
            bool corr = false;
            for (int p = 0; p < L && !corr; ++p)
                for (int s = 0; s < L && !corr; ++s)
                    corr = hp(j, p) && lambda(p, s) != 0.0 && hp(k, s);
            out(j, k) = corr;
        }
    return out;
}

Eigen::MatrixXd NetworkModel::lambda_cholesky() const {
    Eigen::LLT<Eigen::MatrixXd> llt(lambda);
    if (llt.info() != Eigen::Success)
        throw Error("noise covariance matrix is not positive definite");
    return llt.matrixL();
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> NetworkModel::canonical_noise_pattern()
    const {
    using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::MatrixXd C = lambda_cholesky();
    BoolMat out = BoolMat::Constant(L, L, false);
    for (int j = 0; j < L; ++j)
        for (int k = 0; k < L; ++k) {
            bool nz = false;
            for (int s = 0; s < L && !nz; ++s)
                nz = !H[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)].is_zero() &&
                     std::abs(C(s, k)) > 1e-12;
            out(j, k) = nz;
        }
    return out;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    if (ok()) {
        os << "network valid (stability margin " << stability_margin << ")\n";
        return os.str();
    }
    os << violations.size() << " violation(s):\n";
    for (const auto& v : violations) os << "  - " << v.message << "\n";
    return os.str();
}

ValidationReport validate_network(const NetworkModel& model, const FrequencyGrid& grid) {
    ValidationReport rep;
    const auto n = static_cast<std::size_t>(model.L);
    if (model.G.size() != n || model.H.size() != n || model.lambda.rows() != model.L ||
        model.lambda.cols() != model.L || model.r_present.size() != n)
        throw std::invalid_argument("network model is structurally incomplete");

    for (int j = 0; j < model.L; ++j) {
        if (!model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)].is_zero())
            rep.violations.push_back({Violation::Kind::nonzero_diagonal,
                                      "nonzero diagonal: G[" + std::to_string(j + 1) + "," +
                                          std::to_string(j + 1) + "] must be zero"});
    }

    // Properness is representational: a nonzero entry with a well-formed
    // denominator is proper. Flag malformed coefficient storage.
    for (int j = 0; j < model.L; ++j)
        for (int k = 0; k < model.L; ++k) {
            const auto& tf = model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            if (!tf.is_zero() && (tf.denominator().empty() || tf.denominator()[0] != 1.0))
                rep.violations.push_back({Violation::Kind::improper_entry,
                                          "improper entry: G[" + std::to_string(j + 1) + "," +
                                              std::to_string(k + 1) + "]"});
        }

    if (!model.all_modules_strictly_proper() && !model.lambda_is_diagonal())
        rep.violations.push_back(
            {Violation::Kind::delay_assumption,
             "delay assumption: not all modules strictly proper while Lambda is non-diagonal"});

    Eigen::LLT<Eigen::MatrixXd> llt(model.lambda);
    const bool sym = model.lambda.isApprox(model.lambda.transpose(), 1e-12);
    if (!sym || llt.info() != Eigen::Success)
        rep.violations.push_back(
            {Violation::Kind::non_psd_lambda, "noise covariance is not symmetric positive definite"});

    for (int j = 0; j < model.L; ++j)
        for (int k = 0; k < model.L; ++k) {
            const auto& tf = model.H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            if (!tf.is_zero() && !tf.is_stable())
                rep.violations.push_back({Violation::Kind::unstable_noise_model,
                                          "unstable noise model entry H[" + std::to_string(j + 1) +
                                              "," + std::to_string(k + 1) + "]"});
        }

    const StabilityResult st = stability_check(model, grid);
    rep.stability_margin = st.margin;
    if (!st.stable)
        rep.violations.push_back({Violation::Kind::instability, st.detail});

    if (!model.all_modules_strictly_proper()) {
        Eigen::MatrixXd d0 = Eigen::MatrixXd::Zero(model.L, model.L);
        for (int j = 0; j < model.L; ++j)
            for (int k = 0; k < model.L; ++k)
                d0(j, k) =
                    model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].feedthrough();
        const Eigen::MatrixXd loop = Eigen::MatrixXd::Identity(model.L, model.L) - d0;
        if (std::abs(loop.determinant()) < 1e-12)
            rep.violations.push_back({Violation::Kind::algebraic_loop,
                                      "instantaneous loop matrix (I - D0) is singular"});
    }
    return rep;
}

ValidationReport validate_network(const NetworkModel& model) {
    return validate_network(model, FrequencyGrid::log_spaced());
}

std::vector<std::complex<double>> frequency_response(const TransferFunction& tf,
                                                     const FrequencyGrid& grid) {
    std::vector<std::complex<double>> out;
    out.reserve(grid.omega.size());
    for (double w : grid.omega) out.push_back(tf.is_zero() ? std::complex<double>(0.0) : tf.response(w));
    return out;
}

} // namespace netident

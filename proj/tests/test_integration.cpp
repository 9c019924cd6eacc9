#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>

#include "helpers.hpp"
#include "netident/identify.hpp"
#include "netident/immersion.hpp"
#include "netident/simulator.hpp"
#include "netident/spectral.hpp"

using namespace netident;

namespace {

/// Analytic node spectrum of the full network including white excitation.
Eigen::MatrixXcd analytic_node_spectrum(const NetworkModel& m, double omega,
                                        const Eigen::VectorXd& r_power) {
    const Eigen::MatrixXcd G = m.eval_G(omega);
    const Eigen::MatrixXcd H = m.eval_H(omega);
    const Eigen::MatrixXcd closed =
        (Eigen::MatrixXcd::Identity(m.L, m.L) - G)
            .partialPivLu()
            .solve(Eigen::MatrixXcd::Identity(m.L, m.L));
    const Eigen::MatrixXcd noise = H * m.lambda.cast<std::complex<double>>() * H.adjoint();
    const Eigen::MatrixXcd rterm = r_power.cast<std::complex<double>>().asDiagonal();
    return closed * (noise + rterm) * closed.adjoint();
}

} // namespace

TEST_CASE("empirical node spectrum matches the closed-loop formula within ten percent") {
    const NetworkModel m = testutil::load_example1();
    SimulationPlan plan = SimulationPlan::basic(m, 100000, 2718);
    const SignalRecord rec = simulate(plan);

    Eigen::MatrixXd w(rec.N, m.L);
    for (int j = 0; j < m.L; ++j) w.col(j) = rec.column("w" + std::to_string(j + 1));
    const CrossSpectrum cs = welch_cross_spectrum(w, 256);

    Eigen::VectorXd r_power = Eigen::VectorXd::Zero(m.L);
    r_power[3] = 1.0; // white unit excitation at w4

    std::vector<double> errs;
    for (std::size_t k = 1; k + 1 < cs.phi.size(); ++k) {
        const Eigen::MatrixXcd truth = analytic_node_spectrum(m, cs.omega[k], r_power);
        errs.push_back((cs.phi[k] - truth).norm() / truth.norm());
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    CHECK(errs[errs.size() / 2] < 0.10);
}

TEST_CASE("immersed subsystem reproduces the measured-node cross-spectra") {
    const NetworkModel m = testutil::load_example2();
    NodePartition p = select_blocking_set(m, algorithm_a(m, 0, 1));

    SimulationPlan plan; // zero-r plan: noise-driven comparison
    plan.model = m;
    plan.N = 100000;
    plan.seed = 3141;
    const SignalRecord rec = simulate(plan);

    const int nperseg = 128;
    std::vector<int> meas(p.Q.begin(), p.Q.end());
    if (p.o) meas.push_back(*p.o);
    meas.insert(meas.end(), p.B.begin(), p.B.end());
    meas.insert(meas.end(), p.A.begin(), p.A.end());
    Eigen::MatrixXd wm(rec.N, static_cast<Eigen::Index>(meas.size()));
    for (std::size_t c = 0; c < meas.size(); ++c)
        wm.col(static_cast<Eigen::Index>(c)) = rec.column("w" + std::to_string(meas[c] + 1));
    const CrossSpectrum cs = welch_cross_spectrum(wm, nperseg);

    FrequencyGrid bins;
    bins.omega.assign(cs.omega.begin() + 1, cs.omega.end());
    const ImmersedSystem sys = immerse(m, p, bins);
    REQUIRE(sys.row_nodes == meas);
    const auto phi_immersed = immersed_node_spectrum(sys);

    // the immersed spectrum must agree with the full network restricted to the
    // measured nodes up to roundoff
    for (std::size_t k = 0; k < bins.omega.size(); k += 16) {
        const Eigen::MatrixXcd full =
            analytic_node_spectrum(m, bins.omega[k], Eigen::VectorXd::Zero(m.L));
        Eigen::MatrixXcd restricted(meas.size(), meas.size());
        for (std::size_t r = 0; r < meas.size(); ++r)
            for (std::size_t c = 0; c < meas.size(); ++c)
                restricted(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    full(meas[r], meas[c]);
        CHECK((phi_immersed[k] - restricted).norm() / restricted.norm() < 1e-12);
    }

    std::vector<double> errs;
    for (std::size_t k = 0; k < phi_immersed.size(); ++k) {
        const auto& truth = phi_immersed[k];
        errs.push_back((cs.phi[k + 1] - truth).norm() / truth.norm());
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    CHECK(errs[errs.size() / 2] < 0.05);
}

TEST_CASE("chain cross-spectrum ratio recovers the module response") {
    NetworkModel m = NetworkModel::empty(2);
    m.G[1][0] = TransferFunction({0.0, 0.7}, {1.0, -0.4});
    SimulationPlan plan;
    plan.model = m;
    plan.N = 100000;
    plan.seed = 161803;
    const SignalRecord rec = simulate(plan);
    Eigen::MatrixXd w(rec.N, 2);
    w.col(0) = rec.column("w1");
    w.col(1) = rec.column("w2");
    const CrossSpectrum cs = welch_cross_spectrum(w, 128);
    std::vector<double> errs;
    for (std::size_t k = 2; k + 2 < cs.phi.size(); ++k) {
        const std::complex<double> ratio = cs.phi[k](1, 0) / cs.phi[k](0, 0);
        const std::complex<double> truth = m.G[1][0].response(cs.omega[k]);
        errs.push_back(std::abs(ratio - truth) / std::abs(truth));
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    CHECK(errs[errs.size() / 2] < 0.05);
}

TEST_CASE("any parameter perturbation increases the residual energy on long data") {
    const NetworkModel m = testutil::load_example1();
    NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    const ModelStructure s = build_model_structure(m, p, derive_module_orders(m, p),
                                                   derive_noise_orders(m, p),
                                                   derive_h_off_taps(m, p));
    const SignalRecord data = simulate(SimulationPlan::basic(m, 50000, 424242));
    const Eigen::VectorXd theta0 = s.pack_true(m);
    const Eigen::MatrixXd eps0 = predict_errors(s, theta0, data);
    const double base = eps0.squaredNorm() / data.N;

    Rng rng(1001);
    for (int trial = 0; trial < 6; ++trial) {
        Eigen::VectorXd theta = theta0;
        const int k = static_cast<int>(rng.uniform(0.0, static_cast<double>(theta.size())));
        theta[std::min<int>(k, theta.size() - 1)] += (rng.uniform() < 0.5 ? -0.12 : 0.12);
        const Eigen::MatrixXd eps = predict_errors(s, theta, data);
        CHECK(eps.squaredNorm() / data.N > base);
    }
}

TEST_CASE("residuals at the optimum pass the portmanteau whiteness test") {
    const NetworkModel m = testutil::load_example1();
    NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    const ModelStructure s = build_model_structure(m, p, derive_module_orders(m, p),
                                                   derive_noise_orders(m, p),
                                                   derive_h_off_taps(m, p));
    const double chi2_99_20 = 37.566235;
    int passes = 0;
    const int seeds = 20;
    for (int r = 0; r < seeds; ++r) {
        const SignalRecord data = simulate(SimulationPlan::basic(m, 8000, 9000 + r));
        EstimateOptions opt;
        opt.starts = 6;
        opt.seed = 100 + static_cast<std::uint64_t>(r);
        const EstimationResult res = estimate(s, data, opt);
        bool white = true;
        for (Eigen::Index c = 0; c < res.residuals.cols(); ++c)
            white = white &&
                    ljung_box_statistic(res.residuals.col(c).tail(res.residuals.rows() - 200), 20) <
                        chi2_99_20;
        if (white) ++passes;
    }
    CHECK(passes >= 18);
}

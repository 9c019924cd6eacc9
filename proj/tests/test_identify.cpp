#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "netident/errors.hpp"
#include "netident/identify.hpp"
#include "netident/rng.hpp"

using namespace netident;

namespace {

ModelStructure example1_structure(const NetworkModel& m, NodePartition* part_out = nullptr) {
    NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    if (part_out) *part_out = p;
    return build_model_structure(m, p, derive_module_orders(m, p), derive_noise_orders(m, p),
                                 derive_h_off_taps(m, p));
}

} // namespace

TEST_CASE("example 1 structure exposes exactly the known modules") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    CHECK(s.y_nodes == std::vector<int>{3, 1}); // (Q=4, o=2)
    CHECK(s.d_nodes == std::vector<int>{3, 0, 2});
    std::set<std::pair<int, int>> free;
    for (const auto& e : s.g_entries)
        free.insert({s.y_nodes[static_cast<std::size_t>(e.row)], e.col_node});
    CHECK(free == std::set<std::pair<int, int>>{{1, 0}, {1, 3}, {3, 2}});
    CHECK(s.h_diag.size() == 2);
    CHECK(s.h_off.size() == 2); // correlation pattern couples the two outputs
}

TEST_CASE("example 2 structure spans D = {2,3,4,5,8} with row-1 inputs w2, w3") {
    const NetworkModel m = testutil::load_example2();
    NodePartition p = select_blocking_set(m, algorithm_a(m, 0, 1));
    const ModelStructure s = build_model_structure(
        m, p, derive_module_orders(m, p), derive_noise_orders(m, p), derive_h_off_taps(m, p));
    CHECK(s.y_nodes == std::vector<int>{1, 2, 0});
    CHECK(s.d_nodes == std::vector<int>{1, 2, 7, 3, 4});
    std::set<std::pair<int, int>> row1;
    for (const auto& e : s.g_entries)
        if (s.y_nodes[static_cast<std::size_t>(e.row)] == 0) row1.insert({0, e.col_node});
    CHECK(row1 == std::set<std::pair<int, int>>{{0, 1}, {0, 2}});
}

TEST_CASE("diagonal noise gives a diagonal noise model") {
    NetworkModel m = NetworkModel::empty(3);
    m.G[1][0] = TransferFunction({0.0, 0.5}, {1.0, -0.3});
    NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    const ModelStructure s = build_model_structure(m, p, derive_module_orders(m, p),
                                                   derive_noise_orders(m, p));
    CHECK(s.h_off.empty());
}

TEST_CASE("order specs must reference existing modules") {
    const NetworkModel m = testutil::load_example1();
    NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    auto orders = derive_module_orders(m, p);
    orders[{0, 1}] = ModuleOrders{}; // G[1,2] does not exist
    CHECK_THROWS_AS(build_model_structure(m, p, orders, derive_noise_orders(m, p)), Error);
}

TEST_CASE("delay condition rejects instantaneous loops through the outputs") {
    // non-strictly-proper module from o back into Q with zero delay
    NetworkModel m = NetworkModel::empty(3);
    m.G[1][0] = TransferFunction({0.0, 0.5}, {1.0});  // target, delayed
    m.G[1][2] = TransferFunction({0.0, 0.4}, {1.0});
    m.G[2][1] = TransferFunction({0.3}, {1.0});       // instantaneous w2 -> w3
    m.G[0][2] = TransferFunction({0.4}, {1.0});       // instantaneous w3 -> w1
    m.lambda(1, 2) = m.lambda(2, 1) = 0.5;            // w3 joins Y
    const NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    REQUIRE(p.Y.count(2));
    CHECK_THROWS_WITH_AS(build_model_structure(m, p, derive_module_orders(m, p),
                                               derive_noise_orders(m, p)),
                         doctest::Contains("delay condition"), Error);
}

TEST_CASE("all-strictly-proper models skip the delay guard") {
    const NetworkModel m = testutil::load_example1();
    CHECK_NOTHROW(example1_structure(m));
}

TEST_CASE("zero theta predicts the raw outputs") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    SimulationPlan plan; // zero-r plan so no excitation is subtracted
    plan.model = m;
    plan.N = 300;
    plan.seed = 21;
    const SignalRecord data = simulate(plan);
    const Eigen::MatrixXd eps = predict_errors(s, Eigen::VectorXd::Zero(s.theta_dim), data);
    for (int a = 0; a < s.ny(); ++a) {
        const Eigen::VectorXd w =
            data.column("w" + std::to_string(s.y_nodes[static_cast<std::size_t>(a)] + 1));
        CHECK((eps.col(a) - w).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("true parameters recover the stored innovations") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, 5000, 99));
    const Eigen::VectorXd theta0 = s.pack_true(m);
    const Eigen::MatrixXd eps = predict_errors(s, theta0, data);
    const Eigen::VectorXd e4 = data.column("e4"), e2 = data.column("e2");
    double dev = 0.0;
    for (int t = 200; t < data.N; ++t) {
        dev = std::max(dev, std::abs(eps(t, 0) - e4[t]));
        dev = std::max(dev, std::abs(eps(t, 1) - e2[t]));
    }
    CHECK(dev < 1e-8);
}

TEST_CASE("unstable parametrizations are rejected as domain violations") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, 1000, 4));
    Eigen::VectorXd theta = s.pack_true(m);
    theta[1] = -1.5; // module denominator outside the unit circle
    CHECK_THROWS_AS(predict_errors(s, theta, data), DomainViolationError);
}

TEST_CASE("weighted least squares criterion") {
    Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(100, 2);
    const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(2, 2);
    CHECK(criterion_wls(eps, W) == 0.0);

    Rng rng(3);
    for (Eigen::Index t = 0; t < eps.rows(); ++t)
        for (Eigen::Index c = 0; c < 2; ++c) eps(t, c) = rng.gaussian();
    // direct summation oracle: trace of the sample covariance
    double oracle = 0.0;
    for (Eigen::Index t = 0; t < eps.rows(); ++t) oracle += eps.row(t).squaredNorm();
    oracle /= static_cast<double>(eps.rows());
    CHECK(criterion_wls(eps, W) == doctest::Approx(oracle).epsilon(1e-12));

    Eigen::MatrixXd single = eps.col(0);
    CHECK(criterion_wls(single, Eigen::MatrixXd::Identity(1, 1)) ==
          doctest::Approx(single.squaredNorm() / single.rows()));

    Eigen::MatrixXd notpd = -W;
    CHECK_THROWS_AS(criterion_wls(eps, notpd), Error);
}

TEST_CASE("determinant criterion approximates the product of channel variances") {
    Rng rng(12);
    Eigen::MatrixXd eps(50000, 2);
    for (Eigen::Index t = 0; t < eps.rows(); ++t) {
        eps(t, 0) = 1.3 * rng.gaussian();
        eps(t, 1) = 0.7 * rng.gaussian();
    }
    CHECK(criterion_ml_det(eps) == doctest::Approx(1.69 * 0.49).epsilon(0.05));

    Eigen::MatrixXd degen(1000, 2);
    for (Eigen::Index t = 0; t < degen.rows(); ++t) {
        degen(t, 0) = rng.gaussian();
        degen(t, 1) = 2.0 * degen(t, 0);
    }
    CHECK_THROWS_AS(criterion_ml_det(degen), DegenerateResidualError);

    Eigen::MatrixXd single = eps.col(0);
    CHECK(criterion_ml_det(single) ==
          doctest::Approx(criterion_wls(single, Eigen::MatrixXd::Identity(1, 1))).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central finite differences") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, 2000, 31));
    EstimateOptions opt;
    opt.criterion = CriterionKind::ml_det;
    Rng rng(8);
    for (int trial = 0; trial < 4; ++trial) {
        Eigen::VectorXd theta = s.pack_true(m);
        for (int k = 0; k < theta.size(); ++k) theta[k] += rng.uniform(-0.05, 0.05);
        const Eigen::VectorXd g = criterion_gradient(s, theta, data, opt);
        const double scale = g.cwiseAbs().maxCoeff();
        for (int k = 0; k < theta.size(); ++k) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
            Eigen::VectorXd tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            const double fd =
                (criterion_value(s, tp, data, opt) - criterion_value(s, tm, data, opt)) / (2 * h);
            CHECK(std::abs(g[k] - fd) <= 1e-4 * std::max(scale, 1e-12));
        }
    }
}

TEST_CASE("void-o structures estimate a feedback cycle consistently") {
    NetworkModel m = NetworkModel::empty(2);
    m.G[0][1] = TransferFunction({0.0, 0.5}, {1.0, -0.3});
    m.G[1][0] = TransferFunction({0.0, 0.4}, {1.0, -0.2});
    m.lambda(0, 1) = m.lambda(1, 0) = 0.6;
    m.r_present[0] = m.r_present[1] = true;
    const NodePartition p = select_blocking_set(m, algorithm_a(m, 0, 1));
    REQUIRE_FALSE(p.o.has_value());
    const ModelStructure s = build_model_structure(m, p, derive_module_orders(m, p),
                                                   derive_noise_orders(m, p),
                                                   derive_h_off_taps(m, p));
    CHECK(s.y_nodes == std::vector<int>{0, 1});
    const SignalRecord data = simulate(SimulationPlan::basic(m, 8000, 87));
    EstimateOptions opt;
    opt.starts = 6;
    opt.seed = 19;
    const EstimationResult res = estimate(s, data, opt);
    const FrequencyGrid grid = FrequencyGrid::log_spaced(64);
    const ModuleEstimate mod = extract_module(s, res.theta, 0, 1, grid);
    const auto truth = frequency_response(m.G[0][1], grid);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        num = std::max(num, std::abs(mod.response[k] - truth[k]));
        den = std::max(den, std::abs(truth[k]));
    }
    CHECK(num / den < 0.1);
}

TEST_CASE("weighted least squares agrees with its gradient and recovers the target") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, 4000, 53));
    EstimateOptions opt;
    opt.criterion = CriterionKind::wls;
    opt.W = Eigen::MatrixXd::Identity(s.ny(), s.ny());

    // gradient check on the wls branch
    Rng rng(21);
    Eigen::VectorXd theta = s.pack_true(m);
    for (int k = 0; k < theta.size(); ++k) theta[k] += rng.uniform(-0.05, 0.05);
    const Eigen::VectorXd g = criterion_gradient(s, theta, data, opt);
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-12);
    for (int k = 0; k < theta.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
        Eigen::VectorXd tp = theta, tm = theta;
        tp[k] += h;
        tm[k] -= h;
        const double fd =
            (criterion_value(s, tp, data, opt) - criterion_value(s, tm, data, opt)) / (2 * h);
        CHECK(std::abs(g[k] - fd) <= 1e-4 * scale);
    }

    opt.starts = 6;
    opt.seed = 4;
    const EstimationResult res = estimate(s, data, opt);
    const ModuleEstimate mod =
        extract_module(s, res.theta, 1, 0, FrequencyGrid::log_spaced(64));
    const auto truth = frequency_response(m.G[1][0], FrequencyGrid::log_spaced(64));
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        num = std::max(num, std::abs(mod.response[k] - truth[k]));
        den = std::max(den, std::abs(truth[k]));
    }
    CHECK(num / den < 0.1);
}

TEST_CASE("estimates of a noise-only system are near zero") {
    NetworkModel m = NetworkModel::empty(2);
    m.G[1][0] = TransferFunction({0.0, 0.5}, {1.0, -0.3});
    NodePartition p = select_blocking_set(m, algorithm_a(m, 1, 0));
    const ModelStructure s = build_model_structure(m, p, derive_module_orders(m, p),
                                                   derive_noise_orders(m, p));
    // data generated with the module forced to zero
    NetworkModel null_model = m;
    null_model.G[1][0] = TransferFunction::zero();
    SimulationPlan plan;
    plan.model = null_model;
    plan.N = 6000;
    plan.seed = 61;
    const SignalRecord data = simulate(plan);
    EstimateOptions opt;
    opt.starts = 4;
    opt.seed = 5;
    const EstimationResult res = estimate(s, data, opt);
    const ModuleEstimate mod = extract_module(s, res.theta, 1, 0, FrequencyGrid::log_spaced(64));
    double norm = 0.0;
    for (const auto& v : mod.response) norm = std::max(norm, std::abs(v));
    CHECK(norm < 0.02);
}

TEST_CASE("estimation is deterministic for a fixed seed") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, 2000, 77));
    EstimateOptions opt;
    opt.starts = 4;
    opt.seed = 42;
    const EstimationResult a = estimate(s, data, opt);
    const EstimationResult b = estimate(s, data, opt);
    REQUIRE(a.theta.size() == b.theta.size());
    for (int k = 0; k < a.theta.size(); ++k) CHECK(a.theta[k] == b.theta[k]);
    CHECK(a.criterion_value == b.criterion_value);
    CHECK(a.best_start == b.best_start);
}

TEST_CASE("criterion is non-increasing along every accepted iteration") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, 2000, 13));
    EstimateOptions opt;
    opt.starts = 3;
    opt.seed = 9;
    const EstimationResult res = estimate(s, data, opt);
    for (const auto& d : res.starts) {
        if (d.diverged) continue;
        for (std::size_t k = 1; k < d.trace.size(); ++k) CHECK(d.trace[k] <= d.trace[k - 1]);
    }
}

TEST_CASE("module extraction rejects entries fixed to zero") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(s.theta_dim);
    CHECK_THROWS_AS(extract_module(s, theta, 1, 2, FrequencyGrid::log_spaced(32)), Error);
}

TEST_CASE("low-frequency response approaches the static gain") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const Eigen::VectorXd theta0 = s.pack_true(m);
    FrequencyGrid grid = FrequencyGrid::log_spaced(64, 1e-4);
    const ModuleEstimate mod = extract_module(s, theta0, 1, 0, grid);
    const double gain = mod.tf.static_gain(); // oracle from the coefficients
    CHECK(gain == doctest::Approx(0.8 / 0.5));
    CHECK(std::abs(mod.response.front() - std::complex<double>(gain, 0.0)) < 2e-3 * gain);
}

TEST_CASE("data shorter than ten samples per parameter is refused") {
    const NetworkModel m = testutil::load_example1();
    const ModelStructure s = example1_structure(m);
    const SignalRecord data = simulate(SimulationPlan::basic(m, s.theta_dim * 10 - 1, 5));
    EstimateOptions opt;
    CHECK_THROWS_AS(estimate(s, data, opt), Error);
}

TEST_CASE("ljung-box statistic separates white from autocorrelated residuals") {
    Rng rng(55);
    Eigen::VectorXd white(4000);
    for (Eigen::Index t = 0; t < white.size(); ++t) white[t] = rng.gaussian();
    // chi-square 99th percentile at 20 degrees of freedom
    const double chi2_99_20 = 37.566235;
    CHECK(ljung_box_statistic(white, 20) < chi2_99_20);

    Eigen::VectorXd colored(4000);
    colored[0] = rng.gaussian();
    for (Eigen::Index t = 1; t < colored.size(); ++t)
        colored[t] = 0.6 * colored[t - 1] + rng.gaussian();
    CHECK(ljung_box_statistic(colored, 20) > chi2_99_20);
}

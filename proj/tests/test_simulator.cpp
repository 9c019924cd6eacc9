#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "netident/errors.hpp"
#include "netident/simulator.hpp"

using namespace netident;

TEST_CASE("empty network is stable with full margin") {
    const NetworkModel m = NetworkModel::empty(3);
    const StabilityResult st = stability_check(m, FrequencyGrid::log_spaced(64));
    CHECK(st.stable);
    CHECK(st.margin == doctest::Approx(1.0));
}

TEST_CASE("a delayed loop with gain 0.9 is stable, 1.1 is not") {
    NetworkModel loop = NetworkModel::empty(2);
    loop.G[0][1] = TransferFunction({0.0, 0.9}, {1.0});
    loop.G[1][0] = TransferFunction({0.0, 1.0}, {1.0});
    const StabilityResult st = stability_check(loop, FrequencyGrid::log_spaced(64));
    CHECK(st.stable);
    // oracle: roots of 1 - 0.9 z^{-2} sit at |z| = sqrt(0.9)
    CHECK(st.margin == doctest::Approx(1.0 - std::sqrt(0.9)).epsilon(1e-6));

    loop.G[0][1] = TransferFunction({0.0, 1.1}, {1.0});
    CHECK_FALSE(stability_check(loop, FrequencyGrid::log_spaced(64)).stable);
}

TEST_CASE("white unit noise has unit sample covariance") {
    NetworkModel m = NetworkModel::empty(2);
    SimulationPlan plan;
    plan.model = m;
    plan.N = 50000;
    plan.seed = 5;
    const SignalRecord rec = generate_noise(plan);
    const Eigen::VectorXd v1 = rec.column("v1"), v2 = rec.column("v2");
    CHECK(v1.squaredNorm() / plan.N == doctest::Approx(1.0).epsilon(0.05));
    CHECK(v2.squaredNorm() / plan.N == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(v1.dot(v2) / plan.N) < 0.05);
}

TEST_CASE("covariance coupling shows up as source correlation") {
    NetworkModel m = NetworkModel::empty(4);
    m.lambda(1, 3) = m.lambda(3, 1) = 0.8;
    SimulationPlan plan;
    plan.model = m;
    plan.N = 50000;
    plan.seed = 7;
    const SignalRecord rec = generate_noise(plan);
    const Eigen::VectorXd e2 = rec.column("e2"), e4 = rec.column("e4");
    const double corr = e2.dot(e4) / std::sqrt(e2.squaredNorm() * e4.squaredNorm());
    CHECK(corr == doctest::Approx(0.8).epsilon(0.0375)); // 0.8 +- 0.03
}

TEST_CASE("lagged noise coupling matches the impulse-response convolution") {
    // v2 = e2 + 0.5 q^{-1} e1: cov(v2(t), e1(t-1)) = 0.5 Lambda_11
    NetworkModel m = NetworkModel::empty(2);
    m.H[1][0] = TransferFunction({0.0, 0.5}, {1.0});
    SimulationPlan plan;
    plan.model = m;
    plan.N = 50000;
    plan.seed = 11;
    const SignalRecord rec = generate_noise(plan);
    const Eigen::VectorXd e1 = rec.column("e1"), v2 = rec.column("v2");
    double lag0 = 0.0, lag1 = 0.0;
    for (int t = 1; t < plan.N; ++t) {
        lag0 += v2[t] * e1[t];
        lag1 += v2[t] * e1[t - 1];
    }
    CHECK(lag1 / plan.N == doctest::Approx(0.5).epsilon(0.05));
    CHECK(std::abs(lag0 / plan.N) < 0.02);
}

TEST_CASE("without modules the node signals equal noise plus excitation") {
    NetworkModel m = NetworkModel::empty(3);
    m.r_present[0] = true;
    SimulationPlan plan = SimulationPlan::basic(m, 500, 3);
    const SignalRecord rec = simulate(plan);
    for (int j = 1; j <= 3; ++j) {
        const Eigen::VectorXd w = rec.column("w" + std::to_string(j));
        const Eigen::VectorXd v = rec.column("v" + std::to_string(j));
        const Eigen::VectorXd r = rec.column("r" + std::to_string(j));
        CHECK((w - (v + r)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("identical plans produce byte-identical records") {
    const NetworkModel m = testutil::load_example1();
    const SimulationPlan plan = SimulationPlan::basic(m, 400, 123);
    std::ostringstream a, b;
    simulate(plan).write(a);
    simulate(plan).write(b);
    CHECK(a.str() == b.str());
}

TEST_CASE("instantaneous loops are solved or refused") {
    // solvable: w1 = 0.5 w2 + v1, w2 = v2 with instantaneous gain
    NetworkModel m = NetworkModel::empty(2);
    m.G[0][1] = TransferFunction({0.5}, {1.0});
    SimulationPlan plan;
    plan.model = m;
    plan.N = 200;
    plan.seed = 2;
    const SignalRecord rec = simulate(plan);
    const Eigen::VectorXd w1 = rec.column("w1"), w2 = rec.column("w2");
    const Eigen::VectorXd v1 = rec.column("v1");
    CHECK((w1 - 0.5 * w2 - v1).cwiseAbs().maxCoeff() < 1e-12);

    // singular: unit instantaneous two-cycle
    NetworkModel bad = NetworkModel::empty(2);
    bad.G[0][1] = TransferFunction({1.0}, {1.0});
    bad.G[1][0] = TransferFunction({1.0}, {1.0});
    SimulationPlan plan2;
    plan2.model = bad;
    plan2.N = 10;
    plan2.seed = 2;
    CHECK_THROWS_AS(simulate(plan2), AlgebraicLoopError);
}

TEST_CASE("unstable networks are refused with a margin report") {
    NetworkModel m = NetworkModel::empty(2);
    m.G[0][1] = TransferFunction({0.0, 1.2}, {1.0});
    m.G[1][0] = TransferFunction({0.0, 1.0}, {1.0});
    SimulationPlan plan;
    plan.model = m;
    plan.N = 100;
    plan.seed = 1;
    CHECK_THROWS_WITH_AS(simulate(plan), doctest::Contains("spectral radius"),
                         UnstableNetworkError);
}

TEST_CASE("excitation on a node without r is rejected") {
    NetworkModel m = NetworkModel::empty(2);
    SimulationPlan plan;
    plan.model = m;
    plan.N = 100;
    plan.excitation[0] = ExcitationSpec{};
    CHECK_THROWS_AS(simulate(plan), std::invalid_argument);
}

TEST_CASE("node means sit within three standard errors after burn-in") {
    NetworkModel m = testutil::load_example1();
    SimulationPlan plan;
    plan.model = m;
    plan.N = 20000;
    plan.seed = 17; // no excitation map: zero-r plan
    const SignalRecord rec = simulate(plan);
    for (int j = 1; j <= m.L; ++j) {
        const Eigen::VectorXd w = rec.column("w" + std::to_string(j));
        const double mean = w.mean();
        const double sd = std::sqrt((w.array() - mean).square().sum() / (plan.N - 1));
        // crude independence assumption is fine at this sample size
        CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(plan.N) / 10.0));
    }
}

TEST_CASE("seeded excitation kinds are reproducible and shaped") {
    NetworkModel m = NetworkModel::empty(1);
    m.r_present[0] = true;
    SimulationPlan plan;
    plan.model = m;
    plan.N = 4000;
    plan.seed = 9;
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::multisine;
    spec.amplitude = 2.0;
    spec.sine_count = 5;
    plan.excitation[0] = spec;
    const SignalRecord rec = simulate(plan);
    const Eigen::VectorXd r = rec.column("r1");
    CHECK(r.cwiseAbs().maxCoeff() > 0.5);
    // multisine is bounded, Gaussian noise is not: amplitude cap is structural
    CHECK(r.cwiseAbs().maxCoeff() < 2.0 * std::sqrt(2.0 / 5.0) * 5 + 1e-9);

    ExcitationSpec filt;
    filt.kind = ExcitationSpec::Kind::filtered_white;
    filt.shaping = TransferFunction({1.0}, {1.0, -0.9});
    plan.excitation[0] = filt;
    const SignalRecord rec2 = simulate(plan);
    const Eigen::VectorXd r2 = rec2.column("r1");
    // a 0.9-pole shaping filter concentrates power at low frequencies: the
    // lag-1 autocorrelation is strongly positive
    double lag1 = 0.0;
    for (int t = 1; t < plan.N; ++t) lag1 += r2[t] * r2[t - 1];
    CHECK(lag1 / r2.squaredNorm() > 0.7);
}

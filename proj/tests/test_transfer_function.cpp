#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "netident/errors.hpp"
#include "netident/rng.hpp"
#include "netident/transfer_function.hpp"

using namespace netident;

TEST_CASE("construction enforces the representation invariants") {
    CHECK_THROWS_AS(TransferFunction({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(TransferFunction({1.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(TransferFunction({1.0}, {1.0}, -1), std::invalid_argument);

    const TransferFunction z = TransferFunction::zero();
    CHECK(z.is_zero());
    CHECK(z.is_strictly_proper());
    CHECK(TransferFunction({0.0, 0.0}, {1.0}).is_zero());

    CHECK(TransferFunction({0.0, 0.8}, {1.0, -0.5}).is_strictly_proper());
    CHECK(TransferFunction({1.0}, {1.0}, 1).is_strictly_proper());
    CHECK_FALSE(TransferFunction({0.3}, {1.0}).is_strictly_proper());
    CHECK(TransferFunction::unit().is_monic());
}

TEST_CASE("zero is absorbing under multiplication and neutral under addition") {
    const TransferFunction g({0.5, 0.2}, {1.0, -0.3}, 1);
    const TransferFunction z = TransferFunction::zero();
    CHECK((g * z).is_zero());
    CHECK((z * g).is_zero());
    const TransferFunction sum = g + z;
    for (double w : {0.1, 1.0, 3.0})
        CHECK(std::abs(sum.response(w) - g.response(w)) < 1e-15);
}

TEST_CASE("unit gain responds with 1 at every frequency") {
    const TransferFunction one = TransferFunction::unit();
    for (double w : {1e-3, 0.1, 1.0, 3.141592653589793})
        CHECK(std::abs(one.response(w) - std::complex<double>(1.0, 0.0)) < 1e-15);
}

TEST_CASE("pure delay responds with e^{-i omega}") {
    const TransferFunction d = TransferFunction::delay(1);
    for (double w : {0.05, 0.7, 2.2}) {
        const std::complex<double> expect = std::exp(std::complex<double>(0.0, -w));
        CHECK(std::abs(d.response(w) - expect) < 1e-15);
    }
}

TEST_CASE("first-order response at omega = pi matches direct complex arithmetic") {
    // 0.5 q^{-1} / (1 - 0.3 q^{-1}) at z = e^{i pi}: 0.5*(-1)/(1+0.3)
    const TransferFunction tf({0.0, 0.5}, {1.0, -0.3});
    const std::complex<double> zi = std::exp(std::complex<double>(0.0, -M_PI));
    const std::complex<double> oracle = 0.5 * zi / (1.0 - 0.3 * zi);
    CHECK(std::abs(oracle.real() - (-0.5 / 1.3)) < 1e-15);
    CHECK(std::abs(tf.response(M_PI) - oracle) < 1e-15);
}

TEST_CASE("response throws at a unit-circle denominator root") {
    // 1/(1 - q^{-1}) blows up at omega = 0-ish grid edge; probe tiny omega
    const TransferFunction tf({1.0}, {1.0, -1.0});
    CHECK_THROWS_AS(tf.response(0.0), SingularEvaluationError);
}

TEST_CASE("filtering a unit impulse through a delay shifts it") {
    std::vector<double> impulse(8, 0.0);
    impulse[0] = 1.0;
    const auto out = filter_signal(TransferFunction::delay(1), impulse);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 1.0);
    for (std::size_t t = 2; t < out.size(); ++t) CHECK(out[t] == 0.0);
}

TEST_CASE("first-order impulse response is the geometric series") {
    std::vector<double> impulse(32, 0.0);
    impulse[0] = 1.0;
    const auto out = filter_signal(TransferFunction({1.0}, {1.0, -0.5}), impulse);
    double expect = 1.0; // oracle: y(t) = 0.5^t
    for (std::size_t t = 0; t < out.size(); ++t) {
        CHECK(out[t] == doctest::Approx(expect).epsilon(1e-14));
        expect *= 0.5;
    }
}

TEST_CASE("the zero filter maps any input to zero") {
    std::vector<double> input{1.0, -2.0, 3.0, 0.5};
    for (double v : filter_signal(TransferFunction::zero(), input)) CHECK(v == 0.0);
}

TEST_CASE("cascade filtering equals filtering by the product") {
    const TransferFunction a({0.0, 0.7, 0.1}, {1.0, -0.4});
    const TransferFunction b({0.5}, {1.0, 0.2, -0.1}, 1);
    Rng rng(123);
    std::vector<double> input(1000);
    for (auto& v : input) v = rng.gaussian();
    const auto cascade = filter_signal(b, filter_signal(a, input));
    const auto direct = filter_signal(a * b, input);
    for (std::size_t t = 0; t < input.size(); ++t)
        CHECK(std::abs(cascade[t] - direct[t]) < 1e-10);
}

TEST_CASE("response of a product is the product of responses") {
    const TransferFunction a({0.0, 0.7}, {1.0, -0.4});
    const TransferFunction b({0.5, 0.25}, {1.0, 0.2}, 2);
    const TransferFunction ab = a * b;
    for (double w : {1e-3, 0.03, 0.5, 1.5, 3.0})
        CHECK(std::abs(ab.response(w) - a.response(w) * b.response(w)) < 1e-12);
}

TEST_CASE("sum response is the sum of responses") {
    const TransferFunction a({0.0, 0.7}, {1.0, -0.4});
    const TransferFunction b({0.5}, {1.0, 0.2}, 1);
    const TransferFunction s = a + b;
    for (double w : {0.02, 0.9, 2.8})
        CHECK(std::abs(s.response(w) - (a.response(w) + b.response(w))) < 1e-12);
}

TEST_CASE("pole and zero radii match known roots") {
    // 1/(1 - 0.5 q^{-1}): pole at z = 0.5
    CHECK(TransferFunction({1.0}, {1.0, -0.5}).pole_radius() == doctest::Approx(0.5));
    // Poles of 1/(1 - 0.9 q^{-2}) at +-sqrt(0.9)
    CHECK(TransferFunction({1.0}, {1.0, 0.0, -0.9}).pole_radius() ==
          doctest::Approx(std::sqrt(0.9)));
    // Zero of (1 + 0.2 q^{-1}) at z = -0.2
    CHECK(TransferFunction({1.0, 0.2}, {1.0}).zero_radius() == doctest::Approx(0.2));
    CHECK(TransferFunction({1.0}, {1.0}).pole_radius() == 0.0);
    CHECK(TransferFunction({1.0}, {1.0, -0.5}).is_stable());
    CHECK_FALSE(TransferFunction({1.0}, {1.0, -1.1}).is_stable());
}

TEST_CASE("static gain from coefficients") {
    const TransferFunction tf({0.0, 0.8}, {1.0, -0.5});
    CHECK(tf.static_gain() == doctest::Approx(0.8 / 0.5));
}

TEST_CASE("streaming filter splits feedthrough and state consistently") {
    const TransferFunction tf({0.4, 0.3}, {1.0, -0.6});
    SisoFilter a(tf), b(tf);
    Rng rng(99);
    for (int t = 0; t < 200; ++t) {
        const double u = rng.gaussian();
        const double split = a.feedthrough() * u + a.state_output();
        a.advance(u, split);
        CHECK(split == b.step(u));
    }
}

TEST_CASE("streaming filter honors dead time with nonzero b0") {
    const TransferFunction tf({0.7}, {1.0}, 3); // 0.7 q^{-3}
    SisoFilter f(tf);
    CHECK(f.feedthrough() == 0.0);
    std::vector<double> in{1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> out;
    for (double u : in) out.push_back(f.step(u));
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0, 0.7, 1.4});
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "netident/rng.hpp"
#include "netident/spectral.hpp"
#include "netident/transfer_function.hpp"

using namespace netident;

TEST_CASE("fft of an impulse is flat, fft of a complex tone peaks at its bin") {
    std::vector<std::complex<double>> x(64, {0.0, 0.0});
    x[0] = 1.0;
    fft_radix2(x);
    for (const auto& v : x) CHECK(std::abs(v - std::complex<double>(1.0, 0.0)) < 1e-12);

    std::vector<std::complex<double>> tone(64);
    for (std::size_t t = 0; t < tone.size(); ++t)
        tone[t] = std::exp(std::complex<double>(0.0, 2.0 * M_PI * 5.0 * t / 64.0));
    fft_radix2(tone);
    for (std::size_t k = 0; k < tone.size(); ++k) {
        if (k == 5)
            CHECK(std::abs(tone[k]) == doctest::Approx(64.0));
        else
            CHECK(std::abs(tone[k]) < 1e-9);
    }
    std::vector<std::complex<double>> odd(3);
    CHECK_THROWS_AS(fft_radix2(odd), std::invalid_argument);
}

TEST_CASE("welch spectrum of white noise is flat at unit level") {
    Rng rng(31);
    Eigen::MatrixXd data(1 << 16, 1);
    for (Eigen::Index t = 0; t < data.rows(); ++t) data(t, 0) = rng.gaussian();
    const CrossSpectrum cs = welch_cross_spectrum(data, 512);
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < cs.phi.size(); ++k)
        worst = std::max(worst, std::abs(cs.phi[k](0, 0).real() - 1.0));
    CHECK(worst < 0.35);
    double mean = 0.0;
    for (std::size_t k = 1; k + 1 < cs.phi.size(); ++k) mean += cs.phi[k](0, 0).real();
    mean /= static_cast<double>(cs.phi.size() - 2);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("empirical response of a known filter matches within two percent") {
    const TransferFunction tf({0.0, 0.6, 0.2}, {1.0, -0.5});
    Rng rng(77);
    std::vector<double> u(1 << 16);
    for (auto& v : u) v = rng.gaussian();
    const auto y = filter_signal(tf, u);
    Eigen::VectorXd uin(static_cast<Eigen::Index>(u.size())), yout(static_cast<Eigen::Index>(u.size()));
    for (std::size_t t = 0; t < u.size(); ++t) {
        uin[static_cast<Eigen::Index>(t)] = u[t];
        yout[static_cast<Eigen::Index>(t)] = y[t];
    }
    std::vector<double> omega;
    const auto resp = empirical_response(uin, yout, 1024, &omega);
    double worst = 0.0;
    for (std::size_t k = 8; k + 8 < resp.size(); ++k) {
        const std::complex<double> truth = tf.response(omega[k]);
        worst = std::max(worst, std::abs(resp[k] - truth) / std::abs(truth));
    }
    CHECK(worst < 0.02);
}

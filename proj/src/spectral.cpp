#include "netident/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace netident {

void fft_radix2(std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = x[i + k];
                const std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

CrossSpectrum welch_cross_spectrum(const Eigen::MatrixXd& data, int nperseg) {
    const int N = static_cast<int>(data.rows());
    const int C = static_cast<int>(data.cols());
    if (nperseg <= 1 || (nperseg & (nperseg - 1)) != 0)
        throw std::invalid_argument("nperseg must be a power of two");
    if (N < nperseg) throw std::invalid_argument("record shorter than one segment");

    const int hop = nperseg / 2;
    const int nbins = nperseg / 2 + 1;

    std::vector<double> window(static_cast<std::size_t>(nperseg));
    double wnorm = 0.0;
    for (int t = 0; t < nperseg; ++t) {
        window[static_cast<std::size_t>(t)] =
            0.5 * (1.0 - std::cos(2.0 * M_PI * t / (nperseg - 1)));
        wnorm += window[static_cast<std::size_t>(t)] * window[static_cast<std::size_t>(t)];
    }

    CrossSpectrum out;
    out.omega.resize(static_cast<std::size_t>(nbins));
    for (int k = 0; k < nbins; ++k)
        out.omega[static_cast<std::size_t>(k)] = 2.0 * M_PI * k / nperseg;
    out.phi.assign(static_cast<std::size_t>(nbins), Eigen::MatrixXcd::Zero(C, C));

    std::vector<std::vector<std::complex<double>>> spec(static_cast<std::size_t>(C));
    int segments = 0;
    for (int start = 0; start + nperseg <= N; start += hop) {
        for (int c = 0; c < C; ++c) {
            auto& buf = spec[static_cast<std::size_t>(c)];
            buf.assign(static_cast<std::size_t>(nperseg), {0.0, 0.0});
            for (int t = 0; t < nperseg; ++t)
                buf[static_cast<std::size_t>(t)] =
                    data(start + t, c) * window[static_cast<std::size_t>(t)];
            fft_radix2(buf);
        }
        for (int k = 0; k < nbins; ++k)
            for (int a = 0; a < C; ++a)
                for (int b = 0; b < C; ++b)
                    out.phi[static_cast<std::size_t>(k)](a, b) +=
                        spec[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] *
                        std::conj(spec[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)]);
        ++segments;
    }
    for (auto& p : out.phi) p /= static_cast<double>(segments) * wnorm;
    out.segments = segments;
    return out;
}

std::vector<std::complex<double>> empirical_response(const Eigen::VectorXd& input,
                                                     const Eigen::VectorXd& output, int nperseg,
                                                     std::vector<double>* omega_out) {
    Eigen::MatrixXd data(input.size(), 2);
    data.col(0) = input;
    data.col(1) = output;
    const CrossSpectrum cs = welch_cross_spectrum(data, nperseg);
    std::vector<std::complex<double>> resp(cs.omega.size());
    for (std::size_t k = 0; k < cs.omega.size(); ++k)
        resp[k] = cs.phi[k](1, 0) / cs.phi[k](0, 0);
    if (omega_out) *omega_out = cs.omega;
    return resp;
}

} // namespace netident

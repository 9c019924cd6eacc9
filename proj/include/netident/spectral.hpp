#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace netident {

/// In-place radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& x);

/// Welch cross-spectral estimate of a multichannel record.
///
/// Hann window, 50% overlap, density normalized so unit white noise has unit
/// spectrum. Bin k corresponds to omega = 2 pi k / nperseg, k = 0..nperseg/2.
struct CrossSpectrum {
    std::vector<double> omega;
    std::vector<Eigen::MatrixXcd> phi; // one per bin, channels x channels
    int segments = 0;
};

CrossSpectrum welch_cross_spectrum(const Eigen::MatrixXd& data, int nperseg);

/// Empirical frequency response between an input/output pair:
/// Phi_yu / Phi_uu per bin (bin 0 and the Nyquist bin are excluded by callers
/// interested in interior frequencies).
std::vector<std::complex<double>> empirical_response(const Eigen::VectorXd& input,
                                                     const Eigen::VectorXd& output, int nperseg,
                                                     std::vector<double>* omega_out = nullptr);

} // namespace netident

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace netident {

/// Rational discrete-time SISO filter in the delay operator,
///
///   G(q) = q^{-dead_time} * (b0 + b1 q^{-1} + ... + b_m q^{-m})
///                         / (1  + a1 q^{-1} + ... + a_n q^{-n}).
///
/// The denominator lag-0 coefficient is always exactly 1, so the filter is
/// proper by construction. Immutable after construction.
class TransferFunction {
public:
    /// The zero filter.
    TransferFunction();

    /// Throws std::invalid_argument unless den is nonempty with den[0] == 1
    /// and dead_time >= 0. Trailing zero coefficients are trimmed.
    TransferFunction(std::vector<double> num, std::vector<double> den, int dead_time = 0);

    static TransferFunction zero();
    static TransferFunction unit();
    /// Pure delay q^{-k}.
    static TransferFunction delay(int k);
    /// Constant gain.
    static TransferFunction gain(double g);

    const std::vector<double>& numerator() const { return num_; }
    const std::vector<double>& denominator() const { return den_; }
    int dead_time() const { return dead_; }

    bool is_zero() const;
    /// b0 == 0 or dead_time >= 1 (no instantaneous feedthrough).
    bool is_strictly_proper() const;
    /// Lag-0 coefficient is exactly 1 (dead_time == 0 and b0 == 1).
    bool is_monic() const;
    /// Coefficient multiplying the undelayed input; 0 for strictly proper filters.
    double feedthrough() const;

    /// Largest pole magnitude (0 for FIR).
    double pole_radius() const;
    /// Largest magnitude among finite zeros (0 if none).
    double zero_radius() const;
    bool is_stable(double margin = 0.0) const { return pole_radius() < 1.0 - margin; }
    bool is_minimum_phase(double margin = 0.0) const { return zero_radius() < 1.0 - margin; }

    /// Static gain G(z=1); throws SingularEvaluationError on a pole at z=1.
    double static_gain() const;

    /// Frequency response at z = e^{i omega}.
    std::complex<double> response(double omega) const;

    /// Numerator with the dead time folded in as leading zeros (dead_time
    /// becomes 0); used by the arithmetic below.
    std::vector<double> shifted_numerator() const;

    friend TransferFunction operator*(const TransferFunction& a, const TransferFunction& b);
    friend TransferFunction operator+(const TransferFunction& a, const TransferFunction& b);
    friend TransferFunction operator-(const TransferFunction& a, const TransferFunction& b);

private:
    std::vector<double> num_;
    std::vector<double> den_;
    int dead_ = 0;
};

/// Streaming realization of a TransferFunction (direct form II transposed with
/// an input delay line for the dead time). Zero initial conditions. One
/// instance per signal path; not shared between threads.
class SisoFilter {
public:
    explicit SisoFilter(const TransferFunction& tf);

    /// Output at the current sample before the input u(t) is known:
    /// the full output equals state_output() + feedthrough()*u(t).
    double state_output() const;
    double feedthrough() const { return feedthrough_; }

    /// Consume u(t), return y(t), advance the internal state.
    double step(double u);

    /// Advance given that y(t) was computed externally (algebraic-loop solves).
    void advance(double u, double y);

    void reset();

private:
    double delayed_input(double u) const;

    std::vector<double> b_, a_;   // b over the delayed input, a[0] == 1
    std::vector<double> state_;   // DF2T registers, size max(b,a)-1
    std::vector<double> delay_;   // circular buffer for the dead time
    int dead_ = 0;
    int dpos_ = 0;
    double feedthrough_ = 0.0;
};

/// Filter a whole record with zero initial conditions; length preserved.
std::vector<double> filter_signal(const TransferFunction& tf, std::span<const double> input);

/// Convolution of coefficient lists.
std::vector<double> poly_mul(std::span<const double> a, std::span<const double> b);

/// Largest root magnitude of c0 + c1 x + ... + cn x^n read as a polynomial in
/// q^{-1}, i.e. the largest magnitude of the corresponding z-plane roots.
/// Returns 0 for constants.
double root_radius_qpoly(std::span<const double> coeffs);

} // namespace netident

#include "netident/transfer_function.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "netident/errors.hpp"

namespace netident {

namespace {

void trim_trailing_zeros(std::vector<double>& c, std::size_t keep_at_least) {
    while (c.size() > keep_at_least && c.back() == 0.0) c.pop_back();
}

} // namespace

TransferFunction::TransferFunction() : num_{}, den_{1.0}, dead_(0) {}

TransferFunction::TransferFunction(std::vector<double> num, std::vector<double> den, int dead_time)
    : num_(std::move(num)), den_(std::move(den)), dead_(dead_time) {
    if (den_.empty() || den_[0] != 1.0)
        throw std::invalid_argument("transfer function denominator must start with coefficient 1");
    if (dead_ < 0)
        throw std::invalid_argument("transfer function dead time must be nonnegative");
    for (double c : num_)
        if (!std::isfinite(c)) throw std::invalid_argument("non-finite numerator coefficient");
    for (double c : den_)
        if (!std::isfinite(c)) throw std::invalid_argument("non-finite denominator coefficient");
    trim_trailing_zeros(num_, 0);
    trim_trailing_zeros(den_, 1);
    if (num_.empty()) dead_ = 0;
}

TransferFunction TransferFunction::zero() { return TransferFunction(); }
TransferFunction TransferFunction::unit() { return TransferFunction({1.0}, {1.0}); }
TransferFunction TransferFunction::delay(int k) { return TransferFunction({1.0}, {1.0}, k); }
TransferFunction TransferFunction::gain(double g) { return TransferFunction({g}, {1.0}); }

bool TransferFunction::is_zero() const {
    return std::all_of(num_.begin(), num_.end(), [](double c) { return c == 0.0; });
}

bool TransferFunction::is_strictly_proper() const {
    return is_zero() || dead_ >= 1 || num_[0] == 0.0;
}

bool TransferFunction::is_monic() const {
    return dead_ == 0 && !num_.empty() && num_[0] == 1.0;
}

double TransferFunction::feedthrough() const {
    if (num_.empty() || dead_ >= 1) return 0.0;
    return num_[0];
}

double TransferFunction::pole_radius() const { return root_radius_qpoly(den_); }

double TransferFunction::zero_radius() const {
    // Strip structural leading zeros; they are extra delay, not finite zeros.
    std::size_t first = 0;
    while (first < num_.size() && num_[first] == 0.0) ++first;
    if (first >= num_.size()) return 0.0;
    std::vector<double> trimmed(num_.begin() + static_cast<std::ptrdiff_t>(first), num_.end());
    return root_radius_qpoly(trimmed);
}

double TransferFunction::static_gain() const {
    const std::complex<double> r = response(0.0);
    return r.real();
}

std::complex<double> TransferFunction::response(double omega) const {
    const std::complex<double> zi = std::exp(std::complex<double>(0.0, -omega));
    std::complex<double> n(0.0, 0.0), d(0.0, 0.0);
    std::complex<double> p(1.0, 0.0);
    for (std::size_t k = 0; k < std::max(num_.size(), den_.size()); ++k) {
        if (k < num_.size()) n += num_[k] * p;
        if (k < den_.size()) d += den_[k] * p;
        p *= zi;
    }
    if (std::abs(d) < 1e-14) {
        std::ostringstream os;
        os << "transfer function denominator vanishes at omega = " << omega;
        throw SingularEvaluationError(os.str());
    }
    return n / d * std::pow(zi, dead_);
}

std::vector<double> TransferFunction::shifted_numerator() const {
    std::vector<double> out(static_cast<std::size_t>(dead_), 0.0);
    out.insert(out.end(), num_.begin(), num_.end());
    return out;
}

TransferFunction operator*(const TransferFunction& a, const TransferFunction& b) {
    if (a.is_zero() || b.is_zero()) return TransferFunction::zero();
    return TransferFunction(poly_mul(a.num_, b.num_), poly_mul(a.den_, b.den_), a.dead_ + b.dead_);
}

TransferFunction operator+(const TransferFunction& a, const TransferFunction& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const std::vector<double> na = a.shifted_numerator();
    const std::vector<double> nb = b.shifted_numerator();
    const std::vector<double> left = poly_mul(na, b.den_);
    const std::vector<double> right = poly_mul(nb, a.den_);
    std::vector<double> num(std::max(left.size(), right.size()), 0.0);
    for (std::size_t k = 0; k < left.size(); ++k) num[k] += left[k];
    for (std::size_t k = 0; k < right.size(); ++k) num[k] += right[k];
    return TransferFunction(std::move(num), poly_mul(a.den_, b.den_));
}

TransferFunction operator-(const TransferFunction& a, const TransferFunction& b) {
    std::vector<double> neg = b.num_;
    for (double& c : neg) c = -c;
    return a + TransferFunction(std::move(neg), b.den_, b.dead_);
}

SisoFilter::SisoFilter(const TransferFunction& tf)
    : b_(tf.numerator()), a_(tf.denominator()), dead_(tf.dead_time()) {
    if (b_.empty()) b_.push_back(0.0);
    const std::size_t n = std::max(b_.size(), a_.size());
    b_.resize(n, 0.0);
    a_.resize(n, 0.0);
    state_.assign(n > 0 ? n - 1 : 0, 0.0);
    delay_.assign(static_cast<std::size_t>(dead_), 0.0);
    feedthrough_ = (dead_ == 0) ? b_[0] : 0.0;
}

double SisoFilter::delayed_input(double u) const {
    return dead_ == 0 ? u : delay_[static_cast<std::size_t>(dpos_)];
}

double SisoFilter::state_output() const {
    double s = state_.empty() ? 0.0 : state_[0];
    if (dead_ > 0) s += b_[0] * delay_[static_cast<std::size_t>(dpos_)];
    return s;
}

double SisoFilter::step(double u) {
    const double y = feedthrough_ * u + state_output();
    advance(u, y);
    return y;
}

void SisoFilter::advance(double u, double y) {
    const double ud = delayed_input(u);
    for (std::size_t k = 0; k + 1 < state_.size(); ++k)
        state_[k] = b_[k + 1] * ud - a_[k + 1] * y + state_[k + 1];
    if (!state_.empty())
        state_.back() = b_[state_.size()] * ud - a_[state_.size()] * y;
    if (dead_ > 0) {
        delay_[static_cast<std::size_t>(dpos_)] = u;
        dpos_ = (dpos_ + 1) % dead_;
    }
}

void SisoFilter::reset() {
    std::fill(state_.begin(), state_.end(), 0.0);
    std::fill(delay_.begin(), delay_.end(), 0.0);
    dpos_ = 0;
}

std::vector<double> filter_signal(const TransferFunction& tf, std::span<const double> input) {
    std::vector<double> out(input.size(), 0.0);
    if (tf.is_zero()) return out;
    SisoFilter f(tf);
    for (std::size_t t = 0; t < input.size(); ++t) out[t] = f.step(input[t]);
    return out;
}

std::vector<double> poly_mul(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

double root_radius_qpoly(std::span<const double> coeffs) {
    // c0 + c1 q^{-1} + ... + cn q^{-n} has z-plane roots equal to the roots of
    // c0 z^n + c1 z^{n-1} + ... + cn.
    std::size_t n = coeffs.size();
    while (n > 0 && coeffs[n - 1] == 0.0) --n;
    if (n <= 1) return 0.0;
    const double c0 = coeffs[0];
    if (c0 == 0.0) throw std::invalid_argument("root_radius_qpoly: zero lag-0 coefficient");
    const Eigen::Index deg = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (Eigen::Index k = 0; k < deg; ++k) {
        companion(0, k) = -coeffs[static_cast<std::size_t>(k + 1)] / c0;
        if (k + 1 < deg) companion(k + 1, k) = 1.0;
    }
    const Eigen::VectorXcd ev = companion.eigenvalues();
    double r = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) r = std::max(r, std::abs(ev[k]));
    return r;
}

} // namespace netident

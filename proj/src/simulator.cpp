#include "netident/simulator.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "netident/errors.hpp"
#include "netident/rng.hpp"

namespace netident {

SimulationPlan SimulationPlan::basic(const NetworkModel& model, int N, std::uint64_t seed) {
    SimulationPlan plan;
    plan.model = model;
    plan.N = N;
    plan.seed = seed;
    for (int j = 0; j < model.L; ++j)
        if (model.r_present[static_cast<std::size_t>(j)]) plan.excitation[j] = ExcitationSpec{};
    return plan;
}

StabilityResult stability_check(const NetworkModel& model, const FrequencyGrid& grid,
                                double margin_floor) {
    StabilityResult res;
    res.worst_module_pole_radius = 0.0;
    for (const auto& row : model.G)
        for (const auto& tf : row)
            if (!tf.is_zero())
                res.worst_module_pole_radius = std::max(res.worst_module_pole_radius, tf.pole_radius());
    for (const auto& row : model.H)
        for (const auto& tf : row)
            if (!tf.is_zero())
                res.worst_module_pole_radius = std::max(res.worst_module_pole_radius, tf.pole_radius());

    double worst_rho = 0.0;
    double worst_omega = grid.omega.empty() ? 0.0 : grid.omega.front();
    for (double w : grid.omega) {
        const Eigen::MatrixXcd g = model.eval_G(w);
        const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(g, false).eigenvalues();
        double rho = 0.0;
        for (Eigen::Index k = 0; k < ev.size(); ++k) rho = std::max(rho, std::abs(ev[k]));
        if (rho > worst_rho) {
            worst_rho = rho;
            worst_omega = w;
        }
    }
    res.margin = 1.0 - worst_rho;
    res.stable = res.worst_module_pole_radius < 1.0 && res.margin > margin_floor;
    std::ostringstream os;
    if (res.stable) {
        os << "stable; loop margin " << res.margin;
    } else if (res.worst_module_pole_radius >= 1.0) {
        os << "instability: a module or noise entry has pole radius " << res.worst_module_pole_radius;
    } else {
        os << "instability: spectral radius of G reaches " << worst_rho << " at omega = " << worst_omega;
    }
    res.detail = os.str();
    return res;
}

namespace {

struct NoiseBank {
    // One streaming filter per nonzero H entry.
    struct Entry {
        int row, col;
        SisoFilter filter;
    };
    std::vector<Entry> entries;

    explicit NoiseBank(const NetworkModel& model) {
        for (int j = 0; j < model.L; ++j)
            for (int k = 0; k < model.L; ++k) {
                const auto& tf = model.H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                if (!tf.is_zero()) entries.push_back({j, k, SisoFilter(tf)});
            }
    }

    void step(const Eigen::VectorXd& e, Eigen::VectorXd& v) {
        v.setZero();
        for (auto& en : entries) v[en.row] += en.filter.step(e[en.col]);
    }
};

class ExcitationSource {
public:
    ExcitationSource(const ExcitationSpec& spec, std::uint64_t seed, int total_samples)
        : spec_(spec), rng_(seed) {
        if (spec.kind == ExcitationSpec::Kind::filtered_white)
            shaping_.emplace(spec.shaping);
        if (spec.kind == ExcitationSpec::Kind::multisine) {
            // Random-phase multisine over sine_count equispaced frequencies.
            const int n = std::max(1, spec.sine_count);
            for (int k = 1; k <= n; ++k) {
                freqs_.push_back(M_PI * k / (n + 1.0));
                phases_.push_back(rng_.uniform(0.0, 2.0 * M_PI));
            }
            norm_ = spec.amplitude * std::sqrt(2.0 / n);
        }
        (void)total_samples;
    }

    double step(int t) {
        switch (spec_.kind) {
        case ExcitationSpec::Kind::white:
            return spec_.amplitude * rng_.gaussian();
        case ExcitationSpec::Kind::filtered_white:
            return shaping_->step(spec_.amplitude * rng_.gaussian());
        case ExcitationSpec::Kind::multisine: {
            double s = 0.0;
            for (std::size_t k = 0; k < freqs_.size(); ++k)
                s += std::cos(freqs_[k] * t + phases_[k]);
            return norm_ * s;
        }
        }
        return 0.0;
    }

private:
    ExcitationSpec spec_;
    Rng rng_;
    std::optional<SisoFilter> shaping_;
    std::vector<double> freqs_, phases_;
    double norm_ = 0.0;
};

std::vector<std::string> channel_names(int L, const char* prefix) {
    std::vector<std::string> out;
    for (int j = 1; j <= L; ++j) out.push_back(std::string(prefix) + std::to_string(j));
    return out;
}

} // namespace

SignalRecord generate_noise(const SimulationPlan& plan) {
    const NetworkModel& m = plan.model;
    if (plan.N < 1) throw std::invalid_argument("sample count must be >= 1");
    if (plan.burn_in < 0) throw std::invalid_argument("burn-in must be >= 0");
    const Eigen::MatrixXd C = m.lambda_cholesky();

    Rng rng(derive_seed(plan.seed, /*stream*/ 1));
    NoiseBank bank(m);
    const int total = plan.N + plan.burn_in;

    SignalRecord rec;
    rec.N = plan.N;
    auto en = channel_names(m.L, "e");
    auto vn = channel_names(m.L, "v");
    rec.names = en;
    rec.names.insert(rec.names.end(), vn.begin(), vn.end());
    rec.data.resize(plan.N, 2 * m.L);

    Eigen::VectorXd eta(m.L), e(m.L), v(m.L);
    for (int t = 0; t < total; ++t) {
        for (int j = 0; j < m.L; ++j)
            eta[j] = plan.gaussian ? rng.gaussian() : std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
        e = C * eta;
        bank.step(e, v);
        if (t >= plan.burn_in) {
            const int row = t - plan.burn_in;
            rec.data.block(row, 0, 1, m.L) = e.transpose();
            rec.data.block(row, m.L, 1, m.L) = v.transpose();
        }
    }
    rec.validate();
    return rec;
}

SignalRecord simulate(const SimulationPlan& plan) {
    const NetworkModel& m = plan.model;
    if (plan.N < 1) throw std::invalid_argument("sample count must be >= 1");
    if (plan.burn_in < 0) throw std::invalid_argument("burn-in must be >= 0");
    for (const auto& [node, spec] : plan.excitation) {
        (void)spec;
        if (node < 0 || node >= m.L || !m.r_present[static_cast<std::size_t>(node)])
            throw std::invalid_argument("excitation specified for a node without r");
    }

    // Instantaneous-feedthrough gains; the constant linear solve handles
    // algebraic loops of non-strictly-proper modules. Checked before the
    // stability refusal so a singular loop is named as the structural cause.
    Eigen::MatrixXd d0 = Eigen::MatrixXd::Zero(m.L, m.L);
    for (int j = 0; j < m.L; ++j)
        for (int k = 0; k < m.L; ++k)
            d0(j, k) = m.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)].feedthrough();
    const bool instantaneous = d0.cwiseAbs().maxCoeff() > 0.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> loop_lu;
    if (instantaneous) {
        const Eigen::MatrixXd loop = Eigen::MatrixXd::Identity(m.L, m.L) - d0;
        if (std::abs(loop.determinant()) < 1e-12)
            throw AlgebraicLoopError("instantaneous loop matrix (I - D0) is singular");
        loop_lu.compute(loop);
    }

    const StabilityResult st = stability_check(m, FrequencyGrid::log_spaced());
    if (!st.stable) throw UnstableNetworkError("refusing to simulate: " + st.detail);

    // Slow modes decay like (1 - margin)^t; a burn-in much shorter than a few
    // time constants leaves visible transients.
    const double time_constant = -1.0 / std::log1p(-std::min(st.margin, 0.999));
    if (plan.burn_in > 0 && static_cast<double>(plan.burn_in) < 5.0 * time_constant)
        std::cerr << "netident: warning: burn-in " << plan.burn_in
                  << " is short for the stability margin " << st.margin << " (time constant ~ "
                  << time_constant << " samples); consider increasing it\n";

    const Eigen::MatrixXd C = m.lambda_cholesky();

    struct EdgeFilter {
        int row, col;
        SisoFilter filter;
    };
    std::vector<EdgeFilter> edges;
    for (int j = 0; j < m.L; ++j)
        for (int k = 0; k < m.L; ++k) {
            const auto& tf = m.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            if (!tf.is_zero()) edges.push_back({j, k, SisoFilter(tf)});
        }

    NoiseBank bank(m);
    Rng rng(derive_seed(plan.seed, /*stream*/ 1));

    std::vector<std::unique_ptr<ExcitationSource>> sources(static_cast<std::size_t>(m.L));
    for (const auto& [node, spec] : plan.excitation)
        sources[static_cast<std::size_t>(node)] = std::make_unique<ExcitationSource>(
            spec, derive_seed(plan.seed, /*stream*/ 2, static_cast<std::uint64_t>(node)),
            plan.N + plan.burn_in);

    SignalRecord rec;
    rec.N = plan.N;
    for (const char* p : {"w", "e", "v", "r"}) {
        auto names = channel_names(m.L, p);
        rec.names.insert(rec.names.end(), names.begin(), names.end());
    }
    rec.data.resize(plan.N, 4 * m.L);

    const int total = plan.N + plan.burn_in;
    Eigen::VectorXd eta(m.L), e(m.L), v(m.L), r(m.L), c(m.L), w(m.L);
    for (int t = 0; t < total; ++t) {
        for (int j = 0; j < m.L; ++j)
            eta[j] = plan.gaussian ? rng.gaussian() : std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
        e = C * eta;
        bank.step(e, v);
        r.setZero();
        for (int j = 0; j < m.L; ++j)
            if (sources[static_cast<std::size_t>(j)]) r[j] = sources[static_cast<std::size_t>(j)]->step(t);

        // w(t) = D0 w(t) + (state parts) + v(t) + r(t)
        c = v + r;
        for (auto& ef : edges) c[ef.row] += ef.filter.state_output();
        if (instantaneous)
            w = loop_lu.solve(c);
        else
            w = c;
        for (auto& ef : edges) {
            const double y = ef.filter.feedthrough() * w[ef.col] + ef.filter.state_output();
            ef.filter.advance(w[ef.col], y);
        }

        if (t >= plan.burn_in) {
            const int row = t - plan.burn_in;
            rec.data.block(row, 0, 1, m.L) = w.transpose();
            rec.data.block(row, m.L, 1, m.L) = e.transpose();
            rec.data.block(row, 2 * m.L, 1, m.L) = v.transpose();
            rec.data.block(row, 3 * m.L, 1, m.L) = r.transpose();
        }
    }
    rec.validate();
    return rec;
}

} // namespace netident

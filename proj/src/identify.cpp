#include "netident/identify.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include "netident/errors.hpp"
#include "netident/rng.hpp"

namespace netident {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::pair<int, int> true_lag_span(const TransferFunction& tf) {
    // (first lag, count) of the nonzero numerator span with dead time folded in
    const auto sn = tf.shifted_numerator();
    int first = -1, last = -1;
    for (std::size_t k = 0; k < sn.size(); ++k)
        if (sn[k] != 0.0) {
            if (first < 0) first = static_cast<int>(k);
            last = static_cast<int>(k);
        }
    if (first < 0) return {0, 0};
    return {first, last - first + 1};
}

} // namespace

TransferFunction ModelStructure::g_tf(const GEntry& e, const Eigen::VectorXd& theta) const {
    std::vector<double> num(static_cast<std::size_t>(e.orders.nb));
    for (int m = 0; m < e.orders.nb; ++m) num[static_cast<std::size_t>(m)] = theta[e.offset + m];
    std::vector<double> den(static_cast<std::size_t>(e.orders.nf + 1));
    den[0] = 1.0;
    for (int m = 0; m < e.orders.nf; ++m)
        den[static_cast<std::size_t>(m + 1)] = theta[e.offset + e.orders.nb + m];
    return TransferFunction(std::move(num), std::move(den), e.orders.nk);
}

TransferFunction ModelStructure::h_diag_tf(const HDiagEntry& e, const Eigen::VectorXd& theta) const {
    std::vector<double> num(static_cast<std::size_t>(e.orders.nc + 1));
    num[0] = 1.0;
    for (int m = 0; m < e.orders.nc; ++m) num[static_cast<std::size_t>(m + 1)] = theta[e.offset + m];
    std::vector<double> den(static_cast<std::size_t>(e.orders.nd + 1));
    den[0] = 1.0;
    for (int m = 0; m < e.orders.nd; ++m)
        den[static_cast<std::size_t>(m + 1)] = theta[e.offset + e.orders.nc + m];
    return TransferFunction(std::move(num), std::move(den));
}

TransferFunction ModelStructure::h_off_tf(const HOffEntry& e, const Eigen::VectorXd& theta) const {
    std::vector<double> num(static_cast<std::size_t>(e.nh + 1), 0.0);
    for (int m = 0; m < e.nh; ++m) num[static_cast<std::size_t>(m + 1)] = theta[e.offset + m];
    return TransferFunction(std::move(num), {1.0});
}

Eigen::VectorXd ModelStructure::pack_true(const NetworkModel& model) const {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(theta_dim);
    for (const auto& e : g_entries) {
        const int node = y_nodes[static_cast<std::size_t>(e.row)];
        const auto& tf = model.G[static_cast<std::size_t>(node)][static_cast<std::size_t>(e.col_node)];
        const auto sn = tf.shifted_numerator();
        for (std::size_t lag = 0; lag < sn.size(); ++lag) {
            if (sn[lag] == 0.0) continue;
            const int m = static_cast<int>(lag) - e.orders.nk;
            if (m < 0 || m >= e.orders.nb)
                throw Error("true module G[" + std::to_string(node + 1) + "," +
                            std::to_string(e.col_node + 1) + "] does not fit the declared orders");
            theta[e.offset + m] = sn[lag];
        }
        const auto& den = tf.denominator();
        if (static_cast<int>(den.size()) - 1 > e.orders.nf)
            throw Error("true module denominator exceeds declared order");
        for (std::size_t m = 1; m < den.size(); ++m)
            theta[e.offset + e.orders.nb + static_cast<int>(m) - 1] = den[m];
    }
    for (const auto& e : h_diag) {
        const int node = y_nodes[static_cast<std::size_t>(e.row)];
        const auto& tf = model.H[static_cast<std::size_t>(node)][static_cast<std::size_t>(node)];
        if (!tf.is_monic())
            throw Error("true noise entry H[" + std::to_string(node + 1) + "," +
                        std::to_string(node + 1) + "] is not monic");
        const auto& num = tf.numerator();
        const auto& den = tf.denominator();
        if (static_cast<int>(num.size()) - 1 > e.orders.nc ||
            static_cast<int>(den.size()) - 1 > e.orders.nd)
            throw Error("true noise entry exceeds declared orders");
        for (std::size_t m = 1; m < num.size(); ++m)
            theta[e.offset + static_cast<int>(m) - 1] = num[m];
        for (std::size_t m = 1; m < den.size(); ++m)
            theta[e.offset + e.orders.nc + static_cast<int>(m) - 1] = den[m];
    }
    for (const auto& e : h_off) {
        const int a = y_nodes[static_cast<std::size_t>(e.row)];
        const int b = y_nodes[static_cast<std::size_t>(e.col)];
        const auto& tf = model.H[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        if (tf.is_zero()) continue;
        // Expressible exactly when the coupling is strictly proper FIR within
        // the declared taps; anything else needs the (unimplemented) monic
        // spectral factor.
        if (tf.denominator().size() != 1 || !tf.is_strictly_proper())
            throw Error("true noise coupling H[" + std::to_string(a + 1) + "," +
                        std::to_string(b + 1) + "] is not strictly proper FIR; its monic "
                        "innovation form is not expressible in this structure");
        const auto sn = tf.shifted_numerator();
        for (std::size_t lag = 1; lag < sn.size(); ++lag) {
            if (sn[lag] == 0.0) continue;
            if (static_cast<int>(lag) > e.nh)
                throw Error("true noise coupling exceeds the declared tap count");
            theta[e.offset + static_cast<int>(lag) - 1] = sn[lag];
        }
    }
    return theta;
}

std::string ModelStructure::describe() const {
    std::ostringstream os;
    os << "outputs:";
    for (int y : y_nodes) os << " w" << (y + 1);
    os << "; inputs:";
    for (int d : d_nodes) os << " w" << (d + 1);
    os << "; theta dim " << theta_dim << "\n";
    for (const auto& e : g_entries)
        os << "  G[" << (y_nodes[static_cast<std::size_t>(e.row)] + 1) << ","
           << (e.col_node + 1) << "] nb=" << e.orders.nb << " nf=" << e.orders.nf
           << " nk=" << e.orders.nk << "\n";
    for (const auto& e : h_diag)
        os << "  H[" << (y_nodes[static_cast<std::size_t>(e.row)] + 1) << "] nc=" << e.orders.nc
           << " nd=" << e.orders.nd << "\n";
    for (const auto& e : h_off)
        os << "  H[" << (y_nodes[static_cast<std::size_t>(e.row)] + 1) << ","
           << (y_nodes[static_cast<std::size_t>(e.col)] + 1) << "] nh=" << e.nh << "\n";
    return os.str();
}

std::map<std::pair<int, int>, ModuleOrders> derive_module_orders(const NetworkModel& model,
                                                                 const NodePartition& partition) {
    std::map<std::pair<int, int>, ModuleOrders> out;
    for (int y : partition.Y)
        for (int d : partition.D) {
            const auto& tf = model.G[static_cast<std::size_t>(y)][static_cast<std::size_t>(d)];
            if (tf.is_zero()) continue;
            const auto [nk, nb] = true_lag_span(tf);
            ModuleOrders mo;
            mo.nk = nk;
            mo.nb = std::max(1, nb);
            mo.nf = static_cast<int>(tf.denominator().size()) - 1;
            out[{y, d}] = mo;
        }
    return out;
}

std::map<int, NoiseDiagOrders> derive_noise_orders(const NetworkModel& model,
                                                   const NodePartition& partition) {
    std::map<int, NoiseDiagOrders> out;
    for (int y : partition.Y) {
        const auto& tf = model.H[static_cast<std::size_t>(y)][static_cast<std::size_t>(y)];
        NoiseDiagOrders no;
        no.nc = std::max(0, static_cast<int>(tf.numerator().size()) - 1);
        no.nd = std::max(0, static_cast<int>(tf.denominator().size()) - 1);
        out[y] = no;
    }
    return out;
}

int derive_h_off_taps(const NetworkModel& model, const NodePartition& partition) {
    int taps = 2;
    for (int a : partition.Y)
        for (int b : partition.Y) {
            if (a == b) continue;
            const auto& tf = model.H[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            if (tf.is_zero()) continue;
            taps = std::max(taps,
                            static_cast<int>(tf.shifted_numerator().size()) - 1);
        }
    return taps;
}

ModelStructure build_model_structure(const NetworkModel& model, const NodePartition& partition,
                                     const std::map<std::pair<int, int>, ModuleOrders>& g_orders,
                                     const std::map<int, NoiseDiagOrders>& h_orders,
                                     int h_off_taps) {
    ModelStructure s;
    s.y_nodes.assign(partition.Q.begin(), partition.Q.end());
    if (partition.o) s.y_nodes.push_back(*partition.o);
    s.d_nodes.assign(partition.Q.begin(), partition.Q.end());
    s.d_nodes.insert(s.d_nodes.end(), partition.B.begin(), partition.B.end());
    s.d_nodes.insert(s.d_nodes.end(), partition.A.begin(), partition.A.end());

    for (const auto& [key, mo] : g_orders) {
        (void)mo;
        const auto [j, i] = key;
        if (j < 0 || j >= model.L || i < 0 || i >= model.L ||
            model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].is_zero())
            throw Error("order spec for absent module G[" + std::to_string(j + 1) + "," +
                        std::to_string(i + 1) + "]");
    }

    // Delay condition: with non-strictly-proper modules present, no zero-delay
    // path may run from Q, o or B back into Q or o.
    if (!model.all_modules_strictly_proper()) {
        std::vector<std::vector<int>> zd(static_cast<std::size_t>(model.L));
        for (int j = 0; j < model.L; ++j)
            for (int l = 0; l < model.L; ++l)
                if (model.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)].feedthrough() !=
                    0.0)
                    zd[static_cast<std::size_t>(l)].push_back(j);
        NodeSet sources = partition.Q;
        if (partition.o) sources.insert(*partition.o);
        for (int b : partition.B) sources.insert(b);
        NodeSet targets = partition.Q;
        if (partition.o) targets.insert(*partition.o);
        for (int src : sources) {
            std::vector<bool> seen(static_cast<std::size_t>(model.L), false);
            std::deque<int> q;
            for (int x : zd[static_cast<std::size_t>(src)]) {
                if (targets.count(x))
                    throw Error("delay condition violated: zero-delay path from w" +
                                std::to_string(src + 1) + " to w" + std::to_string(x + 1));
                if (!seen[static_cast<std::size_t>(x)]) {
                    seen[static_cast<std::size_t>(x)] = true;
                    q.push_back(x);
                }
            }
            while (!q.empty()) {
                const int cur = q.front();
                q.pop_front();
                for (int x : zd[static_cast<std::size_t>(cur)]) {
                    if (targets.count(x))
                        throw Error("delay condition violated: zero-delay path from w" +
                                    std::to_string(src + 1) + " through w" + std::to_string(cur + 1) +
                                    " to w" + std::to_string(x + 1));
                    if (!seen[static_cast<std::size_t>(x)]) {
                        seen[static_cast<std::size_t>(x)] = true;
                        q.push_back(x);
                    }
                }
            }
        }
    }

    int offset = 0;
    for (std::size_t r = 0; r < s.y_nodes.size(); ++r) {
        const int y = s.y_nodes[r];
        for (int d : s.d_nodes) {
            if (model.G[static_cast<std::size_t>(y)][static_cast<std::size_t>(d)].is_zero()) continue;
            ModuleOrders mo;
            if (auto it = g_orders.find({y, d}); it != g_orders.end()) mo = it->second;
            if (mo.nb < 1 || mo.nf < 0 || mo.nk < 0) throw Error("invalid module orders");
            ModelStructure::GEntry e;
            e.row = static_cast<int>(r);
            e.col_node = d;
            e.orders = mo;
            e.offset = offset;
            offset += mo.nb + mo.nf;
            s.g_entries.push_back(e);
        }
    }
    for (std::size_t r = 0; r < s.y_nodes.size(); ++r) {
        NoiseDiagOrders no;
        if (auto it = h_orders.find(s.y_nodes[r]); it != h_orders.end()) no = it->second;
        if (no.nc < 0 || no.nd < 0) throw Error("invalid noise orders");
        ModelStructure::HDiagEntry e;
        e.row = static_cast<int>(r);
        e.orders = no;
        e.offset = offset;
        offset += no.nc + no.nd;
        s.h_diag.push_back(e);
    }
    const auto corr = model.noise_correlation_pattern();
    for (std::size_t a = 0; a < s.y_nodes.size(); ++a)
        for (std::size_t b = 0; b < s.y_nodes.size(); ++b) {
            if (a == b) continue;
            if (!corr(s.y_nodes[a], s.y_nodes[b])) continue;
            ModelStructure::HOffEntry e;
            e.row = static_cast<int>(a);
            e.col = static_cast<int>(b);
            e.nh = std::max(1, h_off_taps);
            e.offset = offset;
            offset += e.nh;
            s.h_off.push_back(e);
        }
    s.theta_dim = offset;
    return s;
}

namespace {

/// Streaming application of Hbar(theta)^{-1}: eps(t) = u(t) - [(Hbar - I) eps](t),
/// where every (Hbar - I) entry is strictly proper so the bracket depends on
/// eps(tau <= t-1) only.
class HbarInverse {
public:
    HbarInverse(const ModelStructure& s, const Eigen::VectorXd& theta) : ny_(s.ny()) {
        for (const auto& e : s.h_diag) {
            const TransferFunction h = s.h_diag_tf(e, theta);
            if (h.pole_radius() >= 1.0)
                throw DomainViolationError("noise model denominator unstable");
            const TransferFunction hm1 = h - TransferFunction::unit();
            if (!hm1.is_zero()) entries_.push_back({e.row, e.row, SisoFilter(hm1)});
        }
        for (const auto& e : s.h_off) {
            const TransferFunction h = s.h_off_tf(e, theta);
            if (!h.is_zero()) entries_.push_back({e.row, e.col, SisoFilter(h)});
        }
    }

    Eigen::MatrixXd solve(const Eigen::MatrixXd& u, double guard) {
        const Eigen::Index N = u.rows();
        Eigen::MatrixXd eps(N, ny_);
        Eigen::RowVectorXd st(ny_);
        for (Eigen::Index t = 0; t < N; ++t) {
            st.setZero();
            for (auto& e : entries_) st[e.row] += e.f.state_output();
            eps.row(t) = u.row(t) - st;
            for (Eigen::Index c = 0; c < ny_; ++c) {
                const double v = eps(t, c);
                if (!std::isfinite(v) || std::abs(v) > guard)
                    throw DomainViolationError("prediction-error recursion diverged: the noise "
                                               "model inverse is unstable at this theta");
            }
            for (auto& e : entries_) e.f.step(eps(t, e.col));
        }
        return eps;
    }

private:
    struct Ent {
        int row, col;
        SisoFilter f;
    };
    std::vector<Ent> entries_;
    Eigen::Index ny_;
};

Eigen::VectorXd filter_col(const TransferFunction& tf, const Eigen::VectorXd& x) {
    Eigen::VectorXd out(x.size());
    SisoFilter f(tf);
    for (Eigen::Index t = 0; t < x.size(); ++t) out[t] = f.step(x[t]);
    return out;
}

struct PredictOutput {
    Eigen::MatrixXd eps;
    std::vector<Eigen::MatrixXd> psi; // per parameter, N x ny
};

PredictOutput predict_impl(const ModelStructure& s, const Eigen::VectorXd& theta,
                           const SignalRecord& data, bool want_sens) {
    if (theta.size() != s.theta_dim) throw Error("theta dimension mismatch");
    const Eigen::Index N = data.N;
    const int ny = s.ny();

    Eigen::MatrixXd wy(N, ny);
    for (int a = 0; a < ny; ++a) {
        const int node = s.y_nodes[static_cast<std::size_t>(a)] + 1;
        wy.col(a) = data.column("w" + std::to_string(node));
        // Known external excitation enters the output equation additively and
        // is subtracted from the prediction; records without r channels treat
        // it as zero.
        if (data.has("r" + std::to_string(node)))
            wy.col(a) -= data.column("r" + std::to_string(node));
    }

    // Predictor input filtering; per-entry pole check keeps the search inside
    // the stability region.
    std::vector<Eigen::VectorXd> wcol(s.g_entries.size());
    std::vector<Eigen::VectorXd> xe(s.g_entries.size());
    std::vector<TransferFunction> gtf(s.g_entries.size());
    Eigen::MatrixXd u = wy;
    for (std::size_t k = 0; k < s.g_entries.size(); ++k) {
        const auto& e = s.g_entries[k];
        gtf[k] = s.g_tf(e, theta);
        if (gtf[k].pole_radius() >= 1.0)
            throw DomainViolationError("module denominator unstable at this theta");
        wcol[k] = data.column("w" + std::to_string(e.col_node + 1));
        xe[k] = filter_col(gtf[k], wcol[k]);
        u.col(e.row) -= xe[k];
    }

    const double guard = 1e9 * (1.0 + u.cwiseAbs().maxCoeff());

    PredictOutput out;
    out.eps = HbarInverse(s, theta).solve(u, guard);

    if (!want_sens) return out;

    out.psi.assign(static_cast<std::size_t>(s.theta_dim), Eigen::MatrixXd());
    const auto solve_rhs = [&](int row, const Eigen::VectorXd& rhs_col) {
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(N, ny);
        rhs.col(row) = rhs_col;
        return HbarInverse(s, theta).solve(rhs, guard);
    };

    for (std::size_t k = 0; k < s.g_entries.size(); ++k) {
        const auto& e = s.g_entries[k];
        const std::vector<double>& fden = gtf[k].denominator();
        for (int m = 0; m < e.orders.nb; ++m) {
            const TransferFunction dtf({1.0}, fden, e.orders.nk + m);
            out.psi[static_cast<std::size_t>(e.offset + m)] =
                solve_rhs(e.row, -filter_col(dtf, wcol[k]));
        }
        for (int m = 1; m <= e.orders.nf; ++m) {
            const TransferFunction dtf({1.0}, fden, m);
            out.psi[static_cast<std::size_t>(e.offset + e.orders.nb + m - 1)] =
                solve_rhs(e.row, filter_col(dtf, xe[k]));
        }
    }
    for (const auto& e : s.h_diag) {
        if (e.orders.nc + e.orders.nd == 0) continue;
        const TransferFunction h = s.h_diag_tf(e, theta);
        const std::vector<double>& dden = h.denominator();
        Eigen::VectorXd ya;
        if (e.orders.nd > 0) ya = filter_col(h, out.eps.col(e.row));
        for (int m = 1; m <= e.orders.nc; ++m) {
            const TransferFunction dtf({1.0}, dden, m);
            out.psi[static_cast<std::size_t>(e.offset + m - 1)] =
                solve_rhs(e.row, -filter_col(dtf, out.eps.col(e.row)));
        }
        for (int m = 1; m <= e.orders.nd; ++m) {
            const TransferFunction dtf({1.0}, dden, m);
            out.psi[static_cast<std::size_t>(e.offset + e.orders.nc + m - 1)] =
                solve_rhs(e.row, filter_col(dtf, ya));
        }
    }
    for (const auto& e : s.h_off) {
        for (int m = 1; m <= e.nh; ++m) {
            Eigen::VectorXd delayed = Eigen::VectorXd::Zero(N);
            if (N > m) delayed.tail(N - m) = out.eps.col(e.col).head(N - m);
            out.psi[static_cast<std::size_t>(e.offset + m - 1)] = solve_rhs(e.row, -delayed);
        }
    }
    return out;
}

struct CriterionEval {
    double value = kInf;
    Eigen::VectorXd grad;
};

double criterion_of(const Eigen::MatrixXd& eps, const EstimateOptions& opt) {
    if (opt.criterion == CriterionKind::wls) {
        Eigen::MatrixXd W = opt.W;
        if (W.size() == 0) W = Eigen::MatrixXd::Identity(eps.cols(), eps.cols());
        return criterion_wls(eps, W);
    }
    return criterion_ml_det(eps);
}

CriterionEval eval_with_grad(const ModelStructure& s, const Eigen::VectorXd& theta,
                             const SignalRecord& data, const EstimateOptions& opt) {
    CriterionEval ev;
    PredictOutput po;
    try {
        po = predict_impl(s, theta, data, true);
    } catch (const DomainViolationError&) {
        return ev;
    }
    const Eigen::Index N = po.eps.rows();
    ev.grad.resize(s.theta_dim);
    if (opt.criterion == CriterionKind::wls) {
        Eigen::MatrixXd W = opt.W;
        if (W.size() == 0) W = Eigen::MatrixXd::Identity(po.eps.cols(), po.eps.cols());
        ev.value = criterion_wls(po.eps, W);
        const Eigen::MatrixXd ew = po.eps * W;
        for (int k = 0; k < s.theta_dim; ++k)
            ev.grad[k] = 2.0 / static_cast<double>(N) *
                         po.psi[static_cast<std::size_t>(k)].cwiseProduct(ew).sum();
    } else {
        const Eigen::MatrixXd R =
            po.eps.transpose() * po.eps / static_cast<double>(N);
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() != Eigen::Success) return CriterionEval{};
        double det = 1.0;
        const Eigen::MatrixXd Lm = llt.matrixL();
        for (Eigen::Index i = 0; i < Lm.rows(); ++i) det *= Lm(i, i) * Lm(i, i);
        ev.value = det;
        const Eigen::MatrixXd er = llt.solve(po.eps.transpose()).transpose();
        for (int k = 0; k < s.theta_dim; ++k)
            ev.grad[k] = det * 2.0 / static_cast<double>(N) *
                         po.psi[static_cast<std::size_t>(k)].cwiseProduct(er).sum();
    }
    return ev;
}

double eval_value(const ModelStructure& s, const Eigen::VectorXd& theta, const SignalRecord& data,
                  const EstimateOptions& opt) {
    try {
        const PredictOutput po = predict_impl(s, theta, data, false);
        return criterion_of(po.eps, opt);
    } catch (const DomainViolationError&) {
        return kInf;
    } catch (const DegenerateResidualError&) {
        return kInf;
    }
}

struct LocalResult {
    Eigen::VectorXd theta;
    double value = kInf;
    int iterations = 0;
    double grad_norm = kInf;
    bool converged = false;
    std::vector<double> trace;
};

/// BFGS with Armijo backtracking; the reported criterion is non-increasing by
/// construction.
LocalResult bfgs_minimize(const ModelStructure& s, const SignalRecord& data,
                          const EstimateOptions& opt, Eigen::VectorXd x0) {
    LocalResult res;
    res.theta = std::move(x0);
    CriterionEval ev = eval_with_grad(s, res.theta, data, opt);
    if (!std::isfinite(ev.value)) return res; // diverged start
    res.value = ev.value;
    res.trace.push_back(res.value);
    res.grad_norm = ev.grad.size() ? ev.grad.cwiseAbs().maxCoeff() : 0.0;

    const int n = s.theta_dim;
    if (n == 0) {
        res.converged = true;
        return res;
    }
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);

    for (int iter = 0; iter < opt.max_iter; ++iter) {
        res.iterations = iter + 1;
        if (res.grad_norm <= opt.grad_tol * std::max(1.0, std::abs(res.value))) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd p = -(Hinv * ev.grad);
        double slope = p.dot(ev.grad);
        if (!(slope < 0.0)) { // reset on a non-descent direction
            Hinv.setIdentity();
            p = -ev.grad;
            slope = p.dot(ev.grad);
            if (!(slope < 0.0)) break;
        }
        double step = 1.0;
        double fnew = kInf;
        Eigen::VectorXd xnew;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            xnew = res.theta + step * p;
            fnew = eval_value(s, xnew, data, opt);
            if (std::isfinite(fnew) && fnew <= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        CriterionEval evnew = eval_with_grad(s, xnew, data, opt);
        if (!std::isfinite(evnew.value)) break;
        const Eigen::VectorXd svec = xnew - res.theta;
        const Eigen::VectorXd yvec = evnew.grad - ev.grad;
        const double sy = svec.dot(yvec);
        if (sy > 1e-12 * svec.norm() * yvec.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            Hinv = (I - rho * svec * yvec.transpose()) * Hinv *
                       (I - rho * yvec * svec.transpose()) +
                   rho * svec * svec.transpose();
        }
        res.theta = xnew;
        res.value = evnew.value;
        res.trace.push_back(res.value);
        ev = std::move(evnew);
        res.grad_norm = ev.grad.cwiseAbs().maxCoeff();
        if (svec.cwiseAbs().maxCoeff() < 1e-14) {
            res.converged = true;
            break;
        }
    }
    return res;
}

Eigen::VectorXd random_start(const ModelStructure& s, Rng& rng) {
    Eigen::VectorXd theta(s.theta_dim);
    const auto stable_poly = [&](int order) {
        // coefficients of a monic q-polynomial with all roots inside |z| < 0.9
        std::vector<double> poly{1.0};
        for (int m = 0; m < order; ++m) {
            const double root = rng.uniform(-0.85, 0.85);
            std::vector<double> next(poly.size() + 1, 0.0);
            for (std::size_t k = 0; k < poly.size(); ++k) {
                next[k] += poly[k];
                next[k + 1] -= root * poly[k];
            }
            poly = std::move(next);
        }
        return poly;
    };
    for (const auto& e : s.g_entries) {
        for (int m = 0; m < e.orders.nb; ++m) theta[e.offset + m] = rng.uniform(-0.5, 0.5);
        const auto den = stable_poly(e.orders.nf);
        for (int m = 1; m <= e.orders.nf; ++m)
            theta[e.offset + e.orders.nb + m - 1] = den[static_cast<std::size_t>(m)];
    }
    for (const auto& e : s.h_diag) {
        for (int m = 0; m < e.orders.nc; ++m) theta[e.offset + m] = rng.uniform(-0.3, 0.3);
        const auto den = stable_poly(e.orders.nd);
        for (int m = 1; m <= e.orders.nd; ++m)
            theta[e.offset + e.orders.nc + m - 1] = den[static_cast<std::size_t>(m)];
    }
    for (const auto& e : s.h_off)
        for (int m = 0; m < e.nh; ++m) theta[e.offset + m] = rng.uniform(-0.3, 0.3);
    return theta;
}

} // namespace

Eigen::MatrixXd predict_errors(const ModelStructure& structure, const Eigen::VectorXd& theta,
                               const SignalRecord& data) {
    return predict_impl(structure, theta, data, false).eps;
}

double criterion_wls(const Eigen::MatrixXd& eps, const Eigen::MatrixXd& W) {
    if (W.rows() != eps.cols() || W.cols() != eps.cols())
        throw Error("weight matrix dimension mismatch");
    if (!W.isApprox(W.transpose(), 1e-12)) throw Error("weight matrix must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(W);
    if (llt.info() != Eigen::Success) throw Error("weight matrix must be positive definite");
    return (eps * W).cwiseProduct(eps).sum() / static_cast<double>(eps.rows());
}

double criterion_ml_det(const Eigen::MatrixXd& eps) {
    const Eigen::Index N = eps.rows();
    const Eigen::MatrixXd R = eps.transpose() * eps / static_cast<double>(N);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (hi > 0.0 && lo < 1e-12 * hi)
        throw DegenerateResidualError("residual sample covariance is singular");
    return es.eigenvalues().prod();
}

double criterion_value(const ModelStructure& structure, const Eigen::VectorXd& theta,
                       const SignalRecord& data, const EstimateOptions& options) {
    return eval_value(structure, theta, data, options);
}

Eigen::VectorXd criterion_gradient(const ModelStructure& structure, const Eigen::VectorXd& theta,
                                   const SignalRecord& data, const EstimateOptions& options) {
    const CriterionEval ev = eval_with_grad(structure, theta, data, options);
    if (!std::isfinite(ev.value))
        throw DomainViolationError("criterion gradient requested outside the admissible set");
    return ev.grad;
}

EstimationResult estimate(const ModelStructure& structure, const SignalRecord& data,
                          const EstimateOptions& options) {
    if (data.N < 10 * std::max(1, structure.theta_dim))
        throw Error("data too short: need at least 10 samples per parameter");

    const int nstarts = std::max(1, options.starts);
    std::vector<Eigen::VectorXd> inits;
    inits.reserve(static_cast<std::size_t>(nstarts));
    for (int st = 0; st < nstarts; ++st) {
        if (st == 0) {
            if (options.init) {
                if (options.init->size() != structure.theta_dim)
                    throw Error("init vector dimension mismatch");
                inits.push_back(*options.init);
            } else {
                inits.push_back(Eigen::VectorXd::Zero(structure.theta_dim));
            }
            continue;
        }
        Rng rng(derive_seed(options.seed, 0xE57u, static_cast<std::uint64_t>(st)));
        Eigen::VectorXd theta;
        for (int attempt = 0; attempt < 32; ++attempt) {
            theta = random_start(structure, rng);
            if (std::isfinite(eval_value(structure, theta, data, options))) break;
        }
        inits.push_back(theta);
    }

    std::vector<LocalResult> results(static_cast<std::size_t>(nstarts));
    const int hw = options.threads > 0 ? options.threads
                                       : static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 1 || nstarts == 1) {
        for (int st = 0; st < nstarts; ++st)
            results[static_cast<std::size_t>(st)] =
                bfgs_minimize(structure, data, options, inits[static_cast<std::size_t>(st)]);
    } else {
        std::vector<std::future<void>> futs;
        std::atomic<int> next{0};
        const int workers = std::min(hw, nstarts);
        for (int wkr = 0; wkr < workers; ++wkr)
            futs.push_back(std::async(std::launch::async, [&]() {
                for (int st = next.fetch_add(1); st < nstarts; st = next.fetch_add(1))
                    results[static_cast<std::size_t>(st)] =
                        bfgs_minimize(structure, data, options, inits[static_cast<std::size_t>(st)]);
            }));
        for (auto& f : futs) f.get();
    }

    int best = -1;
    for (int st = 0; st < nstarts; ++st) {
        const auto& r = results[static_cast<std::size_t>(st)];
        if (!std::isfinite(r.value)) continue;
        if (best < 0 || r.value < results[static_cast<std::size_t>(best)].value) best = st;
    }
    if (best < 0) throw Error("estimation failed: all starts diverged");

    const LocalResult& win = results[static_cast<std::size_t>(best)];
    EstimationResult out;
    out.theta = win.theta;
    out.criterion_value = win.value;
    out.best_start = best;
    out.iterations = win.iterations;
    out.gradient_norm = win.grad_norm;
    out.residuals = predict_errors(structure, out.theta, data);
    out.lambda_hat =
        out.residuals.transpose() * out.residuals / static_cast<double>(out.residuals.rows());
    for (int st = 0; st < nstarts; ++st) {
        const auto& r = results[static_cast<std::size_t>(st)];
        StartDiagnostics d;
        d.start = st;
        d.criterion = r.value;
        d.iterations = r.iterations;
        d.grad_norm = r.grad_norm;
        d.converged = r.converged;
        d.diverged = !std::isfinite(r.value);
        d.trace = r.trace;
        out.starts.push_back(d);
    }
    return out;
}

ModuleEstimate extract_module(const ModelStructure& structure, const Eigen::VectorXd& theta,
                              int j, int i, const FrequencyGrid& grid) {
    for (const auto& e : structure.g_entries) {
        if (structure.y_nodes[static_cast<std::size_t>(e.row)] == j && e.col_node == i) {
            ModuleEstimate me;
            me.tf = structure.g_tf(e, theta);
            me.response = frequency_response(me.tf, grid);
            return me;
        }
    }
    throw Error("module G[" + std::to_string(j + 1) + "," + std::to_string(i + 1) +
                "] is not a free entry of the structure");
}

double ljung_box_statistic(const Eigen::VectorXd& channel, int max_lag) {
    const Eigen::Index N = channel.size();
    const double mean = channel.mean();
    const Eigen::VectorXd x = channel.array() - mean;
    const double denom = x.squaredNorm();
    double stat = 0.0;
    for (int k = 1; k <= max_lag; ++k) {
        double acc = 0.0;
        for (Eigen::Index t = k; t < N; ++t) acc += x[t] * x[t - k];
        const double rho = acc / denom;
        stat += rho * rho / static_cast<double>(N - k);
    }
    return static_cast<double>(N) * (static_cast<double>(N) + 2.0) * stat;
}

} // namespace netident

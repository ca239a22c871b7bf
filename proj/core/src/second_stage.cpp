#include "orthosurv/second_stage.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace orthosurv {

SecondStageConfig default_second_stage_config() {
    SecondStageConfig c;
    c.net.hidden_layers = {64, 64, 64};
    c.net.output_activation = OutputActivation::identity;
    c.net.optimizer = Optimizer::adam;
    c.net.epochs = 30;
    c.net.batch_size = 64;
    c.net.learning_rate = 1e-3;
    c.net.dropout_rate = 0.0;
    return c;
}

double TauModel::predict(std::span<const double> x) const {
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
    return predict(row)(0);
}

Eigen::VectorXd TauModel::predict(const Eigen::MatrixXd& x) const {
    const double bound = rmst_ ? kTauClamp * (horizon_ + 1) : kTauClamp;
    return model_.predict(x).cwiseMax(-bound).cwiseMin(bound);
}

namespace {

struct Block {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
    double f_sum = 0.0;
};

Block gather(const std::vector<PseudoRow>& rows, const std::vector<std::size_t>& idx, std::size_t p) {
    Block b;
    b.x.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(p));
    b.y.resize(static_cast<Eigen::Index>(idx.size()));
    b.w.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& r = rows[idx[k]];
        const auto i = static_cast<Eigen::Index>(k);
        for (std::size_t j = 0; j < p; ++j) b.x(i, static_cast<Eigen::Index>(j)) = r.x[j];
        b.y(i) = r.phi;
        b.w(i) = r.rho;
        b.f_sum += r.f_value;
    }
    return b;
}

}  // namespace

TauModel fit_tau(const std::vector<PseudoRow>& rows, const SecondStageConfig& cfg, int horizon,
                 WeightScheme scheme) {
    if (rows.empty()) throw std::invalid_argument("fit_tau: no pseudo-rows");
    if (std::all_of(rows.begin(), rows.end(), [](const PseudoRow& r) { return r.rho == 0.0; })) {
        throw std::invalid_argument("fit_tau: all weights are zero");
    }
    if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) {
        throw std::invalid_argument("fit_tau: val_fraction must lie in [0,1)");
    }
    const std::size_t p = rows.front().x.size();
    ApproxConfig net = cfg.net;
    net.input_dim = p;
    net.output_activation = OutputActivation::identity;

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t n_val = 0;
    if (cfg.val_fraction > 0.0 && rows.size() >= 2) {
        std::mt19937_64 rng(net.seed ^ 0x5851f42d4c957f2dULL);
        std::shuffle(order.begin(), order.end(), rng);
        n_val = std::clamp<std::size_t>(
            static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(rows.size())), 1,
            rows.size() - 1);
    }
    const std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    const std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());

    const Block tr = gather(rows, train_idx, p);
    TrainOptions opts;
    Block va;
    if (n_val > 0) {
        va = gather(rows, val_idx, p);
        opts.val_inputs = &va.x;
        opts.val_targets = &va.y;
        opts.val_weights = &va.w;
        opts.patience = cfg.patience;
    }
    TrainResult res = train(net, tr.x, tr.y, tr.w, LossKind::weighted_squared, opts);

    TauModel m(std::move(res.model), horizon, scheme);
    m.f_sum = tr.f_sum + va.f_sum;
    const auto normalize = [](double mean_loss, std::size_t n, double f_sum) {
        return f_sum > 0.0 ? mean_loss * static_cast<double>(n) / f_sum : mean_loss;
    };
    for (double v : res.loss_trace) m.train_trace.push_back(normalize(v, train_idx.size(), tr.f_sum));
    for (double v : res.val_trace) m.val_trace.push_back(normalize(v, val_idx.size(), va.f_sum));
    m.best_epoch = res.best_epoch;
    return m;
}

double plugin_tau(const NuisanceSource& src, std::span<const double> x, int t) {
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
    return plugin_tau(src, row, t)(0);
}

Eigen::VectorXd plugin_tau(const NuisanceSource& src, const Eigen::MatrixXd& x, int t) {
    if (t < 0 || t > src.t_max()) throw std::invalid_argument("plugin_tau: t outside grid");
    const Eigen::MatrixXd h1 = src.hazards(x, 1, HazardKind::s);
    const Eigen::MatrixXd h0 = src.hazards(x, 0, HazardKind::s);
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double s1 = 1.0, s0 = 1.0;
        for (int k = 0; k <= t; ++k) {
            s1 *= 1.0 - h1(i, k);
            s0 *= 1.0 - h0(i, k);
        }
        out(i) = s1 - s0;
    }
    return out;
}

PseudoRowSet build_rmst_rows(const Dataset& d, const std::vector<NuisanceAtPoint>& evaluated,
                             WeightScheme scheme, int h, const PseudoRowOptions& opts) {
    if (evaluated.size() != d.size()) {
        throw std::invalid_argument("one nuisance evaluation per row is required");
    }
    if (h < 0 || h > d.t_max()) throw std::invalid_argument("RMST horizon outside grid");
    PseudoRowSet out;
    out.rows.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& obs = d[i];
        const auto& nap = evaluated[i];
        const TildeEta e = tilde_eta(nap, h);
        const WeightPartials wp = weight_partials(scheme, e);
        PseudoRow row;
        row.x = obs.x;
        row.f_value = wp.f_value;
        row.xi_s = xi_s(obs, nap, h);
        row.xi_g = xi_g(obs, nap, h - 1);
        row.raw_rho = rho(obs, nap, e, wp, h);
        row.rho = guard_rho(row.raw_rho, row.f_value, opts, out.report);
        double target = 0.0;
        for (int t = 0; t <= h; ++t) target += phi(obs, nap, e, wp, row.rho, t);
        row.phi = target;
        if (opts.clamp_negative_rho && row.raw_rho < 0.0) row.rho = 0.0;
        out.rows.push_back(std::move(row));
    }
    return out;
}

TauModel fit_rmst(const Dataset& d, const FoldedNuisances& fn, double clip_eps, WeightScheme scheme,
                  int h, const SecondStageConfig& cfg, const PseudoRowOptions& opts) {
    const auto rows = build_rmst_rows(d, fn.evaluate_rows(d, clip_eps), scheme, h, opts);
    TauModel fitted = fit_tau(rows.rows, cfg, h, scheme);
    TauModel m(fitted.approximator(), h, scheme, true);
    m.f_sum = fitted.f_sum;
    m.train_trace = std::move(fitted.train_trace);
    m.val_trace = std::move(fitted.val_trace);
    m.best_epoch = fitted.best_epoch;
    return m;
}

}  // namespace orthosurv

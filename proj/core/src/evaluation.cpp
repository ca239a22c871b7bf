#include "orthosurv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "orthosurv/second_stage.hpp"

namespace orthosurv {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logit_shift(double p, double delta) {
    if (p <= 0.0 || p >= 1.0) return p;
    return sigmoid(std::log(p / (1.0 - p)) + delta);
}

std::vector<double> row_of(const Eigen::MatrixXd& x, Eigen::Index i) {
    std::vector<double> r(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) r[static_cast<std::size_t>(j)] = x(i, j);
    return r;
}

double z_score(double mean, double se) {
    if (se > 0.0) return mean / se;
    return mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

struct Outcome {
    int t_tilde;
    int delta_s;
    int delta_g;
    double prob;
};

// Distribution of (T~, dS, dG) given (x, a) under independent per-step draws,
// with administrative censoring at the grid end.
std::vector<Outcome> outcome_distribution(const NuisanceAtPoint& truth, int a) {
    std::vector<Outcome> out;
    const int t_max = truth.t_max();
    double at_risk = 1.0;
    for (int i = 0; i <= t_max; ++i) {
        const double ls = truth.lambda_s[a][static_cast<std::size_t>(i)];
        const double lg = truth.lambda_g[a][static_cast<std::size_t>(i)];
        out.push_back({i, 1, 0, at_risk * ls * (1.0 - lg)});
        out.push_back({i, 0, 1, at_risk * (1.0 - ls) * lg});
        out.push_back({i, 1, 1, at_risk * ls * lg});
        at_risk *= (1.0 - ls) * (1.0 - lg);
    }
    out.back().prob += 0.0;
    out.push_back({t_max, 0, 1, at_risk});
    return out;
}

}  // namespace

double pehe(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) throw std::invalid_argument("pehe: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("pehe: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - truths[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predictions.size());
}

std::pair<double, double> mean_sd(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

PeheReport summarize_pehe(std::string scheme, std::string setting, std::vector<int> horizons,
                          const std::vector<std::vector<double>>& per_seed) {
    PeheReport r;
    r.scheme = std::move(scheme);
    r.setting = std::move(setting);
    r.horizons = std::move(horizons);
    for (std::size_t h = 0; h < r.horizons.size(); ++h) {
        std::vector<double> vals;
        for (const auto& s : per_seed) vals.push_back(s.at(h));
        const auto [m, sd] = mean_sd(vals);
        r.mean.push_back(m);
        r.sd.push_back(sd);
    }
    return r;
}

std::vector<double> pehe_ratio_over_time(const PeheReport& target, const PeheReport& baseline) {
    if (target.horizons != baseline.horizons || target.mean.size() != baseline.mean.size()) {
        throw std::invalid_argument("pehe_ratio_over_time: horizons differ");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < target.mean.size(); ++i) {
        if (baseline.mean[i] == 0.0) {
            throw std::invalid_argument("pehe_ratio_over_time: zero baseline at horizon " +
                                        std::to_string(baseline.horizons[i]));
        }
        out.push_back(target.mean[i] / baseline.mean[i]);
    }
    return out;
}

double theta_hat(const std::vector<PseudoRow>& rows) {
    double num = 0.0, den = 0.0;
    for (const auto& r : rows) {
        num += r.rho * r.phi;
        den += r.f_value;
    }
    if (den == 0.0) throw std::invalid_argument("theta_hat: weights sum to zero");
    return num / den;
}

MeanZeroReport mean_zero_probe(const Dataset& d, const NuisanceSource& nuisances, int t, int bins,
                               double clip_eps) {
    if (bins < 2) throw std::invalid_argument("mean_zero_probe: bins must be at least 2");
    if (t < 0 || t > d.t_max()) throw std::invalid_argument("mean_zero_probe: t outside grid");
    const auto evaluated = nuisances.evaluate(d.covariates(), clip_eps);

    std::vector<double> x0(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) x0[i] = d[i].x.at(0);
    std::vector<double> sorted = x0;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cuts;
    for (int b = 1; b < bins; ++b) {
        cuts.push_back(sorted[std::min(sorted.size() - 1, sorted.size() * static_cast<std::size_t>(b) /
                                                              static_cast<std::size_t>(bins))]);
    }

    const std::size_t n_cells = static_cast<std::size_t>(bins) * 2;
    std::vector<double> sum_s(n_cells, 0.0), sq_s(n_cells, 0.0), sum_g(n_cells, 0.0),
        sq_g(n_cells, 0.0);
    std::vector<std::size_t> count(n_cells, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto bin = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x0[i]) -
                                                  cuts.begin());
        const std::size_t cell = bin * 2 + static_cast<std::size_t>(d[i].a);
        const double vs = xi_s(d[i], evaluated[i], t);
        const double vg = xi_g(d[i], evaluated[i], t - 1);
        sum_s[cell] += vs;
        sq_s[cell] += vs * vs;
        sum_g[cell] += vg;
        sq_g[cell] += vg * vg;
        ++count[cell];
    }

    MeanZeroReport rep;
    for (std::size_t c = 0; c < n_cells; ++c) {
        MeanZeroCell cell;
        cell.bin = static_cast<int>(c / 2);
        cell.a = static_cast<int>(c % 2);
        cell.n = count[c];
        if (cell.n < 2) {
            ++rep.empty_cells;
            rep.cells.push_back(cell);
            continue;
        }
        const double n = static_cast<double>(cell.n);
        auto stats = [&](double sum, double sq, double& mean, double& se, double& z) {
            mean = sum / n;
            const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
            se = std::sqrt(var / n);
            z = z_score(mean, se);
        };
        stats(sum_s[c], sq_s[c], cell.mean_s, cell.se_s, cell.z_s);
        stats(sum_g[c], sq_g[c], cell.mean_g, cell.se_g, cell.z_g);
        rep.max_abs_z_s = std::max(rep.max_abs_z_s, std::abs(cell.z_s));
        rep.max_abs_z_g = std::max(rep.max_abs_z_g, std::abs(cell.z_g));
        rep.cells.push_back(cell);
    }
    return rep;
}

ShiftedHazards::ShiftedHazards(std::shared_ptr<const NuisanceSource> base, double shift)
    : base_(std::move(base)), shift_(shift) {}

Eigen::MatrixXd ShiftedHazards::hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const {
    return (base_->hazards(x, a, kind).array() + shift_).min(1.0 - 1e-6).max(0.0).matrix();
}

double PerturbationDirection::Shift::at(std::span<const double> x, double t_frac) const {
    double dot = 0.0;
    for (std::size_t j = 0; j < x.size() && j < w.size(); ++j) dot += w[j] * x[j];
    return c0 + c1 * std::tanh(dot) + ct * t_frac;
}

PerturbationDirection PerturbationDirection::random(std::uint64_t seed, std::size_t p) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto draw = [&] {
        Shift s;
        s.c0 = u(rng);
        s.c1 = u(rng);
        s.ct = u(rng);
        s.w.resize(p);
        for (auto& v : s.w) v = u(rng);
        return s;
    };
    PerturbationDirection d;
    d.pi = draw();
    d.pi.ct = 0.0;
    for (int a = 0; a < 2; ++a) d.s[a] = draw();
    for (int a = 0; a < 2; ++a) d.g[a] = draw();
    return d;
}

PerturbedSource::PerturbedSource(const NuisanceSource& base, PerturbationDirection dir, double eps)
    : base_(base), dir_(std::move(dir)), eps_(eps) {}

Eigen::VectorXd PerturbedSource::propensity(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd p = base_.propensity(x);
    if (eps_ == 0.0) return p;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        p(i) = logit_shift(p(i), eps_ * dir_.pi.at(row_of(x, i), 0.0));
    }
    return p;
}

Eigen::MatrixXd PerturbedSource::hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const {
    Eigen::MatrixXd h = base_.hazards(x, a, kind);
    if (eps_ == 0.0) return h;
    const auto& shift = kind == HazardKind::s ? dir_.s[a] : dir_.g[a];
    const double denom = std::max(1, t_max());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto r = row_of(x, i);
        for (Eigen::Index t = 0; t < h.cols(); ++t) {
            h(i, t) = logit_shift(h(i, t), eps_ * shift.at(r, static_cast<double>(t) / denom));
        }
    }
    return h;
}

Eigen::VectorXd probe_gradient(const Dataset& d, const NuisanceSource& truth,
                               const NuisanceSource& nuisances, int t,
                               const OrthoProbeOptions& opts) {
    if (t < 0 || t > d.t_max()) throw std::invalid_argument("probe: t outside grid");
    const Eigen::MatrixXd x = d.covariates();
    const Eigen::VectorXd tau = plugin_tau(truth, x, t);
    const auto p = static_cast<Eigen::Index>(d.dim());
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
    auto add_basis = [&](Eigen::Index i, double coef) {
        grad(0) += coef;
        for (Eigen::Index j = 0; j < p; ++j) grad(j + 1) += coef * x(i, j);
    };

    if (opts.loss == ProbeLoss::plugin) {
        const Eigen::VectorXd est = plugin_tau(nuisances, x, t);
        for (Eigen::Index i = 0; i < x.rows(); ++i) add_basis(i, -2.0 * (est(i) - tau(i)));
        return grad / static_cast<double>(x.rows());
    }

    const auto est = nuisances.evaluate(x, opts.clip_eps);
    std::vector<NuisanceAtPoint> true_vals;
    if (opts.mode == ProbeMode::exact_conditional) true_vals = truth.evaluate(x, opts.clip_eps);

    double f_sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto& nap = est[i];
        const TildeEta e = tilde_eta(nap, t);
        const WeightPartials wp = weight_partials(opts.scheme, e);
        f_sum += wp.f_value;
        auto residual = [&](const Observation& obs) {
            const double r = rho(obs, nap, e, wp, t);
            return weighted_residual(obs, nap, wp, r, t, tau(ii));
        };
        double expected = 0.0;
        if (opts.mode == ProbeMode::empirical) {
            expected = residual(d[i]);
        } else {
            const double pi_true = true_vals[i].pi;
            Observation obs;
            obs.x = d[i].x;
            for (int a = 0; a < 2; ++a) {
                obs.a = a;
                const double pa = a == 1 ? pi_true : 1.0 - pi_true;
                for (const auto& o : outcome_distribution(true_vals[i], a)) {
                    if (o.prob == 0.0) continue;
                    obs.t_tilde = o.t_tilde;
                    obs.delta_s = o.delta_s;
                    obs.delta_g = o.delta_g;
                    expected += pa * o.prob * residual(obs);
                }
            }
        }
        add_basis(ii, -2.0 * expected);
    }
    return grad / f_sum;
}

OrthoProbeResult orthogonality_probe(const Dataset& d, const NuisanceSource& truth, int t,
                                     std::uint64_t direction_seed,
                                     const std::vector<double>& epsilons,
                                     const OrthoProbeOptions& opts) {
    if (epsilons.size() < 2) throw std::invalid_argument("probe: need at least two epsilons");
    const auto dir = PerturbationDirection::random(direction_seed, d.dim());
    const Eigen::VectorXd base = probe_gradient(d, truth, truth, t, opts);
    OrthoProbeResult res;
    res.epsilons = epsilons;
    for (double eps : epsilons) {
        const PerturbedSource moved(truth, dir, eps);
        res.drift.push_back((probe_gradient(d, truth, moved, t, opts) - base).norm());
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        if (!(epsilons[k] > 0.0) || !(res.drift[k] > 0.0) || !std::isfinite(res.drift[k])) {
            throw std::runtime_error("probe: degenerate regression (zero or non-finite drift)");
        }
        mx += std::log(epsilons[k]);
        my += std::log(res.drift[k]);
    }
    mx /= static_cast<double>(epsilons.size());
    my /= static_cast<double>(epsilons.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        const double dx = std::log(epsilons[k]) - mx;
        sxy += dx * (std::log(res.drift[k]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::runtime_error("probe: degenerate regression (identical epsilons)");
    res.slope = sxy / sxx;
    return res;
}

}  // namespace orthosurv

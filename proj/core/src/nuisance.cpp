#include "orthosurv/nuisance.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace orthosurv {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int indicator(const Observation& r, HazardKind kind) {
    return kind == HazardKind::s ? r.delta_s : r.delta_g;
}

}  // namespace

std::vector<NuisanceAtPoint> NuisanceSource::evaluate(const Eigen::MatrixXd& x,
                                                      double clip_eps) const {
    const Eigen::VectorXd pi = propensity(x);
    std::array<Eigen::MatrixXd, 2> ls{hazards(x, 0, HazardKind::s), hazards(x, 1, HazardKind::s)};
    std::array<Eigen::MatrixXd, 2> lg{hazards(x, 0, HazardKind::g), hazards(x, 1, HazardKind::g)};
    const int steps = t_max() + 1;
    std::vector<NuisanceAtPoint> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::array<std::vector<double>, 2> hs, hg;
        for (int a = 0; a < 2; ++a) {
            hs[a].resize(static_cast<std::size_t>(steps));
            hg[a].resize(static_cast<std::size_t>(steps));
            for (int t = 0; t < steps; ++t) {
                hs[a][static_cast<std::size_t>(t)] = ls[a](i, t);
                hg[a][static_cast<std::size_t>(t)] = lg[a](i, t);
            }
        }
        out.push_back(make_nuisance_at_point(pi(i), std::move(hs), std::move(hg), clip_eps));
    }
    return out;
}

std::size_t hazard_input_dim(std::size_t p, int t_max) {
    return p + 1 + static_cast<std::size_t>(t_max + 1);
}

void hazard_features(std::span<const double> x, int a, int t, int t_max, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    std::copy(x.begin(), x.end(), out.begin());
    out[x.size()] = static_cast<double>(a);
    out[x.size() + 1 + static_cast<std::size_t>(std::clamp(t, 0, t_max))] = 1.0;
}

Eigen::MatrixXd HazardModel::predict(const Eigen::MatrixXd& x, int a) const {
    if (static_cast<std::size_t>(x.cols()) != p_) {
        throw std::invalid_argument("hazard model: covariate dimension mismatch");
    }
    const int steps = t_max_ + 1;
    const std::size_t width = hazard_input_dim(p_, t_max_);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> feats(
        x.rows() * steps, static_cast<Eigen::Index>(width));
    std::vector<double> xi(p_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < p_; ++j) xi[j] = x(i, static_cast<Eigen::Index>(j));
        for (int t = 0; t < steps; ++t) {
            double* row = feats.data() + (i * steps + t) * static_cast<Eigen::Index>(width);
            hazard_features(xi, a, t, t_max_, std::span<double>(row, width));
        }
    }
    const Eigen::VectorXd flat = model_.predict(Eigen::MatrixXd(feats));
    Eigen::MatrixXd out(x.rows(), steps);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (int t = 0; t < steps; ++t) out(i, t) = flat(i * steps + t);
    return out;
}

PersonPeriod expand_person_period(const Dataset& d, HazardKind kind) {
    std::size_t records = 0;
    for (const auto& r : d.rows()) records += static_cast<std::size_t>(r.t_tilde + 1);
    const std::size_t width = hazard_input_dim(d.dim(), d.t_max());
    PersonPeriod pp;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> feats(
        static_cast<Eigen::Index>(records), static_cast<Eigen::Index>(width));
    pp.labels.resize(static_cast<Eigen::Index>(records));
    pp.source_row.reserve(records);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = d[i];
        const int delta = indicator(r, kind);
        for (int j = 0; j <= r.t_tilde; ++j) {
            hazard_features(r.x, r.a, j, d.t_max(),
                            std::span<double>(feats.data() + k * static_cast<Eigen::Index>(width), width));
            pp.labels(k) = (j == r.t_tilde && delta == 1) ? 1.0 : 0.0;
            pp.source_row.push_back(i);
            ++k;
        }
    }
    pp.features = feats;
    return pp;
}

PropensityModel fit_propensity(const Dataset& d, ApproxConfig cfg) {
    std::size_t treated = 0;
    for (const auto& r : d.rows()) treated += r.a == 1 ? 1 : 0;
    if (treated == 0 || treated == d.size()) {
        throw std::invalid_argument("fit_propensity: both treatment arms must be present");
    }
    cfg.input_dim = d.dim();
    cfg.output_activation = OutputActivation::logistic;
    const Eigen::MatrixXd x = d.covariates();
    Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) y(static_cast<Eigen::Index>(i)) = d[i].a;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(y.size());
    return PropensityModel(train(cfg, x, y, w, LossKind::bernoulli_log_likelihood).model);
}

HazardModel fit_hazard(const Dataset& d, HazardKind kind, ApproxConfig cfg) {
    const bool any_event = std::any_of(d.rows().begin(), d.rows().end(),
                                       [&](const Observation& r) { return indicator(r, kind) == 1; });
    if (!any_event) throw std::invalid_argument("fit_hazard: no events of this kind");
    cfg.input_dim = hazard_input_dim(d.dim(), d.t_max());
    cfg.output_activation = OutputActivation::logistic;
    const PersonPeriod pp = expand_person_period(d, kind);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(pp.labels.size());
    auto fitted = train(cfg, pp.features, pp.labels, w, LossKind::bernoulli_log_likelihood);
    return HazardModel(std::move(fitted.model), kind, d.t_max(), d.dim());
}

std::vector<double> survival_curve(const HazardModel& h, std::span<const double> x, int a, int t) {
    if (t < 0 || t > h.t_max()) throw std::invalid_argument("survival_curve: t outside grid");
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
    const Eigen::MatrixXd lam = h.predict(row, a);
    std::vector<double> hz(static_cast<std::size_t>(t + 1));
    for (int i = 0; i <= t; ++i) hz[static_cast<std::size_t>(i)] = lam(0, i);
    return survival_from_hazards(hz);
}

NuisanceConfig default_nuisance_config() {
    NuisanceConfig c;
    c.propensity.hidden_layers = {20, 20, 20};
    c.propensity.output_activation = OutputActivation::logistic;
    c.propensity.optimizer = Optimizer::adam;
    c.propensity.epochs = 10;
    c.propensity.batch_size = 64;
    c.propensity.learning_rate = 1e-3;
    c.propensity.dropout_rate = 0.1;

    c.hazard.hidden_layers = {20, 20, 20};
    c.hazard.output_activation = OutputActivation::logistic;
    c.hazard.optimizer = Optimizer::adam;
    c.hazard.epochs = 40;
    c.hazard.batch_size = 256;
    c.hazard.learning_rate = 1e-3;
    c.hazard.dropout_rate = 0.0;
    return c;
}

NuisanceSet::NuisanceSet(PropensityModel prop, HazardModel s, HazardModel g, double clip_eps)
    : prop_(std::move(prop)), s_(std::move(s)), g_(std::move(g)), clip_eps_(clip_eps) {
    if (s_.t_max() != g_.t_max() || s_.dim() != g_.dim()) {
        throw std::invalid_argument("hazard models disagree on grid or dimension");
    }
}

Eigen::VectorXd NuisanceSet::propensity(const Eigen::MatrixXd& x) const { return prop_.predict(x); }

Eigen::MatrixXd NuisanceSet::hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const {
    return hazard_model(kind).predict(x, a);
}

std::pair<NuisanceAtPoint, TildeEta> NuisanceSet::evaluate_point(std::span<const double> x,
                                                                int t) const {
    if (t < 0 || t > t_max()) throw std::invalid_argument("evaluate: t outside grid");
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
    auto nap = std::move(evaluate(row, clip_eps_).front());
    const TildeEta e = tilde_eta(nap, t);
    return {std::move(nap), e};
}

NuisanceSet fit_nuisance_set(const Dataset& d, const NuisanceConfig& cfg) {
    ApproxConfig pc = cfg.propensity;
    ApproxConfig hc = cfg.hazard;
    pc.seed = mix_seed(cfg.seed, 0, pc.seed);
    auto prop = fit_propensity(d, pc);
    hc.seed = mix_seed(cfg.seed, 1, cfg.hazard.seed);
    auto hs = fit_hazard(d, HazardKind::s, hc);
    hc.seed = mix_seed(cfg.seed, 2, cfg.hazard.seed);
    auto hg = fit_hazard(d, HazardKind::g, hc);
    return NuisanceSet(std::move(prop), std::move(hs), std::move(hg), cfg.clip_eps);
}

FoldedNuisances FoldedNuisances::single(std::shared_ptr<const NuisanceSource> src, std::size_t n) {
    FoldedNuisances f;
    f.fold_of_row.assign(n, 0);
    f.models.push_back(std::move(src));
    return f;
}

std::vector<std::size_t> FoldedNuisances::training_rows(int fold) const {
    std::vector<std::size_t> out;
    if (models.size() <= 1) {
        out.resize(fold_of_row.size());
        std::iota(out.begin(), out.end(), std::size_t{0});
        return out;
    }
    for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
        if (fold_of_row[i] != fold) out.push_back(i);
    }
    return out;
}

std::vector<NuisanceAtPoint> FoldedNuisances::evaluate_rows(const Dataset& d,
                                                            double clip_eps) const {
    if (fold_of_row.size() != d.size()) {
        throw std::invalid_argument("fold assignment does not match dataset size");
    }
    std::vector<NuisanceAtPoint> out(d.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (static_cast<std::size_t>(fold_of_row[i]) == k) idx.push_back(i);
        }
        if (idx.empty()) continue;
        const Eigen::MatrixXd x = d.subset(idx).covariates();
        auto vals = models[k]->evaluate(x, clip_eps);
        for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = std::move(vals[j]);
    }
    return out;
}

std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2 || static_cast<std::size_t>(k) > n) {
        throw std::invalid_argument("fold count out of range");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, 3, 0));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return fold;
}

FoldedNuisances cross_fit(const Dataset& d, const NuisanceConfig& cfg) {
    if (!cfg.crossfit) {
        auto set = std::make_shared<NuisanceSet>(fit_nuisance_set(d, cfg));
        return FoldedNuisances::single(std::move(set), d.size());
    }
    if (cfg.folds < 2 || static_cast<std::size_t>(cfg.folds) * 10 > d.size()) {
        throw std::invalid_argument("cross_fit: folds must satisfy 2 <= K <= n/10 (K = " +
                                    std::to_string(cfg.folds) + ", n = " +
                                    std::to_string(d.size()) + ")");
    }
    FoldedNuisances f;
    f.fold_of_row = make_folds(d.size(), cfg.folds, cfg.seed);
    for (int k = 0; k < cfg.folds; ++k) {
        NuisanceConfig fold_cfg = cfg;
        fold_cfg.seed = mix_seed(cfg.seed, 4, static_cast<std::uint64_t>(k));
        const Dataset train = d.subset(f.training_rows(k));
        f.models.push_back(std::make_shared<NuisanceSet>(fit_nuisance_set(train, fold_cfg)));
    }
    return f;
}

FoldAverage::FoldAverage(std::vector<std::shared_ptr<const NuisanceSource>> models)
    : models_(std::move(models)) {
    if (models_.empty()) throw std::invalid_argument("FoldAverage needs at least one model");
}

Eigen::VectorXd FoldAverage::propensity(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.rows());
    for (const auto& m : models_) acc += m->propensity(x);
    return acc / static_cast<double>(models_.size());
}

Eigen::MatrixXd FoldAverage::hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(x.rows(), t_max() + 1);
    for (const auto& m : models_) acc += m->hazards(x, a, kind);
    return acc / static_cast<double>(models_.size());
}

}  // namespace orthosurv

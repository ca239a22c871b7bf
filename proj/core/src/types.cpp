#include "orthosurv/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace orthosurv {

Dataset::Dataset(std::vector<Observation> rows, int t_max, std::size_t p)
    : rows_(std::move(rows)), t_max_(t_max), p_(p) {
    if (t_max < 0) throw std::invalid_argument("t_max must be non-negative");
}

Eigen::MatrixXd Dataset::covariates() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(p_));
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        for (std::size_t j = 0; j < p_ && j < rows_[i].x.size(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_[i].x[j];
        }
    }
    return x;
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
    std::vector<Observation> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(rows_.at(i));
    return Dataset(std::move(out), t_max_, p_);
}

std::vector<Violation> validate_dataset(const Dataset& d) {
    std::vector<Violation> out;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = d[i];
        if (r.x.size() != d.dim()) {
            out.push_back({i, "covariate dimension " + std::to_string(r.x.size()) + " != " +
                                  std::to_string(d.dim())});
        }
        if (r.a != 0 && r.a != 1) out.push_back({i, "treatment not in {0,1}"});
        if (r.t_tilde < 0) out.push_back({i, "negative time"});
        if (r.t_tilde > d.t_max()) out.push_back({i, "time exceeds grid"});
        if ((r.delta_s != 0 && r.delta_s != 1) || (r.delta_g != 0 && r.delta_g != 1)) {
            out.push_back({i, "indicator not in {0,1}"});
        } else if (r.delta_s == 0 && r.delta_g == 0) {
            out.push_back({i, "no event indicator set"});
        }
    }
    return out;
}

std::vector<double> survival_from_hazards(const std::vector<double>& hazard) {
    std::vector<double> out(hazard.size());
    double s = 1.0;
    for (std::size_t i = 0; i < hazard.size(); ++i) {
        s *= 1.0 - hazard[i];
        out[i] = s;
    }
    return out;
}

NuisanceAtPoint make_nuisance_at_point(double pi,
                                       std::array<std::vector<double>, 2> lambda_s,
                                       std::array<std::vector<double>, 2> lambda_g,
                                       double clip_eps) {
    NuisanceAtPoint nap;
    nap.pi = std::clamp(pi, clip_eps, 1.0 - clip_eps);
    for (int a = 0; a < 2; ++a) {
        nap.s[a] = survival_from_hazards(lambda_s[a]);
        nap.g[a] = survival_from_hazards(lambda_g[a]);
        for (auto& v : nap.s[a]) v = std::max(v, clip_eps);
        for (auto& v : nap.g[a]) v = std::max(v, clip_eps);
    }
    nap.lambda_s = std::move(lambda_s);
    nap.lambda_g = std::move(lambda_g);
    return nap;
}

TildeEta tilde_eta(const NuisanceAtPoint& nap, int t) {
    TildeEta e;
    e.pi = nap.pi;
    e.s1_prev = nap.surv(1, t - 1);
    e.s0_prev = nap.surv(0, t - 1);
    e.g1_prev = nap.cens(1, t - 1);
    e.g0_prev = nap.cens(0, t - 1);
    return e;
}

}  // namespace orthosurv

// Test-side oracles and fixtures. The oracles transcribe the correction
// formulas directly and share no code with the library beyond data types.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosurv/nuisance.hpp"
#include "orthosurv/types.hpp"
#include "orthosurv/weighting.hpp"

namespace testing_support {

using namespace orthosurv;

inline double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Nuisance source from plain lambdas.
class LambdaSource final : public NuisanceSource {
public:
    using PiFn = std::function<double(const std::vector<double>&)>;
    using HazFn = std::function<double(const std::vector<double>&, int a, int t)>;

    LambdaSource(int t_max, std::size_t p, PiFn pi, HazFn ls, HazFn lg)
        : t_max_(t_max), p_(p), pi_(std::move(pi)), ls_(std::move(ls)), lg_(std::move(lg)) {}

    int t_max() const override { return t_max_; }
    std::size_t dim() const override { return p_; }
    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const override {
        Eigen::VectorXd out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = pi_(row(x, i));
        return out;
    }
    Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const override {
        Eigen::MatrixXd out(x.rows(), t_max_ + 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto r = row(x, i);
            for (int t = 0; t <= t_max_; ++t) out(i, t) = kind == HazardKind::s ? ls_(r, a, t) : lg_(r, a, t);
        }
        return out;
    }

    double pi(const std::vector<double>& x) const { return pi_(x); }
    double ls(const std::vector<double>& x, int a, int t) const { return ls_(x, a, t); }
    double lg(const std::vector<double>& x, int a, int t) const { return lg_(x, a, t); }

private:
    static std::vector<double> row(const Eigen::MatrixXd& x, Eigen::Index i) {
        std::vector<double> r(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index j = 0; j < x.cols(); ++j) r[static_cast<std::size_t>(j)] = x(i, j);
        return r;
    }
    int t_max_;
    std::size_t p_;
    PiFn pi_;
    HazFn ls_, lg_;
};

// Sequential sampling from a source, same convention as the generators.
inline Dataset simulate(const LambdaSource& src, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> u;
    std::vector<Observation> rows;
    for (std::size_t i = 0; i < n; ++i) {
        Observation o;
        o.x.resize(src.dim());
        for (auto& v : o.x) v = normal(rng);
        o.a = u(rng) < src.pi(o.x) ? 1 : 0;
        o.t_tilde = src.t_max();
        o.delta_s = 0;
        o.delta_g = 1;
        for (int t = 0; t <= src.t_max(); ++t) {
            const bool ev = u(rng) < src.ls(o.x, o.a, t);
            const bool ce = u(rng) < src.lg(o.x, o.a, t);
            if (ev || ce) {
                o.t_tilde = t;
                o.delta_s = ev;
                o.delta_g = ce;
                break;
            }
        }
        rows.push_back(o);
    }
    return Dataset(std::move(rows), src.t_max(), src.dim());
}

struct ToyPoint {
    double pi;
    std::vector<double> ls[2];
    std::vector<double> lg[2];

    double S(int a, int t) const {
        double s = 1.0;
        for (int i = 0; i <= t; ++i) s *= 1.0 - ls[a][i];
        return s;
    }
    double G(int a, int t) const {
        double g = 1.0;
        for (int i = 0; i <= t; ++i) g *= 1.0 - lg[a][i];
        return g;
    }
    NuisanceAtPoint nap() const {
        return make_nuisance_at_point(pi, {ls[0], ls[1]}, {lg[0], lg[1]}, 1e-12);
    }
};

inline ToyPoint random_point(std::mt19937_64& rng, int t_max) {
    std::uniform_real_distribution<double> h(0.02, 0.5), p(0.05, 0.95);
    ToyPoint tp;
    tp.pi = p(rng);
    for (int a = 0; a < 2; ++a) {
        for (int t = 0; t <= t_max; ++t) {
            tp.ls[a].push_back(h(rng));
            tp.lg[a].push_back(h(rng));
        }
    }
    return tp;
}

inline Observation random_obs(std::mt19937_64& rng, int t_max) {
    std::uniform_int_distribution<int> tt(0, t_max), coin(0, 1), kind(0, 2);
    Observation o;
    o.x = {0.0};
    o.a = coin(rng);
    o.t_tilde = tt(rng);
    const int k = kind(rng);
    o.delta_s = k != 1;
    o.delta_g = k != 0;
    return o;
}

// Direct transcriptions of the correction sums.
inline double oracle_xi_s(const Observation& o, const ToyPoint& p, int t) {
    double sum = 0.0;
    for (int i = 0; i <= t; ++i) {
        const double jump = (o.t_tilde == i && o.delta_s == 1) ? 1.0 : 0.0;
        const double at_risk = o.t_tilde >= i ? 1.0 : 0.0;
        sum += (jump - at_risk * p.ls[o.a][i]) / (p.S(o.a, i) * p.G(o.a, i - 1));
    }
    return sum;
}

inline double oracle_xi_g(const Observation& o, const ToyPoint& p, int tm1) {
    double sum = 0.0;
    for (int i = 0; i <= tm1; ++i) {
        const double jump = (o.t_tilde == i && o.delta_g == 1) ? 1.0 : 0.0;
        const double at_risk = o.t_tilde >= i ? 1.0 : 0.0;
        sum += (jump - at_risk * p.lg[o.a][i]) / (p.S(o.a, i - 1) * p.G(o.a, i));
    }
    return sum;
}

// f from the factor letters of the scheme name.
inline double oracle_f(WeightScheme s, double pi, double s1, double s0, double g1, double g0) {
    const std::string name(scheme_name(s));
    double f = 1.0;
    if (name.find('t') != std::string::npos) f *= pi * (1.0 - pi);
    if (name.find('c') != std::string::npos) f *= g1 * g0;
    if (name.find('s') != std::string::npos) f *= s1 * s0;
    return f;
}

// rho with partials of f by central differences.
inline double oracle_rho(WeightScheme s, const Observation& o, const ToyPoint& p, int t) {
    double v[5] = {p.pi, p.S(1, t - 1), p.S(0, t - 1), p.G(1, t - 1), p.G(0, t - 1)};
    auto f = [&](const double* e) { return oracle_f(s, e[0], e[1], e[2], e[3], e[4]); };
    auto partial = [&](int k) {
        const double h = 1e-6;
        double up[5], dn[5];
        for (int j = 0; j < 5; ++j) up[j] = dn[j] = v[j];
        up[k] += h;
        dn[k] -= h;
        return (f(up) - f(dn)) / (2 * h);
    };
    const int a = o.a;
    const double w = a == 1 ? 1.0 / p.pi : 1.0 / (1.0 - p.pi);
    const double ds = partial(a == 1 ? 1 : 2);
    const double dg = partial(a == 1 ? 3 : 4);
    return f(v) + partial(0) * (a - p.pi) -
           w * (ds * p.S(a, t - 1) * oracle_xi_s(o, p, t - 1) + dg * p.G(a, t - 1) * oracle_xi_g(o, p, t - 1));
}

inline double oracle_phi(WeightScheme s, const Observation& o, const ToyPoint& p, int t, double rho) {
    const double f = oracle_f(s, p.pi, p.S(1, t - 1), p.S(0, t - 1), p.G(1, t - 1), p.G(0, t - 1));
    return p.S(1, t) - p.S(0, t) -
           (o.a - p.pi) * oracle_xi_s(o, p, t) * p.S(o.a, t) * f / (p.pi * (1.0 - p.pi) * rho);
}

inline double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace testing_support

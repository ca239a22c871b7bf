#include "orthosurv/synthetic.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace orthosurv {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double sum_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); }

std::vector<double> row_of(const Eigen::MatrixXd& x, Eigen::Index i) {
    std::vector<double> r(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) r[static_cast<std::size_t>(j)] = x(i, j);
    return r;
}

}  // namespace

Violations violations_for(Setting s) {
    Violations v;
    v.treatment = s == Setting::low_treatment;
    v.censoring = s == Setting::low_censoring;
    v.survival = s == Setting::low_survival;
    return v;
}

std::string_view setting_name(Setting s) {
    switch (s) {
        case Setting::full: return "full";
        case Setting::low_treatment: return "low_treatment";
        case Setting::low_censoring: return "low_censoring";
        case Setting::low_survival: return "low_survival";
    }
    return "full";
}

std::optional<Setting> parse_setting(std::string_view name) {
    for (auto s : {Setting::full, Setting::low_treatment, Setting::low_censoring,
                   Setting::low_survival}) {
        if (setting_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string violations_name(const Violations& v) {
    std::string out;
    auto add = [&](std::string_view part) {
        if (!out.empty()) out += '+';
        out += part;
    };
    if (v.treatment) add("low_treatment");
    if (v.censoring) add("low_censoring");
    if (v.survival) add("low_survival");
    return out.empty() ? "full" : out;
}

std::optional<Violations> parse_violations(std::string_view name) {
    Violations v;
    std::size_t start = 0;
    while (start <= name.size()) {
        const auto end = std::min(name.find('+', start), name.size());
        const auto part = parse_setting(name.substr(start, end - start));
        if (!part) return std::nullopt;
        const Violations p = violations_for(*part);
        v.treatment |= p.treatment;
        v.censoring |= p.censoring;
        v.survival |= p.survival;
        start = end + 1;
    }
    return v;
}

GroundTruth::GroundTruth(int scenario, Violations violations)
    : scenario_(scenario), violations_(violations) {
    if (scenario != 1 && scenario != 2) throw std::invalid_argument("scenario must be 1 or 2");
}

double GroundTruth::pi(std::span<const double> x) const {
    if (scenario_ == 1) {
        return violations_.treatment ? sigmoid(2.0 * x[0])
                                     : 0.5 * sigmoid(x[0]) + 0.2 * sigmoid(-x[0]);
    }
    return violations_.treatment ? sigmoid(3.0 * x[0]) : sigmoid(sum_of(x));
}

double GroundTruth::lambda_s(std::span<const double> x, int a, int t) const {
    if (scenario_ == 1) {
        return violations_.survival ? sigmoid(-a * x[0] / (t + 1.0)) : 0.5 * sigmoid(x[0] - t);
    }
    const double u = sum_of(x);
    double z = t <= 10 ? -0.5 * u * u : 10.0 * u * u;
    if (violations_.survival) z -= a * (0.5 + (u >= 0.0 ? 1.0 : 0.0));
    return 0.1 * sigmoid(z);
}

double GroundTruth::lambda_g(std::span<const double> x, int a, int t) const {
    if (scenario_ == 1) {
        return violations_.censoring ? sigmoid(1.5 * (x[0] + t)) : 0.5 * sigmoid(x[0] + t);
    }
    if (!violations_.censoring) return 0.0;
    return 0.1 * sigmoid(10.0 * sum_of(x) + a * t);
}

double GroundTruth::survival(std::span<const double> x, int a, int t) const {
    double s = 1.0;
    for (int i = 0; i <= t; ++i) s *= 1.0 - lambda_s(x, a, i);
    return s;
}

double GroundTruth::censoring_survival(std::span<const double> x, int a, int t) const {
    double g = 1.0;
    for (int i = 0; i <= t; ++i) g *= 1.0 - lambda_g(x, a, i);
    return g;
}

double GroundTruth::tau(std::span<const double> x, int t) const {
    if (t < 0 || t > t_max()) throw std::invalid_argument("tau: t outside grid");
    return survival(x, 1, t) - survival(x, 0, t);
}

Eigen::VectorXd GroundTruth::propensity(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = pi(row_of(x, i));
    return out;
}

Eigen::MatrixXd GroundTruth::hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const {
    Eigen::MatrixXd out(x.rows(), t_max() + 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto r = row_of(x, i);
        for (int t = 0; t <= t_max(); ++t) {
            out(i, t) = kind == HazardKind::s ? lambda_s(r, a, t) : lambda_g(r, a, t);
        }
    }
    return out;
}

Simulation generate(const ScenarioSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("generate: n must be at least 1");
    GroundTruth truth(spec.scenario, spec.violations);
    const int t_max = truth.t_max();
    const std::size_t p = truth.dim();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<Observation> rows;
    rows.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Observation r;
        r.x.resize(p);
        for (auto& v : r.x) v = normal(rng);
        r.a = unif(rng) < truth.pi(r.x) ? 1 : 0;
        r.t_tilde = t_max;
        r.delta_s = 0;
        r.delta_g = 1;
        for (int t = 0; t <= t_max; ++t) {
            const bool event = unif(rng) < truth.lambda_s(r.x, r.a, t);
            const bool censored = unif(rng) < truth.lambda_g(r.x, r.a, t);
            if (event || censored) {
                r.t_tilde = t;
                r.delta_s = event ? 1 : 0;
                r.delta_g = censored ? 1 : 0;
                break;
            }
        }
        rows.push_back(std::move(r));
    }
    return Simulation{Dataset(std::move(rows), t_max, p), truth};
}

double true_cate(const GroundTruth& gt, std::span<const double> x, int t) { return gt.tau(x, t); }

}  // namespace orthosurv

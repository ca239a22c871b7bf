#include "orthosurv/orthogonal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace orthosurv {

namespace {

void check_horizon(const NuisanceAtPoint& nap, int t) {
    if (t > nap.t_max()) {
        throw std::invalid_argument("horizon " + std::to_string(t) + " exceeds grid end " +
                                    std::to_string(nap.t_max()));
    }
}

double inverse_propensity(int a, double pi) { return a == 1 ? 1.0 / pi : 1.0 / (1.0 - pi); }

// Correction term of phi before dividing by rho: (A - pi) xi_S S_t(A) f / (pi (1 - pi)).
double correction_numerator(const Observation& obs, const NuisanceAtPoint& nap, double f, int t) {
    const double pi = nap.pi;
    return (obs.a - pi) * xi_s(obs, nap, t) * nap.surv(obs.a, t) * f / (pi * (1.0 - pi));
}

}  // namespace

double xi_s(const Observation& obs, const NuisanceAtPoint& nap, int t) {
    check_horizon(nap, t);
    const int a = obs.a;
    double sum = 0.0;
    for (int i = 0; i <= t; ++i) {
        if (obs.t_tilde < i) break;
        const double jump = (obs.t_tilde == i && obs.delta_s == 1) ? 1.0 : 0.0;
        sum += (jump - nap.lambda_s[a][static_cast<std::size_t>(i)]) /
               (nap.surv(a, i) * nap.cens(a, i - 1));
    }
    return sum;
}

double xi_g(const Observation& obs, const NuisanceAtPoint& nap, int t_minus_1) {
    check_horizon(nap, t_minus_1);
    const int a = obs.a;
    double sum = 0.0;
    for (int i = 0; i <= t_minus_1; ++i) {
        if (obs.t_tilde < i) break;
        const double jump = (obs.t_tilde == i && obs.delta_g == 1) ? 1.0 : 0.0;
        sum += (jump - nap.lambda_g[a][static_cast<std::size_t>(i)]) /
               (nap.surv(a, i - 1) * nap.cens(a, i));
    }
    return sum;
}

double rho(const Observation& obs, const NuisanceAtPoint& nap, const TildeEta& e,
           const WeightPartials& wp, int t) {
    const int a = obs.a;
    const double centered = a - e.pi;
    double value = wp.treatment ? wp.rest * (centered * centered) : wp.f_value + wp.d_pi * centered;
    const double d_s = a == 1 ? wp.d_s1 : wp.d_s0;
    const double d_g = a == 1 ? wp.d_g1 : wp.d_g0;
    if (d_s == 0.0 && d_g == 0.0) return value;
    const double s_prev = a == 1 ? e.s1_prev : e.s0_prev;
    const double g_prev = a == 1 ? e.g1_prev : e.g0_prev;
    double inner = 0.0;
    if (d_s != 0.0) inner += d_s * s_prev * xi_s(obs, nap, t - 1);
    if (d_g != 0.0) inner += d_g * g_prev * xi_g(obs, nap, t - 1);
    return value - inverse_propensity(a, e.pi) * inner;
}

double phi(const Observation& obs, const NuisanceAtPoint& nap, const TildeEta& /*e*/,
           const WeightPartials& wp, double rho_value, int t) {
    return nap.surv(1, t) - nap.surv(0, t) -
           correction_numerator(obs, nap, wp.f_value, t) / rho_value;
}

double weighted_residual(const Observation& obs, const NuisanceAtPoint& nap,
                         const WeightPartials& wp, double rho_value, int t, double g) {
    return rho_value * (nap.surv(1, t) - nap.surv(0, t) - g) -
           correction_numerator(obs, nap, wp.f_value, t);
}

double guard_rho(double raw, double f_value, const PseudoRowOptions& opts, GuardReport& report) {
    if (raw < 0.0) ++report.n_negative_rho;
    const double floor = opts.rho_guard * std::abs(f_value);
    if (std::abs(raw) < floor) {
        ++report.n_guarded;
        return raw < 0.0 ? -floor : floor;
    }
    return raw;
}

PseudoRow make_pseudo_row(const Observation& obs, const NuisanceAtPoint& nap, WeightScheme scheme,
                          int t, const PseudoRowOptions& opts, GuardReport& report) {
    check_horizon(nap, t);
    const TildeEta e = tilde_eta(nap, t);
    const WeightPartials wp = weight_partials(scheme, e);
    PseudoRow row;
    row.x = obs.x;
    row.f_value = wp.f_value;
    row.xi_s = xi_s(obs, nap, t);
    row.xi_g = xi_g(obs, nap, t - 1);
    row.raw_rho = rho(obs, nap, e, wp, t);
    row.rho = guard_rho(row.raw_rho, row.f_value, opts, report);
    row.phi = phi(obs, nap, e, wp, row.rho, t);
    if (opts.clamp_negative_rho && row.raw_rho < 0.0) row.rho = 0.0;
    return row;
}

PseudoRowSet build_pseudo_rows(const Dataset& d, const std::vector<NuisanceAtPoint>& evaluated,
                               WeightScheme scheme, int t, const PseudoRowOptions& opts) {
    if (evaluated.size() != d.size()) {
        throw std::invalid_argument("one nuisance evaluation per row is required");
    }
    if (t < 0 || t > d.t_max()) throw std::invalid_argument("horizon outside grid");
    PseudoRowSet out;
    out.rows.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.rows.push_back(make_pseudo_row(d[i], evaluated[i], scheme, t, opts, out.report));
    }
    return out;
}

PseudoRowSet build_pseudo_rows(const Dataset& d, const FoldedNuisances& fn, double clip_eps,
                               WeightScheme scheme, int t, const PseudoRowOptions& opts) {
    return build_pseudo_rows(d, fn.evaluate_rows(d, clip_eps), scheme, t, opts);
}

}  // namespace orthosurv

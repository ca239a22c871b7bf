#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "orthosurv/orthogonal.hpp"
#include "orthosurv/synthetic.hpp"

using namespace orthosurv;
using testing_support::ToyPoint;

namespace {

ToyPoint toy() {
    ToyPoint p;
    p.pi = 0.5;
    for (int a = 0; a < 2; ++a) {
        p.ls[a] = {0.2, 0.3};
        p.lg[a] = {0.1, 0.1};
    }
    return p;
}

}  // namespace

TEST_CASE("xi hand values") {
    const auto nap = toy().nap();
    const Observation event_at_1{{0.0}, 1, 1, 1, 0};
    CHECK(xi_s(event_at_1, nap, 1) == doctest::Approx(-0.2 / 0.8 + 0.7 / (0.56 * 0.9)));
    CHECK(xi_s(event_at_1, nap, 1) == doctest::Approx(1.1389).epsilon(1e-4));
    CHECK(xi_g(event_at_1, nap, 0) == doctest::Approx(-0.1111).epsilon(1e-3));
    CHECK(xi_g(event_at_1, nap, -1) == 0.0);

    ToyPoint quiet = toy();
    for (int a = 0; a < 2; ++a) quiet.ls[a] = {0.0, 0.0};
    const Observation late{{0.0}, 0, 1, 0, 1};
    CHECK(xi_s(late, quiet.nap(), 0) == 0.0);

    ToyPoint no_cens = toy();
    for (int a = 0; a < 2; ++a) no_cens.lg[a] = {0.0, 0.0};
    CHECK(xi_g(event_at_1, no_cens.nap(), 1) == 0.0);
}

TEST_CASE("phi hand value under no weighting") {
    // S_t(1) = 0.6, S_t(0) = 0.5 at t = 0.
    ToyPoint p;
    p.pi = 0.5;
    p.ls[1] = {0.4};
    p.ls[0] = {0.5};
    p.lg[1] = p.lg[0] = {0.1};
    const auto nap = p.nap();
    const TildeEta e = tilde_eta(nap, 0);
    const auto wp = weight_partials(WeightScheme::none, e);
    const Observation o{{0.0}, 1, 0, 0, 1};
    const double xs = xi_s(o, nap, 0);
    const double expected = 0.1 - (0.5 * xs * 0.6) / 0.25;
    CHECK(phi(o, nap, e, wp, 1.0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(0.1 - (0.5 * 1.1389 * 0.6) / 0.25 == doctest::Approx(-1.2667).epsilon(1e-4));
}

TEST_CASE("censoring weight hand value") {
    ToyPoint p = toy();
    const auto nap = p.nap();
    const Observation o{{0.0}, 1, 1, 0, 1};
    const TildeEta e{0.5, 1.0, 1.0, 0.8, 0.8};
    const auto wp = weight_partials(WeightScheme::c, e);
    CHECK(wp.f_value == doctest::Approx(0.64));
    const double xg = xi_g(o, nap, 0);
    CHECK(rho(o, nap, e, wp, 1) == doctest::Approx(0.64 * (1.0 - 2.0 * xg)));
    CHECK(0.64 * (1.0 - 2.0 * 0.1) == doctest::Approx(0.512));
}

TEST_CASE("library matches the oracle for every scheme") {
    std::mt19937_64 rng(99);
    const int t_max = 5;
    for (int rep = 0; rep < 300; ++rep) {
        const ToyPoint p = testing_support::random_point(rng, t_max);
        const Observation o = testing_support::random_obs(rng, t_max);
        const auto nap = p.nap();
        const int t = static_cast<int>(rng() % (t_max + 1));
        CHECK(xi_s(o, nap, t) == doctest::Approx(testing_support::oracle_xi_s(o, p, t)).epsilon(1e-10));
        CHECK(xi_g(o, nap, t - 1) == doctest::Approx(testing_support::oracle_xi_g(o, p, t - 1)).epsilon(1e-10));
        for (WeightScheme s : kAllSchemes) {
            const TildeEta e = tilde_eta(nap, t);
            const auto wp = weight_partials(s, e);
            const double r = rho(o, nap, e, wp, t);
            const double ro = testing_support::oracle_rho(s, o, p, t);
            CHECK(r == doctest::Approx(ro).epsilon(1e-6).scale(1.0));
            CHECK(phi(o, nap, e, wp, r, t) ==
                  doctest::Approx(testing_support::oracle_phi(s, o, p, t, r)).epsilon(1e-9));
        }
    }
}

TEST_CASE("reductions to the doubly robust and R-learner forms") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 500; ++rep) {
        const ToyPoint p = testing_support::random_point(rng, 5);
        const Observation o = testing_support::random_obs(rng, 5);
        const auto nap = p.nap();
        const int t = static_cast<int>(rng() % 6);
        const TildeEta e = tilde_eta(nap, t);

        const auto wn = weight_partials(WeightScheme::none, e);
        const double rn = rho(o, nap, e, wn, t);
        CHECK(rn == 1.0);
        const double sa = nap.surv(o.a, t);
        const double y = sa * (1.0 - xi_s(o, nap, t));
        const double dr = nap.surv(1, t) - nap.surv(0, t) + (o.a - nap.pi) / (nap.pi * (1 - nap.pi)) * (y - sa);
        CHECK(std::abs(phi(o, nap, e, wn, rn, t) - dr) <= 1e-10);

        const auto wt = weight_partials(WeightScheme::t, e);
        const double rt = rho(o, nap, e, wt, t);
        CHECK(rt == (o.a - nap.pi) * (o.a - nap.pi));
        // R-loss: rho (phi - g)^2 = ((Y - m) - (A - pi) g)^2 with m = pi S1 + (1-pi) S0.
        const double m = nap.pi * nap.surv(1, t) + (1 - nap.pi) * nap.surv(0, t);
        const double g = 0.3 * (rep % 7) - 0.9;
        const double pt = phi(o, nap, e, wt, rt, t);
        const double lhs = rt * (pt - g) * (pt - g);
        const double rhs = std::pow((y - m) - (o.a - nap.pi) * g, 2);
        CHECK(std::abs(lhs - rhs) <= 1e-10);
    }
}

TEST_CASE("at t = 0 the survival and censoring weights are one") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        const ToyPoint p = testing_support::random_point(rng, 3);
        const Observation o = testing_support::random_obs(rng, 3);
        const auto nap = p.nap();
        const TildeEta e = tilde_eta(nap, 0);
        for (WeightScheme s : {WeightScheme::c, WeightScheme::s, WeightScheme::cs}) {
            CHECK(rho(o, nap, e, weight_partials(s, e), 0) == 1.0);
        }
    }
}

TEST_CASE("guard floors relative to f and keeps the sign") {
    PseudoRowOptions opts;
    GuardReport rep;
    CHECK(guard_rho(0.5, 1.0, opts, rep) == 0.5);
    CHECK(guard_rho(1e-5, 1.0, opts, rep) == doctest::Approx(1e-3));
    CHECK(guard_rho(-1e-5, 1.0, opts, rep) == doctest::Approx(-1e-3));
    CHECK(guard_rho(1e-5, 1e-3, opts, rep) == 1e-5);
    CHECK(rep.n_guarded == 2);
    CHECK(rep.n_negative_rho == 1);
}

TEST_CASE("pseudo rows on simulated data") {
    const auto sim = generate(ScenarioSpec::make(1, Setting::full, 1000, 21));
    const auto fn = FoldedNuisances::single(std::make_shared<GroundTruth>(sim.truth), sim.data.size());

    const auto none = build_pseudo_rows(sim.data, fn, 0.01, WeightScheme::none, 3);
    CHECK(none.report.n_guarded == 0);
    for (const auto& r : none.rows) CHECK(r.rho == 1.0);

    for (int t = 0; t <= 5; ++t) {
        const auto tr = build_pseudo_rows(sim.data, fn, 0.01, WeightScheme::t, t);
        CHECK(tr.report.n_guarded == 0);
        for (const auto& r : tr.rows) {
            CHECK(r.rho > 0.0);
            CHECK(r.rho <= 0.9801 + 1e-15);
        }
    }

    for (WeightScheme s : kAllSchemes) {
        for (int t = 0; t <= 5; ++t) {
            const auto set = build_pseudo_rows(sim.data, fn, 0.01, s, t);
            REQUIRE(set.rows.size() == 1000);
            for (const auto& r : set.rows) {
                CHECK(std::isfinite(r.rho));
                CHECK(std::isfinite(r.phi));
                CHECK(std::isfinite(r.xi_s));
                CHECK(std::isfinite(r.xi_g));
            }
        }
    }
    CHECK_THROWS(build_pseudo_rows(sim.data, fn, 0.01, WeightScheme::none, 6));
}

TEST_CASE("clamping negative weights") {
    PseudoRowOptions opts;
    opts.clamp_negative_rho = true;
    const auto sim = generate(ScenarioSpec::make(1, Setting::full, 2000, 4));
    const auto fn = FoldedNuisances::single(std::make_shared<GroundTruth>(sim.truth), sim.data.size());
    const auto set = build_pseudo_rows(sim.data, fn, 0.01, WeightScheme::c, 4, opts);
    CHECK(set.report.n_negative_rho > 0);
    for (const auto& r : set.rows) CHECK(r.rho >= 0.0);
}

TEST_CASE("weights have conditional mean f under the true nuisances") {
    // Nuisances free of x, so the whole sample is one cell.
    testing_support::LambdaSource src(
        5, 1, [](auto&) { return 0.3; }, [](auto&, int a, int t) { return 0.1 + 0.05 * a + 0.02 * t; },
        [](auto&, int a, int t) { return 0.08 + 0.03 * (1 - a) + 0.01 * t; });
    const Dataset d = testing_support::simulate(src, 100000, 77);
    const auto nap = src.evaluate(Eigen::MatrixXd::Zero(1, 1), 1e-9)[0];
    for (WeightScheme s : kAllSchemes) {
        const int t = 3;
        const TildeEta e = tilde_eta(nap, t);
        const auto wp = weight_partials(s, e);
        double sum = 0.0, sq = 0.0;
        for (const auto& o : d.rows()) {
            const double r = rho(o, nap, e, wp, t);
            sum += r;
            sq += r * r;
        }
        const double n = static_cast<double>(d.size());
        const double mean = sum / n;
        const double se = std::sqrt((sq / n - mean * mean) / n);
        CHECK_MESSAGE(std::abs(mean - wp.f_value) <= 4.0 * se + 1e-12, scheme_name(s));
    }
}

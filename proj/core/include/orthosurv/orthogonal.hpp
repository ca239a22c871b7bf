// orthogonal.hpp
//
// Per-sample ingredients of the orthogonal second-stage loss at horizon t:
//
//   loss(g) = sum_i rho_i (phi_i - g(x_i))^2 / sum_i f_i
//
// xi_s / xi_g are the martingale-type corrections of the event and censoring
// processes, rho the retargeting weight induced by the weighting function and
// phi the pseudo-outcome.
#pragma once

#include <cstddef>
#include <vector>

#include "orthosurv/nuisance.hpp"
#include "orthosurv/types.hpp"
#include "orthosurv/weighting.hpp"

namespace orthosurv {

// sum_{i=0}^{t} [1(T~=i, dS=1) - 1(T~>=i) lS_i] / (S_i G_{i-1}), evaluated on the
// observation's own arm. Returns 0 for t < 0.
double xi_s(const Observation& obs, const NuisanceAtPoint& nap, int t);

// sum_{i=0}^{t_minus_1} [1(T~=i, dG=1) - 1(T~>=i) lG_i] / (S_{i-1} G_i).
double xi_g(const Observation& obs, const NuisanceAtPoint& nap, int t_minus_1);

// Raw retargeting weight (no guard).
double rho(const Observation& obs, const NuisanceAtPoint& nap, const TildeEta& e,
           const WeightPartials& wp, int t);

double phi(const Observation& obs, const NuisanceAtPoint& nap, const TildeEta& e,
           const WeightPartials& wp, double rho_value, int t);

// rho * (phi - g) written without the division by rho.
double weighted_residual(const Observation& obs, const NuisanceAtPoint& nap,
                         const WeightPartials& wp, double rho_value, int t, double g);

struct PseudoRow {
    std::vector<double> x;
    double rho = 1.0;
    double phi = 0.0;
    double f_value = 1.0;
    double xi_s = 0.0;
    double xi_g = 0.0;
    double raw_rho = 1.0;
};

// The guard is relative to the weight: |rho| is floored at rho_guard * f, which
// leaves the loss invariant to rescaling f.
struct PseudoRowOptions {
    double rho_guard = 1e-3;
    bool clamp_negative_rho = false;
};

struct GuardReport {
    std::size_t n_guarded = 0;       // |raw rho| < rho_guard * f, floored sign-preservingly
    std::size_t n_negative_rho = 0;  // raw rho < 0
};

struct PseudoRowSet {
    std::vector<PseudoRow> rows;
    GuardReport report;
};

// Applies the rho guard to one raw value, updating the report.
double guard_rho(double raw, double f_value, const PseudoRowOptions& opts, GuardReport& report);

PseudoRow make_pseudo_row(const Observation& obs, const NuisanceAtPoint& nap, WeightScheme scheme,
                          int t, const PseudoRowOptions& opts, GuardReport& report);

// Rows of d with nuisances already evaluated out-of-fold (one entry per row).
PseudoRowSet build_pseudo_rows(const Dataset& d, const std::vector<NuisanceAtPoint>& evaluated,
                               WeightScheme scheme, int t, const PseudoRowOptions& opts = {});

PseudoRowSet build_pseudo_rows(const Dataset& d, const FoldedNuisances& fn, double clip_eps,
                               WeightScheme scheme, int t, const PseudoRowOptions& opts = {});

}  // namespace orthosurv

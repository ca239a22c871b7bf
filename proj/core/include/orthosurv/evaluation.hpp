// evaluation.hpp
//
// Error metrics for effect estimates and two numerical probes of the theory:
// the conditional mean-zero property of the xi corrections and the
// second-order insensitivity (Neyman orthogonality) of the second-stage loss.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthosurv/nuisance.hpp"
#include "orthosurv/orthogonal.hpp"
#include "orthosurv/weighting.hpp"

namespace orthosurv {

// Mean squared difference (no square root).
double pehe(std::span<const double> predictions, std::span<const double> truths);

struct PeheReport {
    std::string scheme;
    std::string setting;
    std::vector<int> horizons;
    std::vector<double> mean;  // per horizon, across seeds
    std::vector<double> sd;    // population sd (divide by n); 0 for a single seed
};

// per_seed[s][h] is the PEHE of seed s at horizons[h].
PeheReport summarize_pehe(std::string scheme, std::string setting, std::vector<int> horizons,
                          const std::vector<std::vector<double>>& per_seed);

// Mean and population sd (divide by n, so 0 for one value).
std::pair<double, double> mean_sd(std::span<const double> values);

// Elementwise target.mean / baseline.mean.
std::vector<double> pehe_ratio_over_time(const PeheReport& target, const PeheReport& baseline);

// sum rho_i phi_i / sum f_i
double theta_hat(const std::vector<PseudoRow>& rows);

struct MeanZeroCell {
    int bin = 0;
    int a = 0;
    std::size_t n = 0;
    double mean_s = 0.0, se_s = 0.0, z_s = 0.0;
    double mean_g = 0.0, se_g = 0.0, z_g = 0.0;
};

struct MeanZeroReport {
    std::vector<MeanZeroCell> cells;
    std::size_t empty_cells = 0;
    double max_abs_z_s = 0.0;
    double max_abs_z_g = 0.0;
};

// Cells are quantile bins of the first covariate crossed with the arm. xi_S is
// taken at horizon t and xi_G at t - 1.
MeanZeroReport mean_zero_probe(const Dataset& d, const NuisanceSource& nuisances, int t, int bins,
                               double clip_eps = 1e-6);

// Adds a constant to every hazard of both kinds, capped below 1.
class ShiftedHazards final : public NuisanceSource {
public:
    ShiftedHazards(std::shared_ptr<const NuisanceSource> base, double shift);
    int t_max() const override { return base_->t_max(); }
    std::size_t dim() const override { return base_->dim(); }
    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const override { return base_->propensity(x); }
    Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const override;

private:
    std::shared_ptr<const NuisanceSource> base_;
    double shift_;
};

// Smooth bounded logit shifts h(x, t) = c0 + c1 tanh(w . x) + ct t / t_max, one
// per nuisance component (propensity; event and censoring hazard per arm).
struct PerturbationDirection {
    struct Shift {
        double c0 = 0.0, c1 = 0.0, ct = 0.0;
        std::vector<double> w;
        double at(std::span<const double> x, double t_frac) const;
    };
    Shift pi;
    Shift s[2];
    Shift g[2];

    static PerturbationDirection random(std::uint64_t seed, std::size_t p);
};

// base nuisances moved by eps along a direction on the logit scale; eps = 0
// returns the base values unchanged. Zero or unit hazards stay fixed.
class PerturbedSource final : public NuisanceSource {
public:
    PerturbedSource(const NuisanceSource& base, PerturbationDirection dir, double eps);
    int t_max() const override { return base_.t_max(); }
    std::size_t dim() const override { return base_.dim(); }
    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const override;
    Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const override;

private:
    const NuisanceSource& base_;
    PerturbationDirection dir_;
    double eps_;
};

enum class ProbeLoss { orthogonal, plugin };

// exact_conditional integrates (A, T~, dS, dG) given X under the true
// distribution and keeps X from the data; empirical uses the observed rows.
enum class ProbeMode { exact_conditional, empirical };

struct OrthoProbeOptions {
    ProbeLoss loss = ProbeLoss::orthogonal;
    WeightScheme scheme = WeightScheme::none;
    ProbeMode mode = ProbeMode::exact_conditional;
    double clip_eps = 1e-9;
};

struct OrthoProbeResult {
    std::vector<double> epsilons;
    std::vector<double> drift;  // ||grad(eps) - grad(0)||
    double slope = 0.0;         // least-squares slope of log drift on log eps
};

// Gradient of the second-stage loss w.r.t. beta in g(x) = tau_t(x) + beta . (1, x),
// evaluated at beta = 0 with nuisances perturbed by eps.
Eigen::VectorXd probe_gradient(const Dataset& d, const NuisanceSource& truth,
                               const NuisanceSource& nuisances, int t,
                               const OrthoProbeOptions& opts);

OrthoProbeResult orthogonality_probe(const Dataset& d, const NuisanceSource& truth, int t,
                                     std::uint64_t direction_seed,
                                     const std::vector<double>& epsilons,
                                     const OrthoProbeOptions& opts = {});

}  // namespace orthosurv

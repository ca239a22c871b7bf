// nuisance.hpp
//
// Step-one nuisance functions: propensity pi(x), event hazard lambda^S_t(x,a) and
// censoring hazard lambda^G_t(x,a) on the discrete grid, fitted by maximum
// likelihood, plus K-fold cross-fitting.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "orthosurv/approximator.hpp"
#include "orthosurv/types.hpp"

namespace orthosurv {

enum class HazardKind { s, g };

// Anything that yields nuisance values at covariate points: fitted models,
// ground truth of a simulation, or a perturbed version of either.
class NuisanceSource {
public:
    virtual ~NuisanceSource() = default;

    virtual int t_max() const = 0;
    virtual std::size_t dim() const = 0;
    // Raw propensity for every row of x.
    virtual Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const = 0;
    // Raw hazards, rows of x by grid index 0..t_max.
    virtual Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const = 0;

    // Clipped evaluation for every row of x (see make_nuisance_at_point).
    std::vector<NuisanceAtPoint> evaluate(const Eigen::MatrixXd& x, double clip_eps) const;
};

class PropensityModel {
public:
    explicit PropensityModel(Approximator model) : model_(std::move(model)) {}
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return model_.predict(x); }
    const Approximator& approximator() const { return model_; }

private:
    Approximator model_;
};

// One network per kind over (x, a, one-hot time index).
class HazardModel {
public:
    HazardModel(Approximator model, HazardKind kind, int t_max, std::size_t p)
        : model_(std::move(model)), kind_(kind), t_max_(t_max), p_(p) {}

    HazardKind kind() const { return kind_; }
    int t_max() const { return t_max_; }
    std::size_t dim() const { return p_; }
    const Approximator& approximator() const { return model_; }

    // Rows of x by grid index.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x, int a) const;

private:
    Approximator model_;
    HazardKind kind_;
    int t_max_;
    std::size_t p_;
};

// Input width of a hazard network for covariate dimension p.
std::size_t hazard_input_dim(std::size_t p, int t_max);

// Feature row (x, a, one-hot t) written into out (length hazard_input_dim).
void hazard_features(std::span<const double> x, int a, int t, int t_max, std::span<double> out);

struct PersonPeriod {
    Eigen::MatrixXd features;
    Eigen::VectorXd labels;
    std::vector<std::size_t> source_row;
};

// One Bernoulli record per at-risk step j = 0..t_tilde; the label at t_tilde is
// the row's indicator for this kind, earlier labels are 0.
PersonPeriod expand_person_period(const Dataset& d, HazardKind kind);

PropensityModel fit_propensity(const Dataset& d, ApproxConfig cfg);
HazardModel fit_hazard(const Dataset& d, HazardKind kind, ApproxConfig cfg);

// S_0..S_t (or G) for one covariate vector; S_{-1} = 1 is implicit.
std::vector<double> survival_curve(const HazardModel& h, std::span<const double> x, int a, int t);

struct NuisanceConfig {
    ApproxConfig propensity;
    ApproxConfig hazard;
    double clip_eps = 0.01;
    int folds = 2;
    bool crossfit = true;  // false: one model on all rows, used in-sample
    std::uint64_t seed = 0;
};

// Defaults: 20-unit propensity net with dropout 0.1, hazard nets
// with batch 256. Input widths are filled in by the fitting functions.
NuisanceConfig default_nuisance_config();

class NuisanceSet final : public NuisanceSource {
public:
    NuisanceSet(PropensityModel prop, HazardModel s, HazardModel g, double clip_eps);

    int t_max() const override { return s_.t_max(); }
    std::size_t dim() const override { return s_.dim(); }
    double clip_eps() const { return clip_eps_; }
    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const override;
    Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const override;

    const HazardModel& hazard_model(HazardKind kind) const { return kind == HazardKind::s ? s_ : g_; }

    // Clipped values at one point together with the overlap vector at horizon t.
    std::pair<NuisanceAtPoint, TildeEta> evaluate_point(std::span<const double> x, int t) const;

private:
    PropensityModel prop_;
    HazardModel s_;
    HazardModel g_;
    double clip_eps_;
};

NuisanceSet fit_nuisance_set(const Dataset& d, const NuisanceConfig& cfg);

// Row-to-fold assignment plus one nuisance source per fold, where fold k's
// source never saw the rows assigned to fold k.
struct FoldedNuisances {
    std::vector<int> fold_of_row;
    std::vector<std::shared_ptr<const NuisanceSource>> models;

    // One shared source used for every row (ground truth or no cross-fitting).
    static FoldedNuisances single(std::shared_ptr<const NuisanceSource> src, std::size_t n);

    std::size_t folds() const { return models.size(); }
    std::vector<std::size_t> training_rows(int fold) const;

    // Out-of-fold evaluation for the rows of d.
    std::vector<NuisanceAtPoint> evaluate_rows(const Dataset& d, double clip_eps) const;
};

// Deterministic balanced partition of n rows into k folds.
std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed);

FoldedNuisances cross_fit(const Dataset& d, const NuisanceConfig& cfg);

// Fold models averaged for points outside the training data.
class FoldAverage final : public NuisanceSource {
public:
    explicit FoldAverage(std::vector<std::shared_ptr<const NuisanceSource>> models);
    int t_max() const override { return models_.front()->t_max(); }
    std::size_t dim() const override { return models_.front()->dim(); }
    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const override;
    Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const override;

private:
    std::vector<std::shared_ptr<const NuisanceSource>> models_;
};

}  // namespace orthosurv

// second_stage.hpp
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "orthosurv/approximator.hpp"
#include "orthosurv/nuisance.hpp"
#include "orthosurv/orthogonal.hpp"
#include "orthosurv/weighting.hpp"

namespace orthosurv {

struct SecondStageConfig {
    ApproxConfig net;
    double val_fraction = 0.4;  // 0 disables the split and early stopping
    int patience = 5;
};

// 64-unit hidden layers, 30 epochs, batch 64.
SecondStageConfig default_second_stage_config();

inline constexpr double kTauClamp = 1.5;

class TauModel {
public:
    TauModel(Approximator model, int horizon, WeightScheme scheme, bool rmst = false)
        : model_(std::move(model)), horizon_(horizon), scheme_(scheme), rmst_(rmst) {}

    int horizon() const { return horizon_; }
    WeightScheme scheme() const { return scheme_; }
    bool is_rmst() const { return rmst_; }
    const Approximator& approximator() const { return model_; }

    // Clamped to [-kTauClamp, kTauClamp], scaled by (horizon + 1) for RMST models.
    double predict(std::span<const double> x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

    // Training metadata. Losses are normalized as sum rho (phi - g)^2 / sum f.
    double f_sum = 0.0;
    std::vector<double> train_trace;
    std::vector<double> val_trace;
    int best_epoch = -1;

private:
    Approximator model_;
    int horizon_;
    WeightScheme scheme_;
    bool rmst_;
};

// Weighted least squares with weights rho and targets phi.
TauModel fit_tau(const std::vector<PseudoRow>& rows, const SecondStageConfig& cfg, int horizon = 0,
                 WeightScheme scheme = WeightScheme::none);

// S_t(x,1) - S_t(x,0) from the raw hazards of src.
double plugin_tau(const NuisanceSource& src, std::span<const double> x, int t);
Eigen::VectorXd plugin_tau(const NuisanceSource& src, const Eigen::MatrixXd& x, int t);

// Restricted-mean pseudo-rows for horizon h: weight rho(Z, eta_h) and target
//   sum_{t<=h} [S_t(1) - S_t(0) - (A - pi) xi_S(t) S_t(A) f_h / (pi (1 - pi) rho_h)].
PseudoRowSet build_rmst_rows(const Dataset& d, const std::vector<NuisanceAtPoint>& evaluated,
                             WeightScheme scheme, int h, const PseudoRowOptions& opts = {});

TauModel fit_rmst(const Dataset& d, const FoldedNuisances& fn, double clip_eps, WeightScheme scheme,
                  int h, const SecondStageConfig& cfg, const PseudoRowOptions& opts = {});

}  // namespace orthosurv

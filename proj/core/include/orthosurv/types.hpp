// types.hpp
//
// Shared data model: censored discrete-time observations on the grid
// {0, ..., t_max}, nuisance evaluations at a covariate point and the
// five-entry overlap vector the weighting functions depend on.
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace orthosurv {

struct Observation {
    std::vector<double> x;
    int a = 0;
    int t_tilde = 0;
    int delta_s = 0;
    int delta_g = 0;
};

struct Violation {
    std::size_t row = 0;
    std::string message;
};

class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Observation> rows, int t_max, std::size_t p);

    const std::vector<Observation>& rows() const { return rows_; }
    const Observation& operator[](std::size_t i) const { return rows_[i]; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    int t_max() const { return t_max_; }
    std::size_t dim() const { return p_; }

    // n x p covariate matrix.
    Eigen::MatrixXd covariates() const;
    Dataset subset(const std::vector<std::size_t>& idx) const;

private:
    std::vector<Observation> rows_;
    int t_max_ = 0;
    std::size_t p_ = 0;
};

// Every invariant violation with its row index; empty iff the dataset is valid.
std::vector<Violation> validate_dataset(const Dataset& d);

// Cumulative product of (1 - hazard): out[k] = prod_{i<=k} (1 - hazard[i]).
std::vector<double> survival_from_hazards(const std::vector<double>& hazard);

// Nuisance values for one covariate vector, both arms, full grid.
// Survival entries are floored at clip_eps (they appear in denominators);
// hazards are kept raw.
struct NuisanceAtPoint {
    double pi = 0.5;
    std::array<std::vector<double>, 2> lambda_s;
    std::array<std::vector<double>, 2> lambda_g;
    std::array<std::vector<double>, 2> s;
    std::array<std::vector<double>, 2> g;

    int t_max() const { return static_cast<int>(s[0].size()) - 1; }
    // S_t(x, a) with S_{-1} = 1.
    double surv(int a, int t) const { return t < 0 ? 1.0 : s[a][t]; }
    // G_t(x, a) with G_{-1} = 1.
    double cens(int a, int t) const { return t < 0 ? 1.0 : g[a][t]; }
};

// Assembles a NuisanceAtPoint from raw propensity and hazards. pi is clipped to
// [clip_eps, 1 - clip_eps]; survival products are floored at clip_eps.
NuisanceAtPoint make_nuisance_at_point(double pi,
                                       std::array<std::vector<double>, 2> lambda_s,
                                       std::array<std::vector<double>, 2> lambda_g,
                                       double clip_eps);

// (pi, S_{t-1}(x,1), S_{t-1}(x,0), G_{t-1}(x,1), G_{t-1}(x,0))
struct TildeEta {
    double pi = 0.5;
    double s1_prev = 1.0;
    double s0_prev = 1.0;
    double g1_prev = 1.0;
    double g0_prev = 1.0;
};

TildeEta tilde_eta(const NuisanceAtPoint& nap, int t);

}  // namespace orthosurv

// synthetic.hpp
//
// Benchmark data-generating processes with known nuisances and effects.
//
// Scenario 1: x ~ N(0,1), grid {0..5}
//   pi(x) = 0.5 s(x) + 0.2 s(-x)     low treatment overlap:  s(2x)
//   lG_t  = 0.5 s(x + t)             low censoring overlap:  s(1.5 (x + t))
//   lS_t  = 0.5 s(x - t)             low survival overlap:   s(-a x / (t + 1))
//
// Scenario 2: x ~ N(0, I_10), grid {0..30}, u = sum(x)
//   pi(x) = s(u)                     s(3 x_0)
//   lG_t  = 0                        0.1 s(10 u + a t)
//   lS_t  = 0.1 s(-0.5 u^2), t <= 10 0.1 s(-0.5 u^2 - a (0.5 + 1{u >= 0}))
//           0.1 s(10 u^2),   t > 10  0.1 s(10 u^2 - a (0.5 + 1{u >= 0}))
//
// Each violation replaces only its own component; violations compose.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "orthosurv/nuisance.hpp"
#include "orthosurv/types.hpp"

namespace orthosurv {

enum class Setting { full, low_treatment, low_censoring, low_survival };

struct Violations {
    bool treatment = false;
    bool censoring = false;
    bool survival = false;
};

Violations violations_for(Setting s);
std::string_view setting_name(Setting s);
std::optional<Setting> parse_setting(std::string_view name);

// "full", a single setting name, or several joined by '+'.
std::string violations_name(const Violations& v);
std::optional<Violations> parse_violations(std::string_view name);

struct ScenarioSpec {
    int scenario = 1;
    Violations violations;
    std::size_t n = 1000;
    std::uint64_t seed = 0;

    static ScenarioSpec make(int scenario, Setting setting, std::size_t n, std::uint64_t seed) {
        return ScenarioSpec{scenario, violations_for(setting), n, seed};
    }
};

class GroundTruth final : public NuisanceSource {
public:
    GroundTruth(int scenario, Violations violations);

    int scenario() const { return scenario_; }
    const Violations& violations() const { return violations_; }
    int t_max() const override { return scenario_ == 1 ? 5 : 30; }
    std::size_t dim() const override { return scenario_ == 1 ? 1 : 10; }

    double pi(std::span<const double> x) const;
    double lambda_s(std::span<const double> x, int a, int t) const;
    double lambda_g(std::span<const double> x, int a, int t) const;
    // S_t(x,a) and G_t(x,a) as exact products; 1 for t < 0.
    double survival(std::span<const double> x, int a, int t) const;
    double censoring_survival(std::span<const double> x, int a, int t) const;
    double tau(std::span<const double> x, int t) const;

    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const override;
    Eigen::MatrixXd hazards(const Eigen::MatrixXd& x, int a, HazardKind kind) const override;

private:
    int scenario_;
    Violations violations_;
};

struct Simulation {
    Dataset data;
    GroundTruth truth;
};

// Sequential hazard sampling: at each step the event and censoring draws are
// independent; the first step with either ends follow-up (both set on a tie).
// Units with neither by t_max are recorded at t_max with delta_g = 1.
Simulation generate(const ScenarioSpec& spec);

double true_cate(const GroundTruth& gt, std::span<const double> x, int t);

}  // namespace orthosurv

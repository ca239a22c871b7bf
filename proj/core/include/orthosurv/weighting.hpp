// weighting.hpp
//
// Overlap weighting functions f(pi, S1, S0, G1, G0). Each scheme is a product of
// up to three factors:
//   treatment  pi (1 - pi)
//   censoring  G_{t-1}(x,1) G_{t-1}(x,0)
//   survival   S_{t-1}(x,1) S_{t-1}(x,0)
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "orthosurv/types.hpp"

namespace orthosurv {

enum class WeightScheme { none, t, c, s, tc, ts, cs, tcs };

inline constexpr std::array<WeightScheme, 8> kAllSchemes{
    WeightScheme::none, WeightScheme::t,  WeightScheme::c,  WeightScheme::s,
    WeightScheme::tc,   WeightScheme::ts, WeightScheme::cs, WeightScheme::tcs};

struct WeightPartials {
    double f_value = 1.0;
    double d_pi = 0.0;
    double d_s1 = 0.0;
    double d_s0 = 0.0;
    double d_g1 = 0.0;
    double d_g0 = 0.0;
    // Product of the censoring and survival factors; with the treatment factor
    // present, f + d_pi (A - pi) equals rest * (A - pi)^2 for binary A.
    bool treatment = false;
    double rest = 1.0;
};

bool uses_treatment(WeightScheme s);
bool uses_censoring(WeightScheme s);
bool uses_survival(WeightScheme s);

double weight(WeightScheme scheme, const TildeEta& e);
WeightPartials weight_partials(WeightScheme scheme, const TildeEta& e);

// "none","t","c","s","tc","ts","cs","tcs"
std::string_view scheme_name(WeightScheme s);
std::optional<WeightScheme> parse_scheme(std::string_view name);

}  // namespace orthosurv

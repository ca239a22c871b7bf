#include "orthosurv/weighting.hpp"

namespace orthosurv {

bool uses_treatment(WeightScheme s) {
    return s == WeightScheme::t || s == WeightScheme::tc || s == WeightScheme::ts ||
           s == WeightScheme::tcs;
}

bool uses_censoring(WeightScheme s) {
    return s == WeightScheme::c || s == WeightScheme::tc || s == WeightScheme::cs ||
           s == WeightScheme::tcs;
}

bool uses_survival(WeightScheme s) {
    return s == WeightScheme::s || s == WeightScheme::ts || s == WeightScheme::cs ||
           s == WeightScheme::tcs;
}

double weight(WeightScheme scheme, const TildeEta& e) {
    double f = 1.0;
    if (uses_treatment(scheme)) f *= e.pi * (1.0 - e.pi);
    if (uses_censoring(scheme)) f *= e.g1_prev * e.g0_prev;
    if (uses_survival(scheme)) f *= e.s1_prev * e.s0_prev;
    return f;
}

WeightPartials weight_partials(WeightScheme scheme, const TildeEta& e) {
    const double ft = uses_treatment(scheme) ? e.pi * (1.0 - e.pi) : 1.0;
    const double fc = uses_censoring(scheme) ? e.g1_prev * e.g0_prev : 1.0;
    const double fs = uses_survival(scheme) ? e.s1_prev * e.s0_prev : 1.0;

    WeightPartials p;
    p.f_value = ft * fc * fs;
    p.treatment = uses_treatment(scheme);
    p.rest = fc * fs;
    if (uses_treatment(scheme)) p.d_pi = (1.0 - 2.0 * e.pi) * fc * fs;
    if (uses_censoring(scheme)) {
        p.d_g1 = e.g0_prev * ft * fs;
        p.d_g0 = e.g1_prev * ft * fs;
    }
    if (uses_survival(scheme)) {
        p.d_s1 = e.s0_prev * ft * fc;
        p.d_s0 = e.s1_prev * ft * fc;
    }
    return p;
}

std::string_view scheme_name(WeightScheme s) {
    switch (s) {
        case WeightScheme::none: return "none";
        case WeightScheme::t: return "t";
        case WeightScheme::c: return "c";
        case WeightScheme::s: return "s";
        case WeightScheme::tc: return "tc";
        case WeightScheme::ts: return "ts";
        case WeightScheme::cs: return "cs";
        case WeightScheme::tcs: return "tcs";
    }
    return "none";
}

std::optional<WeightScheme> parse_scheme(std::string_view name) {
    for (auto s : kAllSchemes) {
        if (scheme_name(s) == name) return s;
    }
    return std::nullopt;
}

}  // namespace orthosurv

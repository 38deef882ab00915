#pragma once

#include <cmath>

#include "nemf/model.hpp"

namespace testutil {

/// f == lam everywhere (sigmoid saturated far below its midpoint), b == beta.
inline nemf::ModelSpec constant_rate_spec(double lam, double beta = 0.0) {
    nemf::ModelSpec s;
    s.family_f = nemf::IntensityFamily::sigmoid;
    s.params_f = {lam, -1e3, 1.0};
    s.family_b = nemf::DriftFamily::constant;
    s.params_b = {beta, 0.0, 1.0};
    return s;
}

/// f == 0 (capped family at zero ceiling), b == beta.
inline nemf::ModelSpec silent_spec(double beta = 0.0) {
    nemf::ModelSpec s;
    s.family_f = nemf::IntensityFamily::capped_softplus;
    s.params_f = {0.0, 0.0, 1.0};
    s.family_b = nemf::DriftFamily::constant;
    s.params_b = {beta, 0.0, 1.0};
    return s;
}

/// Three-sigma half width of a binomial proportion.
inline double binom3(double p, double n) {
    return 3.0 * std::sqrt(p * (1.0 - p) / n);
}

}  // namespace testutil

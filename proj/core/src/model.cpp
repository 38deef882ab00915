#include "nemf/model.hpp"

#include <cmath>
#include <stdexcept>

namespace nemf {

namespace {

double logistic(double u) noexcept {
    if (u >= 0.0) {
        return 1.0 / (1.0 + std::exp(-u));
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double softplus(double u) noexcept {
    if (u > 30.0) {
        return u + std::log1p(std::exp(-u));
    }
    return std::log1p(std::exp(u));
}

double sech2(double p) noexcept {
    const double t = std::tanh(p);
    return 1.0 - t * t;
}

}  // namespace

double capped_softplus_peak_slope() {
    // Stationary point of g(p) = (1 - e^{-p}) sech^2(p):
    //   e^{-p} = 2 (1 - e^{-p}) tanh(p).
    // The residual is decreasing on (0, inf) so bisection is safe.
    auto residual = [](double p) { return std::exp(-p) - 2.0 * (1.0 - std::exp(-p)) * std::tanh(p); };
    double lo = 1e-9;
    double hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double p = 0.5 * (lo + hi);
    return (1.0 - std::exp(-p)) * sech2(p);
}

ModelFunctions::ModelFunctions(const ModelSpec& spec) : spec_(spec) {
    const auto& pf = spec_.params_f;
    const auto& pb = spec_.params_b;
    switch (spec_.family_f) {
        case IntensityFamily::sigmoid:
            bounds_.sup_f = pf.f_max;
            bounds_.sup_df = pf.f_max / (4.0 * pf.s);
            bounds_.l1_df = pf.f_max;
            break;
        case IntensityFamily::capped_softplus:
            bounds_.sup_f = pf.f_max;
            bounds_.sup_df = pf.f_max / pf.s * capped_softplus_peak_slope();
            bounds_.l1_df = pf.f_max;
            break;
    }
    switch (spec_.family_b) {
        case DriftFamily::tanh_leak:
            bounds_.sup_b = std::abs(pb.beta);
            bounds_.sup_db = std::abs(pb.beta) / pb.sigma_b;
            break;
        case DriftFamily::constant:
            bounds_.sup_b = std::abs(pb.beta);
            bounds_.sup_db = 0.0;
            break;
    }
}

double ModelFunctions::f(double x) const noexcept {
    const auto& p = spec_.params_f;
    const double u = (x - p.theta) / p.s;
    switch (spec_.family_f) {
        case IntensityFamily::sigmoid:
            return p.f_max * logistic(u);
        case IntensityFamily::capped_softplus:
            return p.f_max * std::tanh(softplus(u));
    }
    return 0.0;
}

double ModelFunctions::df(double x) const noexcept {
    const auto& p = spec_.params_f;
    const double u = (x - p.theta) / p.s;
    switch (spec_.family_f) {
        case IntensityFamily::sigmoid: {
            const double sig = logistic(u);
            return p.f_max * sig * (1.0 - sig) / p.s;
        }
        case IntensityFamily::capped_softplus:
            return p.f_max / p.s * logistic(u) * sech2(softplus(u));
    }
    return 0.0;
}

double ModelFunctions::b(double x) const noexcept {
    const auto& p = spec_.params_b;
    switch (spec_.family_b) {
        case DriftFamily::tanh_leak:
            return p.beta * std::tanh((p.x_rest - x) / p.sigma_b);
        case DriftFamily::constant:
            return p.beta;
    }
    return 0.0;
}

double ModelFunctions::db(double x) const noexcept {
    const auto& p = spec_.params_b;
    switch (spec_.family_b) {
        case DriftFamily::tanh_leak:
            return -p.beta / p.sigma_b * sech2((p.x_rest - x) / p.sigma_b);
        case DriftFamily::constant:
            return 0.0;
    }
    return 0.0;
}

double ModelFunctions::eval(Which which, double x) const noexcept {
    switch (which) {
        case Which::f:
            return f(x);
        case Which::df:
            return df(x);
        case Which::b:
            return b(x);
        case Which::db:
            return db(x);
    }
    return 0.0;
}

ModelFunctions make_model(const ModelSpec& spec) {
    const auto& pf = spec.params_f;
    const auto& pb = spec.params_b;
    if (!std::isfinite(pf.f_max) || !std::isfinite(pf.theta) || !std::isfinite(pb.beta) ||
        !std::isfinite(pb.x_rest)) {
        throw std::invalid_argument("model parameters must be finite");
    }
    // A zero ceiling is only meaningful for the capped family, where it is the
    // silent-network limit.
    if (pf.f_max < 0.0 || (pf.f_max == 0.0 && spec.family_f != IntensityFamily::capped_softplus)) {
        throw std::invalid_argument("f_max must be positive");
    }
    if (!(pf.s > 0.0) || !std::isfinite(pf.s)) {
        throw std::invalid_argument("intensity scale s must be positive");
    }
    if (!(pb.sigma_b > 0.0) || !std::isfinite(pb.sigma_b)) {
        throw std::invalid_argument("drift scale sigma_b must be positive");
    }
    return ModelFunctions(spec);
}

std::string to_string(IntensityFamily family) {
    switch (family) {
        case IntensityFamily::sigmoid:
            return "sigmoid";
        case IntensityFamily::capped_softplus:
            return "capped_softplus";
    }
    return "?";
}

std::string to_string(DriftFamily family) {
    switch (family) {
        case DriftFamily::tanh_leak:
            return "tanh_leak";
        case DriftFamily::constant:
            return "constant";
    }
    return "?";
}

void to_json(nlohmann::json& j, const ModelSpec& spec) {
    j = nlohmann::json{
        {"family_f", to_string(spec.family_f)},
        {"params_f", {{"f_max", spec.params_f.f_max}, {"theta", spec.params_f.theta}, {"s", spec.params_f.s}}},
        {"family_b", to_string(spec.family_b)},
        {"params_b",
         {{"beta", spec.params_b.beta}, {"x_rest", spec.params_b.x_rest}, {"sigma_b", spec.params_b.sigma_b}}},
    };
}

void from_json(const nlohmann::json& j, ModelSpec& spec) {
    const auto ff = j.at("family_f").get<std::string>();
    if (ff == "sigmoid") {
        spec.family_f = IntensityFamily::sigmoid;
    } else if (ff == "capped_softplus") {
        spec.family_f = IntensityFamily::capped_softplus;
    } else {
        throw std::invalid_argument("unknown or unbounded intensity family: " + ff);
    }
    const auto fb = j.at("family_b").get<std::string>();
    if (fb == "tanh_leak") {
        spec.family_b = DriftFamily::tanh_leak;
    } else if (fb == "constant") {
        spec.family_b = DriftFamily::constant;
    } else {
        throw std::invalid_argument("unknown or unbounded drift family: " + fb);
    }
    const auto& pf = j.at("params_f");
    spec.params_f.f_max = pf.at("f_max").get<double>();
    spec.params_f.theta = pf.value("theta", 0.0);
    spec.params_f.s = pf.value("s", 1.0);
    const auto& pb = j.at("params_b");
    spec.params_b.beta = pb.value("beta", 0.0);
    spec.params_b.x_rest = pb.value("x_rest", 0.0);
    spec.params_b.sigma_b = pb.value("sigma_b", 1.0);
}

ModelSpec acceptance_model_spec() {
    ModelSpec spec;
    spec.family_f = IntensityFamily::sigmoid;
    spec.params_f = {1.0, 0.5, 0.5};
    spec.family_b = DriftFamily::tanh_leak;
    spec.params_b = {1.0, 0.0, 1.0};
    return spec;
}

}  // namespace nemf

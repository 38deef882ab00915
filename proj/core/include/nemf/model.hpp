#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace nemf {

enum class IntensityFamily { sigmoid, capped_softplus };
enum class DriftFamily { tanh_leak, constant };

struct IntensityParams {
    double f_max = 1.0;
    double theta = 0.0;
    double s = 1.0;
};

struct DriftParams {
    double beta = 0.0;
    double x_rest = 0.0;
    double sigma_b = 1.0;
};

/// Model description as it appears in configuration files.
struct ModelSpec {
    IntensityFamily family_f = IntensityFamily::sigmoid;
    IntensityParams params_f;
    DriftFamily family_b = DriftFamily::tanh_leak;
    DriftParams params_b;
};

/// Sup-norms of the model primitives. All values are exact for the family.
struct Bounds {
    double sup_f = 0.0;
    double sup_df = 0.0;
    double l1_df = 0.0;
    double sup_b = 0.0;
    double sup_db = 0.0;
};

enum class Which { f, df, b, db };

/// Intensity f and drift b of the integrate-and-fire network.
///
/// Both are bounded C^1 functions; f is nonnegative and nondecreasing.
/// Instances are immutable and cheap to copy, so they can be shared freely
/// between concurrent trials.
class ModelFunctions {
public:
    explicit ModelFunctions(const ModelSpec& spec);

    [[nodiscard]] double f(double x) const noexcept;
    [[nodiscard]] double df(double x) const noexcept;
    [[nodiscard]] double b(double x) const noexcept;
    [[nodiscard]] double db(double x) const noexcept;

    [[nodiscard]] double eval(Which which, double x) const noexcept;

    [[nodiscard]] const Bounds& bounds() const noexcept { return bounds_; }
    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }

private:
    ModelSpec spec_;
    Bounds bounds_;
};

/// Validates `spec` and builds the evaluators. Throws std::invalid_argument
/// on nonpositive scales or unknown/unbounded families.
ModelFunctions make_model(const ModelSpec& spec);

/// Maximum of (1 - e^{-p}) sech^2(p) over p > 0, the normalized peak slope
/// of the capped softplus intensity.
double capped_softplus_peak_slope();

std::string to_string(IntensityFamily family);
std::string to_string(DriftFamily family);

void to_json(nlohmann::json& j, const ModelSpec& spec);
void from_json(const nlohmann::json& j, ModelSpec& spec);

/// Sigmoid intensity with f_max = 1 and tanh_leak drift; the reference model
/// used by the acceptance experiments.
ModelSpec acceptance_model_spec();

}  // namespace nemf

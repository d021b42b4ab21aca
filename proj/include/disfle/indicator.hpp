#pragma once

#include "disfle/cox.hpp"
#include "disfle/step_function.hpp"

#include <map>
#include <string>
#include <vector>

namespace disfle {

/// Disease-free life expectancy curve: values are expected event-free years
/// remaining at each age, restricted to t_max.
struct DisfleCurve {
    std::vector<double> ages;
    std::vector<double> values;
    std::vector<double> lower, upper; // filled when the survival curve has bands
    double t_max = 100.0;
};

/// Restricted conditional expectation E(T - t | T > t) of a step survival
/// curve: the exact integral of S over [t, t_max] divided by S(t), which
/// reduces to the weighted sum over event times when t is an event time.
/// Errors: S(t) = 0 or t >= t_max.
double disfle_at(const StepSurvival& curve, double t, double t_max);

/// disfle_at at age 50 (when below the first event time) and at every event
/// time with positive survival; closes with (t_max, 0).
DisfleCurve disfle_curve(const StepSurvival& curve, double t_max,
                         double start_age = kMinExposureAge);

// --- risk profiles ------------------------------------------------------------

struct RiskProfile {
    enum class Level { lowest, intermediate, highest };
    Level level = Level::lowest;
    char sex = 'F';
    std::vector<std::string> behaviors; // behavior covariates set to category 2

    std::string label() const;
    void validate() const; // behavior count must match the level
};

/// Two Lowest profiles (one per sex) plus six Intermediate (sex x single
/// behavior) and six Highest (sex x behavior pair).
std::vector<RiskProfile> standard_profiles();

struct ProfileCurves {
    RiskProfile profile;
    StepSurvival survival;
    DisfleCurve disfle;
};

/// Predicted survival and Dis-FLE per profile; non-behavior covariates sit
/// at their model reference levels. Bands are the pointwise Wald envelope of
/// the profile linear predictor pushed through the survival identity.
std::vector<ProfileCurves> profile_curves(const CoxModel& model,
                                          const std::vector<RiskProfile>& profiles,
                                          double t_max);

/// Covariate vector realizing a profile under the model's reference levels.
std::vector<double> profile_covariates(const CoxModel& model, const RiskProfile& profile);

/// Survival prediction with the linear-predictor Wald envelope attached.
StepSurvival predict_survival_with_bands(const CoxModel& model,
                                         const std::vector<double>& covariates, double from_age,
                                         double to_age, double level = 0.95);

} // namespace disfle

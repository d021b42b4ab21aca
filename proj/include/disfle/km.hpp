#pragma once

#include "disfle/cohort.hpp"
#include "disfle/step_function.hpp"

#include <map>
#include <string>
#include <vector>

namespace disfle {

/// Product-limit estimate under left truncation and right censoring: the
/// risk set at event age t contains exposures with entry < t <= exit.
/// A stratum with zero events comes back as a flat curve at 1 and is flagged.
struct KmFit {
    StepSurvival curve;
    std::size_t n_exposures = 0;
    std::size_t n_events = 0;
    bool flagged_no_events = false;
};

KmFit fit_km(const std::vector<const Exposure*>& rows);
KmFit fit_km(const ExposureSet& exposures);

/// Sex-stratified (or arbitrarily stratified) fits; the stratum key is
/// "name=value" joined with "," in the order given.
std::map<std::string, KmFit> fit_km_stratified(const ExposureSet& exposures,
                                               const std::vector<std::string>& strata);

/// Attaches pointwise log-log (complementary log) confidence bands from the
/// Greenwood accumulator carried by the fitted curve.
StepSurvival km_confidence(const StepSurvival& curve, double level = 0.95);

/// Two-sided normal quantile for the given central coverage level.
double normal_quantile_two_sided(double level);

} // namespace disfle

#pragma once

#include "disfle/cohort.hpp"
#include "disfle/cox.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace disfle {

/// Deterministic per-subject train/test assignment via a seeded hash; a
/// subject never straddles the split.
struct SplitAssignment {
    double test_fraction = 0.4;
    std::uint64_t seed = 0;

    bool is_test(std::int64_t subject_id) const;
};

SplitAssignment split_train_test(double test_fraction, std::uint64_t seed);
ExposureSet filter_split(const ExposureSet& exposures, const SplitAssignment& split, bool test);

// --- concordance ----------------------------------------------------------------

struct SubjectOutcome {
    std::int64_t id = 0;
    double entry = 0.0;
    double exit = 0.0;
    bool event = false;
    double score = 0.0; // higher score = higher predicted risk
};

/// Harrell's C over comparable pairs under left truncation: an event at age
/// t is compared against subjects at risk at t with a strictly later exit.
/// Tied scores count one half. Throws DataError with zero comparable pairs.
double concordance(const std::vector<SubjectOutcome>& outcomes);

/// Convenience wrapper: scores are per-subject averages of episode linear
/// predictors from the fitted model.
double concordance(const CoxModel& model, const ExposureSet& test_exposures);

std::vector<SubjectOutcome> subject_outcomes(const CoxModel& model,
                                             const ExposureSet& exposures);

// --- risk-group calibration -----------------------------------------------------

struct RiskGroupReport {
    std::vector<double> edges; // interior edges on the linear predictor
    struct Bin {
        std::string label;
        std::size_t count = 0;
        double mean_lp = 0.0;
        StepSurvival observed;  // KM of bin members
        StepSurvival predicted; // exp(-e^{mean lp} baseline)
        double max_gap = 0.0;   // max pointwise |observed - predicted|
    };
    std::vector<Bin> bins;
};

/// Default interior edges from the diagnostics layout.
std::vector<double> default_risk_edges();

RiskGroupReport risk_group_calibration(const CoxModel& model, const ExposureSet& test_exposures,
                                       const std::vector<double>& edges = default_risk_edges());

// --- synthetic cohort generator (the repository's ground-truth oracle) ----------

/// Piecewise-constant log hazard ratio as a function of age.
struct EffectSchedule {
    std::vector<double> breakpoints; // ascending ages
    std::vector<double> log_hr;      // size breakpoints + 1

    double at(double age) const;
    static EffectSchedule constant(double log_hr_value) { return {{}, {log_hr_value}}; }
    static EffectSchedule zero() { return constant(0.0); }
};

struct SyntheticCovariate {
    std::string name;
    std::vector<double> level_probs;           // distribution over levels 0..L-1
    std::vector<EffectSchedule> level_effects; // log HR per level; level 0 must be zero
};

struct SyntheticInteraction {
    std::string term_a, term_b;
    double level_a = 0.0, level_b = 0.0;
    double log_hr = 0.0;
};

/// Pearson correlation planted between the presence indicators of two
/// covariates (drawn jointly, remaining levels conditionally).
struct SyntheticCorrelation {
    std::string term_a, term_b;
    double rho = 0.0;
};

struct PlantedExclusions {
    std::size_t severe_before_window = 0;  // severe event dated 2008-2009
    std::size_t exclusion_condition = 0;   // exclusion code dated 2010-2013
    std::size_t censored_before_window = 0;
};

struct SyntheticConfig {
    std::size_t n = 1000;
    std::vector<SyntheticCovariate> covariates;
    std::vector<SyntheticInteraction> interactions;
    std::vector<SyntheticCorrelation> correlations;
    std::vector<double> hazard_breakpoints; // ages
    std::vector<double> hazard_rates;       // per-year baseline rates, breakpoints + 1
    int birth_year_min = 1915;
    int birth_year_max = 1959;
    double death_share = 0.15; // share of events recorded as deaths
    PlantedExclusions planted;
    std::uint64_t seed = 1;

    static SyntheticConfig from_json_file(const std::string& path);
    void validate() const;
};

struct SyntheticCohort {
    ExposureSet exposures;         // exact ages, analysis population only
    std::vector<Subject> subjects; // pipeline view incl. planted exclusions
    EventDictionary dictionary;
    SyntheticConfig truth; // resolved configuration, the oracle parameters
};

/// Covariates per prevalence, event ages by inversion of the configured
/// piecewise-constant hazard conditional on surviving to entry, and
/// administrative censoring at the observation window end. Per-subject RNG
/// streams keyed by (seed, id) make generation order-independent.
SyntheticCohort generate_synthetic(const SyntheticConfig& config);

/// True cumulative hazard of the configured model for a covariate/level map.
double synthetic_cumulative_hazard(const SyntheticConfig& config,
                                   const std::map<std::string, double>& levels, double from_age,
                                   double to_age);

void write_subjects_csv(const std::string& path, const std::vector<Subject>& subjects,
                        const EventDictionary& dictionary);
void write_dictionary_csv(const std::string& path, const EventDictionary& dictionary);

} // namespace disfle

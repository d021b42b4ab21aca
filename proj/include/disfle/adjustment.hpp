#pragma once

#include "disfle/cohort.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace disfle {

/// External population counts by sex and birth year on a reference date.
/// Optional rows for later reference years drive the year-end censoring of
/// the injected records.
struct AgePyramid {
    struct Key {
        char sex;
        int birth_year;
        auto operator<=>(const Key&) const = default;
    };
    // counts[year][key]: population on January 1st of `year`
    std::map<int, std::map<Key, double>> counts;

    /// CSV columns: sex, birth_year, count, optional year (default 2010).
    static AgePyramid from_csv_file(const std::string& path);
    bool has(int year, char sex, int birth_year) const;
    double get(int year, char sex, int birth_year) const;
};

struct AdjustmentConfig {
    Date reference_date = make_date(2010, 1, 1);
    /// Restores the pre-exclusion cohort size before comparing with the
    /// pyramid; default is the documented ratio 18440022 / 13170355.
    double scaling = 18440022.0 / 13170355.0;
    std::uint64_t seed = 1; // birthdate imputation for injected records
};

/// Exposure set extended with event-free synthetic records so that exposure
/// matches the age pyramid. Only the sex-stratified KM path accepts this
/// type; the Cox pipeline rejects it.
struct AdjustedCohort {
    ExposureSet data;
    // per (sex, birth_year): synthetic records added
    std::map<AgePyramid::Key, std::size_t> added;
    std::size_t total_added = 0;
};

/// Observed cohort sizes per (sex, birth_year) used by the adjustment;
/// derived from subjects present in the exposure set.
std::map<AgePyramid::Key, std::size_t> cohort_counts(const std::vector<Subject>& subjects,
                                                     const ExposureSet& exposures);

/// Injects max(0, pyramid - scaling * observed) event-free records per cell,
/// with half-to-even rounding and a per-sex fractional residual carried
/// across cohorts. Synthetic records enter at the reference date (or age 50
/// if later) and are censored at year ends when later pyramid years call for
/// attrition, otherwise at the window end. Throws if the input already
/// contains synthetic records or a cell is missing from the pyramid.
AdjustedCohort whole_population_adjust(const ExposureSet& exposures,
                                       const std::map<AgePyramid::Key, std::size_t>& observed,
                                       const AgePyramid& pyramid,
                                       const AdjustmentConfig& config = {});

} // namespace disfle

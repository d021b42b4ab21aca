#include "disfle/adjustment.hpp"
#include "disfle/errors.hpp"
#include "disfle/km.hpp"
#include "disfle/validation.hpp"

#include <doctest.h>

#include <cmath>

using namespace disfle;

namespace {

ExposureSet observed_cell(std::size_t n, char sex, double entry, double exit) {
    ExposureSet set;
    set.schema = CovariateSchema::cohort_default();
    for (std::size_t i = 0; i < n; ++i) {
        Exposure e;
        e.subject_id = static_cast<std::int64_t>(i + 1);
        e.entry_age = entry;
        e.exit_age = exit;
        e.event = false;
        e.covariates = {sex == 'M' ? 1.0 : 0.0, 0, 0, 0, 0, 0, 78};
        set.rows.push_back(e);
    }
    return set;
}

AgePyramid one_cell_pyramid(char sex, int birth_year, double count) {
    AgePyramid pyramid;
    pyramid.counts[2010][{sex, birth_year}] = count;
    return pyramid;
}

} // namespace

TEST_CASE("cell arithmetic: 1000 - 1.40 x 500 adds 300 synthetic subjects") {
    const ExposureSet observed = observed_cell(500, 'F', 59.5, 63.5);
    std::map<AgePyramid::Key, std::size_t> counts{{{'F', 1950}, 500}};
    AdjustmentConfig config;
    config.scaling = 1.40;
    const AdjustedCohort adjusted =
        whole_population_adjust(observed, counts, one_cell_pyramid('F', 1950, 1000), config);
    CHECK(adjusted.total_added == 300);
    CHECK(adjusted.added.at({'F', 1950}) == 300);
    CHECK(adjusted.data.rows.size() == 500 + 300);
}

TEST_CASE("saturated cell adds nothing") {
    const ExposureSet observed = observed_cell(500, 'F', 59.5, 63.5);
    std::map<AgePyramid::Key, std::size_t> counts{{{'F', 1950}, 500}};
    AdjustmentConfig config;
    config.scaling = 1.40;
    const AdjustedCohort adjusted =
        whole_population_adjust(observed, counts, one_cell_pyramid('F', 1950, 700.0), config);
    CHECK(adjusted.total_added == 0);
    CHECK(adjusted.data.rows.size() == observed.rows.size());
}

TEST_CASE("missing pyramid cell is fatal; double application rejected") {
    const ExposureSet observed = observed_cell(10, 'M', 59.5, 63.5);
    std::map<AgePyramid::Key, std::size_t> counts{{{'M', 1950}, 10}};
    CHECK_THROWS_AS(
        whole_population_adjust(observed, counts, one_cell_pyramid('F', 1950, 100.0), {}),
        DataError);

    const AdjustedCohort once =
        whole_population_adjust(observed, counts, one_cell_pyramid('M', 1950, 100.0), {});
    CHECK_THROWS_AS(whole_population_adjust(once.data, counts,
                                            one_cell_pyramid('M', 1950, 100.0), {}),
                    DataError);
}

TEST_CASE("synthetic records: event-free, flagged, observed rows untouched") {
    const ExposureSet observed = observed_cell(50, 'F', 59.5, 63.5);
    std::map<AgePyramid::Key, std::size_t> counts{{{'F', 1950}, 50}};
    AdjustmentConfig config;
    config.scaling = 1.0;
    const AdjustedCohort adjusted =
        whole_population_adjust(observed, counts, one_cell_pyramid('F', 1950, 120.0), config);

    std::size_t synthetic = 0;
    for (std::size_t i = 0; i < observed.rows.size(); ++i) {
        CHECK(adjusted.data.rows[i].subject_id == observed.rows[i].subject_id);
        CHECK(adjusted.data.rows[i].entry_age == observed.rows[i].entry_age);
        CHECK_FALSE(adjusted.data.rows[i].synthetic);
    }
    for (const auto& row : adjusted.data.rows)
        if (row.synthetic) {
            ++synthetic;
            CHECK_FALSE(row.event);
            CHECK(row.entry_age >= 50.0);
            CHECK(row.entry_age < row.exit_age);
        }
    CHECK(synthetic == 70);
}

TEST_CASE("fractional counts: half-to-even with a per-sex carried residual") {
    // three cohorts each wanting 10.5 additions: residuals must make the
    // total 31 or 32 with every cell within one of its raw value
    ExposureSet observed;
    observed.schema = CovariateSchema::cohort_default();
    std::map<AgePyramid::Key, std::size_t> counts;
    AgePyramid pyramid;
    std::int64_t id = 1;
    for (int birth_year : {1948, 1949, 1950}) {
        for (int i = 0; i < 10; ++i) {
            Exposure e;
            e.subject_id = id++;
            e.entry_age = 59.0;
            e.exit_age = 63.0;
            e.covariates = {0, 0, 0, 0, 0, 0, 78};
            observed.rows.push_back(e);
        }
        counts[{'F', birth_year}] = 10;
        pyramid.counts[2010][{'F', birth_year}] = 20.5;
    }
    AdjustmentConfig config;
    config.scaling = 1.0;
    const AdjustedCohort adjusted = whole_population_adjust(observed, counts, pyramid, config);
    double raw_total = 3 * 10.5;
    CHECK(std::fabs(static_cast<double>(adjusted.total_added) - raw_total) <= 0.5);
    for (const auto& [key, added] : adjusted.added)
        CHECK(std::fabs(static_cast<double>(added) - 10.5) <= 1.0);
}

TEST_CASE("year-end censoring follows later pyramid years") {
    std::map<AgePyramid::Key, std::size_t> counts{{{'F', 1950}, 0}};
    AgePyramid pyramid;
    pyramid.counts[2010][{'F', 1950}] = 100.0;
    pyramid.counts[2011][{'F', 1950}] = 80.0;
    pyramid.counts[2012][{'F', 1950}] = 60.0;
    AdjustmentConfig config;
    config.scaling = 1.0;

    ExposureSet empty;
    empty.schema = CovariateSchema::cohort_default();
    const AdjustedCohort adjusted = whole_population_adjust(empty, counts, pyramid, config);
    CHECK(adjusted.total_added == 100);

    // at-risk synthetic counts on each January 1st follow the pyramid
    auto at_risk_at = [&](int year) {
        const Date jan1 = make_date(year, 1, 1);
        std::size_t n = 0;
        for (const auto& row : adjusted.data.rows) {
            const Date birth = impute_birth_date(1950, config.seed, row.subject_id);
            const double age = age_at(birth, jan1);
            if (row.entry_age < age && age <= row.exit_age) ++n;
        }
        return n;
    };
    CHECK(at_risk_at(2011) == 80);
    CHECK(at_risk_at(2012) == 60);
    CHECK(at_risk_at(2013) == 60); // no 2013 pyramid row: full exposure onward
}

TEST_CASE("exposure accounting at the reference year") {
    // observed rows alive through 2010; scaling 1: person-years during 2010
    // equal the pyramid count within one subject-year
    const std::size_t n_observed = 40;
    const ExposureSet observed = observed_cell(n_observed, 'F', 59.5, 63.5);
    std::map<AgePyramid::Key, std::size_t> counts{{{'F', 1950}, n_observed}};
    AdjustmentConfig config;
    config.scaling = 1.0;
    const double pyramid_count = 90.0;
    const AdjustedCohort adjusted = whole_population_adjust(
        observed, counts, one_cell_pyramid('F', 1950, pyramid_count), config);

    double person_years = 0.0;
    for (const auto& row : adjusted.data.rows) {
        // each row's overlap with its first exposure year
        const double year_length = 1.0;
        const double start = row.entry_age;
        const double stop = std::min(row.exit_age, start + year_length);
        person_years += std::max(0.0, stop - start);
    }
    CHECK(std::fabs(person_years - pyramid_count) <= 1.0);
}

TEST_CASE("adjusted KM dominates unadjusted KM pointwise") {
    SyntheticConfig gen;
    gen.n = 2000;
    gen.seed = 9;
    gen.hazard_rates = {0.06};
    gen.covariates = {{"sex", {0.5, 0.5}, {EffectSchedule::zero(), EffectSchedule::zero()}}};
    const SyntheticCohort cohort = generate_synthetic(gen);

    std::map<AgePyramid::Key, std::size_t> counts =
        cohort_counts(cohort.subjects, cohort.exposures);
    AgePyramid pyramid;
    for (const auto& [key, n] : counts)
        pyramid.counts[2010][key] = 2.2 * static_cast<double>(n);
    AdjustmentConfig config;
    const AdjustedCohort adjusted =
        whole_population_adjust(cohort.exposures, counts, pyramid, config);
    CHECK(adjusted.total_added > 0);

    const auto before = fit_km_stratified(cohort.exposures, {"sex"});
    const auto after = fit_km_stratified(adjusted.data, {"sex"});
    for (const auto& [stratum, fit] : before) {
        const KmFit& adj = after.at(stratum);
        for (std::size_t i = 0; i < fit.curve.size(); ++i)
            CHECK(adj.curve.at(fit.curve.times[i]) >= fit.curve.values[i] - 1e-12);
    }
}

TEST_CASE("the Cox pipeline rejects adjusted exposure sets") {
    const ExposureSet observed = observed_cell(30, 'F', 59.5, 60.5);
    std::map<AgePyramid::Key, std::size_t> counts{{{'F', 1950}, 30}};
    const AdjustedCohort adjusted =
        whole_population_adjust(observed, counts, one_cell_pyramid('F', 1950, 80.0), {});

    ModelSpec spec;
    TermSpec sex;
    sex.name = "sex";
    sex.age_dependent = false;
    sex.levels = {0, 1};
    sex.level_labels = {"F", "M"};
    spec.terms.push_back(sex);
    spec.interior_knots = {70.0};
    CHECK_THROWS_AS(fit_cox_model(adjusted.data, spec), ConfigError);
}

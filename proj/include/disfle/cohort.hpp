#pragma once

#include "disfle/dates.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace disfle {

enum class Severity { severe_condition, exclusion_condition, death };

Severity parse_severity(const std::string& text);
std::string severity_name(Severity s);

struct DictionaryEntry {
    std::string code;
    std::string description;
    Severity severity;
};

/// Pre-coded event dictionary; every code appearing in a subject history must
/// resolve here.
struct EventDictionary {
    std::vector<DictionaryEntry> entries;

    const DictionaryEntry* find(const std::string& code) const;
    std::vector<std::string> codes_with(Severity s) const;

    /// CSV columns: event_code, description, severity_class.
    static EventDictionary from_csv_file(const std::string& path);
    static EventDictionary from_stream(std::istream& in);
};

struct HistoryEvent {
    Date date;
    std::string code;
};

struct Subject {
    std::int64_t id = 0;
    char sex = 'F'; // 'F' or 'M'
    int birth_year = 0;
    Date birth_date{}; // imputed, within birth_year
    std::string department; // "01".."96"
    int alcohol = 0, obesity = 0, smoking = 0; // categories 0..2
    int immigration = 0, education = 0;        // quartiles 0..3
    std::vector<HistoryEvent> event_history;   // sorted by date
    std::optional<Date> death_date;
    std::optional<Date> censor_date;
};

struct ParseReport {
    struct RowError {
        std::size_t line; // physical line number in the source
        std::string message;
    };
    std::vector<RowError> errors;
    std::size_t rows_read = 0;
    std::size_t rows_rejected = 0;
};

/// Parses the subjects CSV (one row per hospital discharge; rows sharing an
/// id merge into one history, attributes taken from the first row). Rows
/// that fail validation are skipped and reported with their line numbers;
/// a malformed header is fatal.
std::vector<Subject> parse_subjects(std::istream& source, const EventDictionary& dictionary,
                                    ParseReport& report);
std::vector<Subject> parse_subjects_file(const std::string& path,
                                         const EventDictionary& dictionary,
                                         ParseReport& report);

/// Deterministic fictitious birthdate, uniform over the days of birth_year
/// across subjects. Keyed by (seed, id) so the draw is independent of
/// processing order.
Date impute_birth_date(int birth_year, std::uint64_t seed, std::int64_t id_salt);
void impute_birth_dates(std::vector<Subject>& subjects, std::uint64_t seed);

// --- exclusion pipeline ----------------------------------------------------

struct ExclusionCriterion {
    enum class Kind { events, censored_before, ends_before_age };
    std::string name;
    Kind kind = Kind::events;
    std::vector<std::string> codes; // events: codes that trigger the rule
    Date window_start{}, window_end{}; // events: date window, inclusive
    Date cutoff{};                     // censored_before
    double age_cutoff = 0.0;           // ends_before_age
};

struct ExclusionRules {
    std::vector<ExclusionCriterion> criteria;

    /// Declarative JSON config; rule codes are validated against the
    /// dictionary (unknown code -> ConfigError).
    static ExclusionRules from_json_file(const std::string& path,
                                         const EventDictionary& dictionary);

    /// The default pipeline: severe conditions or death observed in
    /// 2008-2009; exclusion conditions in 2008-2013; censored before
    /// 2010-01-01; observation ending before age 50.
    static ExclusionRules standard(const EventDictionary& dictionary);
};

struct ExclusionReport {
    struct Row {
        std::string criterion;
        std::size_t before = 0;
        std::size_t removed = 0;
        std::size_t remaining = 0;
    };
    std::vector<Row> rows;
};

/// Applies criteria in order; a subject removable by several rules counts
/// only under the first. Counts telescope exactly.
std::pair<std::vector<Subject>, ExclusionReport>
apply_exclusions(const std::vector<Subject>& subjects, const ExclusionRules& rules);

// --- exposure construction -------------------------------------------------

struct ObservationWindow {
    Date start; // default 2010-01-01
    Date end;   // default 2013-12-31
    static ObservationWindow standard();
};

struct CovariateSchema {
    std::vector<std::string> names;

    int index(const std::string& name) const; // -1 if missing
    std::size_t size() const { return names.size(); }

    /// sex, alcohol, obesity, smoking, immigration, education, department.
    static CovariateSchema cohort_default();
};

struct Exposure {
    std::int64_t subject_id = 0;
    double entry_age = 0.0;
    double exit_age = 0.0;
    bool event = false;     // severe condition or death at exit
    bool synthetic = false; // injected by the whole-population adjustment
    std::vector<double> covariates; // aligned with the owning set's schema
};

struct ExposureSet {
    CovariateSchema schema;
    std::vector<Exposure> rows;
    std::size_t dropped_degenerate = 0; // exit <= entry, dropped at build time
};

constexpr double kMinExposureAge = 50.0;
constexpr double kMaxExposureAge = 105.0;

/// One exposure interval per subject: entry at the later of the window start
/// and the 50th birthday, exit at the first adverse event, death, censoring
/// or window end. Degenerate intervals are dropped and counted.
ExposureSet build_exposures(const std::vector<Subject>& subjects,
                            const EventDictionary& dictionary,
                            const ObservationWindow& window = ObservationWindow::standard());

// --- descriptive statistics ------------------------------------------------

struct CategoryBlock {
    std::string factor;                 // e.g. "Obesity"
    std::vector<std::string> levels;    // "Category 0", ...
    // counts[level][column], columns = {Female, Male, Entire population}
    std::vector<std::array<std::size_t, 3>> counts;
};

struct DescriptiveStats {
    std::array<std::size_t, 3> n{}; // Female, Male, Entire population
    std::array<double, 3> entry_age_median{}, entry_age_q1{}, entry_age_q3{};
    std::array<double, 3> exposure_median{}, exposure_q1{}, exposure_q3{};
    std::vector<CategoryBlock> categories;

    // presence indicators for behaviors, quartile values for
    // education/immigration; NaN marks an undefined (zero-variance) pair
    std::vector<std::string> correlation_names;
    std::vector<std::vector<double>> correlations;
};

DescriptiveStats descriptive_stats(const std::vector<Subject>& subjects,
                                   const ExposureSet& exposures);

/// Type-7 sample quantile (linear interpolation), q in [0, 1].
double quantile(std::vector<double> sorted_values, double q);

} // namespace disfle

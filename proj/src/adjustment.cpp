#include "disfle/adjustment.hpp"

#include "disfle/csv.hpp"
#include "disfle/errors.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace disfle {

AgePyramid AgePyramid::from_csv_file(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const int c_sex = table.column("sex");
    const int c_year = table.column("birth_year");
    const int c_count = table.column("count");
    const int c_ref = table.column("year"); // optional reference year
    if (c_sex < 0 || c_year < 0 || c_count < 0)
        throw DataError("age pyramid needs columns sex, birth_year, count");
    AgePyramid pyramid;
    for (const auto& row : table.rows) {
        const std::string& sex = row.fields[c_sex];
        if (sex != "F" && sex != "M")
            throw DataError("pyramid sex must be F or M (line " +
                            std::to_string(row.line_number) + ")");
        const int birth_year = std::stoi(row.fields[c_year]);
        const double count = std::stod(row.fields[c_count]);
        if (count < 0) throw DataError("pyramid counts must be non-negative");
        const int year = c_ref >= 0 && !row.fields[c_ref].empty()
                             ? std::stoi(row.fields[c_ref])
                             : 2010;
        const Key key{sex[0], birth_year};
        auto [it, inserted] = pyramid.counts[year].emplace(key, count);
        if (!inserted)
            throw DataError("duplicate pyramid cell: year " + std::to_string(year) + ", sex " +
                            sex + ", birth year " + std::to_string(birth_year));
    }
    return pyramid;
}

bool AgePyramid::has(int year, char sex, int birth_year) const {
    auto it = counts.find(year);
    return it != counts.end() && it->second.count(Key{sex, birth_year}) > 0;
}

double AgePyramid::get(int year, char sex, int birth_year) const {
    return counts.at(year).at(Key{sex, birth_year});
}

std::map<AgePyramid::Key, std::size_t> cohort_counts(const std::vector<Subject>& subjects,
                                                     const ExposureSet& exposures) {
    std::unordered_set<std::int64_t> in_exposures;
    for (const auto& e : exposures.rows) in_exposures.insert(e.subject_id);
    std::map<AgePyramid::Key, std::size_t> out;
    for (const auto& s : subjects)
        if (in_exposures.count(s.id)) ++out[{s.sex, s.birth_year}];
    return out;
}

namespace {

double round_half_even(double x) {
    const double floor_v = std::floor(x);
    const double frac = x - floor_v;
    if (frac < 0.5) return floor_v;
    if (frac > 0.5) return floor_v + 1.0;
    // exact .5: round to the even neighbor
    return std::fmod(floor_v, 2.0) == 0.0 ? floor_v : floor_v + 1.0;
}

} // namespace

AdjustedCohort whole_population_adjust(const ExposureSet& exposures,
                                       const std::map<AgePyramid::Key, std::size_t>& observed,
                                       const AgePyramid& pyramid,
                                       const AdjustmentConfig& config) {
    if (config.scaling < 1.0)
        throw ConfigError("adjustment scaling factor must be at least 1");
    for (const auto& row : exposures.rows)
        if (row.synthetic)
            throw DataError("whole-population adjustment applied twice: input already "
                            "contains synthetic records");

    const int reference_year = to_civil(config.reference_date).year;
    const ObservationWindow window = ObservationWindow::standard();

    AdjustedCohort out;
    out.data = exposures;
    const int sex_index = exposures.schema.index("sex");
    if (sex_index < 0) throw ConfigError("exposure schema lacks a 'sex' covariate");

    // raw additions per cell, then half-to-even rounding with a per-sex
    // residual carried across cohorts in birth-year order
    std::map<AgePyramid::Key, double> raw;
    for (const auto& [key, n_observed] : observed) {
        if (!pyramid.has(reference_year, key.sex, key.birth_year))
            throw DataError("pyramid is missing cell sex " + std::string(1, key.sex) +
                            ", birth year " + std::to_string(key.birth_year));
        const double target = pyramid.get(reference_year, key.sex, key.birth_year);
        raw[key] = std::max(0.0, target - config.scaling * static_cast<double>(n_observed));
    }
    std::map<AgePyramid::Key, std::size_t> additions;
    for (char sex : {'F', 'M'}) {
        double carry = 0.0;
        for (const auto& [key, value] : raw) {
            if (key.sex != sex) continue;
            const double want = value + carry;
            const double rounded = std::max(0.0, round_half_even(want));
            carry = want - rounded;
            additions[key] = static_cast<std::size_t>(rounded);
        }
    }

    std::int64_t next_id = -1;
    for (const auto& [key, n_add] : additions) {
        if (n_add == 0) continue;
        out.added[key] = n_add;
        out.total_added += n_add;

        // year-end censoring targets: keep the synthetic count aligned with
        // the pyramid cohort's next-January count when those years exist
        std::vector<std::pair<int, std::size_t>> keep_after_year; // (year, remaining target)
        const double scaled_observed =
            config.scaling * static_cast<double>(observed.at(key));
        for (int year = reference_year; year < to_civil(window.end).year; ++year) {
            if (!pyramid.has(year + 1, key.sex, key.birth_year)) continue;
            const double next_target =
                std::max(0.0, pyramid.get(year + 1, key.sex, key.birth_year) - scaled_observed);
            keep_after_year.emplace_back(
                year, static_cast<std::size_t>(round_half_even(next_target)));
        }

        for (std::size_t k = 0; k < n_add; ++k) {
            const std::int64_t id = next_id--;
            const Date birth = impute_birth_date(key.birth_year, config.seed, id);
            const double entry =
                std::max(age_at(birth, config.reference_date), kMinExposureAge);

            double exit = std::min(age_at(birth, window.end), kMaxExposureAge);
            for (const auto& [year, remaining] : keep_after_year) {
                if (k < remaining) continue; // this record survives the year end
                const Date year_end = make_date(year, 12, 31);
                const double censor_age = age_at(birth, year_end);
                if (censor_age > entry) {
                    exit = std::min(exit, censor_age);
                    break;
                }
            }
            if (exit <= entry || entry >= kMaxExposureAge)
                continue; // no exposure inside the supported age range

            Exposure record;
            record.subject_id = id;
            record.entry_age = entry;
            record.exit_age = exit;
            record.event = false; // synthetic individuals are assumed healthy
            record.synthetic = true;
            record.covariates.assign(exposures.schema.size(), 0.0);
            record.covariates[static_cast<std::size_t>(sex_index)] =
                key.sex == 'M' ? 1.0 : 0.0;
            out.data.rows.push_back(std::move(record));
        }
    }
    return out;
}

} // namespace disfle

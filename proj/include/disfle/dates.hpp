#pragma once

#include <cstdint>
#include <string>

namespace disfle {

/// Calendar date stored as a day count since 1970-01-01 (proleptic Gregorian).
/// Cheap to compare and subtract; conversions use the civil-calendar
/// algorithms from Howard Hinnant's date writeup.
struct Date {
    std::int32_t days = 0; // since 1970-01-01

    constexpr auto operator<=>(const Date&) const = default;
};

constexpr double kDaysPerYear = 365.25;

bool is_leap_year(int year);
int days_in_year(int year);

/// (year, month, day) -> Date. Throws DataError on out-of-range fields.
Date make_date(int year, unsigned month, unsigned day);

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};
CivilDate to_civil(Date d);

/// Parses "YYYY-MM-DD". Throws DataError on malformed input.
Date parse_date(const std::string& text);
std::string format_date(Date d);

/// Exact age in years: (at - birth) / 365.25 days. Leap handling is folded
/// into the constant so age arithmetic stays reproducible.
inline double age_at(Date birth, Date at) {
    return static_cast<double>(at.days - birth.days) / kDaysPerYear;
}

} // namespace disfle

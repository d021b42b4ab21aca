#include "disfle/dates.hpp"

#include "disfle/errors.hpp"

#include <cstdio>

namespace disfle {

bool is_leap_year(int year) {
    return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
}

int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

namespace {

constexpr unsigned days_in_month(int year, unsigned month) {
    constexpr unsigned table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap_year(year)) return 29;
    return table[month - 1];
}

// days_from_civil / civil_from_days, Hinnant's algorithms.
std::int32_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int32_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int32_t z) {
    z += 719468;
    const std::int32_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {y + (m <= 2), m, d};
}

} // namespace

Date make_date(int year, unsigned month, unsigned day) {
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month))
        throw DataError("invalid calendar date: " + std::to_string(year) + "-" +
                        std::to_string(month) + "-" + std::to_string(day));
    return Date{days_from_civil(year, month, day)};
}

CivilDate to_civil(Date d) { return civil_from_days(d.days); }

Date parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char trailing = '\0';
    if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &trailing) != 3)
        throw DataError("malformed date (expected YYYY-MM-DD): '" + text + "'");
    return make_date(y, m, d);
}

std::string format_date(Date d) {
    const CivilDate c = to_civil(d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

} // namespace disfle

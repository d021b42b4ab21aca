#include "disfle/cohort.hpp"

#include "disfle/csv.hpp"
#include "disfle/errors.hpp"
#include "disfle/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

namespace disfle {

Severity parse_severity(const std::string& text) {
    if (text == "severe_condition") return Severity::severe_condition;
    if (text == "exclusion_condition") return Severity::exclusion_condition;
    if (text == "death") return Severity::death;
    throw DataError("unknown severity class: '" + text + "'");
}

std::string severity_name(Severity s) {
    switch (s) {
    case Severity::severe_condition: return "severe_condition";
    case Severity::exclusion_condition: return "exclusion_condition";
    case Severity::death: return "death";
    }
    return "?";
}

const DictionaryEntry* EventDictionary::find(const std::string& code) const {
    for (const auto& e : entries)
        if (e.code == code) return &e;
    return nullptr;
}

std::vector<std::string> EventDictionary::codes_with(Severity s) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.severity == s) out.push_back(e.code);
    return out;
}

EventDictionary EventDictionary::from_stream(std::istream& in) {
    const csv::Table table = csv::read_stream(in);
    const int c_code = table.column("event_code");
    const int c_desc = table.column("description");
    const int c_sev = table.column("severity_class");
    if (c_code < 0 || c_desc < 0 || c_sev < 0)
        throw DataError("event dictionary needs columns event_code, description, severity_class");
    EventDictionary dict;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        const std::string& code = row.fields.at(c_code);
        if (!seen.insert(code).second)
            throw DataError("duplicate event code in dictionary: '" + code + "'");
        dict.entries.push_back(
            {code, row.fields.at(c_desc), parse_severity(row.fields.at(c_sev))});
    }
    return dict;
}

EventDictionary EventDictionary::from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return from_stream(in);
}

// --- subjects CSV ------------------------------------------------------------

namespace {

const Date kHistoryCutoffLow = make_date(2008, 1, 1);
const Date kHistoryCutoffHigh = make_date(2013, 12, 31);

bool parse_int_field(const std::string& s, long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtol(s.c_str(), &end, 10);
    return end && *end == '\0';
}

int category_field(const std::string& s, int lo, int hi, const char* name) {
    long v = 0;
    if (!parse_int_field(s, v) || v < lo || v > hi)
        throw DataError(std::string(name) + " out of range: '" + s + "'");
    return static_cast<int>(v);
}

} // namespace

std::vector<Subject> parse_subjects(std::istream& source, const EventDictionary& dictionary,
                                    ParseReport& report) {
    const csv::Table table = csv::read_stream(source);
    auto require = [&](const char* name) {
        const int c = table.column(name);
        if (c < 0) throw DataError(std::string("subjects CSV is missing column '") + name + "'");
        return c;
    };
    const int c_id = require("id");
    const int c_sex = require("sex");
    const int c_birth = require("birth_year");
    const int c_dep = require("department");
    const int c_alcohol = require("alcohol");
    const int c_obesity = require("obesity");
    const int c_smoking = require("smoking");
    const int c_immi = require("immigration");
    const int c_edu = require("education");
    const int c_edate = require("event_date");
    const int c_ecode = require("event_code");
    const int c_censor = table.column("censor_date"); // optional

    std::vector<Subject> subjects;
    std::unordered_map<std::int64_t, std::size_t> by_id;

    for (const auto& row : table.rows) {
        ++report.rows_read;
        try {
            if (row.fields.size() < table.header.size())
                throw DataError("row has fewer fields than the header");
            long id = 0;
            if (!parse_int_field(row.fields[c_id], id))
                throw DataError("bad id: '" + row.fields[c_id] + "'");

            const std::string& edate = row.fields[c_edate];
            const std::string& ecode = row.fields[c_ecode];
            std::optional<HistoryEvent> ev;
            if (!edate.empty() || !ecode.empty()) {
                if (edate.empty() || ecode.empty())
                    throw DataError("event_date and event_code must be both present or both empty");
                const DictionaryEntry* entry = dictionary.find(ecode);
                if (!entry) throw DataError("event code not in dictionary: '" + ecode + "'");
                const Date d = parse_date(edate);
                if (d < kHistoryCutoffLow || d > kHistoryCutoffHigh)
                    throw DataError("event date outside 2008-01-01..2013-12-31: " + edate);
                ev = HistoryEvent{d, ecode};
            }

            auto it = by_id.find(id);
            if (it == by_id.end()) {
                Subject s;
                s.id = id;
                const std::string& sex = row.fields[c_sex];
                if (sex != "F" && sex != "M") throw DataError("sex must be F or M: '" + sex + "'");
                s.sex = sex[0];
                s.birth_year = category_field(row.fields[c_birth], 1850, 2013, "birth_year");
                long dep = 0;
                if (!parse_int_field(row.fields[c_dep], dep) || dep < 1 || dep > 96)
                    throw DataError("department out of range 01..96: '" + row.fields[c_dep] + "'");
                char buf[4];
                std::snprintf(buf, sizeof(buf), "%02ld", dep);
                s.department = buf;
                s.alcohol = category_field(row.fields[c_alcohol], 0, 2, "alcohol");
                s.obesity = category_field(row.fields[c_obesity], 0, 2, "obesity");
                s.smoking = category_field(row.fields[c_smoking], 0, 2, "smoking");
                s.immigration = category_field(row.fields[c_immi], 0, 3, "immigration");
                s.education = category_field(row.fields[c_edu], 0, 3, "education");
                if (c_censor >= 0 && !row.fields[c_censor].empty())
                    s.censor_date = parse_date(row.fields[c_censor]);
                by_id.emplace(id, subjects.size());
                subjects.push_back(std::move(s));
                it = by_id.find(id);
            }
            if (ev) {
                Subject& s = subjects[it->second];
                const DictionaryEntry* entry = dictionary.find(ev->code);
                if (entry->severity == Severity::death &&
                    (!s.death_date || ev->date < *s.death_date))
                    s.death_date = ev->date;
                s.event_history.push_back(*ev);
            }
        } catch (const DataError& e) {
            ++report.rows_rejected;
            report.errors.push_back({row.line_number, e.what()});
        }
    }

    for (auto& s : subjects)
        std::sort(s.event_history.begin(), s.event_history.end(),
                  [](const HistoryEvent& a, const HistoryEvent& b) {
                      return a.date < b.date || (a.date == b.date && a.code < b.code);
                  });
    return subjects;
}

std::vector<Subject> parse_subjects_file(const std::string& path,
                                         const EventDictionary& dictionary,
                                         ParseReport& report) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_subjects(in, dictionary, report);
}

Date impute_birth_date(int birth_year, std::uint64_t seed, std::int64_t id_salt) {
    Rng rng(seed, static_cast<std::uint64_t>(id_salt) ^ 0x62697274686461ULL);
    const int n = days_in_year(birth_year);
    const auto offset = static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(n)));
    return Date{make_date(birth_year, 1, 1).days + offset};
}

void impute_birth_dates(std::vector<Subject>& subjects, std::uint64_t seed) {
    for (auto& s : subjects) s.birth_date = impute_birth_date(s.birth_year, seed, s.id);
}

// --- exclusions --------------------------------------------------------------

ExclusionRules ExclusionRules::standard(const EventDictionary& dictionary) {
    ExclusionRules rules;
    ExclusionCriterion c1;
    c1.name = "severe condition or death observed 2008-2009";
    c1.kind = ExclusionCriterion::Kind::events;
    c1.codes = dictionary.codes_with(Severity::severe_condition);
    for (auto& c : dictionary.codes_with(Severity::death)) c1.codes.push_back(c);
    c1.window_start = make_date(2008, 1, 1);
    c1.window_end = make_date(2009, 12, 31);
    rules.criteria.push_back(std::move(c1));

    ExclusionCriterion c2;
    c2.name = "exclusion condition observed 2008-2013";
    c2.kind = ExclusionCriterion::Kind::events;
    c2.codes = dictionary.codes_with(Severity::exclusion_condition);
    c2.window_start = make_date(2008, 1, 1);
    c2.window_end = make_date(2013, 12, 31);
    rules.criteria.push_back(std::move(c2));

    ExclusionCriterion c3;
    c3.name = "censored before 2010-01-01";
    c3.kind = ExclusionCriterion::Kind::censored_before;
    c3.cutoff = make_date(2010, 1, 1);
    rules.criteria.push_back(std::move(c3));

    ExclusionCriterion c4;
    c4.name = "observation ends before age 50";
    c4.kind = ExclusionCriterion::Kind::ends_before_age;
    c4.age_cutoff = kMinExposureAge;
    rules.criteria.push_back(std::move(c4));
    return rules;
}

ExclusionRules ExclusionRules::from_json_file(const std::string& path,
                                              const EventDictionary& dictionary) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open exclusion rules file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    ExclusionRules rules;
    for (const auto& item : doc.at("criteria")) {
        ExclusionCriterion c;
        c.name = item.at("name").get<std::string>();
        const std::string kind = item.value("kind", std::string("events"));
        if (kind == "events") {
            c.kind = ExclusionCriterion::Kind::events;
            if (item.contains("codes"))
                for (const auto& code : item["codes"]) {
                    const std::string s = code.get<std::string>();
                    if (!dictionary.find(s))
                        throw ConfigError("exclusion rule '" + c.name +
                                          "' references unknown event code '" + s + "'");
                    c.codes.push_back(s);
                }
            if (item.contains("classes"))
                for (const auto& cls : item["classes"])
                    for (auto& code : dictionary.codes_with(parse_severity(cls.get<std::string>())))
                        c.codes.push_back(code);
            c.window_start = parse_date(item.at("window").at(0).get<std::string>());
            c.window_end = parse_date(item.at("window").at(1).get<std::string>());
        } else if (kind == "censored_before") {
            c.kind = ExclusionCriterion::Kind::censored_before;
            c.cutoff = parse_date(item.at("date").get<std::string>());
        } else if (kind == "ends_before_age") {
            c.kind = ExclusionCriterion::Kind::ends_before_age;
            c.age_cutoff = item.at("age").get<double>();
        } else {
            throw ConfigError("unknown exclusion criterion kind: '" + kind + "'");
        }
        rules.criteria.push_back(std::move(c));
    }
    return rules;
}

namespace {

bool criterion_hits(const ExclusionCriterion& c, const Subject& s, Date window_end) {
    switch (c.kind) {
    case ExclusionCriterion::Kind::events:
        for (const auto& ev : s.event_history) {
            if (ev.date < c.window_start || ev.date > c.window_end) continue;
            if (std::find(c.codes.begin(), c.codes.end(), ev.code) != c.codes.end()) return true;
        }
        return false;
    case ExclusionCriterion::Kind::censored_before:
        return s.censor_date && *s.censor_date < c.cutoff;
    case ExclusionCriterion::Kind::ends_before_age: {
        Date end = window_end;
        if (s.death_date && *s.death_date < end) end = *s.death_date;
        if (s.censor_date && *s.censor_date < end) end = *s.censor_date;
        return age_at(s.birth_date, end) < c.age_cutoff;
    }
    }
    return false;
}

} // namespace

std::pair<std::vector<Subject>, ExclusionReport>
apply_exclusions(const std::vector<Subject>& subjects, const ExclusionRules& rules) {
    ExclusionReport report;
    std::vector<std::size_t> removed_by(subjects.size(), rules.criteria.size());
    const Date window_end = ObservationWindow::standard().end;

    // first-rule-wins: each subject is attributed to the earliest criterion
    // it violates
    for (std::size_t i = 0; i < subjects.size(); ++i)
        for (std::size_t k = 0; k < rules.criteria.size(); ++k)
            if (criterion_hits(rules.criteria[k], subjects[i], window_end)) {
                removed_by[i] = k;
                break;
            }

    std::size_t population = subjects.size();
    for (std::size_t k = 0; k < rules.criteria.size(); ++k) {
        std::size_t removed = 0;
        for (std::size_t i = 0; i < subjects.size(); ++i)
            if (removed_by[i] == k) ++removed;
        report.rows.push_back({rules.criteria[k].name, population, removed, population - removed});
        population -= removed;
    }

    std::vector<Subject> kept;
    kept.reserve(population);
    for (std::size_t i = 0; i < subjects.size(); ++i)
        if (removed_by[i] == rules.criteria.size()) kept.push_back(subjects[i]);
    return {std::move(kept), std::move(report)};
}

// --- exposures ---------------------------------------------------------------

ObservationWindow ObservationWindow::standard() {
    return {make_date(2010, 1, 1), make_date(2013, 12, 31)};
}

int CovariateSchema::index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

CovariateSchema CovariateSchema::cohort_default() {
    return {{"sex", "alcohol", "obesity", "smoking", "immigration", "education", "department"}};
}

ExposureSet build_exposures(const std::vector<Subject>& subjects,
                            const EventDictionary& dictionary, const ObservationWindow& window) {
    ExposureSet set;
    set.schema = CovariateSchema::cohort_default();
    set.rows.reserve(subjects.size());

    for (const auto& s : subjects) {
        const double entry = std::max(age_at(s.birth_date, window.start), kMinExposureAge);

        double exit = age_at(s.birth_date, window.end);
        bool event = false;
        if (s.censor_date) {
            const double censor_age = age_at(s.birth_date, *s.censor_date);
            if (censor_age < exit) exit = censor_age;
        }
        if (s.death_date) {
            const double death_age = age_at(s.birth_date, *s.death_date);
            if (death_age <= exit) {
                exit = death_age;
                event = true;
            }
        }
        // first severe condition at or after entry wins over anything later
        for (const auto& ev : s.event_history) {
            const DictionaryEntry* entry_def = dictionary.find(ev.code);
            if (!entry_def || entry_def->severity == Severity::exclusion_condition) continue;
            const double ev_age = age_at(s.birth_date, ev.date);
            if (ev_age < entry) continue;
            if (ev_age <= exit) {
                exit = ev_age;
                event = true;
                break; // history is date-sorted
            }
        }

        if (exit > kMaxExposureAge) { // censor at the support boundary
            exit = kMaxExposureAge;
            event = false;
        }
        if (exit <= entry || entry >= kMaxExposureAge) {
            ++set.dropped_degenerate;
            continue;
        }

        Exposure e;
        e.subject_id = s.id;
        e.entry_age = entry;
        e.exit_age = exit;
        e.event = event;
        e.covariates = {s.sex == 'M' ? 1.0 : 0.0,
                        static_cast<double>(s.alcohol),
                        static_cast<double>(s.obesity),
                        static_cast<double>(s.smoking),
                        static_cast<double>(s.immigration),
                        static_cast<double>(s.education),
                        static_cast<double>(std::stoi(s.department))};
        set.rows.push_back(std::move(e));
    }
    return set;
}

// --- descriptive statistics ---------------------------------------------------

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

DescriptiveStats descriptive_stats(const std::vector<Subject>& subjects,
                                   const ExposureSet& exposures) {
    if (subjects.empty()) throw DataError("descriptive_stats: empty cohort");
    DescriptiveStats out;

    std::unordered_map<std::int64_t, const Subject*> by_id;
    for (const auto& s : subjects) by_id.emplace(s.id, &s);

    std::array<std::vector<double>, 3> entry_ages, exposure_years;
    for (const auto& e : exposures.rows) {
        auto it = by_id.find(e.subject_id);
        if (it == by_id.end()) continue;
        const std::size_t col = it->second->sex == 'F' ? 0 : 1;
        for (std::size_t c : {col, std::size_t{2}}) {
            entry_ages[c].push_back(e.entry_age);
            exposure_years[c].push_back(e.exit_age - e.entry_age);
        }
        ++out.n[col];
        ++out.n[2];
    }
    for (std::size_t c = 0; c < 3; ++c) {
        out.entry_age_median[c] = quantile(entry_ages[c], 0.5);
        out.entry_age_q1[c] = quantile(entry_ages[c], 0.25);
        out.entry_age_q3[c] = quantile(entry_ages[c], 0.75);
        out.exposure_median[c] = quantile(exposure_years[c], 0.5);
        out.exposure_q1[c] = quantile(exposure_years[c], 0.25);
        out.exposure_q3[c] = quantile(exposure_years[c], 0.75);
    }

    struct FactorDef {
        const char* name;
        int levels;
        const char* label;
        int Subject::* member;
    };
    const FactorDef defs[] = {
        {"Obesity", 3, "Category", &Subject::obesity},
        {"Alcohol", 3, "Category", &Subject::alcohol},
        {"Smoking", 3, "Category", &Subject::smoking},
        {"Immigration", 4, "Quartile", &Subject::immigration},
        {"Education", 4, "Quartile", &Subject::education},
    };
    for (const auto& def : defs) {
        CategoryBlock block;
        block.factor = def.name;
        block.counts.assign(static_cast<std::size_t>(def.levels), std::array<std::size_t, 3>{});
        for (int lv = 0; lv < def.levels; ++lv)
            block.levels.push_back(std::string(def.label) + " " + std::to_string(lv));
        for (const auto& e : exposures.rows) {
            auto it = by_id.find(e.subject_id);
            if (it == by_id.end()) continue;
            const Subject& s = *it->second;
            const int lv = s.*def.member;
            const std::size_t col = s.sex == 'F' ? 0 : 1;
            ++block.counts[lv][col];
            ++block.counts[lv][2];
        }
        out.categories.push_back(std::move(block));
    }

    // correlations over the analysis population, in the documented encoding
    out.correlation_names = {"Alcohol", "Education", "Immigration", "Obesity", "Smoking"};
    std::vector<std::vector<double>> columns(5);
    for (const auto& e : exposures.rows) {
        auto it = by_id.find(e.subject_id);
        if (it == by_id.end()) continue;
        const Subject& s = *it->second;
        columns[0].push_back(s.alcohol >= 1 ? 1.0 : 0.0);
        columns[1].push_back(static_cast<double>(s.education));
        columns[2].push_back(static_cast<double>(s.immigration));
        columns[3].push_back(s.obesity >= 1 ? 1.0 : 0.0);
        columns[4].push_back(s.smoking >= 1 ? 1.0 : 0.0);
    }
    out.correlations.assign(5, std::vector<double>(5, std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j)
            out.correlations[i][j] = pearson(columns[i], columns[j]);
    return out;
}

} // namespace disfle

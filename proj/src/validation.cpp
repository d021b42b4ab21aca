#include "disfle/validation.hpp"

#include "disfle/csv.hpp"
#include "disfle/errors.hpp"
#include "disfle/km.hpp"
#include "disfle/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace disfle {

bool SplitAssignment::is_test(std::int64_t subject_id) const {
    const std::uint64_t h = mix64(seed ^ 0x74657374u, static_cast<std::uint64_t>(subject_id));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < test_fraction;
}

SplitAssignment split_train_test(double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw ConfigError("test fraction must lie in [0, 1]");
    return SplitAssignment{test_fraction, seed};
}

ExposureSet filter_split(const ExposureSet& exposures, const SplitAssignment& split, bool test) {
    ExposureSet out;
    out.schema = exposures.schema;
    for (const auto& row : exposures.rows)
        if (split.is_test(row.subject_id) == test) out.rows.push_back(row);
    return out;
}

// --- concordance ------------------------------------------------------------------

namespace {

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t i, long long delta) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }
    long long prefix(std::size_t i) const { // sum of [0, i)
        long long s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<long long> tree_;
};

} // namespace

double concordance(const std::vector<SubjectOutcome>& outcomes) {
    const std::size_t n = outcomes.size();
    std::vector<double> scores;
    scores.reserve(n);
    for (const auto& o : outcomes) scores.push_back(o.score);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    auto rank_of = [&](double s) {
        return static_cast<std::size_t>(
            std::lower_bound(scores.begin(), scores.end(), s) - scores.begin());
    };

    std::vector<std::size_t> by_entry(n), by_exit(n), events;
    std::iota(by_entry.begin(), by_entry.end(), 0);
    std::iota(by_exit.begin(), by_exit.end(), 0);
    std::sort(by_entry.begin(), by_entry.end(),
              [&](std::size_t a, std::size_t b) { return outcomes[a].entry < outcomes[b].entry; });
    std::sort(by_exit.begin(), by_exit.end(),
              [&](std::size_t a, std::size_t b) { return outcomes[a].exit < outcomes[b].exit; });
    for (std::size_t i : by_exit)
        if (outcomes[i].event) events.push_back(i);

    Fenwick active(scores.size());
    long long active_count = 0;
    std::size_t ia = 0, ir = 0;
    long long concordant2 = 0; // doubled to keep the 1/2 tie weight integral
    long long comparable = 0;

    std::size_t e = 0;
    while (e < events.size()) {
        const double t = outcomes[events[e]].exit;
        while (ia < n && outcomes[by_entry[ia]].entry < t) {
            active.add(rank_of(outcomes[by_entry[ia]].score), 1);
            ++active_count;
            ++ia;
        }
        while (ir < n && outcomes[by_exit[ir]].exit <= t) {
            const std::size_t k = by_exit[ir];
            if (outcomes[k].entry < t) { // only subjects that entered the sweep
                active.add(rank_of(outcomes[k].score), -1);
                --active_count;
            }
            ++ir;
        }
        // all events at this age compare against the same risk set
        while (e < events.size() && outcomes[events[e]].exit == t) {
            const SubjectOutcome& ev = outcomes[events[e]];
            const std::size_t r = rank_of(ev.score);
            const long long lower = active.prefix(r);
            const long long equal = active.prefix(r + 1) - lower;
            comparable += active_count;
            concordant2 += 2 * lower + equal;
            ++e;
        }
    }
    if (comparable == 0) throw DataError("concordance: no comparable pairs");
    return static_cast<double>(concordant2) / (2.0 * static_cast<double>(comparable));
}

std::vector<SubjectOutcome> subject_outcomes(const CoxModel& model,
                                             const ExposureSet& exposures) {
    const EpisodeSet episodes = split_episodes(exposures, model.grid());
    const DesignMatrix design = build_design(episodes, model.spec, model.basis);
    const auto scores = subject_mean_linear_predictors(model.fit, design);
    std::unordered_map<std::int64_t, double> score_by_id(scores.begin(), scores.end());

    std::vector<SubjectOutcome> out;
    out.reserve(exposures.rows.size());
    for (const auto& row : exposures.rows) {
        auto it = score_by_id.find(row.subject_id);
        if (it == score_by_id.end()) continue;
        out.push_back({row.subject_id, row.entry_age, row.exit_age, row.event, it->second});
    }
    return out;
}

double concordance(const CoxModel& model, const ExposureSet& test_exposures) {
    return concordance(subject_outcomes(model, test_exposures));
}

// --- risk-group calibration ---------------------------------------------------------

std::vector<double> default_risk_edges() { return {0.2, 0.7, 1.1, 1.5}; }

namespace {

std::string bin_label(const std::vector<double>& edges, std::size_t bin) {
    auto fmt = [](double v) { return csv::format_double(v, 6); };
    if (edges.empty()) return "(-inf, inf)";
    if (bin == 0) return "(-inf, " + fmt(edges[0]) + "]";
    if (bin == edges.size()) return "(" + fmt(edges.back()) + ", inf)";
    return "(" + fmt(edges[bin - 1]) + ", " + fmt(edges[bin]) + "]";
}

} // namespace

RiskGroupReport risk_group_calibration(const CoxModel& model, const ExposureSet& test_exposures,
                                       const std::vector<double>& edges) {
    const auto outcomes = subject_outcomes(model, test_exposures);
    std::unordered_map<std::int64_t, std::size_t> bin_of;
    const std::size_t n_bins = edges.size() + 1;

    RiskGroupReport report;
    report.edges = edges;
    report.bins.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) report.bins[b].label = bin_label(edges, b);

    std::vector<double> lp_sum(n_bins, 0.0);
    for (const auto& o : outcomes) {
        const std::size_t b = static_cast<std::size_t>(
            std::lower_bound(edges.begin(), edges.end(), o.score) - edges.begin());
        bin_of[o.id] = b;
        ++report.bins[b].count;
        lp_sum[b] += o.score;
    }

    for (std::size_t b = 0; b < n_bins; ++b) {
        RiskGroupReport::Bin& bin = report.bins[b];
        if (bin.count == 0) continue; // reported with count 0, no curves
        bin.mean_lp = lp_sum[b] / static_cast<double>(bin.count);

        std::vector<const Exposure*> members;
        for (const auto& row : test_exposures.rows) {
            auto it = bin_of.find(row.subject_id);
            if (it != bin_of.end() && it->second == b) members.push_back(&row);
        }
        bin.observed = fit_km(members).curve;

        const double risk = std::exp(bin.mean_lp);
        bin.predicted.times = bin.observed.times;
        bin.max_gap = 0.0;
        for (std::size_t i = 0; i < bin.observed.times.size(); ++i) {
            const double predicted =
                std::exp(-risk * model.fit.baseline.at(bin.observed.times[i]));
            bin.predicted.values.push_back(predicted);
            bin.max_gap = std::max(bin.max_gap, std::fabs(predicted - bin.observed.values[i]));
        }
    }
    return report;
}

// --- synthetic generator -------------------------------------------------------------

double EffectSchedule::at(double age) const {
    std::size_t i = 0;
    while (i < breakpoints.size() && age >= breakpoints[i]) ++i;
    return log_hr[i];
}

void SyntheticConfig::validate() const {
    if (hazard_rates.size() != hazard_breakpoints.size() + 1)
        throw ConfigError("synthetic hazard needs breakpoints + 1 rates");
    for (double r : hazard_rates)
        if (r < 0.0) throw ConfigError("synthetic hazard rates must be non-negative");
    for (const auto& cov : covariates) {
        double total = 0.0;
        for (double p : cov.level_probs) {
            if (p < 0.0 || p > 1.0) throw ConfigError("level probabilities must lie in [0, 1]");
            total += p;
        }
        if (std::fabs(total - 1.0) > 1e-9)
            throw ConfigError("level probabilities of '" + cov.name + "' must sum to 1");
        if (cov.level_effects.size() != cov.level_probs.size())
            throw ConfigError("'" + cov.name + "' needs one effect schedule per level");
        for (double v : cov.level_effects[0].log_hr)
            if (v != 0.0) throw ConfigError("level 0 of '" + cov.name + "' must have zero effect");
    }
    if (birth_year_min > birth_year_max) throw ConfigError("empty birth-year range");
    if (birth_year_min < 1909)
        throw ConfigError("birth years before 1909 exceed the supported age range");
}

namespace {

int covariate_index(const SyntheticConfig& config, const std::string& name) {
    for (std::size_t i = 0; i < config.covariates.size(); ++i)
        if (config.covariates[i].name == name) return static_cast<int>(i);
    throw ConfigError("synthetic config references unknown covariate '" + name + "'");
}

// log hazard ratio of a subject at a given age under the configured truth
double true_log_hr(const SyntheticConfig& config, const std::vector<double>& levels, double age) {
    double lp = 0.0;
    for (std::size_t i = 0; i < config.covariates.size(); ++i) {
        const auto level = static_cast<std::size_t>(levels[i]);
        lp += config.covariates[i].level_effects[level].at(age);
    }
    for (const auto& inter : config.interactions) {
        const auto a = static_cast<std::size_t>(covariate_index(config, inter.term_a));
        const auto b = static_cast<std::size_t>(covariate_index(config, inter.term_b));
        if (levels[a] == inter.level_a && levels[b] == inter.level_b) lp += inter.log_hr;
    }
    return lp;
}

double baseline_rate(const SyntheticConfig& config, double age) {
    std::size_t i = 0;
    while (i < config.hazard_breakpoints.size() && age >= config.hazard_breakpoints[i]) ++i;
    return config.hazard_rates[i];
}

std::vector<double> hazard_segment_points(const SyntheticConfig& config,
                                          const std::vector<double>& levels, double lo,
                                          double hi) {
    std::vector<double> points{lo};
    auto add = [&](double a) {
        if (a > lo && a < hi) points.push_back(a);
    };
    for (double b : config.hazard_breakpoints) add(b);
    for (std::size_t i = 0; i < config.covariates.size(); ++i) {
        const auto level = static_cast<std::size_t>(levels[i]);
        for (double b : config.covariates[i].level_effects[level].breakpoints) add(b);
    }
    points.push_back(hi);
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return points;
}

// inversion sampling conditional on survival to `entry`; returns event age or
// nan when the target exceeds the cumulative hazard up to `limit`
double draw_event_age(const SyntheticConfig& config, const std::vector<double>& levels,
                      double entry, double limit, double u) {
    const double target = -std::log(u);
    double acc = 0.0;
    const auto points = hazard_segment_points(config, levels, entry, limit);
    for (std::size_t s = 0; s + 1 < points.size(); ++s) {
        const double a = points[s], b = points[s + 1];
        const double rate =
            baseline_rate(config, a) * std::exp(true_log_hr(config, levels, a));
        const double mass = rate * (b - a);
        if (acc + mass >= target && rate > 0.0) return a + (target - acc) / rate;
        acc += mass;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct CorrelationPlan {
    int partner = -1; // index of term_a for covariates that are a term_b
    double rho = 0.0;
};

} // namespace

double synthetic_cumulative_hazard(const SyntheticConfig& config,
                                   const std::map<std::string, double>& levels, double from_age,
                                   double to_age) {
    std::vector<double> level_values(config.covariates.size(), 0.0);
    for (const auto& [name, value] : levels) {
        const auto i = static_cast<std::size_t>(covariate_index(config, name));
        level_values[i] = value;
    }
    double acc = 0.0;
    const auto points = hazard_segment_points(config, level_values, from_age, to_age);
    for (std::size_t s = 0; s + 1 < points.size(); ++s) {
        const double a = points[s], b = points[s + 1];
        acc += baseline_rate(config, a) * std::exp(true_log_hr(config, level_values, a)) * (b - a);
    }
    return acc;
}

SyntheticCohort generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    SyntheticCohort out;
    out.truth = config;

    // event dictionary used by the pipeline view
    for (int i = 1; i <= 8; ++i) {
        char code[8], desc[32];
        std::snprintf(code, sizeof(code), "SC%02d", i);
        std::snprintf(desc, sizeof(desc), "severe condition %d", i);
        out.dictionary.entries.push_back({code, desc, Severity::severe_condition});
    }
    for (int i = 1; i <= 3; ++i) {
        char code[8], desc[32];
        std::snprintf(code, sizeof(code), "EX%02d", i);
        std::snprintf(desc, sizeof(desc), "exclusion condition %d", i);
        out.dictionary.entries.push_back({code, desc, Severity::exclusion_condition});
    }
    out.dictionary.entries.push_back({"DEATH", "death from any cause", Severity::death});

    // correlated draws: term_b of each pair is drawn conditional on term_a
    std::vector<CorrelationPlan> plan(config.covariates.size());
    for (const auto& corr : config.correlations) {
        const int a = covariate_index(config, corr.term_a);
        const int b = covariate_index(config, corr.term_b);
        if (a >= b)
            throw ConfigError("correlation pairs must name the earlier covariate first");
        plan[static_cast<std::size_t>(b)] = {a, corr.rho};
    }

    const ObservationWindow window = ObservationWindow::standard();
    const std::size_t n_planted = config.planted.severe_before_window +
                                  config.planted.exclusion_condition +
                                  config.planted.censored_before_window;
    const std::size_t n_total = config.n + n_planted;

    out.exposures.schema = CovariateSchema::cohort_default();
    out.exposures.rows.reserve(config.n);
    out.subjects.reserve(n_total);

    const auto severe_codes = out.dictionary.codes_with(Severity::severe_condition);
    const auto exclusion_codes = out.dictionary.codes_with(Severity::exclusion_condition);

    for (std::size_t k = 1; k <= n_total; ++k) {
        const auto id = static_cast<std::int64_t>(k);
        Rng rng(config.seed, static_cast<std::uint64_t>(id));

        Subject subject;
        subject.id = id;
        subject.birth_year = config.birth_year_min +
                             static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                                 config.birth_year_max - config.birth_year_min + 1)));
        subject.birth_date = impute_birth_date(subject.birth_year, config.seed, id);
        subject.department = "78";

        // covariate levels, honoring planted presence correlations
        std::vector<double> levels(config.covariates.size(), 0.0);
        for (std::size_t i = 0; i < config.covariates.size(); ++i) {
            const auto& cov = config.covariates[i];
            const double p_present = 1.0 - cov.level_probs[0];
            bool present;
            if (plan[i].partner >= 0) {
                const auto& partner = config.covariates[static_cast<std::size_t>(plan[i].partner)];
                const double pa = 1.0 - partner.level_probs[0];
                const double pb = p_present;
                const double p11 =
                    plan[i].rho * std::sqrt(pa * (1 - pa) * pb * (1 - pb)) + pa * pb;
                if (p11 < std::max(0.0, pa + pb - 1.0) - 1e-12 || p11 > std::min(pa, pb) + 1e-12)
                    throw ConfigError("infeasible planted correlation for '" + cov.name + "'");
                const bool partner_present = levels[static_cast<std::size_t>(plan[i].partner)] > 0;
                const double conditional =
                    partner_present ? p11 / pa : (pb - p11) / (1.0 - pa);
                present = rng.bernoulli(conditional);
            } else {
                present = rng.bernoulli(p_present);
            }
            if (present && cov.level_probs.size() > 1) {
                // split presence into levels 1..L-1
                double remaining = rng.next_double() * p_present;
                std::size_t level = 1;
                for (; level + 1 < cov.level_probs.size(); ++level) {
                    if (remaining < cov.level_probs[level]) break;
                    remaining -= cov.level_probs[level];
                }
                levels[i] = static_cast<double>(level);
            }
        }

        // map generator covariates onto the cohort schema
        auto apply = [&](const char* name, auto setter) {
            for (std::size_t i = 0; i < config.covariates.size(); ++i)
                if (config.covariates[i].name == name) setter(static_cast<int>(levels[i]));
        };
        apply("sex", [&](int v) { subject.sex = v ? 'M' : 'F'; });
        apply("alcohol", [&](int v) { subject.alcohol = v; });
        apply("obesity", [&](int v) { subject.obesity = v; });
        apply("smoking", [&](int v) { subject.smoking = v; });
        apply("immigration", [&](int v) { subject.immigration = v; });
        apply("education", [&](int v) { subject.education = v; });

        // planted exclusion groups occupy the leading ids
        if (k <= config.planted.severe_before_window) {
            const int year = rng.bernoulli(0.5) ? 2008 : 2009;
            const Date d{make_date(year, 1, 1).days +
                         static_cast<std::int32_t>(rng.next_below(365))};
            subject.event_history.push_back(
                {d, severe_codes[rng.next_below(severe_codes.size())]});
            out.subjects.push_back(std::move(subject));
            continue;
        }
        if (k <= config.planted.severe_before_window + config.planted.exclusion_condition) {
            const Date d{make_date(2010, 1, 1).days +
                         static_cast<std::int32_t>(rng.next_below(4 * 365))};
            subject.event_history.push_back(
                {d, exclusion_codes[rng.next_below(exclusion_codes.size())]});
            out.subjects.push_back(std::move(subject));
            continue;
        }
        if (k <= n_planted) {
            subject.censor_date =
                Date{make_date(2009, 1, 1).days + static_cast<std::int32_t>(rng.next_below(365))};
            out.subjects.push_back(std::move(subject));
            continue;
        }

        // analysis population: draw the disease-free duration
        const double entry =
            std::max(age_at(subject.birth_date, window.start), kMinExposureAge);
        const double window_exit = age_at(subject.birth_date, window.end);
        const double u = 1.0 - rng.next_double(); // (0, 1]
        const double event_age = draw_event_age(config, levels, entry, window_exit, u);
        const bool has_event = !std::isnan(event_age);
        const double exit = has_event ? event_age : window_exit;

        Exposure exposure;
        exposure.subject_id = id;
        exposure.entry_age = entry;
        exposure.exit_age = exit;
        exposure.event = has_event;
        exposure.covariates = {subject.sex == 'M' ? 1.0 : 0.0,
                               static_cast<double>(subject.alcohol),
                               static_cast<double>(subject.obesity),
                               static_cast<double>(subject.smoking),
                               static_cast<double>(subject.immigration),
                               static_cast<double>(subject.education),
                               static_cast<double>(std::stoi(subject.department))};
        if (exit > entry) out.exposures.rows.push_back(exposure);

        if (has_event) {
            const auto offset = static_cast<std::int32_t>(
                std::lround(event_age * kDaysPerYear));
            Date d{subject.birth_date.days + offset};
            d.days = std::clamp(d.days, window.start.days, window.end.days);
            const bool death = rng.bernoulli(config.death_share);
            const std::string code =
                death ? "DEATH" : severe_codes[rng.next_below(severe_codes.size())];
            if (death) subject.death_date = d;
            subject.event_history.push_back({d, code});
        }
        out.subjects.push_back(std::move(subject));
    }
    return out;
}

// --- config & CSV ---------------------------------------------------------------------

namespace {

EffectSchedule schedule_from_json(const nlohmann::json& node) {
    EffectSchedule s;
    if (node.is_number()) return EffectSchedule::constant(node.get<double>());
    for (const auto& b : node.at("breakpoints")) s.breakpoints.push_back(b.get<double>());
    for (const auto& v : node.at("log_hr")) s.log_hr.push_back(v.get<double>());
    if (s.log_hr.size() != s.breakpoints.size() + 1)
        throw ConfigError("effect schedule needs breakpoints + 1 log_hr values");
    return s;
}

} // namespace

SyntheticConfig SyntheticConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synthetic config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    SyntheticConfig config;
    config.n = doc.value("n", config.n);
    config.seed = doc.value("seed", config.seed);
    config.birth_year_min = doc.value("birth_year_min", config.birth_year_min);
    config.birth_year_max = doc.value("birth_year_max", config.birth_year_max);
    config.death_share = doc.value("death_share", config.death_share);
    if (doc.contains("hazard")) {
        config.hazard_breakpoints.clear();
        config.hazard_rates.clear();
        for (const auto& b : doc["hazard"].value("breakpoints", nlohmann::json::array()))
            config.hazard_breakpoints.push_back(b.get<double>());
        for (const auto& r : doc["hazard"].at("rates"))
            config.hazard_rates.push_back(r.get<double>());
    } else {
        config.hazard_rates = {0.05};
    }
    for (const auto& item : doc.value("covariates", nlohmann::json::array())) {
        SyntheticCovariate cov;
        cov.name = item.at("name").get<std::string>();
        for (const auto& p : item.at("level_probs")) cov.level_probs.push_back(p.get<double>());
        if (item.contains("effects")) {
            for (const auto& e : item["effects"]) cov.level_effects.push_back(schedule_from_json(e));
        } else if (item.contains("log_hr")) {
            for (const auto& v : item["log_hr"])
                cov.level_effects.push_back(schedule_from_json(v));
        }
        while (cov.level_effects.size() < cov.level_probs.size())
            cov.level_effects.push_back(EffectSchedule::zero());
        config.covariates.push_back(std::move(cov));
    }
    for (const auto& item : doc.value("interactions", nlohmann::json::array()))
        config.interactions.push_back({item.at("a").get<std::string>(),
                                       item.at("b").get<std::string>(),
                                       item.value("level_a", 2.0), item.value("level_b", 2.0),
                                       item.at("log_hr").get<double>()});
    for (const auto& item : doc.value("correlations", nlohmann::json::array()))
        config.correlations.push_back({item.at("a").get<std::string>(),
                                       item.at("b").get<std::string>(),
                                       item.at("rho").get<double>()});
    if (doc.contains("planted_exclusions")) {
        const auto& p = doc["planted_exclusions"];
        config.planted.severe_before_window = p.value("severe_before_window", 0u);
        config.planted.exclusion_condition = p.value("exclusion_condition", 0u);
        config.planted.censored_before_window = p.value("censored_before_window", 0u);
    }
    config.validate();
    return config;
}

void write_dictionary_csv(const std::string& path, const EventDictionary& dictionary) {
    csv::Writer out(path);
    out.row({"event_code", "description", "severity_class"});
    for (const auto& e : dictionary.entries)
        out.row({e.code, e.description, severity_name(e.severity)});
}

void write_subjects_csv(const std::string& path, const std::vector<Subject>& subjects,
                        const EventDictionary& dictionary) {
    (void)dictionary;
    csv::Writer out(path);
    out.row({"id", "sex", "birth_year", "department", "alcohol", "obesity", "smoking",
             "immigration", "education", "event_date", "event_code", "censor_date"});
    for (const auto& s : subjects) {
        std::vector<std::string> base = {std::to_string(s.id),
                                         std::string(1, s.sex),
                                         std::to_string(s.birth_year),
                                         s.department,
                                         std::to_string(s.alcohol),
                                         std::to_string(s.obesity),
                                         std::to_string(s.smoking),
                                         std::to_string(s.immigration),
                                         std::to_string(s.education)};
        const std::string censor = s.censor_date ? format_date(*s.censor_date) : "";
        if (s.event_history.empty()) {
            auto row = base;
            row.insert(row.end(), {"", "", censor});
            out.row(row);
        } else {
            for (const auto& ev : s.event_history) {
                auto row = base;
                row.insert(row.end(), {format_date(ev.date), ev.code, censor});
                out.row(row);
            }
        }
    }
}

} // namespace disfle

#include "disfle/km.hpp"

#include "disfle/csv.hpp"
#include "disfle/errors.hpp"

#include <algorithm>
#include <cmath>

namespace disfle {

KmFit fit_km(const std::vector<const Exposure*>& rows) {
    KmFit fit;
    fit.n_exposures = rows.size();

    std::vector<double> entries;
    entries.reserve(rows.size());
    std::vector<std::pair<double, bool>> exits; // (exit age, event)
    exits.reserve(rows.size());
    for (const Exposure* e : rows) {
        entries.push_back(e->entry_age);
        exits.emplace_back(e->exit_age, e->event);
        fit.n_events += e->event;
    }
    std::sort(entries.begin(), entries.end());
    std::sort(exits.begin(), exits.end());

    fit.flagged_no_events = fit.n_events == 0;
    if (fit.flagged_no_events) return fit;

    double survival = 1.0;
    double greenwood = 0.0;
    std::size_t exit_cursor = 0; // exits strictly before the current event age
    std::size_t i = 0;
    while (i < exits.size()) {
        const double t = exits[i].first;
        std::size_t d = 0;
        std::size_t j = i;
        while (j < exits.size() && exits[j].first == t) {
            d += exits[j].second;
            ++j;
        }
        if (d > 0) {
            while (exit_cursor < exits.size() && exits[exit_cursor].first < t) ++exit_cursor;
            const auto entered = static_cast<std::size_t>(
                std::lower_bound(entries.begin(), entries.end(), t) - entries.begin());
            const std::size_t at_risk = entered - exit_cursor; // entry < t <= exit
            const auto dn = static_cast<double>(d);
            const auto nn = static_cast<double>(at_risk);
            survival *= 1.0 - dn / nn;
            if (at_risk > d) greenwood += dn / (nn * (nn - dn));
            fit.curve.times.push_back(t);
            fit.curve.values.push_back(survival);
            fit.curve.greenwood.push_back(greenwood);
        }
        i = j;
    }
    return fit;
}

KmFit fit_km(const ExposureSet& exposures) {
    std::vector<const Exposure*> rows;
    rows.reserve(exposures.rows.size());
    for (const auto& e : exposures.rows) rows.push_back(&e);
    return fit_km(rows);
}

std::map<std::string, KmFit> fit_km_stratified(const ExposureSet& exposures,
                                               const std::vector<std::string>& strata) {
    std::vector<int> indices;
    for (const auto& name : strata) {
        const int idx = exposures.schema.index(name);
        if (idx < 0) throw ConfigError("unknown stratification covariate: " + name);
        indices.push_back(idx);
    }
    std::map<std::string, std::vector<const Exposure*>> groups;
    for (const auto& e : exposures.rows) {
        std::string key;
        for (std::size_t k = 0; k < strata.size(); ++k) {
            if (k) key += ",";
            key += strata[k] + "=";
            const double v = e.covariates[static_cast<std::size_t>(indices[k])];
            if (strata[k] == "sex")
                key += v == 0.0 ? "F" : "M";
            else
                key += csv::format_double(v);
        }
        groups[key].push_back(&e);
    }
    std::map<std::string, KmFit> out;
    for (auto& [key, rows] : groups) out.emplace(key, fit_km(rows));
    return out;
}

double normal_quantile_two_sided(double level) {
    // Acklam's rational approximation of the normal quantile; |error| < 1.2e-9
    const double p = 0.5 + level / 2.0;
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double q, r;
    if (p < p_low) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        q = p - 0.5;
        r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

StepSurvival km_confidence(const StepSurvival& curve, double level) {
    if (curve.greenwood.size() != curve.values.size())
        throw DataError("km_confidence needs a curve with Greenwood accumulators");
    StepSurvival out = curve;
    out.lower.resize(curve.size());
    out.upper.resize(curve.size());
    const double z = normal_quantile_two_sided(level);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double s = curve.values[i];
        if (s <= 0.0) {
            out.lower[i] = out.upper[i] = 0.0;
            continue;
        }
        if (s >= 1.0) {
            out.lower[i] = out.upper[i] = 1.0;
            continue;
        }
        // log(-log S) transform keeps the interval inside (0, 1)
        const double log_s = std::log(s);
        const double se = std::sqrt(curve.greenwood[i]) / std::fabs(log_s);
        out.lower[i] = std::clamp(std::pow(s, std::exp(z * se)), 0.0, 1.0);
        out.upper[i] = std::clamp(std::pow(s, std::exp(-z * se)), 0.0, 1.0);
    }
    return out;
}

} // namespace disfle

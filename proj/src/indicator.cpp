#include "disfle/indicator.hpp"

#include "disfle/errors.hpp"
#include "disfle/km.hpp"

#include <algorithm>
#include <cmath>

namespace disfle {

double disfle_at(const StepSurvival& curve, double t, double t_max) {
    if (t >= t_max)
        throw DataError("disfle_at: t must lie below t_max");
    const double s_t = curve.at(t);
    if (!(s_t > 0.0)) throw DataError("disfle_at: survival is zero at t");
    return integrate_step(curve, t, t_max) / s_t;
}

DisfleCurve disfle_curve(const StepSurvival& curve, double t_max, double start_age) {
    DisfleCurve out;
    out.t_max = t_max;

    std::vector<double> ages;
    if (curve.times.empty() || curve.times.front() > start_age) ages.push_back(start_age);
    for (double t : curve.times)
        if (t >= start_age && t < t_max && curve.at(t) > 0.0) ages.push_back(t);

    const bool bands = curve.has_bands();
    StepSurvival lower_curve, upper_curve;
    if (bands) {
        lower_curve.times = curve.times;
        lower_curve.values = curve.lower;
        upper_curve.times = curve.times;
        upper_curve.values = curve.upper;
    }
    for (double t : ages) {
        out.ages.push_back(t);
        out.values.push_back(disfle_at(curve, t, t_max));
        if (bands) {
            // conservative envelope: each band treated as a survival curve
            out.lower.push_back(lower_curve.at(t) > 0.0 ? disfle_at(lower_curve, t, t_max) : 0.0);
            out.upper.push_back(upper_curve.at(t) > 0.0 ? disfle_at(upper_curve, t, t_max)
                                                        : t_max - t);
        }
    }
    out.ages.push_back(t_max);
    out.values.push_back(0.0);
    if (bands) {
        out.lower.push_back(0.0);
        out.upper.push_back(0.0);
    }
    return out;
}

// --- risk profiles ------------------------------------------------------------

std::string RiskProfile::label() const {
    std::string name;
    switch (level) {
    case Level::lowest: name = "Lowest"; break;
    case Level::intermediate: name = "Intermediate"; break;
    case Level::highest: name = "Highest"; break;
    }
    name += sex == 'F' ? " F" : " M";
    for (const auto& b : behaviors) name += " " + b;
    return name;
}

void RiskProfile::validate() const {
    const std::size_t expected = level == Level::lowest        ? 0
                                 : level == Level::intermediate ? 1
                                                                : 2;
    if (behaviors.size() != expected)
        throw ConfigError("risk profile '" + label() + "' must carry " +
                          std::to_string(expected) + " behavior(s)");
}

std::vector<RiskProfile> standard_profiles() {
    const std::vector<std::string> behaviors = {"alcohol", "obesity", "smoking"};
    std::vector<RiskProfile> out;
    for (char sex : {'F', 'M'}) out.push_back({RiskProfile::Level::lowest, sex, {}});
    for (char sex : {'F', 'M'})
        for (const auto& b : behaviors)
            out.push_back({RiskProfile::Level::intermediate, sex, {b}});
    for (char sex : {'F', 'M'})
        for (std::size_t i = 0; i < behaviors.size(); ++i)
            for (std::size_t j = i + 1; j < behaviors.size(); ++j)
                out.push_back({RiskProfile::Level::highest, sex, {behaviors[i], behaviors[j]}});
    return out;
}

std::vector<double> profile_covariates(const CoxModel& model, const RiskProfile& profile) {
    profile.validate();
    std::vector<double> covs(model.schema.size(), 0.0);
    for (std::size_t i = 0; i < model.schema.size(); ++i) {
        const TermSpec* term = model.spec.find_term(model.schema.names[i]);
        if (term) covs[i] = term->levels[term->reference];
    }
    const int sex_index = model.schema.index("sex");
    if (sex_index >= 0) covs[static_cast<std::size_t>(sex_index)] = profile.sex == 'M' ? 1.0 : 0.0;
    for (const auto& behavior : profile.behaviors) {
        const int idx = model.schema.index(behavior);
        if (idx < 0) throw ConfigError("profile behavior '" + behavior + "' not in the data");
        covs[static_cast<std::size_t>(idx)] = 2.0; // category 2 defines the risk profiles
    }
    return covs;
}

std::vector<ProfileCurves> profile_curves(const CoxModel& model,
                                          const std::vector<RiskProfile>& profiles,
                                          double t_max) {
    std::vector<ProfileCurves> out;
    out.reserve(profiles.size());
    for (const auto& profile : profiles) {
        const std::vector<double> covs = profile_covariates(model, profile);
        StepSurvival survival =
            predict_survival_with_bands(model, covs, model.spec.grid_start, t_max);
        DisfleCurve disfle = disfle_curve(survival, t_max, model.spec.grid_start);
        out.push_back({profile, std::move(survival), std::move(disfle)});
    }
    return out;
}

StepSurvival predict_survival_with_bands(const CoxModel& model,
                                         const std::vector<double>& covariates, double from_age,
                                         double to_age, double level) {
    const std::vector<double> grid = model.grid();
    const double z = normal_quantile_two_sided(level);

    struct CellTerms {
        double lp = 0.0;
        double se = 0.0;
    };
    std::vector<CellTerms> cells(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const std::vector<double> row = profile_row(model.spec, model.basis, model.schema,
                                                    covariates, grid[g], &model.fit.columns);
        cells[g].lp = model.fit.linear_predictor(row);
        // Wald variance of the profile linear predictor at this cell
        double var = 0.0;
        std::vector<std::pair<int, double>> active;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const int idx = model.fit.active_index[c];
            if (idx >= 0 && row[c] != 0.0) active.emplace_back(idx, row[c]);
        }
        for (auto [i, wi] : active)
            for (auto [j, wj] : active) var += wi * wj * model.fit.covariance(i, j);
        cells[g].se = std::sqrt(std::max(0.0, var));
    }

    StepSurvival out;
    const auto& baseline = model.fit.baseline;
    double cum = 0.0, cum_lo = 0.0, cum_hi = 0.0;
    for (std::size_t e = 0; e < baseline.times.size(); ++e) {
        const double t = baseline.times[e];
        if (t <= from_age || t > to_age) continue;
        auto it = std::upper_bound(grid.begin(), grid.end(), t);
        const std::size_t g = it == grid.begin()
                                  ? 0
                                  : static_cast<std::size_t>(it - grid.begin()) - 1;
        cum += std::exp(cells[g].lp) * baseline.increments[e];
        cum_lo += std::exp(cells[g].lp - z * cells[g].se) * baseline.increments[e];
        cum_hi += std::exp(cells[g].lp + z * cells[g].se) * baseline.increments[e];
        out.times.push_back(t);
        out.values.push_back(std::exp(-cum));
        out.upper.push_back(std::exp(-cum_lo));
        out.lower.push_back(std::exp(-cum_hi));
    }
    return out;
}

} // namespace disfle

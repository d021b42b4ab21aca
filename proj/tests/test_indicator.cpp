#include "disfle/errors.hpp"
#include "disfle/indicator.hpp"
#include "disfle/km.hpp"
#include "disfle/validation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace disfle;

TEST_CASE("disfle_at: full residual horizon under S = 1") {
    StepSurvival flat; // no events: S identically 1
    CHECK(disfle_at(flat, 50.0, 100.0) == 50.0);
    CHECK(disfle_at(flat, 73.25, 100.0) == doctest::Approx(26.75));
}

TEST_CASE("disfle_at: hand-integrated step curve") {
    StepSurvival curve;
    curve.times = {60.0, 80.0};
    curve.values = {0.5, 0.0};
    CHECK(disfle_at(curve, 50.0, 100.0) == doctest::Approx(10.0 * 1.0 + 20.0 * 0.5));
    // conditioning identity: starting at 60 renormalizes by S(60)
    CHECK(disfle_at(curve, 60.0, 100.0) == doctest::Approx(20.0 * 0.5 / 0.5));
}

TEST_CASE("disfle_at: discretized exponential reproduces the closed form") {
    StepSurvival curve;
    const double rate = 0.1;
    const double step = 1e-4;
    for (double u = 50.0 + step; u <= 100.0 + step / 2; u += step) {
        curve.times.push_back(u);
        curve.values.push_back(std::exp(-rate * (u - 50.0)));
    }
    const double expected = (1.0 - std::exp(-5.0)) / rate; // 9.9326...
    CHECK(disfle_at(curve, 50.0, 100.0) == doctest::Approx(expected).epsilon(1e-4));
    CHECK(std::fabs(disfle_at(curve, 50.0, 100.0) - expected) < 1e-3);
}

TEST_CASE("disfle_at: errors on exhausted survival and on t >= t_max") {
    StepSurvival dead;
    dead.times = {60.0};
    dead.values = {0.0};
    CHECK_THROWS_AS(disfle_at(dead, 70.0, 100.0), DataError);
    StepSurvival flat;
    CHECK_THROWS_AS(disfle_at(flat, 100.0, 100.0), DataError);
}

TEST_CASE("disfle_at agrees with a fine-grid Riemann oracle") {
    const ExposureSet cohort = oracles::random_cohort(300, 400);
    const StepSurvival curve = fit_km(cohort).curve;
    for (double t : {50.0, 52.5, 55.0}) {
        const double direct = disfle_at(curve, t, 65.0);
        const double riemann = oracles::riemann_step_integral(curve, t, 65.0) / curve.at(t);
        CHECK(std::fabs(direct - riemann) < 1e-9);
    }
}

TEST_CASE("disfle_curve: S = 1 gives t_max - t; recursion matches direct sums") {
    StepSurvival flat;
    const DisfleCurve curve = disfle_curve(flat, 100.0);
    for (std::size_t i = 0; i < curve.ages.size(); ++i)
        CHECK(curve.values[i] == doctest::Approx(100.0 - curve.ages[i]));

    const ExposureSet cohort = oracles::random_cohort(301, 300);
    const StepSurvival km = fit_km(cohort).curve;
    const DisfleCurve estimated = disfle_curve(km, 100.0);
    // the restriction bound
    for (std::size_t i = 0; i < estimated.ages.size(); ++i)
        CHECK(estimated.values[i] + estimated.ages[i] <= 100.0 + 1e-9);
    // Dis-FLE(t_i) = (t_{i+1} - t_i) + S(t_{i+1})/S(t_i) * Dis-FLE(t_{i+1})
    // over consecutive curve ages (survival is constant between them)
    for (std::size_t i = 0; i + 1 < estimated.ages.size(); ++i) {
        const double t0 = estimated.ages[i], t1 = estimated.ages[i + 1];
        if (km.at(t1) <= 0.0) break; // curve skips exhausted tail points
        const double ratio = km.at(t1) / km.at(t0);
        const double recursion = (t1 - t0) + ratio * estimated.values[i + 1];
        CHECK(estimated.values[i] == doctest::Approx(recursion).epsilon(1e-9));
    }
}

TEST_CASE("dominance: pointwise lower survival gives lower disfle") {
    const ExposureSet cohort = oracles::random_cohort(302, 300);
    const StepSurvival curve = fit_km(cohort).curve;
    StepSurvival squeezed = curve;
    for (auto& v : squeezed.values) v *= 0.8;
    // compare conditional on the same normalizer by using t before all events
    const double t = 50.0;
    CHECK(disfle_at(squeezed, t, 100.0) <= disfle_at(curve, t, 100.0) + 1e-12);
}

TEST_CASE("t_max truncation equals computing with the parameter") {
    const ExposureSet cohort = oracles::random_cohort(303, 300);
    const StepSurvival curve = fit_km(cohort).curve;
    const double t_max = 58.0;
    StepSurvival truncated;
    for (std::size_t i = 0; i < curve.size(); ++i)
        if (curve.times[i] <= t_max) {
            truncated.times.push_back(curve.times[i]);
            truncated.values.push_back(curve.values[i]);
        }
    CHECK(disfle_at(truncated, 50.0, t_max) == doctest::Approx(disfle_at(curve, 50.0, t_max)));
}

namespace {

CoxModel behaviors_model(std::uint64_t seed, std::size_t n) {
    SyntheticConfig config;
    config.n = n;
    config.seed = seed;
    config.hazard_rates = {0.05};
    config.covariates = {
        {"sex", {0.5, 0.5}, {EffectSchedule::zero(), EffectSchedule::constant(0.3)}},
        {"alcohol",
         {0.90, 0.04, 0.06},
         {EffectSchedule::zero(), EffectSchedule::constant(0.3), EffectSchedule::constant(1.0)}},
        {"obesity",
         {0.90, 0.06, 0.04},
         {EffectSchedule::zero(), EffectSchedule::constant(0.2), EffectSchedule::constant(0.6)}},
        {"smoking",
         {0.85, 0.05, 0.10},
         {EffectSchedule::zero(), EffectSchedule::constant(0.25),
          EffectSchedule::constant(0.8)}}};
    const SyntheticCohort cohort = generate_synthetic(config);

    ModelSpec spec;
    for (const char* name : {"alcohol", "obesity", "smoking"}) {
        TermSpec t;
        t.name = name;
        t.age_dependent = false;
        t.levels = {0, 1, 2};
        t.level_labels = {"0", "1", "2"};
        spec.terms.push_back(t);
    }
    TermSpec sex;
    sex.name = "sex";
    sex.age_dependent = false;
    sex.levels = {0, 1};
    sex.level_labels = {"F", "M"};
    spec.terms.push_back(sex);
    spec.interior_knots = {70.0};

    ExposureSet narrow;
    narrow.schema = {{"sex", "alcohol", "obesity", "smoking"}};
    const auto& schema = cohort.exposures.schema;
    for (const auto& e : cohort.exposures.rows)
        narrow.rows.push_back(
            {e.subject_id, e.entry_age, e.exit_age, e.event, false,
             {e.covariates[static_cast<std::size_t>(schema.index("sex"))],
              e.covariates[static_cast<std::size_t>(schema.index("alcohol"))],
              e.covariates[static_cast<std::size_t>(schema.index("obesity"))],
              e.covariates[static_cast<std::size_t>(schema.index("smoking"))]}});
    return fit_cox_model(narrow, spec);
}

} // namespace

TEST_CASE("profile curves: lowest-female equals the reference prediction") {
    const CoxModel model = behaviors_model(17, 12000);
    const auto profiles = standard_profiles();
    CHECK(profiles.size() == 14);
    const auto curves = profile_curves(model, profiles, 100.0);

    const StepSurvival reference = predict_survival(model, {0, 0, 0, 0}, 50.0, 100.0);
    const ProfileCurves& lowest_f = curves[0];
    REQUIRE(lowest_f.profile.level == RiskProfile::Level::lowest);
    REQUIRE(lowest_f.profile.sex == 'F');
    REQUIRE(lowest_f.survival.size() == reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i)
        CHECK(lowest_f.survival.values[i] == doctest::Approx(reference.values[i]));

    // with positive planted effects, every Highest curve sits below the
    // Intermediate curve sharing one of its behaviors at age 50+
    for (const auto& high : curves) {
        if (high.profile.level != RiskProfile::Level::highest) continue;
        for (const auto& mid : curves) {
            if (mid.profile.level != RiskProfile::Level::intermediate) continue;
            if (mid.profile.sex != high.profile.sex) continue;
            const std::string& shared = mid.profile.behaviors[0];
            if (std::find(high.profile.behaviors.begin(), high.profile.behaviors.end(),
                          shared) == high.profile.behaviors.end())
                continue;
            const double age = high.survival.times.empty() ? 51.0 : high.survival.times.front();
            CHECK(high.survival.at(age + 1.0) <= mid.survival.at(age + 1.0) + 1e-12);
            CHECK(high.disfle.values.front() <= mid.disfle.values.front() + 1e-12);
        }
    }
}

TEST_CASE("risk profile validation") {
    RiskProfile bad{RiskProfile::Level::highest, 'F', {"alcohol"}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    RiskProfile good{RiskProfile::Level::intermediate, 'M', {"smoking"}};
    CHECK_NOTHROW(good.validate());
    CHECK(good.label() == "Intermediate M smoking");
}

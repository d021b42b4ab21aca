#include "disfle/cox.hpp"
#include "disfle/errors.hpp"
#include "disfle/km.hpp"
#include "disfle/validation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace disfle;

namespace {

// one binary covariate, constant coefficient
DesignMatrix binary_design(const ExposureSet& exposures) {
    EpisodeSet episodes;
    episodes.schema = exposures.schema;
    for (const auto& e : exposures.rows)
        episodes.rows.push_back({e.subject_id, e.entry_age, e.exit_age, e.event, e.covariates});

    ModelSpec spec;
    TermSpec term;
    term.name = exposures.schema.names[0];
    term.age_dependent = false;
    term.levels = {0.0, 1.0};
    term.level_labels = {"0", "1"};
    spec.terms.push_back(term);

    const NaturalSplineBasis basis(50.0, 100.0, {70.0});
    return build_design(episodes, spec, basis);
}

SyntheticConfig two_group_config(std::size_t n, double log_hr, std::uint64_t seed) {
    SyntheticConfig config;
    config.n = n;
    config.seed = seed;
    config.hazard_rates = {0.08};
    config.covariates = {{"smoking",
                          {0.5, 0.5},
                          {EffectSchedule::zero(), EffectSchedule::constant(log_hr)}}};
    return config;
}

ExposureSet restrict_schema(const ExposureSet& set, const std::string& name) {
    ExposureSet out;
    out.schema = {{name}};
    const int idx = set.schema.index(name);
    for (const auto& e : set.rows)
        out.rows.push_back({e.subject_id, e.entry_age, e.exit_age, e.event, e.synthetic,
                            {e.covariates[static_cast<std::size_t>(idx)]}});
    return out;
}

} // namespace

TEST_CASE("balanced two-group data with tied event multisets gives beta = 0") {
    ExposureSet set;
    set.schema = {{"group"}};
    std::int64_t id = 1;
    for (double t : {1.0, 2.0, 3.0, 4.0}) {
        set.rows.push_back({id++, 0.0, t, true, false, {0.0}});
        set.rows.push_back({id++, 0.0, t, true, false, {1.0}});
    }
    const CoxFit fit = fit_cox(binary_design(set));
    REQUIRE(fit.beta.size() == 1);
    CHECK(std::fabs(fit.beta[0]) < 1e-8);
}

TEST_CASE("score and information match finite differences (both kernels)") {
    for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
        ExposureSet cohort = oracles::random_cohort(seed, 120);
        const DesignMatrix design = binary_design(cohort);
        const CoxProblem problem(design);
        for (bool parallel : {false, true}) {
            for (double b : {0.0, 0.4}) {
                Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, b);
                const auto value = problem.eval(beta, parallel);
                const Eigen::VectorXd fd = oracles::fd_score(problem, beta, 1e-5, parallel);
                const Eigen::MatrixXd fdi =
                    oracles::fd_information(problem, beta, 1e-5, parallel);
                CHECK(std::fabs(value.score[0] - fd[0]) /
                          std::max(1.0, std::fabs(fd[0])) < 1e-5);
                CHECK(std::fabs(value.information(0, 0) - fdi(0, 0)) /
                          std::max(1.0, std::fabs(fdi(0, 0))) < 1e-5);
            }
        }
    }
}

TEST_CASE("serial and parallel kernels agree") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(3000, std::log(2.0), 21));
    const DesignMatrix design = binary_design(restrict_schema(cohort.exposures, "smoking"));
    const CoxProblem problem(design);
    Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.31);
    const auto serial = problem.eval_serial(beta);
    const auto parallel = problem.eval_parallel(beta);
    CHECK(std::fabs(serial.loglik - parallel.loglik) / std::fabs(serial.loglik) < 1e-12);
    CHECK(std::fabs(serial.score[0] - parallel.score[0]) <
          1e-9 * std::max(1.0, std::fabs(serial.score[0])));
    CHECK(std::fabs(serial.information(0, 0) - parallel.information(0, 0)) /
              serial.information(0, 0) < 1e-12);
}

TEST_CASE("parameter recovery: true hazard ratio 2 on a synthetic cohort") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(20000, std::log(2.0), 31));
    const DesignMatrix design = binary_design(restrict_schema(cohort.exposures, "smoking"));
    const CoxFit fit = fit_cox(design);
    CHECK(std::fabs(fit.beta[0] - std::log(2.0)) < 0.05);
    CHECK(fit.convergence.converged);
    CHECK(fit.convergence.iterations <= 10);
}

TEST_CASE("constant-coefficient fit is invariant under episode splitting") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(2000, 0.5, 41));
    const ExposureSet narrow = restrict_schema(cohort.exposures, "smoking");

    const DesignMatrix unsplit = binary_design(narrow);
    std::vector<double> grid;
    for (double a = 50; a <= 100; a += 2) grid.push_back(a);
    ExposureSet as_exposures = narrow;
    EpisodeSet split = split_episodes(as_exposures, grid);
    ExposureSet split_view;
    split_view.schema = narrow.schema;
    for (const auto& e : split.rows)
        split_view.rows.push_back({e.subject_id, e.start_age, e.stop_age, e.event, false,
                                   e.covariates});
    const DesignMatrix split_design = binary_design(split_view);

    const CoxFit a = fit_cox(unsplit);
    const CoxFit b = fit_cox(split_design);
    CHECK(std::fabs(a.beta[0] - b.beta[0]) < 1e-10);
}

TEST_CASE("breslow baseline: hand Nelson-Aalen at the null model") {
    ExposureSet set;
    set.schema = {{"group"}};
    // events at ages 1 and 2 with risk sets 3 then 2
    set.rows.push_back({1, 0.0, 1.0, true, false, {0.0}});
    set.rows.push_back({2, 0.0, 2.0, true, false, {0.0}});
    set.rows.push_back({3, 0.0, 2.5, false, false, {0.0}});

    EpisodeSet episodes;
    episodes.schema = set.schema;
    for (const auto& e : set.rows)
        episodes.rows.push_back({e.subject_id, e.entry_age, e.exit_age, e.event, e.covariates});
    ModelSpec empty_spec; // no terms: null model
    const NaturalSplineBasis basis(50.0, 100.0, {70.0});
    const DesignMatrix design = build_design(episodes, empty_spec, basis);
    const CoxFit fit = fit_cox(design);

    REQUIRE(fit.baseline.size() == 2);
    CHECK(fit.baseline.cumulative[0] == doctest::Approx(1.0 / 3.0));
    CHECK(fit.baseline.cumulative[1] == doctest::Approx(1.0 / 3.0 + 1.0 / 2.0));

    // equals the independent Nelson-Aalen implementation exactly
    const StepCumHazard oracle = oracles::nelson_aalen_reference(set.rows);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(fit.baseline.times[i] == oracle.times[i]);
        CHECK(fit.baseline.increments[i] == oracle.increments[i]);
    }
}

TEST_CASE("baseline scaling identity: shifting a constant column halves increments") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(800, 0.4, 51));
    ExposureSet narrow = restrict_schema(cohort.exposures, "smoking");
    const DesignMatrix design = binary_design(narrow);
    const CoxFit fit = fit_cox(design);

    // add ln2 / beta to every covariate so each exp(x beta) doubles: with the
    // coefficient frozen, increments halve
    CoxProblem problem(design);
    const Eigen::VectorXd denom_before = problem.risk_denominators(fit.beta);
    const double shift_target = std::log(2.0);
    // shift the raw design column so every exp(x beta) doubles at frozen beta
    DesignMatrix shifted_design = design;
    for (std::size_t r = 0; r < shifted_design.n_rows; ++r)
        shifted_design.values[r] += shift_target / fit.beta[0];
    CoxFit frozen = fit;
    const CoxProblem shifted_problem(shifted_design);
    const Eigen::VectorXd denom_after = shifted_problem.risk_denominators(frozen.beta);
    const double scale_before = std::exp(-problem.mean_shift(fit.beta));
    const double scale_after = std::exp(-shifted_problem.mean_shift(frozen.beta));
    for (Eigen::Index e = 0; e < denom_before.size(); ++e) {
        const double inc_before = scale_before / denom_before[e];
        const double inc_after = scale_after / denom_after[e];
        CHECK(inc_after == doctest::Approx(inc_before / 2.0).epsilon(1e-10));
    }
}

TEST_CASE("column shift invariance: centered fits are unchanged") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(1500, 0.6, 61));
    const ExposureSet narrow = restrict_schema(cohort.exposures, "smoking");
    const DesignMatrix design = binary_design(narrow);
    DesignMatrix shifted = design;
    for (std::size_t r = 0; r < shifted.n_rows; ++r)
        shifted.values[r * shifted.n_cols()] += 5.0;

    const CoxFit a = fit_cox(design);
    const CoxFit b = fit_cox(shifted);
    CHECK(std::fabs(a.beta[0] - b.beta[0]) < 1e-8);
}

TEST_CASE("log partial likelihood is non-decreasing across accepted steps") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(1000, 1.2, 71));
    const DesignMatrix design = binary_design(restrict_schema(cohort.exposures, "smoking"));
    const CoxProblem problem(design);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
    double previous = problem.eval(beta, true).loglik;
    const CoxFit fit = fit_cox(design);
    for (const auto& line : fit.convergence.trace) {
        const auto pos = line.find("loglik ");
        REQUIRE(pos != std::string::npos);
        const double value = std::stod(line.substr(pos + 7));
        CHECK(value >= previous - 1e-9 * std::fabs(previous));
        previous = value;
    }
}

TEST_CASE("predicted survival: reference equals exp(-baseline), ln2 shift squares it") {
    SyntheticConfig config = two_group_config(4000, std::log(2.0), 81);
    const SyntheticCohort cohort = generate_synthetic(config);
    ExposureSet narrow = restrict_schema(cohort.exposures, "smoking");

    ModelSpec spec;
    TermSpec term;
    term.name = "smoking";
    term.age_dependent = false;
    term.levels = {0.0, 1.0};
    term.level_labels = {"0", "1"};
    spec.terms.push_back(term);
    spec.interior_knots = {70.0};
    const CoxModel model = fit_cox_model(narrow, spec);

    const StepSurvival reference = predict_survival(model, {0.0}, 0.0, 200.0);
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double expected = std::exp(-model.fit.baseline.cumulative[i]);
        CHECK(reference.values[i] == doctest::Approx(expected).epsilon(1e-12));
    }

    // a profile with constant linear predictor raises the curve to exp(lp)
    const double lp = model.fit.beta[0];
    const StepSurvival risky = predict_survival(model, {1.0}, 0.0, 200.0);
    for (std::size_t i = 0; i < risky.size(); ++i) {
        const double expected = std::pow(reference.values[i], std::exp(lp));
        CHECK(risky.values[i] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("predicted two-group curves stay near group KM curves") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(20000, std::log(2.0), 91));
    ExposureSet narrow = restrict_schema(cohort.exposures, "smoking");

    ModelSpec spec;
    TermSpec term;
    term.name = "smoking";
    term.age_dependent = false;
    term.levels = {0.0, 1.0};
    term.level_labels = {"0", "1"};
    spec.terms.push_back(term);
    spec.interior_knots = {70.0};
    const CoxModel model = fit_cox_model(narrow, spec);

    for (double level : {0.0, 1.0}) {
        ExposureSet group;
        group.schema = narrow.schema;
        for (const auto& e : narrow.rows)
            if (e.covariates[0] == level) group.rows.push_back(e);
        const StepSurvival km = fit_km(group).curve;
        const StepSurvival cox = predict_survival(model, {level}, 0.0, 200.0);
        double max_gap = 0.0;
        for (std::size_t i = 0; i < km.size(); ++i)
            max_gap = std::max(max_gap, std::fabs(km.values[i] - cox.at(km.times[i])));
        CHECK(max_gap < 0.03);
    }
}

TEST_CASE("error paths: divergence, singularity, missing events") {
    // complete separation: the group indicator perfectly predicts event order
    ExposureSet separated;
    separated.schema = {{"group"}};
    for (int i = 0; i < 12; ++i)
        separated.rows.push_back({i + 1, 0.0, 1.0 + i * 0.1, true, false,
                                  {i < 6 ? 1.0 : 0.0}});
    CHECK_THROWS_WITH_AS(fit_cox(binary_design(separated)) /* diverges */,
                         doctest::Contains("group"), DataError);

    // duplicated column makes the information singular
    const ExposureSet cohort = oracles::random_cohort(101, 80);
    DesignMatrix design = binary_design(cohort);
    DesignMatrix doubled = design;
    doubled.columns.push_back({"group=1:copy", "group", 1, -1, false});
    doubled.values.clear();
    for (std::size_t r = 0; r < design.n_rows; ++r) {
        doubled.values.push_back(design.values[r]);
        doubled.values.push_back(design.values[r]);
    }
    CHECK_THROWS_WITH_AS(fit_cox(doubled), doctest::Contains("singular"), DataError);

    // no events at all
    ExposureSet censored_only;
    censored_only.schema = {{"group"}};
    censored_only.rows.push_back({1, 0.0, 1.0, false, false, {1.0}});
    CHECK_THROWS_AS(fit_cox(binary_design(censored_only)), DataError);
}

TEST_CASE("hazard ratio curves: flat for constant terms, unit when zeroed") {
    const SyntheticCohort cohort = generate_synthetic(two_group_config(2500, 0.7, 111));
    ExposureSet narrow = restrict_schema(cohort.exposures, "smoking");

    ModelSpec spec;
    TermSpec term;
    term.name = "smoking";
    term.age_dependent = false;
    term.levels = {0.0, 1.0};
    term.level_labels = {"0", "1"};
    spec.terms.push_back(term);
    spec.interior_knots = {70.0};
    CoxModel model = fit_cox_model(narrow, spec);

    const std::vector<double> ages{55, 65, 75, 85};
    const HazardRatioCurve curve = hazard_ratio_curve(model, "smoking", "1", ages);
    const double expected = std::exp(model.fit.beta[0]);
    for (std::size_t i = 0; i < ages.size(); ++i) {
        CHECK(curve.ratio[i] == doctest::Approx(expected));
        CHECK(curve.lower[i] <= curve.ratio[i]);
        CHECK(curve.upper[i] >= curve.ratio[i]);
        CHECK(curve.ratio[i] > 0.0);
    }

    // zeroed coefficient block: ratio identically 1 with the band containing 1
    CoxModel zeroed = model;
    zeroed.fit.beta[0] = 0.0;
    const HazardRatioCurve unit = hazard_ratio_curve(zeroed, "smoking", "1", ages);
    for (std::size_t i = 0; i < ages.size(); ++i) {
        CHECK(unit.ratio[i] == 1.0);
        CHECK(unit.lower[i] <= 1.0);
        CHECK(unit.upper[i] >= 1.0);
    }
}

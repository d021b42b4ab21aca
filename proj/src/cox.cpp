#include "disfle/cox.hpp"

#include "disfle/errors.hpp"
#include "disfle/km.hpp" // normal_quantile_two_sided

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace disfle {

double CoxFit::coefficient(std::size_t design_column) const {
    const int idx = active_index[design_column];
    return idx < 0 ? 0.0 : beta[idx];
}

double CoxFit::linear_predictor(const std::vector<double>& row) const {
    double lp = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c)
        if (row[c] != 0.0) lp += row[c] * coefficient(c);
    return lp;
}

namespace {

std::vector<std::string> dependent_column_set(const CoxProblem& problem,
                                              const Eigen::MatrixXd& information,
                                              const std::vector<DesignColumn>& columns) {
    // rank-revealing factorization to name a set of linearly dependent columns
    Eigen::FullPivLU<Eigen::MatrixXd> lu(information);
    lu.setThreshold(1e-10);
    const auto rank = lu.rank();
    std::vector<std::string> names;
    const auto perm = lu.permutationQ();
    for (Eigen::Index i = rank; i < information.cols(); ++i)
        names.push_back(columns[problem.active_columns()[perm.indices()[i]]].label);
    return names;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
    }
    return out;
}

} // namespace

CoxFit fit_cox(const DesignMatrix& design, const CoxOptions& options) {
    CoxProblem problem(design);
    const auto p = static_cast<Eigen::Index>(problem.n_params());

    CoxFit fit;
    fit.columns = design.columns;
    fit.active = problem.active_columns();
    fit.active_index.assign(design.n_cols(), -1);
    for (std::size_t i = 0; i < fit.active.size(); ++i)
        fit.active_index[fit.active[i]] = static_cast<int>(i);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    CoxProblem::Value current = problem.eval(beta, options.parallel);

    bool converged = p == 0;
    int iteration = 0;
    for (; iteration < options.max_iterations && !converged; ++iteration) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(current.information);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            (p > 0 && ldlt.vectorD().minCoeff() <=
                          1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))) {
            const auto dependent = dependent_column_set(problem, current.information, fit.columns);
            throw DataError("singular information matrix; dependent columns: " +
                            join(dependent));
        }
        const Eigen::VectorXd direction = ldlt.solve(current.score);

        double step = 1.0;
        Eigen::VectorXd candidate;
        CoxProblem::Value next;
        int halvings = 0;
        for (;; ++halvings) {
            candidate = beta + step * direction;
            next = problem.eval(candidate, options.parallel);
            if (next.loglik >= current.loglik || halvings >= options.max_step_halvings) break;
            step *= 0.5;
        }
        if (next.loglik < current.loglik)
            throw DataError("Cox fit: log partial likelihood failed to increase at iteration " +
                            std::to_string(iteration + 1));

        for (Eigen::Index j = 0; j < p; ++j)
            if (std::fabs(candidate[j]) > options.divergence_bound)
                throw DataError("Cox fit: coefficient diverging (monotone likelihood?): " +
                                fit.columns[fit.active[static_cast<std::size_t>(j)]].label);

        const double rel_change = std::fabs(next.loglik - current.loglik) /
                                  std::max(1.0, std::fabs(next.loglik));
        const double score_max = p > 0 ? next.score.cwiseAbs().maxCoeff() : 0.0;
        {
            char line[160];
            std::snprintf(line, sizeof(line),
                          "iter %d: loglik %.10g, score max %.3e, step %.4g", iteration + 1,
                          next.loglik, score_max, step);
            fit.convergence.trace.emplace_back(line);
        }
        beta = candidate;
        current = next;
        if (rel_change < options.loglik_rel_tol || score_max < options.score_tol)
            converged = true;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "Cox fit did not converge after " << options.max_iterations << " iterations\n";
        for (const auto& line : fit.convergence.trace) msg << "  " << line << "\n";
        throw DataError(msg.str());
    }

    fit.beta = beta;
    fit.convergence.iterations = iteration;
    fit.convergence.final_loglik = current.loglik;
    fit.convergence.score_max = p > 0 ? current.score.cwiseAbs().maxCoeff() : 0.0;
    fit.convergence.converged = true;

    if (p > 0) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(current.information);
        fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    } else {
        fit.covariance.resize(0, 0);
    }
    fit.baseline = breslow_baseline(fit, design, options);
    return fit;
}

StepCumHazard breslow_baseline(const CoxFit& fit, const DesignMatrix& design,
                               const CoxOptions& options) {
    (void)options;
    CoxProblem problem(design);
    if (fit.active.size() != problem.n_params())
        throw DataError("breslow_baseline: fit does not match the design");
    const Eigen::VectorXd s0 = problem.risk_denominators(fit.beta);
    // centered sweep: scale back so the baseline is anchored at the
    // all-reference profile (every covariate column equal to zero)
    const double scale = std::exp(-problem.mean_shift(fit.beta));

    StepCumHazard out;
    const auto& ages = problem.event_ages();
    const auto& counts = problem.event_counts();
    out.times = ages;
    out.increments.resize(ages.size());
    out.cumulative.resize(ages.size());
    double running = 0.0;
    for (std::size_t e = 0; e < ages.size(); ++e) {
        out.increments[e] = counts[e] / (s0[static_cast<Eigen::Index>(e)]) * scale;
        running += out.increments[e];
        out.cumulative[e] = running;
    }
    return out;
}

// --- model-level API ----------------------------------------------------------

CoxModel fit_cox_model(const ExposureSet& exposures, const ModelSpec& spec,
                       const CoxOptions& options) {
    for (const auto& row : exposures.rows)
        if (row.synthetic)
            throw ConfigError("the Cox pipeline rejects whole-population-adjusted exposures; "
                              "the adjustment applies to sex-stratified KM only");
    spec.validate(exposures.schema);

    std::vector<double> interior = spec.interior_knots;
    NaturalSplineBasis basis =
        interior.empty()
            ? [&] {
                  std::vector<double> event_ages;
                  for (const auto& r : exposures.rows)
                      if (r.event) event_ages.push_back(r.exit_age);
                  return NaturalSplineBasis::from_quantiles(spec.grid_start, spec.grid_stop,
                                                            event_ages, spec.df);
              }()
            : NaturalSplineBasis(spec.grid_start, spec.grid_stop, interior);

    const EpisodeSet episodes = split_episodes(exposures, spec.grid());
    const DesignMatrix design = build_design(episodes, spec, basis);
    CoxFit fit = fit_cox(design, options);
    return CoxModel{spec, std::move(basis), exposures.schema, std::move(fit)};
}

namespace {

// grid cell start containing age (step-function semantics)
double cell_start(const std::vector<double>& grid, double age) {
    auto it = std::upper_bound(grid.begin(), grid.end(), age);
    if (it == grid.begin()) return grid.front();
    return *(it - 1);
}

} // namespace

StepSurvival predict_survival(const CoxModel& model, const std::vector<double>& covariates,
                              double from_age, double to_age) {
    const std::vector<double> grid = model.grid();
    // linear predictor per grid cell, profile validated against dropped levels
    std::map<double, double> lp_by_cell;
    for (double g : grid) {
        const std::vector<double> row =
            profile_row(model.spec, model.basis, model.schema, covariates, g,
                        &model.fit.columns);
        lp_by_cell[g] = model.fit.linear_predictor(row);
    }

    StepSurvival out;
    double cumulative = 0.0;
    const auto& baseline = model.fit.baseline;
    for (std::size_t e = 0; e < baseline.times.size(); ++e) {
        const double t = baseline.times[e];
        if (t <= from_age || t > to_age) continue;
        const double lp = lp_by_cell[cell_start(grid, t)];
        cumulative += std::exp(lp) * baseline.increments[e];
        out.times.push_back(t);
        out.values.push_back(std::exp(-cumulative));
    }
    return out;
}

namespace {

struct LinearCombination {
    // weight per coefficient (active index), sparse
    std::vector<std::pair<int, double>> weights;

    void add(int active_index, double w) {
        if (active_index >= 0 && w != 0.0) weights.emplace_back(active_index, w);
    }
    double value(const Eigen::VectorXd& beta) const {
        double v = 0.0;
        for (auto [i, w] : weights) v += w * beta[i];
        return v;
    }
    double variance(const Eigen::MatrixXd& cov) const {
        double v = 0.0;
        for (auto [i, wi] : weights)
            for (auto [j, wj] : weights) v += wi * wj * cov(i, j);
        return v;
    }
};

const TermSpec& require_term(const ModelSpec& spec, const std::string& term) {
    const TermSpec* t = spec.find_term(term);
    if (!t) throw DataError("no such model term: " + term);
    return *t;
}

std::size_t require_level(const TermSpec& term, const std::string& label) {
    for (std::size_t i = 0; i < term.level_labels.size(); ++i)
        if (term.level_labels[i] == label) return i;
    throw DataError("term '" + term.name + "' has no level '" + label + "'");
}

// linear combination expressing log HR of (term, level) at a given age
LinearCombination term_combination(const CoxModel& model, const TermSpec& term,
                                   std::size_t level_index, double age) {
    LinearCombination lc;
    const CoxFit& fit = model.fit;
    if (term.age_dependent) {
        const Eigen::VectorXd b = model.basis.eval(age);
        for (std::size_t c = 0; c < fit.columns.size(); ++c) {
            const DesignColumn& col = fit.columns[c];
            if (col.term == term.name && col.level_index == static_cast<int>(level_index))
                lc.add(fit.active_index[c], b[col.basis_index]);
        }
    } else {
        for (std::size_t c = 0; c < fit.columns.size(); ++c) {
            const DesignColumn& col = fit.columns[c];
            if (col.term == term.name && col.level_index == static_cast<int>(level_index))
                lc.add(fit.active_index[c], 1.0);
        }
    }
    return lc;
}

HazardRatioCurve curve_from_combinations(const CoxModel& model, const std::string& label,
                                         const std::vector<double>& ages,
                                         const std::vector<LinearCombination>& combos,
                                         double level) {
    const double z = normal_quantile_two_sided(level);
    HazardRatioCurve out;
    out.label = label;
    out.ages = ages;
    for (std::size_t i = 0; i < ages.size(); ++i) {
        const double lc = combos[i].value(model.fit.beta);
        const double se = std::sqrt(std::max(0.0, combos[i].variance(model.fit.covariance)));
        out.ratio.push_back(std::exp(lc));
        out.lower.push_back(std::exp(lc - z * se));
        out.upper.push_back(std::exp(lc + z * se));
    }
    return out;
}

} // namespace

HazardRatioCurve hazard_ratio_curve(const CoxModel& model, const std::string& term,
                                    const std::string& level_label,
                                    const std::vector<double>& ages, double level) {
    const TermSpec& t = require_term(model.spec, term);
    const std::size_t lv = require_level(t, level_label);
    std::vector<LinearCombination> combos;
    combos.reserve(ages.size());
    for (double a : ages) combos.push_back(term_combination(model, t, lv, a));
    return curve_from_combinations(model, term + "=" + level_label, ages, combos, level);
}

HazardRatioCurve combined_effect(const CoxModel& model, const std::string& term_a,
                                 const std::string& level_a, const std::string& term_b,
                                 const std::string& level_b, const std::vector<double>& ages,
                                 bool with_interaction, double level) {
    const TermSpec& ta = require_term(model.spec, term_a);
    const TermSpec& tb = require_term(model.spec, term_b);
    const std::size_t la = require_level(ta, level_a);
    const std::size_t lb = require_level(tb, level_b);

    int interaction_column = -1;
    if (with_interaction) {
        const std::string label_ab =
            term_a + "=" + level_a + "*" + term_b + "=" + level_b;
        const std::string label_ba =
            term_b + "=" + level_b + "*" + term_a + "=" + level_a;
        for (std::size_t c = 0; c < model.fit.columns.size(); ++c)
            if (model.fit.columns[c].label == label_ab || model.fit.columns[c].label == label_ba)
                interaction_column = static_cast<int>(c);
        if (interaction_column < 0)
            throw DataError("model has no interaction term " + term_a + "*" + term_b);
    }

    std::vector<LinearCombination> combos;
    combos.reserve(ages.size());
    for (double age : ages) {
        LinearCombination lc = term_combination(model, ta, la, age);
        const LinearCombination lcb = term_combination(model, tb, lb, age);
        for (auto [i, w] : lcb.weights) lc.add(i, w);
        if (interaction_column >= 0)
            lc.add(model.fit.active_index[static_cast<std::size_t>(interaction_column)], 1.0);
        combos.push_back(std::move(lc));
    }
    const std::string label = term_a + "=" + level_a + " x " + term_b + "=" + level_b +
                              (with_interaction ? " (with interaction)" : " (no interaction)");
    return curve_from_combinations(model, label, ages, combos, level);
}

std::vector<std::pair<std::int64_t, double>> subject_mean_linear_predictors(
    const CoxFit& fit, const DesignMatrix& design) {
    std::map<std::int64_t, std::pair<double, std::size_t>> sums;
    const std::size_t p = design.n_cols();
    for (std::size_t r = 0; r < design.n_rows; ++r) {
        double lp = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            const double v = design.values[r * p + c];
            if (v != 0.0) lp += v * fit.coefficient(c);
        }
        auto& acc = sums[design.subject_id[r]];
        acc.first += lp;
        acc.second += 1;
    }
    std::vector<std::pair<std::int64_t, double>> out;
    out.reserve(sums.size());
    for (const auto& [id, acc] : sums)
        out.emplace_back(id, acc.first / static_cast<double>(acc.second));
    return out;
}

} // namespace disfle

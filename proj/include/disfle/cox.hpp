#pragma once

#include "disfle/cox_kernels.hpp"
#include "disfle/step_function.hpp"
#include "disfle/survival.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace disfle {

struct CoxOptions {
    int max_iterations = 25;
    double loglik_rel_tol = 1e-9;
    double score_tol = 1e-6;      // max-norm of the score at convergence
    double divergence_bound = 15.0; // |beta_j| beyond this flags monotone likelihood
    int max_step_halvings = 30;
    bool parallel = true; // OpenMP kernel; the serial sweep is the test reference
};

struct ConvergenceRecord {
    int iterations = 0;
    double final_loglik = 0.0;
    double score_max = 0.0;
    bool converged = false;
    std::vector<std::string> trace; // one line per Newton step
};

/// Fitted Cox model: coefficients over the active (non-dropped) columns,
/// covariance from the inverse observed information, and the Breslow
/// cumulative baseline anchored at the all-reference profile.
struct CoxFit {
    std::vector<DesignColumn> columns; // full design layout incl. dropped flags
    std::vector<std::size_t> active;   // design column index per coefficient
    std::vector<int> active_index;     // design column -> coefficient index or -1
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
    ConvergenceRecord convergence;
    StepCumHazard baseline;

    /// Coefficient for a design column, 0 for reference/dropped columns.
    double coefficient(std::size_t design_column) const;
    /// Linear predictor of a full-width design row.
    double linear_predictor(const std::vector<double>& row) const;
};

/// Newton-Raphson with step-halving on the Breslow partial likelihood.
/// Throws DataError on monotone likelihood (naming the diverging column),
/// singular information (listing a dependent column set) or non-convergence.
CoxFit fit_cox(const DesignMatrix& design, const CoxOptions& options = {});

/// Breslow cumulative baseline hazard: increment d_e / sum_{at risk} exp(x b)
/// at each event age. With all beta = 0 this is the Nelson-Aalen estimator.
StepCumHazard breslow_baseline(const CoxFit& fit, const DesignMatrix& design,
                               const CoxOptions& options = {});

// --- model-level wrapper ------------------------------------------------------

/// Bundles the fit with the model spec, spline basis and covariate schema so
/// predictions can be made from covariate profiles.
struct CoxModel {
    ModelSpec spec;
    NaturalSplineBasis basis;
    CovariateSchema schema;
    CoxFit fit;

    std::vector<double> grid() const { return spec.grid(); }
};

/// Resolves the spline basis (configured knots, or event-age quantiles) and
/// fits the model on split episodes. Rejects exposure sets containing
/// synthetic adjustment records.
CoxModel fit_cox_model(const ExposureSet& exposures, const ModelSpec& spec,
                       const CoxOptions& options = {});

/// Model survival curve for a covariate profile. Age-dependent terms use the
/// basis at the grid cell containing each baseline step (step-function
/// semantics). `from_age` conditions the curve on survival to that age.
StepSurvival predict_survival(const CoxModel& model, const std::vector<double>& covariates,
                              double from_age, double to_age);

struct HazardRatioCurve {
    std::string label;
    std::vector<double> ages;
    std::vector<double> ratio;
    std::vector<double> lower;
    std::vector<double> upper;
};

/// e^{beta(t)} for one term level over the given ages with pointwise Wald
/// bands; constant terms give a flat curve.
HazardRatioCurve hazard_ratio_curve(const CoxModel& model, const std::string& term,
                                    const std::string& level_label,
                                    const std::vector<double>& ages, double level = 0.95);

/// Product of two main-effect curves, optionally multiplied by the constant
/// interaction offset; band via Wald on the summed linear combination.
HazardRatioCurve combined_effect(const CoxModel& model, const std::string& term_a,
                                 const std::string& level_a, const std::string& term_b,
                                 const std::string& level_b, const std::vector<double>& ages,
                                 bool with_interaction, double level = 0.95);

/// Per-episode linear predictors averaged per subject (used by validation).
std::vector<std::pair<std::int64_t, double>> subject_mean_linear_predictors(
    const CoxFit& fit, const DesignMatrix& design);

} // namespace disfle
